#include "arlb/config_space.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "arlb/rng.hpp"
#include "arlb/sobol.hpp"

namespace arlb {

std::string algo_name(Algo algo) {
    switch (algo) {
        case Algo::Ppo: return "ppo";
        case Algo::Dqn: return "dqn";
        case Algo::Sac: return "sac";
    }
    return "?";
}

Algo algo_from_name(const std::string& name) {
    if (name == "ppo") return Algo::Ppo;
    if (name == "dqn") return Algo::Dqn;
    if (name == "sac") return Algo::Sac;
    throw ConfigError("unknown algorithm '" + name + "' (known: ppo, dqn, sac)");
}

std::string domain_name(Domain domain) {
    return domain == Domain::ClassicControl ? "classic-control" : "gridworld";
}

Domain domain_from_name(const std::string& name) {
    if (name == "classic-control") return Domain::ClassicControl;
    if (name == "gridworld") return Domain::Gridworld;
    throw ConfigError("unknown domain '" + name + "' (known: classic-control, gridworld)");
}

std::string hp_to_string(const HpValue& value) {
    if (std::holds_alternative<bool>(value)) return std::get<bool>(value) ? "true" : "false";
    if (std::holds_alternative<long>(value)) return std::to_string(std::get<long>(value));
    if (std::holds_alternative<double>(value)) {
        char buf[32];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), std::get<double>(value));
        return std::string(buf, ptr);
    }
    return std::get<std::string>(value);
}

bool hp_equal(const HpValue& a, const HpValue& b) { return a == b; }

double hp_as_double(const HpValue& value) {
    if (std::holds_alternative<bool>(value)) return std::get<bool>(value) ? 1.0 : 0.0;
    if (std::holds_alternative<long>(value)) return static_cast<double>(std::get<long>(value));
    if (std::holds_alternative<double>(value)) return std::get<double>(value);
    throw ConfigError("hyperparameter value '" + std::get<std::string>(value) + "' is not numeric");
}

double Configuration::f(const std::string& name) const { return hp_as_double(at(name)); }

long Configuration::i(const std::string& name) const {
    const HpValue& v = at(name);
    if (std::holds_alternative<long>(v)) return std::get<long>(v);
    return static_cast<long>(std::llround(hp_as_double(v)));
}

bool Configuration::b(const std::string& name) const {
    const HpValue& v = at(name);
    if (std::holds_alternative<bool>(v)) return std::get<bool>(v);
    throw ConfigError("hyperparameter '" + name + "' is not boolean");
}

const HpValue& Configuration::at(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw ConfigError("hyperparameter '" + name + "' not present in configuration");
    return it->second;
}

std::uint64_t config_hash(const Configuration& config) {
    std::uint64_t h = hash_str(config.space_id);
    for (const auto& [name, value] : config.values)
        h = mix64(h ^ hash_str(name) ^ hash_str(hp_to_string(value)));
    return h;
}

const HyperparameterDef* ConfigurationSpace::find(const std::string& name) const {
    for (const auto& def : defs)
        if (def.name == name) return &def;
    return nullptr;
}

bool ConfigurationSpace::active(const std::map<std::string, HpValue>& values, const HyperparameterDef& def) const {
    if (!def.condition) return true;
    const auto* parent = find(def.condition->parent);
    if (parent == nullptr) return false;
    if (!active(values, *parent)) return false;
    auto it = values.find(parent->name);
    return it != values.end() && hp_equal(it->second, def.condition->value);
}

Configuration ConfigurationSpace::default_config() const {
    Configuration config;
    config.space_id = id;
    for (const auto& def : defs) {
        if (!active(config.values, def)) continue;
        auto it = defaults.find(def.name);
        if (it == defaults.end()) throw ConfigError("space '" + id + "' has no default for '" + def.name + "'");
        config.values[def.name] = it->second;
    }
    return config;
}

const HpValue& ConfigurationSpace::value_of(const Configuration& config, const std::string& name) const {
    auto it = config.values.find(name);
    if (it != config.values.end()) return it->second;
    auto fit = fixed.find(name);
    if (fit != fixed.end()) return fit->second;
    throw ConfigError("'" + name + "' is neither configured nor fixed in space '" + id + "'");
}

long ConfigurationSpace::int_of(const Configuration& config, const std::string& name) const {
    return static_cast<long>(std::llround(hp_as_double(value_of(config, name))));
}

double ConfigurationSpace::float_of(const Configuration& config, const std::string& name) const {
    return hp_as_double(value_of(config, name));
}

bool ConfigurationSpace::bool_of(const Configuration& config, const std::string& name) const {
    const HpValue& v = value_of(config, name);
    if (!std::holds_alternative<bool>(v)) throw ConfigError("'" + name + "' is not boolean");
    return std::get<bool>(v);
}

void ConfigurationSpace::check() const {
    std::set<std::string> seen;
    for (std::size_t idx = 0; idx < defs.size(); ++idx) {
        const auto& def = defs[idx];
        if (!seen.insert(def.name).second) throw ConfigError("duplicate hyperparameter '" + def.name + "'");
        switch (def.kind) {
            case HyperparameterDef::Kind::Float:
                if (!(def.lo < def.hi)) throw ConfigError("'" + def.name + "': lo must be < hi");
                if (def.log_scale && def.lo <= 0.0)
                    throw ConfigError("'" + def.name + "': log10 scale requires lo > 0");
                break;
            case HyperparameterDef::Kind::Int:
                if (!(def.ilo < def.ihi)) throw ConfigError("'" + def.name + "': lo must be < hi");
                break;
            case HyperparameterDef::Kind::Categorical:
                if (def.choices.empty()) throw ConfigError("'" + def.name + "': no choices");
                break;
            case HyperparameterDef::Kind::Boolean: break;
        }
        if (def.condition) {
            bool found = false;
            for (std::size_t j = 0; j < idx; ++j) found |= defs[j].name == def.condition->parent;
            if (!found)
                throw ConfigError("'" + def.name + "': condition parent '" + def.condition->parent +
                                  "' must be declared earlier");
        }
    }
}

namespace {

HyperparameterDef float_hp(std::string name, double lo, double hi, bool log_scale = false) {
    HyperparameterDef def;
    def.name = std::move(name);
    def.kind = HyperparameterDef::Kind::Float;
    def.lo = lo;
    def.hi = hi;
    def.log_scale = log_scale;
    return def;
}

HyperparameterDef int_hp(std::string name, long lo, long hi) {
    HyperparameterDef def;
    def.name = std::move(name);
    def.kind = HyperparameterDef::Kind::Int;
    def.ilo = lo;
    def.ihi = hi;
    return def;
}

HyperparameterDef cat_hp(std::string name, std::vector<long> choices) {
    HyperparameterDef def;
    def.name = std::move(name);
    def.kind = HyperparameterDef::Kind::Categorical;
    for (long c : choices) def.choices.emplace_back(c);
    return def;
}

HyperparameterDef bool_hp(std::string name) {
    HyperparameterDef def;
    def.name = std::move(name);
    def.kind = HyperparameterDef::Kind::Boolean;
    return def;
}

HyperparameterDef conditional(HyperparameterDef def, std::string parent, HpValue value) {
    def.condition = HyperparameterDef::Condition{std::move(parent), std::move(value)};
    return def;
}

}  // namespace

ConfigurationSpace builtin_space(Algo algo, Domain domain) {
    const bool grid = domain == Domain::Gridworld;
    if (algo == Algo::Sac && grid)
        throw ConfigError("sac requires a continuous-action domain; gridworld environments are discrete");

    ConfigurationSpace space;
    space.id = algo_name(algo) + "-" + domain_name(domain);

    switch (algo) {
        case Algo::Ppo: {
            space.defs = {
                grid ? cat_hp("batch_size", {32, 64, 128}) : cat_hp("batch_size", {128, 256, 512}),
                float_hp("learning_rate", 1e-6, 1e-1, true),
                float_hp("entropy_coefficient", 0.0, 0.5),
                float_hp("gae_lambda", 0.8, 0.9999),
                float_hp("policy_clipping", 0.0, 0.5),
                float_hp("value_clipping", 0.0, 0.5),
                bool_hp("normalize_advantages"),
                float_hp("value_function_coefficient", 0.0, 1.0),
                float_hp("max_gradient_norm", 0.0, 1.0),
            };
            space.fixed = {
                {"number_of_environments", long{8}},
                {"number_of_steps", long{32}},
                {"update_epochs", grid ? long{10} : long{4}},
            };
            space.defaults = {
                {"batch_size", grid ? long{64} : long{256}},
                {"learning_rate", 1e-3},
                {"entropy_coefficient", 0.005},
                {"gae_lambda", 0.95},
                {"policy_clipping", 0.2},
                {"value_clipping", 0.0},
                {"normalize_advantages", true},
                {"value_function_coefficient", 0.5},
                {"max_gradient_norm", 0.5},
            };
            break;
        }
        case Algo::Dqn: {
            if (domain == Domain::ClassicControl)
                space.defs = {cat_hp("batch_size", {64, 128, 256})};
            else
                space.defs = {cat_hp("batch_size", {32, 64, 128})};
            auto rest = std::vector<HyperparameterDef>{
                bool_hp("buffer_priority_sampling"),
                conditional(float_hp("buffer_alpha", 0.01, 1.0), "buffer_priority_sampling", true),
                conditional(float_hp("buffer_beta", 0.01, 1.0), "buffer_priority_sampling", true),
                conditional(float_hp("buffer_epsilon", 1e-7, 1e-3, true), "buffer_priority_sampling", true),
                int_hp("buffer_size", 1024, 1000000),
                float_hp("initial_epsilon", 0.5, 1.0),
                float_hp("target_epsilon", 0.001, 0.2),
                float_hp("learning_rate", 1e-6, 1e-1, true),
                int_hp("learning_starts", 1, 2048),
                bool_hp("use_target_network"),
                conditional(int_hp("target_update_interval", 1, 2000), "use_target_network", true),
            };
            space.defs.insert(space.defs.end(), rest.begin(), rest.end());
            space.fixed = {{"number_of_environments", grid ? long{4} : long{1}}};
            space.defaults = {
                {"batch_size", grid ? long{64} : long{128}},
                {"buffer_priority_sampling", false},
                {"buffer_alpha", 0.6},
                {"buffer_beta", 0.4},
                {"buffer_epsilon", 1e-6},
                {"buffer_size", long{100000}},
                {"initial_epsilon", 1.0},
                {"target_epsilon", 0.05},
                {"learning_rate", 5e-4},
                {"learning_starts", long{1000}},
                {"use_target_network", true},
                {"target_update_interval", long{500}},
            };
            break;
        }
        case Algo::Sac: {
            space.defs = {
                cat_hp("batch_size", {256, 512, 1024}),
                bool_hp("buffer_priority_sampling"),
                conditional(float_hp("buffer_alpha", 0.01, 1.0), "buffer_priority_sampling", true),
                conditional(float_hp("buffer_beta", 0.01, 1.0), "buffer_priority_sampling", true),
                conditional(float_hp("buffer_epsilon", 1e-7, 1e-3, true), "buffer_priority_sampling", true),
                int_hp("buffer_size", 1024, 1000000),
                float_hp("learning_rate", 1e-6, 1e-1, true),
                int_hp("learning_starts", 1, 2048),
                bool_hp("use_target_network"),
                conditional(float_hp("tau", 0.01, 1.0), "use_target_network", true),
                float_hp("reward_scale", 0.1, 10.0, true),
            };
            space.fixed = {{"number_of_environments", long{1}}};
            space.defaults = {
                {"batch_size", long{512}},
                {"buffer_priority_sampling", false},
                {"buffer_alpha", 0.6},
                {"buffer_beta", 0.4},
                {"buffer_epsilon", 1e-6},
                {"buffer_size", long{100000}},
                {"learning_rate", 3e-4},
                {"learning_starts", long{100}},
                {"use_target_network", true},
                {"tau", 0.01},
                {"reward_scale", 1.0},
            };
            break;
        }
    }
    space.check();
    return space;
}

namespace {

double unit_of(const HyperparameterDef& def, const HpValue& value) {
    switch (def.kind) {
        case HyperparameterDef::Kind::Float: {
            const double v = hp_as_double(value);
            if (def.log_scale) return (std::log10(v) - std::log10(def.lo)) / (std::log10(def.hi) - std::log10(def.lo));
            return (v - def.lo) / (def.hi - def.lo);
        }
        case HyperparameterDef::Kind::Int: {
            const double v = hp_as_double(value);
            return (v - static_cast<double>(def.ilo) + 0.5) / static_cast<double>(def.ihi - def.ilo + 1);
        }
        case HyperparameterDef::Kind::Categorical: {
            for (std::size_t idx = 0; idx < def.choices.size(); ++idx)
                if (hp_equal(def.choices[idx], value))
                    return (static_cast<double>(idx) + 0.5) / static_cast<double>(def.choices.size());
            throw ConfigError("'" + def.name + "': value " + hp_to_string(value) + " is not a choice");
        }
        case HyperparameterDef::Kind::Boolean: return std::get<bool>(value) ? 0.75 : 0.25;
    }
    return 0.0;
}

HpValue value_of_unit(const HyperparameterDef& def, double u) {
    switch (def.kind) {
        case HyperparameterDef::Kind::Float:
            if (def.log_scale) {
                const double lg = std::log10(def.lo) + u * (std::log10(def.hi) - std::log10(def.lo));
                return std::min(def.hi, std::max(def.lo, std::pow(10.0, lg)));
            }
            return std::min(def.hi, std::max(def.lo, def.lo + u * (def.hi - def.lo)));
        case HyperparameterDef::Kind::Int: {
            const double raw = static_cast<double>(def.ilo) + u * static_cast<double>(def.ihi - def.ilo + 1);
            return std::min(def.ihi, std::max(def.ilo, static_cast<long>(std::floor(raw))));
        }
        case HyperparameterDef::Kind::Categorical: {
            const auto n = static_cast<long>(def.choices.size());
            const long idx = std::min(n - 1, std::max(long{0}, static_cast<long>(std::floor(u * n))));
            return def.choices[static_cast<std::size_t>(idx)];
        }
        case HyperparameterDef::Kind::Boolean: return u >= 0.5;
    }
    return false;
}

}  // namespace

std::vector<double> to_unit(const ConfigurationSpace& space, const Configuration& config) {
    std::vector<double> u(space.defs.size(), 0.0);
    for (std::size_t idx = 0; idx < space.defs.size(); ++idx) {
        const auto& def = space.defs[idx];
        if (space.active(config.values, def)) u[idx] = unit_of(def, config.at(def.name));
    }
    return u;
}

Configuration from_unit(const ConfigurationSpace& space, const std::vector<double>& u) {
    if (u.size() != space.defs.size())
        throw ConfigError("from_unit: expected " + std::to_string(space.defs.size()) + " coordinates, got " +
                          std::to_string(u.size()));
    Configuration config;
    config.space_id = space.id;
    // Two passes: materialize every coordinate, then drop inactive ones so
    // parents declared earlier decide activity.
    std::map<std::string, HpValue> all;
    for (std::size_t idx = 0; idx < space.defs.size(); ++idx)
        all[space.defs[idx].name] = value_of_unit(space.defs[idx], u[idx]);
    for (const auto& def : space.defs)
        if (space.active(all, def)) config.values[def.name] = all[def.name];
    return config;
}

std::vector<std::string> validate(const ConfigurationSpace& space, const Configuration& config) {
    std::vector<std::string> violations;
    for (const auto& [name, value] : config.values)
        if (space.find(name) == nullptr) violations.push_back("'" + name + "': unknown hyperparameter");
    for (const auto& def : space.defs) {
        const bool is_active = space.active(config.values, def);
        const bool present = config.has(def.name);
        if (is_active && !present) {
            violations.push_back("'" + def.name + "': active hyperparameter missing");
            continue;
        }
        if (!is_active && present) {
            violations.push_back("'" + def.name + "': inactive hyperparameter set");
            continue;
        }
        if (!present) continue;
        const HpValue& value = config.at(def.name);
        switch (def.kind) {
            case HyperparameterDef::Kind::Float: {
                double v;
                try {
                    v = hp_as_double(value);
                } catch (const ConfigError&) {
                    violations.push_back("'" + def.name + "': not a number");
                    break;
                }
                if (v < def.lo || v > def.hi)
                    violations.push_back("'" + def.name + "': value " + hp_to_string(value) + " out of range [" +
                                         hp_to_string(def.lo) + ", " + hp_to_string(def.hi) + "]");
                break;
            }
            case HyperparameterDef::Kind::Int: {
                if (!std::holds_alternative<long>(value)) {
                    violations.push_back("'" + def.name + "': not an integer");
                    break;
                }
                const long v = std::get<long>(value);
                if (v < def.ilo || v > def.ihi)
                    violations.push_back("'" + def.name + "': value " + std::to_string(v) + " out of range [" +
                                         std::to_string(def.ilo) + ", " + std::to_string(def.ihi) + "]");
                break;
            }
            case HyperparameterDef::Kind::Categorical: {
                bool found = false;
                for (const auto& choice : def.choices) found |= hp_equal(choice, value);
                if (!found) violations.push_back("'" + def.name + "': value " + hp_to_string(value) + " not a choice");
                break;
            }
            case HyperparameterDef::Kind::Boolean:
                if (!std::holds_alternative<bool>(value)) violations.push_back("'" + def.name + "': not boolean");
                break;
        }
    }
    return violations;
}

Configuration buffer_size_clamp(const ConfigurationSpace& space, Configuration config, long total_timesteps) {
    if (total_timesteps < 1) throw ConfigError("buffer_size_clamp: total_timesteps must be >= 1");
    (void)space;
    auto it = config.values.find("buffer_size");
    if (it != config.values.end()) {
        const long size = std::get<long>(it->second);
        it->second = std::min(size, total_timesteps);
    }
    return config;
}

std::vector<Configuration> sobol_sample(const ConfigurationSpace& space, int n, std::uint64_t scramble_seed) {
    if (n < 1) throw ConfigError("sobol_sample: n must be >= 1");
    SobolSequence seq(space.dim(), scramble_seed);
    std::vector<Configuration> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd point = seq.next();
        out.push_back(from_unit(space, std::vector<double>(point.data(), point.data() + point.size())));
    }
    return out;
}

namespace {

YAML::Node value_node(const HpValue& value) {
    YAML::Node node;
    if (std::holds_alternative<bool>(value))
        node = std::get<bool>(value);
    else if (std::holds_alternative<long>(value))
        node = std::get<long>(value);
    else if (std::holds_alternative<double>(value))
        node = std::get<double>(value);
    else
        node = std::get<std::string>(value);
    return node;
}

HpValue parse_value(const YAML::Node& node) {
    // yaml-cpp keeps scalars as text; sniff bool, then integer, then float.
    if (!node.IsScalar()) throw IoError("space yaml: expected a scalar value");
    const std::string& s = node.Scalar();
    if (s == "true" || s == "True") return true;
    if (s == "false" || s == "False") return false;
    if (!s.empty() && s.find_first_not_of("+-0123456789") == std::string::npos) {
        try {
            return static_cast<long>(std::stoll(s));
        } catch (...) {
        }
    }
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos == s.size()) return v;
    } catch (...) {
    }
    return s;
}

}  // namespace

std::string space_to_yaml(const ConfigurationSpace& space) {
    YAML::Node root;
    root["space"] = space.id;
    for (const auto& def : space.defs) {
        YAML::Node hp;
        hp["name"] = def.name;
        switch (def.kind) {
            case HyperparameterDef::Kind::Float:
                hp["kind"] = "float";
                hp["lo"] = def.lo;
                hp["hi"] = def.hi;
                hp["scale"] = def.log_scale ? "log10" : "linear";
                break;
            case HyperparameterDef::Kind::Int:
                hp["kind"] = "int";
                hp["lo"] = def.ilo;
                hp["hi"] = def.ihi;
                break;
            case HyperparameterDef::Kind::Categorical:
                hp["kind"] = "categorical";
                for (const auto& choice : def.choices) hp["choices"].push_back(value_node(choice));
                break;
            case HyperparameterDef::Kind::Boolean: hp["kind"] = "boolean"; break;
        }
        if (auto it = space.defaults.find(def.name); it != space.defaults.end())
            hp["default"] = value_node(it->second);
        if (def.condition) {
            hp["condition"]["parent"] = def.condition->parent;
            hp["condition"]["value"] = value_node(def.condition->value);
        }
        root["hyperparameters"].push_back(hp);
    }
    for (const auto& [name, value] : space.fixed) root["fixed"][name] = value_node(value);
    std::ostringstream out;
    out << root << "\n";
    return out.str();
}

ConfigurationSpace space_from_yaml(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw IoError(std::string("space yaml: parse error: ") + e.what());
    }
    ConfigurationSpace space;
    space.id = root["space"] ? root["space"].as<std::string>() : "custom";
    for (const auto& hp : root["hyperparameters"]) {
        HyperparameterDef def;
        def.name = hp["name"].as<std::string>();
        const std::string kind = hp["kind"].as<std::string>();
        if (kind == "float") {
            def.kind = HyperparameterDef::Kind::Float;
            def.lo = hp["lo"].as<double>();
            def.hi = hp["hi"].as<double>();
            def.log_scale = hp["scale"] && hp["scale"].as<std::string>() == "log10";
        } else if (kind == "int") {
            def.kind = HyperparameterDef::Kind::Int;
            def.ilo = hp["lo"].as<long>();
            def.ihi = hp["hi"].as<long>();
        } else if (kind == "categorical") {
            def.kind = HyperparameterDef::Kind::Categorical;
            for (const auto& choice : hp["choices"]) def.choices.push_back(parse_value(choice));
        } else if (kind == "boolean") {
            def.kind = HyperparameterDef::Kind::Boolean;
        } else {
            throw IoError("space yaml: unknown kind '" + kind + "' for '" + def.name + "'");
        }
        if (hp["condition"])
            def.condition =
                HyperparameterDef::Condition{hp["condition"]["parent"].as<std::string>(),
                                             parse_value(hp["condition"]["value"])};
        if (hp["default"]) space.defaults[def.name] = parse_value(hp["default"]);
        space.defs.push_back(std::move(def));
    }
    if (root["fixed"])
        for (const auto& kv : root["fixed"]) space.fixed[kv.first.as<std::string>()] = parse_value(kv.second);
    space.check();
    return space;
}

}  // namespace arlb
