#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "arlb/common.hpp"

namespace arlb {

enum class Algo { Ppo, Dqn, Sac };
enum class Domain { ClassicControl, Gridworld };

std::string algo_name(Algo algo);
Algo algo_from_name(const std::string& name);
std::string domain_name(Domain domain);
Domain domain_from_name(const std::string& name);

// A typed hyperparameter value. Categorical choices keep their natural type
// (e.g. batch sizes stay integers).
using HpValue = std::variant<bool, long, double, std::string>;

std::string hp_to_string(const HpValue& value);
bool hp_equal(const HpValue& a, const HpValue& b);
double hp_as_double(const HpValue& value);

struct HyperparameterDef {
    enum class Kind { Float, Int, Categorical, Boolean };

    struct Condition {
        std::string parent;
        HpValue value;  // active iff parent is active and equals this
    };

    std::string name;
    Kind kind = Kind::Float;
    double lo = 0.0, hi = 0.0;  // Float bounds
    bool log_scale = false;     // Float: base-10 log-uniform mapping
    long ilo = 0, ihi = 0;      // Int bounds (inclusive)
    std::vector<HpValue> choices;
    std::optional<Condition> condition;
};

// One point in a space: values for the active hyperparameters only.
struct Configuration {
    std::string space_id;
    std::map<std::string, HpValue> values;

    bool has(const std::string& name) const { return values.count(name) > 0; }
    double f(const std::string& name) const;
    long i(const std::string& name) const;
    bool b(const std::string& name) const;
    const HpValue& at(const std::string& name) const;
};

std::uint64_t config_hash(const Configuration& config);

class ConfigurationSpace {
  public:
    std::string id;
    std::vector<HyperparameterDef> defs;
    std::map<std::string, HpValue> fixed;     // non-optimized settings
    std::map<std::string, HpValue> defaults;  // default value per def

    int dim() const { return static_cast<int>(defs.size()); }
    const HyperparameterDef* find(const std::string& name) const;

    // Whether `def` is active under the given (possibly partial) assignment.
    bool active(const std::map<std::string, HpValue>& values, const HyperparameterDef& def) const;

    Configuration default_config() const;

    // Looks `name` up in the configuration first, then in the fixed map.
    const HpValue& value_of(const Configuration& config, const std::string& name) const;
    long int_of(const Configuration& config, const std::string& name) const;
    double float_of(const Configuration& config, const std::string& name) const;
    bool bool_of(const Configuration& config, const std::string& name) const;

    // Structural integrity of the space itself (unique names, condition
    // parents precede dependents, bounds ordered). Throws ConfigError.
    void check() const;
};

ConfigurationSpace builtin_space(Algo algo, Domain domain);

// Unit-cube vectorization. Inactive hyperparameters still own a coordinate
// (0 in to_unit, ignored by from_unit) so quasi-random streams stay aligned
// across condition branches.
std::vector<double> to_unit(const ConfigurationSpace& space, const Configuration& config);
Configuration from_unit(const ConfigurationSpace& space, const std::vector<double>& u);

// Every violation found, empty when valid.
std::vector<std::string> validate(const ConfigurationSpace& space, const Configuration& config);

// Applies the rule that a replay buffer can never outlive the training
// budget: buffer_size := min(buffer_size, total_timesteps).
Configuration buffer_size_clamp(const ConfigurationSpace& space, Configuration config, long total_timesteps);

// First n points of the Sobol sequence mapped through from_unit.
// scramble_seed == 0 means the plain (unscrambled) sequence.
std::vector<Configuration> sobol_sample(const ConfigurationSpace& space, int n, std::uint64_t scramble_seed);

std::string space_to_yaml(const ConfigurationSpace& space);
ConfigurationSpace space_from_yaml(const std::string& text);

}  // namespace arlb
