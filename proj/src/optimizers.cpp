#include "arlb/optimizers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "arlb/csv.hpp"
#include "arlb/rng.hpp"

namespace arlb {

long OptimizerTrace::total_budget() const {
    long total = 0;
    for (const auto& trial : trials) total += trial.budget;
    return total;
}

const Trial* OptimizerTrace::best() const {
    const Trial* best = nullptr;
    for (const auto& trial : trials)
        if (trial.status != Trial::Status::Running && (best == nullptr || trial.mean_objective > best->mean_objective))
            best = &trial;
    return best;
}

double AutoRlEvalBackend::run(const Configuration& config, long budget, std::uint64_t seed, bool& diverged) {
    AutoRLEnvConfig cfg = base_;
    cfg.mode = SessionMode::Static;
    cfg.checkpoint_dir.clear();
    AutoRLSession session(cfg, seed);
    const auto [objectives, features] = session.step(config, budget);
    diverged = objectives.diverged;
    return objectives.mean_return;
}

AutoRlPbtBackend::AutoRlPbtBackend(AutoRLEnvConfig base, std::filesystem::path root)
    : base_(std::move(base)), root_(std::move(root)) {
    base_.mode = SessionMode::Dynamic;
}

int AutoRlPbtBackend::spawn(const Configuration&, std::uint64_t seed) {
    AutoRLEnvConfig cfg = base_;
    cfg.checkpoint_dir = root_ / ("member-" + std::to_string(sessions_.size()));
    sessions_.push_back(std::make_unique<AutoRLSession>(cfg, seed));
    return static_cast<int>(sessions_.size()) - 1;
}

double AutoRlPbtBackend::train_and_score(int member, const Configuration& config, long steps) {
    const auto [objectives, features] = session(member).step(config, steps);
    return objectives.mean_return;
}

void AutoRlPbtBackend::copy_state(int dst, int src) {
    const std::string id = session(src).checkpoint("exploit");
    session(dst).restore_from(session(src).checkpoint_path(id));
}

bool AutoRlPbtBackend::perturbable(const std::string& hp) const { return hot_swappable(base_.algo, hp); }

namespace {

Configuration sample_uniform(const ConfigurationSpace& space, Rng& rng) {
    std::vector<double> u(static_cast<std::size_t>(space.dim()));
    for (double& value : u) value = rng.uniform();
    return from_unit(space, u);
}

void push_incumbent(OptimizerTrace& trace, long budget_step) {
    const Trial& trial = trace.trials.back();
    long cumulative = budget_step;
    double best = trial.mean_objective;
    if (!trace.incumbent.empty()) {
        cumulative += trace.incumbent.back().first;
        best = std::max(best, trace.incumbent.back().second);
    }
    trace.incumbent.emplace_back(cumulative, best);
}

Trial evaluate_trial(EvalBackend& backend, const Configuration& config, long budget, int trial_id, int round,
                     int seeds_per_config, std::uint64_t master_seed) {
    Trial trial;
    trial.trial_id = trial_id;
    trial.round = round;
    trial.config = config;
    trial.budget = budget;
    const auto t0 = std::chrono::steady_clock::now();
    bool any_diverged = false;
    double sum = 0.0;
    for (int k = 0; k < seeds_per_config; ++k) {
        // Evaluation seeds are shared across trials so configs see the same
        // training conditions.
        const std::uint64_t seed = derive_seed(master_seed, "eval-seed", static_cast<std::uint64_t>(k));
        bool diverged = false;
        const double objective = backend.run(config, budget, seed, diverged);
        trial.seeds.push_back(seed);
        trial.objectives.push_back(objective);
        any_diverged |= diverged;
        sum += objective;
    }
    trial.mean_objective = sum / static_cast<double>(seeds_per_config);
    trial.status = any_diverged ? Trial::Status::Diverged : Trial::Status::Done;
    trial.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return trial;
}

}  // namespace

OptimizerTrace random_search(const ConfigurationSpace& space, EvalBackend& backend,
                             const RandomSearchParams& params) {
    if (params.n_trials < 1) throw ConfigError("random_search: n_trials must be >= 1");
    if (params.budget < 1) throw ConfigError("random_search: budget must be >= 1");
    Rng rng(derive_seed(params.master_seed, "rs"));
    OptimizerTrace trace;
    for (int t = 0; t < params.n_trials; ++t) {
        const Configuration config = sample_uniform(space, rng);
        trace.trials.push_back(evaluate_trial(backend, config, params.budget, t, 0, params.seeds_per_config,
                                              params.master_seed));
        push_incumbent(trace, params.budget);
    }
    return trace;
}

OptimizerTrace successive_halving(const ConfigurationSpace& space, EvalBackend& backend, const ShaParams& params) {
    if (!(params.eta > 1.0)) throw ConfigError("successive_halving: eta must be > 1");
    if (params.min_budget < 1 || params.min_budget >= params.max_budget)
        throw ConfigError("successive_halving: need 1 <= min_budget < max_budget");
    if (params.n_initial < params.eta) throw ConfigError("successive_halving: n_initial must be >= eta");

    Rng rng(derive_seed(params.master_seed, "sha"));
    OptimizerTrace trace;
    std::vector<Configuration> rung_configs;
    for (int i = 0; i < params.n_initial; ++i) rung_configs.push_back(sample_uniform(space, rng));

    int trial_id = 0;
    long budget = params.min_budget;
    for (int rung = 0;; ++rung) {
        std::vector<int> rung_trials;
        for (const Configuration& config : rung_configs) {
            trace.trials.push_back(evaluate_trial(backend, config, budget, trial_id++, rung,
                                                  params.seeds_per_config, params.master_seed));
            rung_trials.push_back(static_cast<int>(trace.trials.size()) - 1);
            push_incumbent(trace, budget);
        }
        if (budget >= params.max_budget || rung_configs.size() <= 1) break;

        // Promote the top 1/eta, ties broken by the lower trial id.
        std::stable_sort(rung_trials.begin(), rung_trials.end(), [&](int a, int b) {
            if (trace.trials[static_cast<std::size_t>(a)].mean_objective !=
                trace.trials[static_cast<std::size_t>(b)].mean_objective)
                return trace.trials[static_cast<std::size_t>(a)].mean_objective >
                       trace.trials[static_cast<std::size_t>(b)].mean_objective;
            return trace.trials[static_cast<std::size_t>(a)].trial_id <
                   trace.trials[static_cast<std::size_t>(b)].trial_id;
        });
        const auto keep = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(static_cast<double>(rung_trials.size()) / params.eta)));
        std::vector<Configuration> promoted;
        for (std::size_t k = 0; k < rung_trials.size(); ++k) {
            auto& trial = trace.trials[static_cast<std::size_t>(rung_trials[k])];
            if (k < keep)
                promoted.push_back(trial.config);
            else if (trial.status == Trial::Status::Done)
                trial.status = Trial::Status::Pruned;
        }
        rung_configs = std::move(promoted);
        budget = std::min(params.max_budget, static_cast<long>(std::llround(budget * params.eta)));
    }
    return trace;
}

namespace {

HpValue perturb_value(const ConfigurationSpace& space, const HyperparameterDef& def, const HpValue& value,
                      double factor, double resample_prob, Rng& rng) {
    switch (def.kind) {
        case HyperparameterDef::Kind::Float: {
            const double v = hp_as_double(value) * factor;
            return std::clamp(v, def.lo, def.hi);
        }
        case HyperparameterDef::Kind::Int: {
            const double v = hp_as_double(value) * factor;
            return std::clamp(static_cast<long>(std::llround(v)), def.ilo, def.ihi);
        }
        case HyperparameterDef::Kind::Categorical: {
            if (rng.uniform() < resample_prob)
                return def.choices[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<long>(def.choices.size()) - 1))];
            return value;
        }
        case HyperparameterDef::Kind::Boolean:
            if (rng.uniform() < resample_prob) return rng.bernoulli(0.5);
            return value;
    }
    (void)space;
    return value;
}

}  // namespace

OptimizerTrace pbt(const ConfigurationSpace& space, PbtBackend& backend, const PbtParams& params) {
    if (params.population < 2) throw ConfigError("pbt: population must be >= 2");
    if (params.ready_interval < 1) throw ConfigError("pbt: ready_interval must be >= 1");
    if (!(params.truncation > 0.0 && params.truncation <= 0.5))
        throw ConfigError("pbt: truncation fraction must be in (0, 0.5]");

    const int rounds = static_cast<int>(params.total_budget / params.ready_interval);
    if (rounds < 1) throw ConfigError("pbt: total_budget must cover at least one ready interval");

    Rng rng(derive_seed(params.master_seed, "pbt"));
    const int population = params.population;

    std::vector<Configuration> configs;
    std::vector<int> members;
    for (int i = 0; i < population; ++i) {
        configs.push_back(sample_uniform(space, rng));
        members.push_back(
            backend.spawn(configs.back(), derive_seed(params.master_seed, "pbt-member", static_cast<std::uint64_t>(i))));
    }

    OptimizerTrace trace;
    std::vector<double> scores(static_cast<std::size_t>(population), 0.0);
    int trial_id = 0;
    for (int round = 0; round < rounds; ++round) {
        for (int i = 0; i < population; ++i) {
            Trial trial;
            trial.trial_id = trial_id++;
            trial.round = round;
            trial.config = configs[static_cast<std::size_t>(i)];
            trial.budget = params.ready_interval;
            const auto t0 = std::chrono::steady_clock::now();
            scores[static_cast<std::size_t>(i)] =
                backend.train_and_score(members[static_cast<std::size_t>(i)],
                                        configs[static_cast<std::size_t>(i)], params.ready_interval);
            trial.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            trial.objectives.push_back(scores[static_cast<std::size_t>(i)]);
            trial.mean_objective = scores[static_cast<std::size_t>(i)];
            trial.status = Trial::Status::Done;
            trace.trials.push_back(std::move(trial));
            push_incumbent(trace, params.ready_interval);
        }
        if (round + 1 == rounds) break;

        // Exploit: the bottom fraction copies a uniformly drawn member of the
        // top fraction (state and config), then explores.
        std::vector<int> order(static_cast<std::size_t>(population));
        for (int i = 0; i < population; ++i) order[static_cast<std::size_t>(i)] = i;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
        });
        const int n_cut = std::max(1, static_cast<int>(std::floor(params.truncation * population)));
        for (int k = population - n_cut; k < population; ++k) {
            const int loser = order[static_cast<std::size_t>(k)];
            const int winner = order[static_cast<std::size_t>(rng.uniform_int(0, n_cut - 1))];
            backend.copy_state(members[static_cast<std::size_t>(loser)], members[static_cast<std::size_t>(winner)]);
            Configuration config = configs[static_cast<std::size_t>(winner)];
            for (const auto& def : space.defs) {
                if (!config.has(def.name) || !backend.perturbable(def.name)) continue;
                const double factor = rng.bernoulli(0.5) ? params.perturb_up : params.perturb_down;
                config.values[def.name] =
                    perturb_value(space, def, config.at(def.name), factor, params.resample_prob, rng);
            }
            // Re-validate conditional activity after categorical resampling.
            std::map<std::string, HpValue> all = config.values;
            config.values.clear();
            for (const auto& def : space.defs) {
                if (!space.active(all, def)) continue;
                auto it = all.find(def.name);
                config.values[def.name] = it != all.end() ? it->second : space.defaults.at(def.name);
            }
            configs[static_cast<std::size_t>(loser)] = std::move(config);
        }
    }
    return trace;
}

void write_trace_csv(const OptimizerTrace& trace, const ConfigurationSpace& space,
                     const std::filesystem::path& trace_path, const std::filesystem::path& incumbent_path) {
    CsvTable table;
    table.columns = {"trial_id", "round", "config_hash"};
    for (const auto& def : space.defs) table.columns.push_back("hp." + def.name);
    for (const char* col : {"budget", "seed", "objective", "status"}) table.columns.emplace_back(col);

    auto status_name = [](Trial::Status s) {
        switch (s) {
            case Trial::Status::Running: return "running";
            case Trial::Status::Done: return "done";
            case Trial::Status::Pruned: return "pruned";
            case Trial::Status::Diverged: return "diverged";
        }
        return "?";
    };

    for (const auto& trial : trace.trials) {
        char hash[20];
        std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(config_hash(trial.config)));
        const std::size_t n = std::max<std::size_t>(1, trial.objectives.size());
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<std::string> row{std::to_string(trial.trial_id), std::to_string(trial.round), hash};
            for (const auto& def : space.defs)
                row.push_back(trial.config.has(def.name) ? hp_to_string(trial.config.at(def.name)) : "");
            row.push_back(std::to_string(trial.budget));
            row.push_back(k < trial.seeds.size() ? std::to_string(trial.seeds[k]) : "");
            row.push_back(k < trial.objectives.size() ? format_double(trial.objectives[k]) : "");
            row.emplace_back(status_name(trial.status));
            table.rows.push_back(std::move(row));
        }
    }
    write_csv(table, trace_path);

    CsvTable incumbent;
    incumbent.columns = {"cumulative_budget", "best_objective"};
    for (const auto& [budget, best] : trace.incumbent)
        incumbent.rows.push_back({std::to_string(budget), format_double(best)});
    write_csv(incumbent, incumbent_path);
}

}  // namespace arlb
