// arlb: benchmark CLI wiring the environment registry, hyperparameter
// spaces, landscape campaigns, subset selection, HPO runs and report
// generation behind one executable.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "arlb/autorl_env.hpp"
#include "arlb/checkpoint.hpp"
#include "arlb/csv.hpp"
#include "arlb/env.hpp"
#include "arlb/landscape.hpp"
#include "arlb/optimizers.hpp"
#include "arlb/subset.hpp"
#include "arlb/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace arlb;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitInternal = 3;

fs::path data_root() {
    if (const char* env = std::getenv("ARLB_DATA_DIR"); env != nullptr && *env != '\0') return env;
    return "arlb_out";
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& params,
                    const std::string& started, const std::vector<std::string>& outputs) {
    json manifest;
    manifest["command"] = command;
    manifest["parameters"] = params;
    manifest["tool_version"] = "1.0.0";
    manifest["started_at"] = started;
    manifest["finished_at"] = iso_timestamp();
    manifest["outputs"] = outputs;
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    out << manifest.dump(2) << "\n";
}

Configuration config_from_yaml_file(const fs::path& path, const ConfigurationSpace& space) {
    YAML::Node root = YAML::LoadFile(path.string());
    Configuration config;
    config.space_id = root["space"] ? root["space"].as<std::string>() : space.id;
    if (config.space_id != space.id)
        throw ConfigError("config file targets space '" + config.space_id + "', expected '" + space.id + "'");
    for (const auto& kv : root["values"]) {
        const std::string name = kv.first.as<std::string>();
        const auto* def = space.find(name);
        if (def == nullptr) throw ConfigError("config file: unknown hyperparameter '" + name + "'");
        const std::string text = kv.second.as<std::string>();
        switch (def->kind) {
            case HyperparameterDef::Kind::Float: config.values[name] = parse_double(text); break;
            case HyperparameterDef::Kind::Int: config.values[name] = parse_long(text); break;
            case HyperparameterDef::Kind::Boolean: config.values[name] = text == "true" || text == "True"; break;
            case HyperparameterDef::Kind::Categorical: {
                bool matched = false;
                for (const auto& choice : def->choices)
                    if (hp_to_string(choice) == text) {
                        config.values[name] = choice;
                        matched = true;
                    }
                if (!matched) throw ConfigError("config file: '" + text + "' is not a choice of " + name);
                break;
            }
        }
    }
    return config;
}

std::vector<double> parse_fractions(const std::string& text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string tok = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!tok.empty()) out.push_back(parse_double(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string tok = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!tok.empty()) out.push_back(tok);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

// ---- train ------------------------------------------------------------------

int cmd_train(const std::string& algo_name_arg, const std::string& env_name, const std::string& config_file,
              long steps, std::uint64_t seed, const fs::path& out_dir, long log_every) {
    const std::string started = iso_timestamp();
    const Algo algo = algo_from_name(algo_name_arg);
    const ConfigurationSpace space = builtin_space(algo, domain_of_env(env_name));
    const Configuration config =
        config_file.empty() ? space.default_config() : config_from_yaml_file(config_file, space);
    const long budget = steps > 0 ? steps : default_budget(algo, env_name);

    fs::create_directories(out_dir);
    TrainingState state = init(algo, config, env_name, seed, budget);

    CsvTable metrics_csv;
    metrics_csv.columns = {"step",          "updates",        "policy_loss_mean", "value_loss_mean",
                           "entropy_mean",  "grad_norm_mean", "grad_norm_var",    "episodes",
                           "mean_episode_return"};
    const long slice = log_every > 0 ? log_every : std::max<long>(1, budget / 20);
    bool diverged = false;
    while (state.step_count < budget && !diverged) {
        const long chunk = std::min(slice, budget - state.step_count);
        Metrics metrics;
        try {
            metrics = train(state, chunk);
        } catch (const TrainingDiverged& e) {
            metrics = e.last_metrics;
            diverged = true;
        }
        metrics_csv.rows.push_back({std::to_string(state.step_count), std::to_string(metrics.updates()),
                                    format_double(mean_of(metrics.policy_losses)),
                                    format_double(mean_of(metrics.value_losses)),
                                    format_double(mean_of(metrics.entropies)),
                                    format_double(mean_of(metrics.grad_norms)),
                                    format_double(variance_of(metrics.grad_norms)),
                                    std::to_string(metrics.episode_returns.size()),
                                    format_double(mean_of(metrics.episode_returns))});
    }
    write_csv(metrics_csv, out_dir / "metrics.csv");
    save_checkpoint(state, out_dir / "checkpoint");

    const double eval_return =
        diverged ? env_spec(env_name).divergence_floor : evaluate(state, 128, derive_seed(seed, "eval"));
    std::cout << "trained " << algo_name_arg << " on " << env_name << " for " << state.step_count
              << " steps; eval mean return " << format_double(eval_return) << (diverged ? " (diverged)" : "")
              << "\n";

    write_manifest(out_dir, "train",
                   json{{"algo", algo_name_arg},
                        {"env", env_name},
                        {"config", config_file.empty() ? "default" : config_file},
                        {"steps", budget},
                        {"seed", seed}},
                   started, {"metrics.csv", "checkpoint/"});
    return diverged ? kExitDiverged : kExitOk;
}

// ---- collect ----------------------------------------------------------------

int cmd_collect(const std::string& algo_name_arg, const std::string& envs_arg, int n_configs, int n_seeds,
                int n_eval_episodes, const std::string& fractions_arg, std::uint64_t seed, const fs::path& out_dir,
                int parallel, bool resume, long steps_override) {
    const std::string started = iso_timestamp();
    CampaignSpec spec;
    spec.algo = algo_from_name(algo_name_arg);
    spec.environments = split_list(envs_arg);
    spec.n_configs = n_configs;
    spec.n_seeds = n_seeds;
    spec.n_eval_episodes = n_eval_episodes;
    if (!fractions_arg.empty()) spec.budget_fractions = parse_fractions(fractions_arg);
    spec.master_seed = seed;
    spec.budget_override = steps_override;
    spec.check();

    fs::create_directories(out_dir);
    const fs::path final_csv = out_dir / "landscape.csv";
    const fs::path journal = out_dir / "landscape.partial.csv";
    if (resume && fs::exists(final_csv)) {
        std::cout << "campaign already complete: " << final_csv << "\n";
        return kExitOk;
    }
    if (!resume && fs::exists(journal)) fs::remove(journal);

    long done = 0;
    const long total = static_cast<long>(spec.environments.size()) * n_configs * n_seeds *
                       static_cast<long>(spec.budget_fractions.size());
    const LandscapeTable table = run_campaign(spec, parallel, journal, [&](const LandscapeRecord&) {
        if (++done % 50 == 0) std::cout << "  " << done << "/" << total << " records\n";
    });
    write_landscape_csv(table, final_csv);
    fs::remove(journal);
    std::cout << "wrote " << table.records.size() << " records to " << final_csv << "\n";

    write_manifest(out_dir, "collect",
                   json{{"algo", algo_name_arg},
                        {"envs", envs_arg},
                        {"configs", n_configs},
                        {"seeds", n_seeds},
                        {"eval_episodes", n_eval_episodes},
                        {"seed", seed},
                        {"parallel", parallel}},
                   started, {"landscape.csv"});
    return kExitOk;
}

// ---- select -----------------------------------------------------------------

int cmd_select(const fs::path& data, const std::string& mapping, int size, const std::string& distance_arg,
               const std::string& norm_arg, int folds, const fs::path& out_dir, int max_size) {
    const std::string started = iso_timestamp();
    const LandscapeTable table =
        mapping.empty() ? load_landscape_csv(data) : load_landscape_csv(data, mapping);
    const SubsetDistance distance =
        distance_arg == "mse" ? SubsetDistance::Mse : SubsetDistance::OneMinusSpearman;
    const ScoreNorm norm = norm_arg == "minmax" ? ScoreNorm::MinMax : ScoreNorm::Rank;

    const ScoreMatrix scores = make_score_matrix(table, 1.0, norm);
    const auto results = select_subset(scores, size, distance, folds);
    fs::create_directories(out_dir);
    write_selection_report(results, out_dir / "selection_report.csv");
    const auto curve = correlation_vs_size(scores, max_size > 0 ? max_size : size, distance, folds);
    write_correlation_vs_size(curve, out_dir / "correlation_vs_size.csv");

    const auto& best = results.front();
    std::cout << "selected subset:";
    for (const auto& name : best.subset_names) std::cout << " " << name;
    std::cout << "\n  cv rho " << format_double(best.cv_rho_mean) << ", train rho " << format_double(best.train_rho)
              << "\n  weights:";
    for (Eigen::Index k = 0; k < best.weights.size(); ++k) std::cout << " " << format_double(best.weights[k]);
    std::cout << "\n";

    write_manifest(out_dir, "select",
                   json{{"data", data.string()},
                        {"mapping", mapping},
                        {"size", size},
                        {"distance", distance_arg},
                        {"norm", norm_arg},
                        {"folds", folds}},
                   started, {"selection_report.csv", "correlation_vs_size.csv"});
    return kExitOk;
}

// ---- tune -------------------------------------------------------------------

int cmd_tune(const std::string& method, const std::string& algo_name_arg, const std::string& env_name, int trials,
             int opt_seeds, int eval_seeds, long budget_arg, const fs::path& out_dir, std::uint64_t seed,
             const std::string& landscape_file, double eta, int population, double truncation,
             double resample_prob) {
    const std::string started = iso_timestamp();
    const Algo algo = algo_from_name(algo_name_arg);
    const ConfigurationSpace space = builtin_space(algo, domain_of_env(env_name));
    const long budget = budget_arg > 0 ? budget_arg : default_budget(algo, env_name);
    fs::create_directories(out_dir);

    std::optional<std::pair<double, double>> norm_range;
    if (!landscape_file.empty()) {
        const LandscapeTable table = load_landscape_csv(landscape_file);
        norm_range = landscape_return_range(table, env_spec(env_name).name);
    }

    std::vector<std::string> outputs;
    for (int opt_seed = 0; opt_seed < opt_seeds; ++opt_seed) {
        const std::uint64_t master = derive_seed(seed, "opt-seed", static_cast<std::uint64_t>(opt_seed));
        AutoRLEnvConfig base;
        base.algo = algo;
        base.env_name = env_name;
        base.total_budget = budget;
        base.n_eval_episodes = 128;

        OptimizerTrace trace;
        if (method == "rs") {
            AutoRlEvalBackend backend(base);
            trace = random_search(space, backend, {trials, eval_seeds, budget, master});
        } else if (method == "sha") {
            AutoRlEvalBackend backend(base);
            ShaParams params;
            params.eta = eta;
            params.min_budget = std::max<long>(1, static_cast<long>(budget / std::pow(eta, 2)));
            params.max_budget = budget;
            params.n_initial = trials;
            params.seeds_per_config = eval_seeds;
            params.master_seed = master;
            trace = successive_halving(space, backend, params);
            std::cout << "sha rungs:";
            int last_round = -1;
            int count = 0;
            for (const auto& trial : trace.trials) {
                if (trial.round != last_round) {
                    if (last_round >= 0) std::cout << " " << count;
                    last_round = trial.round;
                    count = 0;
                }
                ++count;
            }
            std::cout << " " << count << "\n";
        } else if (method == "pbt") {
            AutoRlPbtBackend backend(base, out_dir / ("pbt-" + std::to_string(opt_seed)));
            PbtParams params;
            params.population = population;
            params.total_budget = budget;
            params.ready_interval = std::max<long>(1, budget / 16);
            params.truncation = truncation;
            params.resample_prob = resample_prob;
            params.master_seed = master;
            trace = pbt(space, backend, params);
        } else {
            throw ConfigError("unknown method '" + method + "' (known: rs, pbt, sha)");
        }

        const std::string stem = method + "-seed" + std::to_string(opt_seed);
        write_trace_csv(trace, space, out_dir / (stem + "-trace.csv"), out_dir / (stem + "-incumbent.csv"));
        outputs.push_back(stem + "-trace.csv");
        outputs.push_back(stem + "-incumbent.csv");

        if (norm_range) {
            CsvTable normed;
            normed.columns = {"trial_id", "objective", "normalized_score"};
            const double floor = env_spec(env_name).divergence_floor;
            for (const auto& trial : trace.trials)
                normed.rows.push_back({std::to_string(trial.trial_id), format_double(trial.mean_objective),
                                       format_double(normalize_optimizer_score(
                                           trial.mean_objective, norm_range->first, norm_range->second, floor))});
            write_csv(normed, out_dir / (stem + "-normalized.csv"));
            outputs.push_back(stem + "-normalized.csv");
        }
        const Trial* best = trace.best();
        std::cout << method << " seed " << opt_seed << ": best objective "
                  << (best ? format_double(best->mean_objective) : "n/a") << " over " << trace.trials.size()
                  << " trials\n";
    }

    write_manifest(out_dir, "tune",
                   json{{"method", method},
                        {"algo", algo_name_arg},
                        {"env", env_name},
                        {"trials", trials},
                        {"opt_seeds", opt_seeds},
                        {"eval_seeds", eval_seeds},
                        {"budget", budget},
                        {"seed", seed}},
                   started, outputs);
    return kExitOk;
}

// ---- report -----------------------------------------------------------------

int cmd_report(const fs::path& in_dir, const std::string& kind, const fs::path& out_dir) {
    const std::string started = iso_timestamp();
    fs::create_directories(out_dir);
    std::vector<std::string> outputs;

    if (kind == "anytime") {
        // Aggregate incumbent curves (one per optimizer seed) into
        // mean +/- 1.96*se per cumulative budget.
        std::vector<CsvTable> curves;
        for (const auto& entry : fs::directory_iterator(in_dir)) {
            const std::string name = entry.path().filename().string();
            if (name.size() > 14 && name.substr(name.size() - 14) == "-incumbent.csv")
                curves.push_back(read_csv(entry.path()));
        }
        if (curves.empty()) throw ConfigError("report: no *-incumbent.csv files in " + in_dir.string());
        std::set<long> budget_set;
        for (const auto& curve : curves) {
            const int col = curve.require_column("cumulative_budget");
            for (std::size_t row = 0; row < curve.rows.size(); ++row)
                budget_set.insert(parse_long(curve.cell(row, col)));
        }
        CsvTable out;
        out.columns = {"cumulative_budget", "mean_best_objective", "ci_lo", "ci_hi", "n_seeds", "warning"};
        for (long budget : budget_set) {
            std::vector<double> values;
            for (const auto& curve : curves) {
                const int bcol = curve.require_column("cumulative_budget");
                const int ocol = curve.require_column("best_objective");
                double last = std::numeric_limits<double>::quiet_NaN();
                for (std::size_t row = 0; row < curve.rows.size(); ++row) {
                    if (parse_long(curve.cell(row, bcol)) <= budget) last = parse_double(curve.cell(row, ocol));
                }
                if (!std::isnan(last)) values.push_back(last);
            }
            if (values.empty()) continue;
            const double mu = mean_of(values);
            const double se = values.size() > 1 ? std::sqrt(variance_of(values) * values.size() /
                                                            (values.size() - 1.0) / values.size())
                                                : 0.0;
            out.rows.push_back({std::to_string(budget), format_double(mu), format_double(mu - 1.96 * se),
                                format_double(mu + 1.96 * se), std::to_string(values.size()),
                                values.size() > 1 ? "" : "single-seed: CI degenerates to the point estimate"});
        }
        write_csv(out, out_dir / "anytime.csv");
        outputs.push_back("anytime.csv");
    } else if (kind == "distribution") {
        CsvTable out;
        out.columns = {"source", "final_best_objective"};
        for (const auto& entry : fs::directory_iterator(in_dir)) {
            const std::string name = entry.path().filename().string();
            if (name.size() > 14 && name.substr(name.size() - 14) == "-incumbent.csv") {
                const CsvTable curve = read_csv(entry.path());
                if (curve.rows.empty()) continue;
                const int ocol = curve.require_column("best_objective");
                out.rows.push_back({name, curve.cell(curve.rows.size() - 1, ocol)});
            }
        }
        if (out.rows.empty()) throw ConfigError("report: no *-incumbent.csv files in " + in_dir.string());
        write_csv(out, out_dir / "distribution.csv");
        outputs.push_back("distribution.csv");
    } else if (kind == "budget-corr") {
        const fs::path data =
            fs::is_directory(in_dir) ? in_dir / "landscape.csv" : in_dir;
        const LandscapeTable table = load_landscape_csv(data);
        std::vector<BudgetCorrelation> rows;
        for (const auto& env : table.environments()) rows.push_back(budget_correlations(table, env));
        write_budget_correlation(rows, out_dir / "budget_correlation.csv");
        outputs.push_back("budget_correlation.csv");
    } else {
        throw ConfigError("unknown report kind '" + kind + "' (known: anytime, distribution, budget-corr)");
    }

    write_manifest(out_dir, "report", json{{"in", in_dir.string()}, {"kind", kind}}, started, outputs);
    std::cout << "report written to " << out_dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AutoRL benchmarking engine"};
    app.require_subcommand(1);

    // envs list
    auto* envs_cmd = app.add_subcommand("envs", "environment registry");
    auto* envs_list = envs_cmd->add_subcommand("list", "list registered environments");
    std::string envs_format = "csv";
    envs_list->add_option("--format", envs_format, "output format (csv)");

    // space show
    auto* space_cmd = app.add_subcommand("space", "hyperparameter spaces");
    auto* space_show = space_cmd->add_subcommand("show", "print a builtin space");
    std::string space_algo, space_domain;
    space_show->add_option("algo", space_algo)->required();
    space_show->add_option("domain", space_domain)->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train one configuration");
    std::string train_algo, train_env, train_config;
    long train_steps = 0, train_log_every = 0;
    std::uint64_t train_seed = 0;
    bool train_default = false;
    std::string train_out;
    train_cmd->add_option("algo", train_algo)->required();
    train_cmd->add_option("env", train_env)->required();
    train_cmd->add_option("--config", train_config, "configuration file (yaml)");
    train_cmd->add_flag("--default", train_default, "use the builtin default configuration");
    train_cmd->add_option("--steps", train_steps, "training budget (default: per-algorithm table)");
    train_cmd->add_option("--seed", train_seed, "seed");
    train_cmd->add_option("--out", train_out, "output directory");
    train_cmd->add_option("--log-every", train_log_every, "metrics row interval in steps");

    // collect
    auto* collect_cmd = app.add_subcommand("collect", "landscape data collection");
    std::string collect_algo, collect_envs, collect_fractions;
    int collect_configs = 256, collect_seeds = 10, collect_eval = 128, collect_parallel = 1;
    std::uint64_t collect_seed = 0;
    long collect_steps = 0;
    bool collect_resume = false;
    std::string collect_out;
    collect_cmd->add_option("--algo", collect_algo)->required();
    collect_cmd->add_option("--envs", collect_envs, "comma-separated environments")->required();
    collect_cmd->add_option("--configs", collect_configs);
    collect_cmd->add_option("--seeds", collect_seeds);
    collect_cmd->add_option("--eval-episodes", collect_eval);
    collect_cmd->add_option("--fractions", collect_fractions, "comma-separated budget fractions");
    collect_cmd->add_option("--seed", collect_seed, "master seed");
    collect_cmd->add_option("--steps", collect_steps, "budget override for every environment");
    collect_cmd->add_option("--out", collect_out, "output directory")->required();
    collect_cmd->add_option("--parallel", collect_parallel);
    collect_cmd->add_flag("--resume", collect_resume);

    // select
    auto* select_cmd = app.add_subcommand("select", "environment subset selection");
    std::string select_data, select_mapping, select_distance = "spearman", select_norm = "rank";
    int select_size = 5, select_folds = 5, select_max_size = 0;
    std::string select_out;
    select_cmd->add_option("--data", select_data)->required();
    select_cmd->add_option("--mapping", select_mapping, "column mapping file for foreign layouts");
    select_cmd->add_option("--size", select_size);
    select_cmd->add_option("--distance", select_distance, "spearman|mse");
    select_cmd->add_option("--norm", select_norm, "rank|minmax");
    select_cmd->add_option("--folds", select_folds);
    select_cmd->add_option("--max-size", select_max_size, "largest size for correlation_vs_size (default --size)");
    select_cmd->add_option("--out", select_out)->required();

    // tune
    auto* tune_cmd = app.add_subcommand("tune", "run an HPO method");
    std::string tune_method, tune_algo, tune_env, tune_landscape;
    int tune_trials = 32, tune_opt_seeds = 5, tune_eval_seeds = 3, tune_population = 4;
    long tune_budget = 0;
    double tune_eta = 3.0, tune_truncation = 0.25, tune_resample = 0.25;
    std::uint64_t tune_seed = 0;
    std::string tune_out;
    tune_cmd->add_option("--method", tune_method, "rs|pbt|sha")->required();
    tune_cmd->add_option("--algo", tune_algo)->required();
    tune_cmd->add_option("--env", tune_env)->required();
    tune_cmd->add_option("--trials", tune_trials);
    tune_cmd->add_option("--opt-seeds", tune_opt_seeds);
    tune_cmd->add_option("--eval-seeds", tune_eval_seeds);
    tune_cmd->add_option("--budget", tune_budget, "per-trial budget (default: table)");
    tune_cmd->add_option("--seed", tune_seed);
    tune_cmd->add_option("--eta", tune_eta, "sha halving rate");
    tune_cmd->add_option("--population", tune_population, "pbt population");
    tune_cmd->add_option("--truncation", tune_truncation, "pbt truncation fraction");
    tune_cmd->add_option("--resample-prob", tune_resample, "pbt categorical resample probability");
    tune_cmd->add_option("--landscape", tune_landscape, "landscape csv for score normalization");
    tune_cmd->add_option("--out", tune_out)->required();

    // report
    auto* report_cmd = app.add_subcommand("report", "aggregate traces into plot-ready CSVs");
    std::string report_in, report_kind = "anytime", report_out;
    report_cmd->add_option("--in", report_in)->required();
    report_cmd->add_option("--kind", report_kind, "anytime|distribution|budget-corr");
    report_cmd->add_option("--out", report_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (envs_list->parsed()) {
            std::cout << envs_list_csv();
            return kExitOk;
        }
        if (space_show->parsed()) {
            std::cout << space_to_yaml(builtin_space(algo_from_name(space_algo), domain_from_name(space_domain)));
            return kExitOk;
        }
        if (train_cmd->parsed()) {
            if (train_config.empty() && !train_default)
                throw ConfigError("train: pass --default or --config FILE");
            const fs::path out = train_out.empty() ? data_root() / "train" : fs::path(train_out);
            return cmd_train(train_algo, train_env, train_config, train_steps, train_seed, out, train_log_every);
        }
        if (collect_cmd->parsed())
            return cmd_collect(collect_algo, collect_envs, collect_configs, collect_seeds, collect_eval,
                               collect_fractions, collect_seed, collect_out, collect_parallel, collect_resume,
                               collect_steps);
        if (select_cmd->parsed())
            return cmd_select(select_data, select_mapping, select_size, select_distance, select_norm, select_folds,
                              select_out, select_max_size);
        if (tune_cmd->parsed())
            return cmd_tune(tune_method, tune_algo, tune_env, tune_trials, tune_opt_seeds, tune_eval_seeds,
                            tune_budget, tune_out, tune_seed, tune_landscape, tune_eta, tune_population,
                            tune_truncation, tune_resample);
        if (report_cmd->parsed()) {
            const fs::path out = report_out.empty() ? data_root() / "report" : fs::path(report_out);
            return cmd_report(report_in, report_kind, out);
        }
    } catch (const TrainingDiverged& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
