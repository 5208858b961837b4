#include "arlb/landscape.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "arlb/env.hpp"
#include "arlb/trainer.hpp"

namespace arlb {

void CampaignSpec::check() const {
    if (environments.empty()) throw ConfigError("campaign: no environments");
    if (n_configs < 1 || n_seeds < 1 || n_eval_episodes < 1)
        throw ConfigError("campaign: n_configs, n_seeds and n_eval_episodes must be >= 1");
    if (budget_fractions.empty() || budget_fractions.back() != 1.0)
        throw ConfigError("campaign: budget fractions must end at 1.0");
    for (std::size_t i = 0; i < budget_fractions.size(); ++i) {
        if (budget_fractions[i] <= 0.0 || budget_fractions[i] > 1.0)
            throw ConfigError("campaign: budget fractions must lie in (0, 1]");
        if (i > 0 && budget_fractions[i] <= budget_fractions[i - 1])
            throw ConfigError("campaign: budget fractions must be strictly increasing");
    }
    for (const auto& env : environments) env_spec(env);
}

std::uint64_t cell_seed(std::uint64_t master_seed, const std::string& environment, int config_id, int seed_index) {
    const std::uint64_t key = (static_cast<std::uint64_t>(config_id) << 20) | static_cast<std::uint64_t>(seed_index);
    return derive_seed(derive_seed(master_seed, environment), "cell", key);
}

std::vector<std::string> LandscapeTable::environments() const {
    std::set<std::string> seen;
    for (const auto& r : records) seen.insert(r.environment);
    return {seen.begin(), seen.end()};
}

std::vector<double> LandscapeTable::fractions() const {
    std::set<double> seen;
    for (const auto& r : records) seen.insert(r.budget_fraction);
    return {seen.begin(), seen.end()};
}

void LandscapeTable::sort_by_key() {
    std::sort(records.begin(), records.end(), [](const LandscapeRecord& a, const LandscapeRecord& b) {
        return std::tie(a.algorithm, a.environment, a.config_id, a.seed, a.budget_fraction) <
               std::tie(b.algorithm, b.environment, b.config_id, b.seed, b.budget_fraction);
    });
}

namespace {

std::vector<std::string> config_row(const ConfigurationSpace& space, const Configuration& config) {
    std::vector<std::string> row;
    for (const auto& def : space.defs)
        row.push_back(config.has(def.name) ? hp_to_string(config.at(def.name)) : "");
    return row;
}

struct Cell {
    std::string environment;
    int config_id = 0;
    int seed_index = 0;
};

// Trains one grid cell, emitting one record per budget fraction. A diverged
// slice floors this and all later fractions.
std::vector<LandscapeRecord> run_cell(const CampaignSpec& spec, const Configuration& config, const Cell& cell) {
    const EnvSpec& env = env_spec(cell.environment);
    const long budget = spec.budget_override > 0 ? spec.budget_override : default_budget(spec.algo, cell.environment);
    const std::uint64_t seed = cell_seed(spec.master_seed, cell.environment, cell.config_id, cell.seed_index);

    std::vector<LandscapeRecord> out;
    TrainingState state = init(spec.algo, config, cell.environment, seed, budget);
    bool diverged = false;
    double train_seconds = 0.0;
    for (double fraction : spec.budget_fractions) {
        LandscapeRecord record;
        record.algorithm = algo_name(spec.algo);
        record.environment = env.name;
        record.config_id = cell.config_id;
        record.seed = cell.seed_index;
        record.budget_fraction = fraction;
        record.steps = static_cast<long>(std::llround(fraction * static_cast<double>(budget)));
        if (!diverged) {
            const long target = record.steps;
            if (target > state.step_count) {
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    train(state, target - state.step_count);
                } catch (const TrainingDiverged&) {
                    diverged = true;
                }
                train_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            }
        }
        record.runtime_seconds = train_seconds;
        record.diverged = diverged;
        record.mean_return = diverged
                                 ? env.divergence_floor
                                 : evaluate(state, spec.n_eval_episodes, derive_seed(seed, "eval"));
        out.push_back(std::move(record));
    }
    return out;
}

std::string record_line(const LandscapeRecord& r, const std::vector<std::string>& hp_values) {
    std::ostringstream out;
    out << r.algorithm << "," << r.environment << "," << r.config_id << "," << r.seed << ","
        << format_double(r.budget_fraction) << "," << r.steps << "," << format_double(r.mean_return) << ","
        << (r.diverged ? 1 : 0) << "," << format_double(r.runtime_seconds);
    for (const auto& v : hp_values) out << "," << v;
    return out.str();
}

std::string header_line(const std::vector<std::string>& hp_names) {
    std::ostringstream out;
    out << "algorithm,environment,config_id,seed,budget_fraction,steps,mean_return,diverged,runtime_seconds";
    for (const auto& name : hp_names) out << ",hp." << name;
    return out.str();
}

}  // namespace

LandscapeTable run_campaign(const CampaignSpec& spec, int parallelism, const std::filesystem::path& journal,
                            const CampaignProgress& progress) {
    spec.check();
    if (parallelism < 1) parallelism = 1;

    for (const auto& env : spec.environments) {
        const Space& aspace = env_spec(env).action_space;
        const bool discrete = aspace.kind == Space::Kind::Discrete;
        if (spec.algo == Algo::Dqn && !discrete)
            throw ConfigError("campaign: dqn is incompatible with '" + env + "'");
        if (spec.algo == Algo::Sac && discrete)
            throw ConfigError("campaign: sac is incompatible with '" + env + "'");
    }

    // One space per domain; Sobol streams are per-domain so the same
    // config_id means the same unit-cube point everywhere.
    std::map<Domain, ConfigurationSpace> spaces;
    std::map<Domain, std::vector<Configuration>> configs;
    for (const auto& env : spec.environments) {
        const Domain domain = domain_of_env(env);
        if (spaces.count(domain)) continue;
        spaces[domain] = builtin_space(spec.algo, domain);
        configs[domain] = sobol_sample(spaces[domain], spec.n_configs, spec.master_seed);
    }
    LandscapeTable table;
    table.hp_names.clear();
    for (const auto& def : spaces.begin()->second.defs) table.hp_names.push_back(def.name);

    // A journaled cell counts as done only when every fraction row made it
    // to disk; rows of half-written cells (killed mid-flush) are dropped
    // and the cell reruns.
    std::set<std::tuple<std::string, int, int>> done;
    std::map<std::tuple<std::string, int, int>, std::size_t> fraction_counts;
    std::vector<LandscapeRecord> journaled;
    if (!journal.empty() && std::filesystem::exists(journal)) {
        const CsvTable existing = read_csv(journal);
        const int env_col = existing.require_column("environment");
        const int config_col = existing.require_column("config_id");
        const int seed_col = existing.require_column("seed");
        const int frac_col = existing.require_column("budget_fraction");
        const int steps_col = existing.require_column("steps");
        const int return_col = existing.require_column("mean_return");
        const int div_col = existing.require_column("diverged");
        const int rt_col = existing.require_column("runtime_seconds");
        const int algo_col = existing.require_column("algorithm");
        std::vector<int> hp_cols;
        for (std::size_t i = 0; i < existing.columns.size(); ++i)
            if (existing.columns[i].rfind("hp.", 0) == 0) hp_cols.push_back(static_cast<int>(i));
        for (std::size_t row = 0; row < existing.rows.size(); ++row) {
            LandscapeRecord r;
            r.algorithm = existing.cell(row, algo_col);
            r.environment = existing.cell(row, env_col);
            r.config_id = static_cast<int>(parse_long(existing.cell(row, config_col)));
            r.seed = static_cast<int>(parse_long(existing.cell(row, seed_col)));
            r.budget_fraction = parse_double(existing.cell(row, frac_col));
            r.steps = parse_long(existing.cell(row, steps_col));
            r.mean_return = parse_double(existing.cell(row, return_col));
            r.diverged = parse_long(existing.cell(row, div_col)) != 0;
            r.runtime_seconds = parse_double(existing.cell(row, rt_col));
            for (int col : hp_cols) r.hp_values.push_back(existing.cell(row, col));
            fraction_counts[{r.environment, r.config_id, r.seed}] += 1;
            journaled.push_back(std::move(r));
        }
        for (auto& r : journaled) {
            if (fraction_counts[{r.environment, r.config_id, r.seed}] != spec.budget_fractions.size()) continue;
            done.insert({r.environment, r.config_id, r.seed});
            table.records.push_back(std::move(r));
        }
    }

    std::vector<Cell> cells;
    for (const auto& env : spec.environments) {
        const std::string resolved = env_spec(env).name;
        for (int c = 0; c < spec.n_configs; ++c)
            for (int s = 0; s < spec.n_seeds; ++s)
                if (!done.count({resolved, c, s})) cells.push_back({resolved, c, s});
    }

    std::mutex mutex;
    std::size_t next = 0;
    std::ofstream journal_out;
    if (!journal.empty()) {
        const bool fresh = !std::filesystem::exists(journal);
        journal_out.open(journal, std::ios::app);
        if (fresh) journal_out << header_line(table.hp_names) << "\n";
    }

    auto worker = [&] {
        while (true) {
            Cell cell;
            {
                std::lock_guard lock(mutex);
                if (next >= cells.size()) return;
                cell = cells[next++];
            }
            const Domain domain = domain_of_env(cell.environment);
            const Configuration& config =
                configs[domain][static_cast<std::size_t>(cell.config_id)];
            auto records = run_cell(spec, config, cell);
            const std::vector<std::string> hp_values = config_row(spaces[domain], config);
            {
                std::lock_guard lock(mutex);
                for (auto& r : records) {
                    r.hp_values = hp_values;
                    if (journal_out.is_open()) {
                        journal_out << record_line(r, r.hp_values) << "\n";
                        journal_out.flush();
                    }
                    if (progress) progress(r);
                    table.records.push_back(std::move(r));
                }
            }
        }
    };

    if (parallelism == 1 || cells.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int i = 0; i < parallelism; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    for (const auto& [domain, domain_configs] : configs) {
        for (int c = 0; c < spec.n_configs; ++c)
            table.config_matrix[c] = config_row(spaces.at(domain), domain_configs[static_cast<std::size_t>(c)]);
        break;  // the config matrix follows the first domain's space
    }
    table.sort_by_key();
    return table;
}

void write_landscape_csv(const LandscapeTable& table, const std::filesystem::path& path) {
    std::ostringstream out;
    out << header_line(table.hp_names) << "\n";
    for (const auto& r : table.records) out << record_line(r, r.hp_values) << "\n";
    write_file_atomic(path, out.str());
}

namespace {

LandscapeTable table_from_csv(CsvTable csv, bool strict) {
    static const std::vector<std::string> kBase{"algorithm", "environment",  "config_id",
                                                "seed",      "budget_fraction", "steps",
                                                "mean_return", "diverged",   "runtime_seconds"};
    if (strict) {
        std::vector<std::string> missing, extra;
        for (const auto& col : kBase)
            if (csv.column_index(col) < 0) missing.push_back(col);
        for (const auto& col : csv.columns)
            if (std::find(kBase.begin(), kBase.end(), col) == kBase.end() && col.rfind("hp.", 0) != 0)
                extra.push_back(col);
        if (!missing.empty() || !extra.empty()) {
            std::ostringstream msg;
            msg << "landscape csv schema mismatch;";
            if (!missing.empty()) {
                msg << " missing:";
                for (const auto& c : missing) msg << " " << c;
            }
            if (!extra.empty()) {
                msg << " extra:";
                for (const auto& c : extra) msg << " " << c;
            }
            throw IoError(msg.str());
        }
    } else {
        for (const char* required : {"environment", "config_id", "seed", "mean_return"})
            if (csv.column_index(required) < 0)
                throw IoError("landscape csv schema mismatch; missing: " + std::string(required));
    }

    LandscapeTable table;
    const int algo_col = csv.column_index("algorithm");
    const int env_col = csv.require_column("environment");
    const int config_col = csv.require_column("config_id");
    const int seed_col = csv.require_column("seed");
    const int frac_col = csv.column_index("budget_fraction");
    const int steps_col = csv.column_index("steps");
    const int return_col = csv.require_column("mean_return");
    const int div_col = csv.column_index("diverged");
    const int rt_col = csv.column_index("runtime_seconds");

    std::vector<int> hp_cols;
    for (std::size_t i = 0; i < csv.columns.size(); ++i)
        if (csv.columns[i].rfind("hp.", 0) == 0) {
            table.hp_names.push_back(csv.columns[i].substr(3));
            hp_cols.push_back(static_cast<int>(i));
        }

    for (std::size_t row = 0; row < csv.rows.size(); ++row) {
        LandscapeRecord r;
        r.algorithm = algo_col >= 0 ? csv.cell(row, algo_col) : "unknown";
        r.environment = csv.cell(row, env_col);
        r.config_id = static_cast<int>(parse_long(csv.cell(row, config_col)));
        r.seed = static_cast<int>(parse_long(csv.cell(row, seed_col)));
        r.budget_fraction = frac_col >= 0 ? parse_double(csv.cell(row, frac_col)) : 1.0;
        r.steps = steps_col >= 0 ? parse_long(csv.cell(row, steps_col)) : 0;
        r.mean_return = parse_double(csv.cell(row, return_col));
        r.diverged = div_col >= 0 && parse_long(csv.cell(row, div_col)) != 0;
        r.runtime_seconds = rt_col >= 0 ? parse_double(csv.cell(row, rt_col)) : 0.0;
        for (int col : hp_cols) r.hp_values.push_back(csv.cell(row, col));
        if (!r.hp_values.empty() && !table.config_matrix.count(r.config_id))
            table.config_matrix[r.config_id] = r.hp_values;
        table.records.push_back(std::move(r));
    }
    table.sort_by_key();
    return table;
}

}  // namespace

LandscapeTable load_landscape_csv(const std::filesystem::path& path) {
    return table_from_csv(read_csv(path), /*strict=*/true);
}

LandscapeTable load_landscape_csv(const std::filesystem::path& path, const std::filesystem::path& mapping) {
    CsvTable csv = read_csv(path);
    const CsvTable map_csv = read_csv(mapping);
    if (map_csv.columns.size() != 2)
        throw IoError("column mapping file must have exactly two columns (foreign_name,native_name)");
    std::map<std::string, std::string> renames;
    for (const auto& row : map_csv.rows) renames[row[0]] = row[1];
    for (auto& col : csv.columns) {
        auto it = renames.find(col);
        if (it != renames.end()) col = it->second;
    }
    return table_from_csv(std::move(csv), /*strict=*/false);
}

MeanReturnMatrix mean_return_matrix(const LandscapeTable& table, double fraction) {
    MeanReturnMatrix out;
    out.environments = table.environments();
    std::set<int> config_set;
    for (const auto& r : table.records) config_set.insert(r.config_id);
    out.config_ids.assign(config_set.begin(), config_set.end());

    std::map<std::string, int> env_index;
    for (std::size_t i = 0; i < out.environments.size(); ++i)
        env_index[out.environments[i]] = static_cast<int>(i);
    std::map<int, int> config_index;
    for (std::size_t i = 0; i < out.config_ids.size(); ++i)
        config_index[out.config_ids[i]] = static_cast<int>(i);

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out.config_ids.size()),
                                                 static_cast<Eigen::Index>(out.environments.size()));
    Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(sums.rows(), sums.cols());
    bool fraction_seen = false;
    for (const auto& r : table.records) {
        if (r.budget_fraction != fraction) continue;
        fraction_seen = true;
        const int ci = config_index.at(r.config_id);
        const int ei = env_index.at(r.environment);
        sums(ci, ei) += r.mean_return;
        counts(ci, ei) += 1;
    }
    if (!fraction_seen) throw ConfigError("mean_return_matrix: no records at the requested budget fraction");

    out.values.resize(sums.rows(), sums.cols());
    for (Eigen::Index c = 0; c < sums.rows(); ++c)
        for (Eigen::Index e = 0; e < sums.cols(); ++e) {
            if (counts(c, e) > 0) {
                out.values(c, e) = sums(c, e) / counts(c, e);
            } else {
                out.values(c, e) = std::numeric_limits<double>::quiet_NaN();
                out.missing.emplace_back(out.config_ids[static_cast<std::size_t>(c)],
                                         out.environments[static_cast<std::size_t>(e)]);
            }
        }
    return out;
}

std::pair<double, double> landscape_return_range(const LandscapeTable& table, const std::string& environment) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    bool seen = false;
    for (const auto& r : table.records) {
        if (r.environment != environment || r.budget_fraction != 1.0) continue;
        lo = std::min(lo, r.mean_return);
        hi = std::max(hi, r.mean_return);
        seen = true;
    }
    if (!seen) throw ConfigError("landscape_return_range: environment '" + environment + "' not in the table");
    return {lo, hi};
}

}  // namespace arlb
