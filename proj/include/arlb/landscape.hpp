#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "arlb/config_space.hpp"
#include "arlb/csv.hpp"

namespace arlb {

struct CampaignSpec {
    Algo algo = Algo::Ppo;
    std::vector<std::string> environments;
    int n_configs = 256;
    int n_seeds = 10;
    int n_eval_episodes = 128;
    std::vector<double> budget_fractions{0.1, 0.25, 0.5, 0.75, 1.0};
    std::uint64_t master_seed = 0;
    long budget_override = 0;  // 0: per-environment default budgets

    void check() const;  // fractions strictly increasing, last == 1.0
};

struct LandscapeRecord {
    std::string algorithm;
    std::string environment;
    int config_id = 0;
    int seed = 0;  // seed index within the campaign
    double budget_fraction = 1.0;
    long steps = 0;
    double mean_return = 0.0;
    bool diverged = false;
    double runtime_seconds = 0.0;
    // Expanded hyperparameter values (space order). Choice sets can differ
    // between domains, so each record carries its own annotation.
    std::vector<std::string> hp_values;
};

struct LandscapeTable {
    std::vector<LandscapeRecord> records;
    std::vector<std::string> hp_names;                       // space order
    std::map<int, std::vector<std::string>> config_matrix;   // config_id -> values as text

    std::vector<std::string> environments() const;  // sorted unique
    std::vector<double> fractions() const;          // sorted unique
    void sort_by_key();
};

// Seed for one campaign cell; reproducing any cell in isolation only needs
// these inputs.
std::uint64_t cell_seed(std::uint64_t master_seed, const std::string& environment, int config_id, int seed_index);

using CampaignProgress = std::function<void(const LandscapeRecord&)>;

// Runs the full (environment x config x seed) grid, evaluating each run at
// every budget fraction. Diverged cells score the environment's floor (flag
// set) rather than aborting. When `journal` names an existing file, cells
// already present there are skipped and the journal is extended, making a
// killed campaign resumable.
LandscapeTable run_campaign(const CampaignSpec& spec, int parallelism,
                            const std::filesystem::path& journal = {}, const CampaignProgress& progress = {});

// Native CSV schema: algorithm,environment,config_id,seed,budget_fraction,
// steps,mean_return,diverged,runtime_seconds then hp.<name> columns.
void write_landscape_csv(const LandscapeTable& table, const std::filesystem::path& path);
LandscapeTable load_landscape_csv(const std::filesystem::path& path);

// Foreign layouts load through a two-column mapping file (foreign_name,
// native_name). Unmapped foreign columns are ignored; of the native columns
// only environment, config_id, seed and mean_return are required, the rest
// default (budget_fraction 1, steps 0, diverged 0, runtime 0).
LandscapeTable load_landscape_csv(const std::filesystem::path& path, const std::filesystem::path& mapping);

// Mean return over seeds per (config, environment) at one budget fraction.
// Missing cells are explicit.
struct MeanReturnMatrix {
    std::vector<std::string> environments;
    std::vector<int> config_ids;
    Eigen::MatrixXd values;  // configs x environments, NaN where missing
    std::vector<std::pair<int, std::string>> missing;
};

MeanReturnMatrix mean_return_matrix(const LandscapeTable& table, double fraction);

// Observed per-environment return range at full budget (floor-clamped
// minimum), for optimizer score normalization.
std::pair<double, double> landscape_return_range(const LandscapeTable& table, const std::string& environment);

}  // namespace arlb
