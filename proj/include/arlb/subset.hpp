#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "arlb/landscape.hpp"

namespace arlb {

enum class ScoreNorm { Rank, MinMax, Raw };
enum class SubsetDistance { OneMinusSpearman, Mse };
enum class SubsetSearch { Exhaustive, Beam };

// Average ranks (1-based, ties averaged).
Eigen::VectorXd average_ranks(const Eigen::VectorXd& values);

// Ranks mapped to [0, 1]: (rank - 1) / (n - 1). Ties share their average
// rank; an all-equal column becomes 0.5 everywhere.
Eigen::VectorXd rank_normalize(const Eigen::VectorXd& returns);

Eigen::VectorXd minmax_normalize(const Eigen::VectorXd& returns);

// Per-environment normalized scores p[config, environment].
struct ScoreMatrix {
    std::vector<std::string> environments;
    std::vector<int> config_ids;
    Eigen::MatrixXd p;  // configs x environments
    ScoreNorm norm = ScoreNorm::Rank;
};

ScoreMatrix make_score_matrix(const LandscapeTable& table, double fraction, ScoreNorm norm);
ScoreMatrix make_score_matrix(const MeanReturnMatrix& returns, ScoreNorm norm);

// Mean score across environments per configuration.
Eigen::VectorXd mean_scores(const ScoreMatrix& scores);

struct OlsFit {
    Eigen::VectorXd weights;
    double intercept = 0.0;
    Eigen::VectorXd predictions;
    bool degenerate = false;  // rank-deficient design, ridge fallback used
};

// Least squares with intercept. Rank-deficient designs fall back to a ridge
// solve with jitter 1e-10 and set the degeneracy flag.
OlsFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// Spearman rank correlation; empty when either input has zero rank variance.
std::optional<double> spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct SubsetResult {
    std::vector<int> subset;  // environment indices into the ScoreMatrix
    std::vector<std::string> subset_names;
    Eigen::VectorXd weights;
    double intercept = 0.0;
    double train_rho = 0.0;
    double cv_distance = 0.0;  // selection key: mean out-of-fold distance
    double cv_rho_mean = 0.0;
    std::vector<double> cv_rho_folds;
    SubsetDistance distance = SubsetDistance::OneMinusSpearman;
    ScoreNorm norm = ScoreNorm::Rank;
    bool degenerate = false;
};

// Scores every size-C subset by mean out-of-fold distance over k contiguous
// config folds, ascending; ties resolved by lexicographic environment
// order. Weights are refit on all configurations. `top_k` limits the
// returned list (0 keeps everything).
std::vector<SubsetResult> select_subset(const ScoreMatrix& scores, int subset_size, SubsetDistance distance,
                                        int k_folds, SubsetSearch search = SubsetSearch::Exhaustive,
                                        int beam_width = 0, int top_k = 3);

struct CorrelationVsSize {
    int subset_size = 0;
    int rank = 0;  // placement among subsets of this size (1 = best)
    SubsetResult result;
};

std::vector<CorrelationVsSize> correlation_vs_size(const ScoreMatrix& scores, int max_subset_size,
                                                   SubsetDistance distance, int k_folds, int top_k = 3);

struct BudgetCorrelation {
    std::string environment;
    std::vector<double> fractions;
    Eigen::MatrixXd rho;  // pairwise Spearman, NaN where degenerate
};

BudgetCorrelation budget_correlations(const LandscapeTable& table, const std::string& environment);

// Appendix-style optimizer score normalization:
// (r - max(landscape_min, floor)) / (landscape_max - max(landscape_min, floor)),
// clamped to [0, 1].
double normalize_optimizer_score(double objective, double landscape_min, double landscape_max, double floor);

// Report writers (selection_report.csv / correlation_vs_size.csv /
// budget_correlation.csv schemas).
void write_selection_report(const std::vector<SubsetResult>& results, const std::filesystem::path& path);
void write_correlation_vs_size(const std::vector<CorrelationVsSize>& rows, const std::filesystem::path& path);
void write_budget_correlation(const std::vector<BudgetCorrelation>& rows, const std::filesystem::path& path);

}  // namespace arlb
