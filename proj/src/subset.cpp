#include "arlb/subset.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

namespace arlb {

Eigen::VectorXd average_ranks(const Eigen::VectorXd& values) {
    const Eigen::Index n = values.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });
    Eigen::VectorXd ranks(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && values[order[static_cast<std::size_t>(j + 1)]] == values[order[static_cast<std::size_t>(i)]])
            ++j;
        // 1-based ranks i+1..j+1 share their average.
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index k = i; k <= j; ++k) ranks[order[static_cast<std::size_t>(k)]] = rank;
        i = j + 1;
    }
    return ranks;
}

Eigen::VectorXd rank_normalize(const Eigen::VectorXd& returns) {
    const Eigen::Index n = returns.size();
    if (n < 2) throw ConfigError("rank_normalize: need at least 2 values");
    const Eigen::VectorXd ranks = average_ranks(returns);
    return (ranks.array() - 1.0) / static_cast<double>(n - 1);
}

Eigen::VectorXd minmax_normalize(const Eigen::VectorXd& returns) {
    const double lo = returns.minCoeff();
    const double hi = returns.maxCoeff();
    if (hi == lo) return Eigen::VectorXd::Constant(returns.size(), 0.5);
    return (returns.array() - lo) / (hi - lo);
}

ScoreMatrix make_score_matrix(const MeanReturnMatrix& returns, ScoreNorm norm) {
    for (const auto& [config, env] : returns.missing)
        throw ConfigError("score matrix: missing cell (config " + std::to_string(config) + ", " + env + ")");
    ScoreMatrix scores;
    scores.environments = returns.environments;
    scores.config_ids = returns.config_ids;
    scores.norm = norm;
    scores.p.resize(returns.values.rows(), returns.values.cols());
    for (Eigen::Index e = 0; e < returns.values.cols(); ++e) {
        switch (norm) {
            case ScoreNorm::Rank: scores.p.col(e) = rank_normalize(returns.values.col(e)); break;
            case ScoreNorm::MinMax: scores.p.col(e) = minmax_normalize(returns.values.col(e)); break;
            case ScoreNorm::Raw: scores.p.col(e) = returns.values.col(e); break;
        }
    }
    return scores;
}

ScoreMatrix make_score_matrix(const LandscapeTable& table, double fraction, ScoreNorm norm) {
    return make_score_matrix(mean_return_matrix(table, fraction), norm);
}

Eigen::VectorXd mean_scores(const ScoreMatrix& scores) { return scores.p.rowwise().mean(); }

OlsFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size()) throw ShapeError("ols_fit: X and y row counts differ");
    if (X.rows() <= X.cols() + 1) throw ConfigError("ols_fit: need more rows than columns plus intercept");
    Eigen::MatrixXd design(X.rows(), X.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(X.cols()) = X;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    OlsFit fit;
    Eigen::VectorXd beta;
    if (qr.rank() < design.cols()) {
        // Ridge fallback with declared jitter.
        const Eigen::MatrixXd gram =
            design.transpose() * design + 1e-10 * Eigen::MatrixXd::Identity(design.cols(), design.cols());
        beta = gram.ldlt().solve(design.transpose() * y);
        fit.degenerate = true;
    } else {
        beta = qr.solve(y);
    }
    fit.intercept = beta[0];
    fit.weights = beta.tail(X.cols());
    fit.predictions = design * beta;
    return fit;
}

std::optional<double> spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw ShapeError("spearman: length mismatch");
    if (a.size() < 2) throw ConfigError("spearman: need at least 2 values");
    const Eigen::VectorXd ra = average_ranks(a);
    const Eigen::VectorXd rb = average_ranks(b);
    const Eigen::VectorXd da = ra.array() - ra.mean();
    const Eigen::VectorXd db = rb.array() - rb.mean();
    const double va = da.squaredNorm();
    const double vb = db.squaredNorm();
    if (va == 0.0 || vb == 0.0) return std::nullopt;
    return std::clamp(da.dot(db) / std::sqrt(va * vb), -1.0, 1.0);
}

namespace {

// Out-of-fold distance is averaged over k deterministic contiguous folds of
// the config axis. A degenerate (null) Spearman counts as the worst
// distance, 2.
double fold_distance(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int k_folds, SubsetDistance distance,
                     std::vector<double>* fold_rhos) {
    const Eigen::Index n = X.rows();
    const Eigen::Index base = n / k_folds;
    const Eigen::Index rem = n % k_folds;
    double total = 0.0;
    Eigen::Index start = 0;
    for (int fold = 0; fold < k_folds; ++fold) {
        const Eigen::Index count = base + (fold < rem ? 1 : 0);
        const Eigen::Index train_count = n - count;
        Eigen::MatrixXd x_train(train_count, X.cols());
        Eigen::VectorXd y_train(train_count);
        x_train.topRows(start) = X.topRows(start);
        y_train.head(start) = y.head(start);
        x_train.bottomRows(train_count - start) = X.bottomRows(n - start - count);
        y_train.tail(train_count - start) = y.tail(n - start - count);

        const OlsFit fit = ols_fit(x_train, y_train);
        const Eigen::MatrixXd x_test = X.middleRows(start, count);
        const Eigen::VectorXd y_test = y.segment(start, count);
        const Eigen::VectorXd y_hat =
            (x_test * fit.weights).array() + fit.intercept;

        double d;
        double rho_value = std::numeric_limits<double>::quiet_NaN();
        if (distance == SubsetDistance::OneMinusSpearman) {
            const auto rho = spearman(y_hat, y_test);
            rho_value = rho ? *rho : std::numeric_limits<double>::quiet_NaN();
            d = rho ? 1.0 - *rho : 2.0;
        } else {
            d = (y_hat - y_test).squaredNorm() / static_cast<double>(count);
            const auto rho = spearman(y_hat, y_test);
            rho_value = rho ? *rho : std::numeric_limits<double>::quiet_NaN();
        }
        if (fold_rhos) fold_rhos->push_back(rho_value);
        total += d;
        start += count;
    }
    return total / static_cast<double>(k_folds);
}

Eigen::MatrixXd columns_of(const Eigen::MatrixXd& p, const std::vector<int>& subset) {
    Eigen::MatrixXd X(p.rows(), static_cast<Eigen::Index>(subset.size()));
    for (std::size_t k = 0; k < subset.size(); ++k) X.col(static_cast<Eigen::Index>(k)) = p.col(subset[k]);
    return X;
}

SubsetResult score_subset(const ScoreMatrix& scores, const Eigen::VectorXd& target, const std::vector<int>& subset,
                          SubsetDistance distance, int k_folds) {
    SubsetResult result;
    result.subset = subset;
    result.distance = distance;
    result.norm = scores.norm;
    const Eigen::MatrixXd X = columns_of(scores.p, subset);
    result.cv_distance = fold_distance(X, target, k_folds, distance, &result.cv_rho_folds);
    double rho_sum = 0.0;
    int rho_count = 0;
    for (double rho : result.cv_rho_folds)
        if (!std::isnan(rho)) {
            rho_sum += rho;
            ++rho_count;
        }
    result.cv_rho_mean = rho_count > 0 ? rho_sum / rho_count : std::numeric_limits<double>::quiet_NaN();
    return result;
}

void refit(const ScoreMatrix& scores, const Eigen::VectorXd& target, SubsetResult& result) {
    const Eigen::MatrixXd X = columns_of(scores.p, result.subset);
    const OlsFit fit = ols_fit(X, target);
    result.weights = fit.weights;
    result.intercept = fit.intercept;
    result.degenerate = fit.degenerate;
    const auto rho = spearman(fit.predictions, target);
    result.train_rho = rho ? *rho : std::numeric_limits<double>::quiet_NaN();
    for (int e : result.subset) result.subset_names.push_back(scores.environments[static_cast<std::size_t>(e)]);
}

long long binomial(int n, int k) {
    long long result = 1;
    for (int i = 0; i < k; ++i) result = result * (n - i) / (i + 1);
    return result;
}

bool subset_less(const SubsetResult& a, const SubsetResult& b) {
    if (a.cv_distance != b.cv_distance) return a.cv_distance < b.cv_distance;
    return a.subset < b.subset;  // lexicographic environment order
}

}  // namespace

std::vector<SubsetResult> select_subset(const ScoreMatrix& scores, int subset_size, SubsetDistance distance,
                                        int k_folds, SubsetSearch search, int beam_width, int top_k) {
    const int n_envs = static_cast<int>(scores.environments.size());
    if (subset_size < 1 || subset_size > n_envs)
        throw ConfigError("select_subset: subset size must be in [1, |environments|]");
    if (k_folds < 2 || k_folds > static_cast<int>(scores.p.rows()))
        throw ConfigError("select_subset: k_folds must be in [2, n_configs]");

    const Eigen::VectorXd target = mean_scores(scores);
    std::vector<SubsetResult> results;

    if (search == SubsetSearch::Exhaustive) {
        if (binomial(n_envs, subset_size) > 1000000)
            throw ConfigError("select_subset: exhaustive search over " + std::to_string(n_envs) + " choose " +
                              std::to_string(subset_size) + " exceeds 1e6 subsets; use beam search");
        std::vector<int> subset(static_cast<std::size_t>(subset_size));
        std::function<void(int, int)> recurse = [&](int next_env, int depth) {
            if (depth == subset_size) {
                results.push_back(score_subset(scores, target, subset, distance, k_folds));
                return;
            }
            for (int e = next_env; e <= n_envs - (subset_size - depth); ++e) {
                subset[static_cast<std::size_t>(depth)] = e;
                recurse(e + 1, depth + 1);
            }
        };
        recurse(0, 0);
    } else {
        if (beam_width < 1) throw ConfigError("select_subset: beam width must be >= 1");
        // Grow subsets one environment at a time, keeping the beam_width
        // best per level; deduplicate by the sorted index set.
        std::vector<SubsetResult> beam;
        for (int level = 1; level <= subset_size; ++level) {
            std::vector<SubsetResult> candidates;
            std::set<std::vector<int>> seen;
            auto expand = [&](const std::vector<int>& base) {
                for (int e = 0; e < n_envs; ++e) {
                    if (std::find(base.begin(), base.end(), e) != base.end()) continue;
                    std::vector<int> subset = base;
                    subset.push_back(e);
                    std::sort(subset.begin(), subset.end());
                    if (!seen.insert(subset).second) continue;
                    candidates.push_back(score_subset(scores, target, subset, distance, k_folds));
                }
            };
            if (level == 1) {
                expand({});
            } else {
                for (const auto& r : beam) expand(r.subset);
            }
            std::sort(candidates.begin(), candidates.end(), subset_less);
            if (static_cast<int>(candidates.size()) > beam_width) candidates.resize(static_cast<std::size_t>(beam_width));
            beam = std::move(candidates);
        }
        results = std::move(beam);
    }

    std::sort(results.begin(), results.end(), subset_less);
    if (top_k > 0 && static_cast<int>(results.size()) > top_k) results.resize(static_cast<std::size_t>(top_k));
    for (auto& r : results) refit(scores, target, r);
    return results;
}

std::vector<CorrelationVsSize> correlation_vs_size(const ScoreMatrix& scores, int max_subset_size,
                                                   SubsetDistance distance, int k_folds, int top_k) {
    std::vector<CorrelationVsSize> out;
    for (int c = 1; c <= max_subset_size; ++c) {
        const auto results = select_subset(scores, c, distance, k_folds, SubsetSearch::Exhaustive, 0, top_k);
        for (std::size_t k = 0; k < results.size(); ++k)
            out.push_back({c, static_cast<int>(k) + 1, results[k]});
    }
    return out;
}

BudgetCorrelation budget_correlations(const LandscapeTable& table, const std::string& environment) {
    BudgetCorrelation out;
    out.environment = environment;
    out.fractions = table.fractions();
    if (out.fractions.size() < 2) throw ConfigError("budget_correlations: need at least 2 budget fractions");

    std::vector<Eigen::VectorXd> columns;
    for (double fraction : out.fractions) {
        const MeanReturnMatrix m = mean_return_matrix(table, fraction);
        const auto it = std::find(m.environments.begin(), m.environments.end(), environment);
        if (it == m.environments.end())
            throw ConfigError("budget_correlations: environment '" + environment + "' not in the table");
        columns.push_back(m.values.col(it - m.environments.begin()));
    }

    const auto n = static_cast<Eigen::Index>(out.fractions.size());
    out.rho.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto rho = spearman(columns[static_cast<std::size_t>(i)], columns[static_cast<std::size_t>(j)]);
            out.rho(i, j) = rho ? *rho : std::numeric_limits<double>::quiet_NaN();
        }
    return out;
}

double normalize_optimizer_score(double objective, double landscape_min, double landscape_max, double floor) {
    const double lo = std::max(landscape_min, floor);
    if (landscape_max <= lo)
        throw ConfigError("normalize_optimizer_score: degenerate landscape (max <= effective min)");
    return std::clamp((objective - lo) / (landscape_max - lo), 0.0, 1.0);
}

void write_selection_report(const std::vector<SubsetResult>& results, const std::filesystem::path& path) {
    if (results.empty()) throw ConfigError("write_selection_report: no results");
    const auto C = results.front().subset.size();
    CsvTable table;
    table.columns = {"rank", "C"};
    for (std::size_t i = 1; i <= C; ++i) table.columns.push_back("env_" + std::to_string(i));
    for (std::size_t i = 1; i <= C; ++i) table.columns.push_back("weight_" + std::to_string(i));
    for (const char* col : {"intercept", "train_rho", "cv_rho_mean", "cv_rho_min", "cv_rho_max", "distance",
                            "normalization"})
        table.columns.emplace_back(col);
    int rank = 1;
    for (const auto& r : results) {
        std::vector<std::string> row{std::to_string(rank++), std::to_string(C)};
        for (const auto& name : r.subset_names) row.push_back(name);
        for (Eigen::Index k = 0; k < r.weights.size(); ++k) row.push_back(format_double(r.weights[k]));
        row.push_back(format_double(r.intercept));
        row.push_back(format_double(r.train_rho));
        row.push_back(format_double(r.cv_rho_mean));
        double lo = std::numeric_limits<double>::infinity(), hi = -std::numeric_limits<double>::infinity();
        for (double rho : r.cv_rho_folds)
            if (!std::isnan(rho)) {
                lo = std::min(lo, rho);
                hi = std::max(hi, rho);
            }
        row.push_back(format_double(lo));
        row.push_back(format_double(hi));
        row.emplace_back(r.distance == SubsetDistance::OneMinusSpearman ? "spearman" : "mse");
        row.emplace_back(r.norm == ScoreNorm::Rank ? "rank" : (r.norm == ScoreNorm::MinMax ? "minmax" : "raw"));
        table.rows.push_back(std::move(row));
    }
    write_csv(table, path);
}

void write_correlation_vs_size(const std::vector<CorrelationVsSize>& rows, const std::filesystem::path& path) {
    CsvTable table;
    table.columns = {"C", "rank", "environments", "cv_rho_mean", "cv_rho_min", "cv_rho_max", "train_rho"};
    for (const auto& entry : rows) {
        std::string envs;
        for (std::size_t k = 0; k < entry.result.subset_names.size(); ++k)
            envs += (k ? "|" : "") + entry.result.subset_names[k];
        double lo = std::numeric_limits<double>::infinity(), hi = -std::numeric_limits<double>::infinity();
        for (double rho : entry.result.cv_rho_folds)
            if (!std::isnan(rho)) {
                lo = std::min(lo, rho);
                hi = std::max(hi, rho);
            }
        table.rows.push_back({std::to_string(entry.subset_size), std::to_string(entry.rank), envs,
                              format_double(entry.result.cv_rho_mean), format_double(lo), format_double(hi),
                              format_double(entry.result.train_rho)});
    }
    write_csv(table, path);
}

void write_budget_correlation(const std::vector<BudgetCorrelation>& rows, const std::filesystem::path& path) {
    CsvTable table;
    table.columns = {"environment", "fraction_i", "fraction_j", "rho"};
    for (const auto& entry : rows)
        for (Eigen::Index i = 0; i < entry.rho.rows(); ++i)
            for (Eigen::Index j = 0; j < entry.rho.cols(); ++j)
                table.rows.push_back({entry.environment, format_double(entry.fractions[static_cast<std::size_t>(i)]),
                                      format_double(entry.fractions[static_cast<std::size_t>(j)]),
                                      std::isnan(entry.rho(i, j)) ? "" : format_double(entry.rho(i, j))});
    write_csv(table, path);
}

}  // namespace arlb
