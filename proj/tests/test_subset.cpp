#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "arlb/rng.hpp"
#include "arlb/subset.hpp"

using namespace arlb;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Independent average-rank routine: double loop, no sorting.
VectorXd ranks_bruteforce(const VectorXd& values) {
    const Eigen::Index n = values.size();
    VectorXd ranks(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double below = 0.0, equal = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            below += values[j] < values[i] ? 1.0 : 0.0;
            equal += values[j] == values[i] ? 1.0 : 0.0;
        }
        ranks[i] = below + 0.5 * (equal + 1.0);
    }
    return ranks;
}

// Normal-equation OLS oracle with explicit inverse.
std::pair<VectorXd, double> ols_bruteforce(const MatrixXd& X, const VectorXd& y) {
    MatrixXd design(X.rows(), X.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(X.cols()) = X;
    const MatrixXd gram = design.transpose() * design;
    const VectorXd beta = gram.inverse() * design.transpose() * y;
    return {beta.tail(X.cols()), beta[0]};
}

double pearson(const VectorXd& a, const VectorXd& b) {
    const VectorXd da = a.array() - a.mean();
    const VectorXd db = b.array() - b.mean();
    return da.dot(db) / std::sqrt(da.squaredNorm() * db.squaredNorm());
}

VectorXd random_vec(Eigen::Index n, Rng& rng) {
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
    return v;
}

ScoreMatrix matrix_of(const MatrixXd& p, ScoreNorm norm = ScoreNorm::Rank) {
    ScoreMatrix scores;
    scores.p = p;
    scores.norm = norm;
    for (Eigen::Index e = 0; e < p.cols(); ++e) scores.environments.push_back("env-" + std::to_string(e));
    for (Eigen::Index c = 0; c < p.rows(); ++c) scores.config_ids.push_back(static_cast<int>(c));
    return scores;
}

// The planted construction lives directly in rank space: columns A and B
// are random permutations of the rank grid; the other four mix them as
// 0.8*A + 0.2*B plus zero-sum column noise and a small shared term, so the
// matrix mean is exactly 0.7*A + 0.3*B + noise (sigma in rank units). The
// zero-sum part keeps competitor columns noisy without letting them track
// the target's noise.
MatrixXd planted_matrix(int n_configs, double sigma_ranks, Rng& rng, int* col_a, int* col_b) {
    MatrixXd raw(n_configs, 6);
    *col_a = 0;
    *col_b = 1;
    for (int col = 0; col < 2; ++col) {
        std::vector<int> perm(static_cast<std::size_t>(n_configs));
        std::iota(perm.begin(), perm.end(), 0);
        for (int k = n_configs - 1; k > 0; --k)
            std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(rng.uniform_int(0, k))]);
        for (int c = 0; c < n_configs; ++c)
            raw(c, col) = static_cast<double>(perm[static_cast<std::size_t>(c)]) / (n_configs - 1);
    }
    const double eps_std = sigma_ranks / static_cast<double>(n_configs - 1);
    for (int c = 0; c < n_configs; ++c) {
        const double eps = eps_std * rng.normal();
        double zeta[4];
        double zeta_mean = 0.0;
        for (double& z : zeta) {
            z = 0.2 * rng.normal();
            zeta_mean += z;
        }
        zeta_mean /= 4.0;
        for (int e = 0; e < 4; ++e)
            raw(c, e + 2) = 0.8 * raw(c, 0) + 0.2 * raw(c, 1) + (zeta[e] - zeta_mean) + 1.5 * eps;
    }
    return raw;
}

ScoreMatrix rank_matrix_from_raw(const MatrixXd& raw) {
    MatrixXd p(raw.rows(), raw.cols());
    for (Eigen::Index e = 0; e < raw.cols(); ++e) p.col(e) = rank_normalize(raw.col(e));
    return matrix_of(p, ScoreNorm::Rank);
}

}  // namespace

TEST_CASE("rank_normalize: oracles") {
    VectorXd v(3);
    v << 1, 2, 3;
    const VectorXd p = rank_normalize(v);
    CHECK(p[0] == 0.0);
    CHECK(p[1] == 0.5);
    CHECK(p[2] == 1.0);

    VectorXd tied(3);
    tied << 5, 5, 9;
    const VectorXd pt = rank_normalize(tied);
    CHECK(pt[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(pt[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(pt[2] == doctest::Approx(1.0).epsilon(1e-15));

    // Strictly increasing transforms leave the output unchanged.
    Rng rng(1);
    const VectorXd x = random_vec(40, rng);
    const VectorXd fx = (3.0 * x).array().exp() + 7.0;
    CHECK((rank_normalize(x) - rank_normalize(fx)).cwiseAbs().maxCoeff() == 0.0);

    // All-equal inputs collapse to the declared 0.5 convention.
    const VectorXd flat = VectorXd::Constant(8, 3.25);
    CHECK((rank_normalize(flat).array() == 0.5).all());

    CHECK_THROWS_AS(rank_normalize(VectorXd::Constant(1, 0.0)), ConfigError);
}

TEST_CASE("average_ranks matches the brute-force oracle on 1000 random instances") {
    Rng rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
        const Eigen::Index n = 2 + rng.uniform_int(0, 30);
        VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i)
            v[i] = rng.bernoulli(0.3) ? static_cast<double>(rng.uniform_int(0, 4)) : rng.normal();
        const VectorXd got = average_ranks(v);
        const VectorXd expected = ranks_bruteforce(v);
        CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("mean_scores: brute-force loop agreement") {
    Rng rng(3);
    MatrixXd p(5, 8);
    for (int c = 0; c < 5; ++c)
        for (int e = 0; e < 8; ++e) p(c, e) = rng.uniform();
    const ScoreMatrix scores = matrix_of(p);
    const VectorXd mean = mean_scores(scores);
    for (int c = 0; c < 5; ++c) {
        double sum = 0.0;
        for (int e = 0; e < 8; ++e) sum += p(c, e);
        CHECK(std::abs(mean[c] - sum / 8.0) < 1e-15);
    }

    MatrixXd two(2, 2);
    two << 0, 1, 1, 0;
    CHECK((mean_scores(matrix_of(two)).array() == 0.5).all());

    MatrixXd single(3, 1);
    single << 0.1, 0.7, 0.4;
    CHECK((mean_scores(matrix_of(single)) - single.col(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ols_fit: exact cases and the normal-equation oracle") {
    Rng rng(4);

    SUBCASE("the column mean is an exact linear function of all columns") {
        MatrixXd X(32, 4);
        for (int r = 0; r < 32; ++r)
            for (int c = 0; c < 4; ++c) X(r, c) = rng.uniform();
        const VectorXd y = X.rowwise().mean();
        const OlsFit fit = ols_fit(X, y);
        CHECK_FALSE(fit.degenerate);
        for (int c = 0; c < 4; ++c) CHECK(fit.weights[c] == doctest::Approx(0.25).epsilon(1e-10));
        CHECK(std::abs(fit.intercept) < 1e-10);
        CHECK((fit.predictions - y).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("recovers weight 2 and intercept -0.3 exactly") {
        MatrixXd X(20, 2);
        for (int r = 0; r < 20; ++r)
            for (int c = 0; c < 2; ++c) X(r, c) = rng.normal();
        const VectorXd y = 2.0 * X.col(0).array() - 0.3;
        const OlsFit fit = ols_fit(X, y);
        CHECK(fit.weights[0] == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(std::abs(fit.weights[1]) < 1e-9);
        CHECK(fit.intercept == doctest::Approx(-0.3).epsilon(1e-9));
    }
    SUBCASE("random instances match the explicit normal equations within 1e-9") {
        for (int trial = 0; trial < 200; ++trial) {
            const int rows = 10 + static_cast<int>(rng.uniform_int(0, 20));
            const int cols = 1 + static_cast<int>(rng.uniform_int(0, 3));
            MatrixXd X(rows, cols);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) X(r, c) = rng.normal();
            const VectorXd y = random_vec(rows, rng);
            const OlsFit fit = ols_fit(X, y);
            const auto [weights, intercept] = ols_bruteforce(X, y);
            CHECK((fit.weights - weights).cwiseAbs().maxCoeff() < 1e-9);
            CHECK(std::abs(fit.intercept - intercept) < 1e-9);
        }
    }
    SUBCASE("rank-deficient design falls back to ridge with a flag") {
        MatrixXd X(16, 2);
        for (int r = 0; r < 16; ++r) {
            X(r, 0) = rng.normal();
            X(r, 1) = 2.0 * X(r, 0);  // exactly collinear
        }
        const OlsFit fit = ols_fit(X, random_vec(16, rng));
        CHECK(fit.degenerate);
        CHECK(fit.weights.allFinite());
    }
}

TEST_CASE("spearman: oracles") {
    VectorXd a(4), b(4);
    a << 1, 2, 3, 4;
    b << 10, 20, 30, 40;
    CHECK(*spearman(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(*spearman(a, b) == doctest::Approx(1.0).epsilon(1e-15));
    const VectorXd reversed = b.reverse();
    CHECK(*spearman(a, reversed) == doctest::Approx(-1.0).epsilon(1e-15));

    // Hand computation with average ranks: {1,2,2,3} vs {1,3,2,4} -> 3/sqrt(10).
    VectorXd ta(4), tb(4);
    ta << 1, 2, 2, 3;
    tb << 1, 3, 2, 4;
    CHECK(*spearman(ta, tb) == doctest::Approx(3.0 / std::sqrt(10.0)).epsilon(1e-12));

    CHECK_FALSE(spearman(VectorXd::Constant(4, 1.0), tb).has_value());  // zero variance -> null
    CHECK_THROWS_AS(spearman(VectorXd::Constant(5, 1.0), tb), ShapeError);

    // 1000 random instances against rank-based Pearson.
    Rng rng(6);
    for (int trial = 0; trial < 1000; ++trial) {
        const Eigen::Index n = 3 + rng.uniform_int(0, 20);
        VectorXd x(n), y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            x[i] = rng.bernoulli(0.2) ? 1.0 : rng.normal();
            y[i] = rng.bernoulli(0.2) ? 1.0 : rng.normal();
        }
        const auto rho = spearman(x, y);
        REQUIRE(rho.has_value());
        const double expected = pearson(ranks_bruteforce(x), ranks_bruteforce(y));
        CHECK(std::abs(*rho - expected) < 1e-9);
    }
}

TEST_CASE("select_subset: full subset predicts itself perfectly") {
    // Continuous scores keep the target tie-free, so exact self-prediction
    // yields rho == 1 rather than tripping over tied means.
    Rng rng(7);
    MatrixXd raw(40, 5);
    for (int c = 0; c < 40; ++c)
        for (int e = 0; e < 5; ++e) raw(c, e) = rng.uniform();
    const ScoreMatrix scores = matrix_of(raw);
    const auto results = select_subset(scores, 5, SubsetDistance::OneMinusSpearman, 5);
    REQUIRE(results.size() == 1);
    CHECK(std::abs(results.front().cv_rho_mean - 1.0) < 1e-9);
    CHECK(std::abs(results.front().train_rho - 1.0) < 1e-9);
}

TEST_CASE("select_subset: planted two-column model is recovered") {
    Rng rng(8);
    for (int instance = 0; instance < 5; ++instance) {
        int a, b;
        const MatrixXd raw = planted_matrix(64, 0.01, rng, &a, &b);
        const ScoreMatrix scores = matrix_of(raw, ScoreNorm::Rank);
        const auto results = select_subset(scores, 2, SubsetDistance::OneMinusSpearman, 5);
        REQUIRE_FALSE(results.empty());
        CHECK(results.front().subset == std::vector<int>{a, b});
        CHECK(results.front().cv_rho_mean >= 0.99);
    }
}

TEST_CASE("select_subset: beam with full width equals exhaustive exactly") {
    Rng rng(9);
    MatrixXd raw(24, 6);
    for (int c = 0; c < 24; ++c)
        for (int e = 0; e < 6; ++e) raw(c, e) = rng.normal();
    const ScoreMatrix scores = rank_matrix_from_raw(raw);
    for (int size = 1; size <= 3; ++size) {
        const auto exhaustive = select_subset(scores, size, SubsetDistance::OneMinusSpearman, 4,
                                              SubsetSearch::Exhaustive, 0, 0);
        const auto beam =
            select_subset(scores, size, SubsetDistance::OneMinusSpearman, 4, SubsetSearch::Beam, 1000, 0);
        REQUIRE(exhaustive.size() == beam.size());
        for (std::size_t i = 0; i < exhaustive.size(); ++i) {
            CHECK(exhaustive[i].subset == beam[i].subset);
            CHECK(exhaustive[i].cv_distance == beam[i].cv_distance);
        }
    }
}

TEST_CASE("select_subset: invariances") {
    Rng rng(10);
    MatrixXd raw(48, 6);
    for (int c = 0; c < 48; ++c)
        for (int e = 0; e < 6; ++e) raw(c, e) = rng.normal();

    SUBCASE("monotone transforms of raw returns leave rank-based selection unchanged") {
        MatrixXd warped = raw;
        for (Eigen::Index e = 0; e < warped.cols(); ++e)
            warped.col(e) = (warped.col(e).array() * 2.5).exp() + 3.0;
        const auto base = select_subset(rank_matrix_from_raw(raw), 2, SubsetDistance::OneMinusSpearman, 5);
        const auto transformed =
            select_subset(rank_matrix_from_raw(warped), 2, SubsetDistance::OneMinusSpearman, 5);
        REQUIRE(base.size() == transformed.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
            CHECK(base[i].subset == transformed[i].subset);
            CHECK(base[i].cv_distance == doctest::Approx(transformed[i].cv_distance).epsilon(1e-12));
        }
    }
    SUBCASE("permuting environments permutes indices but not the selected set or rho") {
        std::vector<int> perm{3, 0, 5, 1, 4, 2};
        MatrixXd permuted(raw.rows(), raw.cols());
        for (int e = 0; e < 6; ++e) permuted.col(e) = raw.col(perm[static_cast<std::size_t>(e)]);
        const auto base = select_subset(rank_matrix_from_raw(raw), 2, SubsetDistance::OneMinusSpearman, 5);
        const auto shuffled = select_subset(rank_matrix_from_raw(permuted), 2, SubsetDistance::OneMinusSpearman, 5);
        std::vector<int> mapped;
        for (int e : shuffled.front().subset) mapped.push_back(perm[static_cast<std::size_t>(e)]);
        std::sort(mapped.begin(), mapped.end());
        CHECK(mapped == base.front().subset);
        CHECK(shuffled.front().cv_rho_mean == doctest::Approx(base.front().cv_rho_mean).epsilon(1e-12));
    }
}

TEST_CASE("select_subset: refit consistency and distance bounds") {
    Rng rng(11);
    MatrixXd raw(30, 5);
    for (int c = 0; c < 30; ++c)
        for (int e = 0; e < 5; ++e) raw(c, e) = rng.normal();
    const ScoreMatrix scores = rank_matrix_from_raw(raw);
    for (const auto& distance : {SubsetDistance::OneMinusSpearman, SubsetDistance::Mse}) {
        const auto results = select_subset(scores, 2, distance, 5);
        for (const auto& r : results) {
            if (distance == SubsetDistance::OneMinusSpearman) {
                CHECK(r.cv_distance >= 0.0);
                CHECK(r.cv_distance <= 2.0);
            } else {
                CHECK(r.cv_distance >= 0.0);
            }
            // Recompute the train rho from the reported weights.
            VectorXd predictions = VectorXd::Constant(scores.p.rows(), r.intercept);
            for (std::size_t k = 0; k < r.subset.size(); ++k)
                predictions += r.weights[static_cast<Eigen::Index>(k)] * scores.p.col(r.subset[k]);
            const auto rho = spearman(predictions, mean_scores(scores));
            REQUIRE(rho.has_value());
            CHECK(std::abs(r.train_rho - *rho) < 1e-12);
        }
    }
}

TEST_CASE("select_subset: exhaustive guard suggests beam search") {
    MatrixXd raw = MatrixXd::Random(40, 25);
    const ScoreMatrix scores = rank_matrix_from_raw(raw);
    CHECK_THROWS_WITH_AS(select_subset(scores, 12, SubsetDistance::OneMinusSpearman, 5),
                         doctest::Contains("beam"), ConfigError);
}

TEST_CASE("correlation_vs_size: shape and endpoint") {
    Rng rng(12);
    int a, b;
    const MatrixXd raw = planted_matrix(40, 0.02, rng, &a, &b);
    const ScoreMatrix scores = matrix_of(raw, ScoreNorm::Rank);
    const auto curve = correlation_vs_size(scores, 6, SubsetDistance::OneMinusSpearman, 5);
    // One row per (C, rank <= 3) except where fewer subsets exist.
    int rows_at_6 = 0;
    double best_at[7] = {0, 0, 0, 0, 0, 0, 0};
    for (const auto& entry : curve) {
        CHECK(entry.rank <= 3);
        if (entry.subset_size == 6) ++rows_at_6;
        if (entry.rank == 1) best_at[entry.subset_size] = entry.result.cv_rho_mean;
    }
    CHECK(rows_at_6 == 1);  // only one full subset
    CHECK(std::abs(best_at[6] - 1.0) < 1e-9);
    for (int c = 2; c <= 6; ++c) CHECK(best_at[c] >= best_at[c - 1] - 1e-9);  // planted monotonicity
}

TEST_CASE("budget_correlations: monotone and anti-monotone synthetic landscapes") {
    // Build a table with three fractions where every budget's returns are a
    // monotone (or anti-monotone) function of the final returns.
    auto build = [](bool monotone) {
        LandscapeTable table;
        Rng rng(13);
        std::vector<double> final_returns;
        for (int c = 0; c < 16; ++c) final_returns.push_back(rng.normal());
        for (double fraction : {0.5, 0.75, 1.0}) {
            for (int c = 0; c < 16; ++c) {
                LandscapeRecord r;
                r.algorithm = "ppo";
                r.environment = "synthetic";
                r.config_id = c;
                r.seed = 0;
                r.budget_fraction = fraction;
                const double x = final_returns[static_cast<std::size_t>(c)];
                if (fraction == 1.0)
                    r.mean_return = x;
                else
                    r.mean_return = monotone ? std::exp(0.5 * x) + fraction : -(2.0 * x + fraction);
                table.records.push_back(r);
            }
        }
        table.sort_by_key();
        return table;
    };

    const BudgetCorrelation mono = budget_correlations(build(true), "synthetic");
    for (Eigen::Index i = 0; i < mono.rho.rows(); ++i) {
        CHECK(mono.rho(i, i) == doctest::Approx(1.0).epsilon(1e-12));
        for (Eigen::Index j = 0; j < mono.rho.cols(); ++j)
            CHECK(mono.rho(i, j) == doctest::Approx(1.0).epsilon(1e-12));
    }
    const BudgetCorrelation anti = budget_correlations(build(false), "synthetic");
    CHECK(anti.rho(0, 2) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(anti.rho(2, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(anti.rho(0, 1) == doctest::Approx(1.0).epsilon(1e-12));  // both anti-monotone to final
}

TEST_CASE("normalize_optimizer_score: affine map with floor and clamping") {
    CHECK(normalize_optimizer_score(500.0, 0.0, 500.0, -1e9) == 1.0);
    CHECK(normalize_optimizer_score(-300.0, -250.0, 500.0, -200.0) == 0.0);  // below floor clamps to 0
    const double mid = normalize_optimizer_score(150.0, 100.0, 200.0, -1e9);
    CHECK(mid == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(normalize_optimizer_score(125.0, 100.0, 200.0, -1e9) ==
          doctest::Approx((125.0 - 100.0) / 100.0).epsilon(1e-12));
    CHECK_THROWS_AS(normalize_optimizer_score(1.0, 5.0, 5.0, -1e9), ConfigError);
}
