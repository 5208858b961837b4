#include <doctest.h>

#include <cmath>
#include <map>

#include "arlb/csv.hpp"
#include "arlb/optimizers.hpp"

using namespace arlb;

namespace {

ConfigurationSpace lr_space() {
    ConfigurationSpace space;
    space.id = "mock";
    HyperparameterDef lr;
    lr.name = "learning_rate";
    lr.kind = HyperparameterDef::Kind::Float;
    lr.lo = 1e-6;
    lr.hi = 1e-1;
    lr.log_scale = true;
    space.defs.push_back(lr);
    HyperparameterDef width;
    width.name = "width";
    width.kind = HyperparameterDef::Kind::Categorical;
    width.choices = {long{32}, long{64}, long{128}};
    space.defs.push_back(width);
    space.defaults = {{"learning_rate", 1e-3}, {"width", long{64}}};
    return space;
}

// Deterministic tabular objective: closeness of log10(lr) to a target,
// scaled by how much budget was spent (monotone fidelity).
class MockObjective : public EvalBackend {
  public:
    explicit MockObjective(double target_log10 = -3.0) : target_(target_log10) {}

    double run(const Configuration& config, long budget, std::uint64_t seed, bool& diverged) override {
        (void)seed;
        diverged = false;
        const double quality = -std::pow(std::log10(config.f("learning_rate")) - target_, 2.0);
        return quality * (2.0 - static_cast<double>(budget) / 10000.0);  // budget <= 10000 assumed
    }

  private:
    double target_;
};

class ConstantObjective : public EvalBackend {
  public:
    double run(const Configuration&, long, std::uint64_t, bool& diverged) override {
        diverged = false;
        return 1.0;
    }
};

// Population backend over a scalar state: training nudges the state toward
// the configured lr, scoring rewards lr near the hidden target.
class MockPopulation : public PbtBackend {
  public:
    explicit MockPopulation(double target_log10) : target_(target_log10) {}

    int spawn(const Configuration&, std::uint64_t seed) override {
        states_.push_back(static_cast<double>(seed % 97) / 97.0);
        return static_cast<int>(states_.size()) - 1;
    }

    double train_and_score(int member, const Configuration& config, long steps) override {
        states_[static_cast<std::size_t>(member)] += static_cast<double>(steps) * 1e-6;
        return -std::pow(std::log10(config.f("learning_rate")) - target_, 2.0);
    }

    void copy_state(int dst, int src) override {
        states_[static_cast<std::size_t>(dst)] = states_[static_cast<std::size_t>(src)];
        ++copies;
    }

    int copies = 0;

  private:
    double target_;
    std::vector<double> states_;
};

}  // namespace

TEST_CASE("random search: single trial is the incumbent, traces are deterministic") {
    const auto space = lr_space();
    MockObjective objective;
    const auto one = random_search(space, objective, {1, 3, 1000, 42});
    REQUIRE(one.trials.size() == 1);
    CHECK(one.incumbent.size() == 1);
    CHECK(one.incumbent[0].second == one.trials[0].mean_objective);

    const auto a = random_search(space, objective, {16, 3, 1000, 7});
    const auto b = random_search(space, objective, {16, 3, 1000, 7});
    REQUIRE(a.trials.size() == b.trials.size());
    for (std::size_t i = 0; i < a.trials.size(); ++i) {
        CHECK(config_hash(a.trials[i].config) == config_hash(b.trials[i].config));
        CHECK(a.trials[i].mean_objective == b.trials[i].mean_objective);
    }
}

TEST_CASE("random search: incumbent matches a brute-force replay of the same RNG stream") {
    const auto space = lr_space();
    MockObjective objective;
    const int n = 32;
    const auto trace = random_search(space, objective, {n, 3, 1000, 99});

    // Independent replay: same stream, same mapping, argmax by hand.
    Rng rng(derive_seed(99, "rs"));
    double best = -1e300;
    std::size_t best_idx = 0;
    for (int t = 0; t < n; ++t) {
        std::vector<double> u(static_cast<std::size_t>(space.dim()));
        for (double& v : u) v = rng.uniform();
        const Configuration config = from_unit(space, u);
        bool diverged = false;
        const double score = objective.run(config, 1000, 0, diverged);
        if (score > best) {
            best = score;
            best_idx = static_cast<std::size_t>(t);
        }
    }
    CHECK(trace.best()->trial_id == static_cast<int>(best_idx));
    CHECK(trace.best()->mean_objective == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("successive halving: rung sizes 9 -> 3 -> 1 at eta 3") {
    const auto space = lr_space();
    MockObjective objective;
    ShaParams params;
    params.eta = 3.0;
    params.min_budget = 1000;
    params.max_budget = 9000;
    params.n_initial = 9;
    params.seeds_per_config = 1;
    params.master_seed = 5;
    const auto trace = successive_halving(space, objective, params);
    std::map<int, int> rung_sizes;
    for (const auto& trial : trace.trials) rung_sizes[trial.round] += 1;
    REQUIRE(rung_sizes.size() == 3);
    CHECK(rung_sizes[0] == 9);
    CHECK(rung_sizes[1] == 3);
    CHECK(rung_sizes[2] == 1);
    CHECK(trace.total_budget() == 9 * 1000 + 3 * 3000 + 1 * 9000);
}

TEST_CASE("successive halving: equal objectives promote the lowest trial ids") {
    const auto space = lr_space();
    ConstantObjective objective;
    ShaParams params;
    params.eta = 3.0;
    params.min_budget = 100;
    params.max_budget = 900;
    params.n_initial = 9;
    params.seeds_per_config = 1;
    params.master_seed = 1;
    const auto trace = successive_halving(space, objective, params);
    // Rung 1 re-evaluates the configs of trials 0, 1, 2 in that order.
    std::vector<const Trial*> rung1;
    for (const auto& trial : trace.trials)
        if (trial.round == 1) rung1.push_back(&trial);
    REQUIRE(rung1.size() == 3);
    for (int k = 0; k < 3; ++k)
        CHECK(config_hash(rung1[static_cast<std::size_t>(k)]->config) ==
              config_hash(trace.trials[static_cast<std::size_t>(k)].config));
}

TEST_CASE("successive halving: monotone fidelity recovers the best latent config") {
    const auto space = lr_space();
    MockObjective objective(-3.0);
    ShaParams params;
    params.eta = 3.0;
    params.min_budget = 500;
    params.max_budget = 4500;
    params.n_initial = 27;
    params.seeds_per_config = 1;
    params.master_seed = 3;
    const auto trace = successive_halving(space, objective, params);

    // The incumbent must be the latent-best initial config, evaluated at
    // the final budget.
    double best_quality = -1e300;
    std::uint64_t best_hash = 0;
    for (const auto& trial : trace.trials) {
        if (trial.round != 0) continue;
        const double q = -std::pow(std::log10(trial.config.f("learning_rate")) + 3.0, 2.0);
        if (q > best_quality) {
            best_quality = q;
            best_hash = config_hash(trial.config);
        }
    }
    const Trial* best = trace.best();
    REQUIRE(best != nullptr);
    CHECK(best->round == 2);
    CHECK(config_hash(best->config) == best_hash);
}

TEST_CASE("pbt: smallest population clones the winner and perturbs") {
    const auto space = lr_space();
    MockPopulation backend(-3.0);
    PbtParams params;
    params.population = 2;
    params.ready_interval = 100;
    params.total_budget = 200;  // two rounds -> one exploit step
    params.truncation = 0.5;
    params.resample_prob = 0.0;  // keep categoricals
    params.master_seed = 21;
    const auto trace = pbt(space, backend, params);
    CHECK(backend.copies == 1);
    REQUIRE(trace.trials.size() == 4);

    // Round-1 configs: winner unchanged, loser = winner's lr x 0.8 or x 1.2.
    const auto& r0a = trace.trials[0];
    const auto& r0b = trace.trials[1];
    const bool a_won = r0a.mean_objective >= r0b.mean_objective;
    const Trial& winner0 = a_won ? r0a : r0b;
    const Trial& loser1 = a_won ? trace.trials[3] : trace.trials[2];
    const double ratio = loser1.config.f("learning_rate") / winner0.config.f("learning_rate");
    CHECK((std::abs(ratio - 0.8) < 1e-12 || std::abs(ratio - 1.2) < 1e-12));
    CHECK(loser1.config.i("width") == winner0.config.i("width"));
}

TEST_CASE("pbt: perturbation multiplies the raw value and clamps to the range") {
    const auto space = lr_space();
    // lr close to the top of the range: x1.2 must clamp at hi.
    MockPopulation backend(-1.0);
    PbtParams params;
    params.population = 2;
    params.ready_interval = 50;
    params.total_budget = 500;
    params.truncation = 0.5;
    params.resample_prob = 0.0;
    params.master_seed = 4;
    const auto trace = pbt(space, backend, params);
    for (const auto& trial : trace.trials) {
        CHECK(trial.config.f("learning_rate") >= 1e-6);
        CHECK(trial.config.f("learning_rate") <= 1e-1);
    }
}

TEST_CASE("pbt: population mean lr moves toward the hidden target") {
    const auto space = lr_space();
    int improved = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        MockPopulation backend(-3.0);
        PbtParams params;
        params.population = 6;
        params.ready_interval = 10;
        params.total_budget = 200;  // 20 rounds
        params.truncation = 0.25;
        params.resample_prob = 0.25;
        params.master_seed = seed;
        const auto trace = pbt(space, backend, params);

        auto mean_log_lr = [&](int round) {
            double sum = 0.0;
            int count = 0;
            for (const auto& trial : trace.trials)
                if (trial.round == round) {
                    sum += std::log10(trial.config.f("learning_rate"));
                    ++count;
                }
            return sum / count;
        };
        const double initial = std::abs(mean_log_lr(0) + 3.0);
        const double final = std::abs(mean_log_lr(19) + 3.0);
        improved += final < initial ? 1 : 0;
    }
    CHECK(improved >= 9);
}

TEST_CASE("every optimizer trace has a monotone incumbent and an exact budget ledger") {
    const auto space = lr_space();
    MockObjective objective;
    const auto rs = random_search(space, objective, {32, 3, 1000, 2});
    CHECK(rs.total_budget() == 32 * 1000);

    MockPopulation population(-3.0);
    PbtParams params;
    params.population = 4;
    params.ready_interval = 25;
    params.total_budget = 100;
    params.master_seed = 8;
    const auto pb = pbt(space, population, params);
    CHECK(pb.total_budget() == 4 * 4 * 25);

    for (const auto* trace : {&rs, &pb}) {
        for (std::size_t i = 1; i < trace->incumbent.size(); ++i) {
            CHECK(trace->incumbent[i].second >= trace->incumbent[i - 1].second);
            CHECK(trace->incumbent[i].first > trace->incumbent[i - 1].first);
        }
    }
}

TEST_CASE("trace csv: one row per (trial, seed) plus incumbent file") {
    const auto space = lr_space();
    MockObjective objective;
    const auto trace = random_search(space, objective, {4, 3, 1000, 13});
    const auto dir = std::filesystem::temp_directory_path() / "arlb-trace-test";
    std::filesystem::create_directories(dir);
    write_trace_csv(trace, space, dir / "trace.csv", dir / "incumbent.csv");
    const CsvTable table = read_csv(dir / "trace.csv");
    CHECK(table.rows.size() == 12);
    CHECK(table.column_index("hp.learning_rate") >= 0);
    const CsvTable incumbent = read_csv(dir / "incumbent.csv");
    CHECK(incumbent.rows.size() == 4);
    std::filesystem::remove_all(dir);
}
