#pragma once

#include <memory>
#include <string>
#include <vector>

#include "arlb/autorl_env.hpp"
#include "arlb/config_space.hpp"

namespace arlb {

struct Trial {
    enum class Status { Running, Done, Pruned, Diverged };

    int trial_id = 0;
    int round = 0;  // SHA rung / PBT round / 0 for random search
    Configuration config;
    long budget = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<double> objectives;  // one per seed
    double mean_objective = 0.0;
    Status status = Status::Running;
    double wall_seconds = 0.0;
};

struct OptimizerTrace {
    std::vector<Trial> trials;
    // (cumulative budget, best mean objective so far); non-decreasing.
    std::vector<std::pair<long, double>> incumbent;

    long total_budget() const;
    const Trial* best() const;
};

// Static evaluation backend: train a configuration from scratch for
// `budget` steps with the given seed and return the evaluation objective.
class EvalBackend {
  public:
    virtual ~EvalBackend() = default;
    virtual double run(const Configuration& config, long budget, std::uint64_t seed, bool& diverged) = 0;
};

// Backend with persistent population members (dynamic sessions).
class PbtBackend {
  public:
    virtual ~PbtBackend() = default;
    virtual int spawn(const Configuration& config, std::uint64_t seed) = 0;
    virtual double train_and_score(int member, const Configuration& config, long steps) = 0;
    virtual void copy_state(int dst, int src) = 0;
    virtual bool perturbable(const std::string& hyperparameter) const { return true; }
};

// AutoRL-environment adapters for the two backend shapes.
class AutoRlEvalBackend : public EvalBackend {
  public:
    explicit AutoRlEvalBackend(AutoRLEnvConfig base) : base_(std::move(base)) {}
    double run(const Configuration& config, long budget, std::uint64_t seed, bool& diverged) override;

  private:
    AutoRLEnvConfig base_;
};

class AutoRlPbtBackend : public PbtBackend {
  public:
    // Each member gets its own dynamic session under root/member-<i>.
    AutoRlPbtBackend(AutoRLEnvConfig base, std::filesystem::path root);
    int spawn(const Configuration& config, std::uint64_t seed) override;
    double train_and_score(int member, const Configuration& config, long steps) override;
    void copy_state(int dst, int src) override;
    bool perturbable(const std::string& hyperparameter) const override;
    AutoRLSession& session(int member) { return *sessions_.at(static_cast<std::size_t>(member)); }

  private:
    AutoRLEnvConfig base_;
    std::filesystem::path root_;
    std::vector<std::unique_ptr<AutoRLSession>> sessions_;
};

struct RandomSearchParams {
    int n_trials = 32;
    int seeds_per_config = 3;
    long budget = 0;  // per trial
    std::uint64_t master_seed = 0;
};

OptimizerTrace random_search(const ConfigurationSpace& space, EvalBackend& backend, const RandomSearchParams& params);

struct ShaParams {
    double eta = 3.0;
    long min_budget = 0;
    long max_budget = 0;
    int n_initial = 9;
    int seeds_per_config = 3;
    std::uint64_t master_seed = 0;
};

// Successive halving: rungs at budgets min*eta^k, the top 1/eta of each rung
// (by mean objective, ties to the lower trial id) retrained from scratch at
// the next budget.
OptimizerTrace successive_halving(const ConfigurationSpace& space, EvalBackend& backend, const ShaParams& params);

struct PbtParams {
    int population = 4;
    long ready_interval = 0;   // steps between exploit/explore points
    long total_budget = 0;     // per member
    double truncation = 0.25;  // in (0, 0.5]
    double perturb_down = 0.8, perturb_up = 1.2;
    double resample_prob = 0.25;
    std::uint64_t master_seed = 0;
};

OptimizerTrace pbt(const ConfigurationSpace& space, PbtBackend& backend, const PbtParams& params);

// Trace persistence: one row per (trial, seed) with expanded hyperparameter
// columns, plus incumbent.csv (cumulative_budget, best_objective).
void write_trace_csv(const OptimizerTrace& trace, const ConfigurationSpace& space,
                     const std::filesystem::path& trace_path, const std::filesystem::path& incumbent_path);

}  // namespace arlb
