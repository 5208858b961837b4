#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "arlb/trainer.hpp"

namespace arlb {

enum class SessionMode { Static, Dynamic };

struct AutoRLEnvConfig {
    Algo algo = Algo::Ppo;
    std::string env_name;
    long total_budget = 0;
    SessionMode mode = SessionMode::Static;
    int n_eval_episodes = 128;
    bool want_runtime = true;   // runtime_seconds objective
    bool want_features = false; // gradient/loss state features
    std::filesystem::path checkpoint_dir;  // required in dynamic mode
};

struct Objectives {
    double mean_return = 0.0;
    double runtime_seconds = 0.0;
    bool diverged = false;
};

struct StateFeatures {
    std::optional<double> grad_norm_mean;
    std::optional<double> grad_norm_var;
    std::optional<double> loss_mean;
};

// The HPO-facing session. One optimization step picks a configuration and a
// step budget; the session trains (from scratch in static mode, continuing
// the persistent state in dynamic mode), evaluates, and reports objectives
// plus optional state features. Diverged training surfaces as the
// environment's floor score with a flag, never as an exception.
class AutoRLSession {
  public:
    AutoRLSession(AutoRLEnvConfig cfg, std::uint64_t seed);
    ~AutoRLSession();

    AutoRLSession(const AutoRLSession&) = delete;
    AutoRLSession& operator=(const AutoRLSession&) = delete;

    std::pair<Objectives, StateFeatures> step(const Configuration& lambda, long budget);

    // Dynamic mode only. Checkpoints are subdirectories of checkpoint_dir.
    std::string checkpoint(const std::string& tag = "");
    void restore(const std::string& id);
    std::string duplicate(const std::string& id);

    // Loads a checkpoint produced by another session (population methods
    // copy winners across members this way).
    void restore_from(const std::filesystem::path& checkpoint_path);

    long consumed() const { return consumed_; }
    const AutoRLEnvConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }
    const TrainingState* training_state() const { return state_ ? &*state_ : nullptr; }
    std::filesystem::path checkpoint_path(const std::string& id) const;

  private:
    void log_step(const Configuration& lambda, long budget, const Objectives& objectives,
                  const StateFeatures& features);

    AutoRLEnvConfig cfg_;
    std::uint64_t seed_ = 0;
    std::optional<TrainingState> state_;
    long consumed_ = 0;
    int step_index_ = 0;
    int checkpoint_counter_ = 0;
    bool diverged_latch_ = false;
    bool lock_held_ = false;
};

}  // namespace arlb
