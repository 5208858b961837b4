#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arlb/config_space.hpp"
#include "arlb/env.hpp"
#include "arlb/mlp.hpp"
#include "arlb/replay_buffer.hpp"
#include "arlb/rng.hpp"

namespace arlb {

// Per-slice training diagnostics: one entry per gradient update, plus the
// returns of training episodes that finished during the slice.
struct Metrics {
    std::vector<double> policy_losses;
    std::vector<double> value_losses;
    std::vector<double> entropies;
    std::vector<double> grad_norms;
    std::vector<double> losses;
    std::vector<double> episode_returns;
    std::vector<int> episode_lengths;

    long updates() const { return static_cast<long>(grad_norms.size()); }
    void merge(const Metrics& other);
};

double mean_of(const std::vector<double>& values);
double variance_of(const std::vector<double>& values);  // population variance

// Raised when training produced a non-finite loss or an absurd return; the
// landscape runner turns this into the environment's floor score instead of
// aborting a sweep.
class TrainingDiverged : public Error {
  public:
    TrainingDiverged(const std::string& what, Metrics metrics) : Error(what), last_metrics(std::move(metrics)) {}
    Metrics last_metrics;
};

// Resolved hyperparameters, cached out of the Configuration at init and
// after every hot swap so hot loops never do string lookups.
struct PpoHp {
    long batch_size = 0, n_envs = 0, n_steps = 0, update_epochs = 0;
    double learning_rate = 0, entropy_coefficient = 0, gae_lambda = 0, policy_clipping = 0, value_clipping = 0,
           value_function_coefficient = 0, max_gradient_norm = 0;
    bool normalize_advantages = false;
};

struct DqnHp {
    long batch_size = 0, n_envs = 0, buffer_size = 0, learning_starts = 0, target_update_interval = 0;
    double buffer_alpha = 0, buffer_beta = 0, buffer_epsilon = 0, initial_epsilon = 0, target_epsilon = 0,
           learning_rate = 0;
    bool priority_sampling = false, use_target_network = false;
};

struct SacHp {
    long batch_size = 0, n_envs = 0, buffer_size = 0, learning_starts = 0;
    double buffer_alpha = 0, buffer_beta = 0, buffer_epsilon = 0, learning_rate = 0, tau = 0, reward_scale = 0;
    bool priority_sampling = false, use_target_network = false;
};

// PPO rollout under construction. Lives inside TrainingState (and inside
// checkpoints) so training slices can cut anywhere without changing the
// update schedule.
struct RolloutBuffer {
    long filled = 0;  // vector steps collected so far
    Mat obs, actions;
    Vec logp, value, reward, done;

    void allocate(long n_steps, long n_envs, int obs_dim, int act_dim);
};

struct TrainingState {
    Algo algo = Algo::Ppo;
    Configuration config;
    std::string env_name;
    std::uint64_t seed = 0;
    long total_timesteps = 0;
    long step_count = 0;  // environment steps consumed
    long grad_steps = 0;

    VecEnv env;

    // PPO
    MlpParams policy, value;
    AdamState policy_opt, value_opt;
    RolloutBuffer rollout;
    PpoHp ppo;

    // DQN
    MlpParams q, q_target;
    AdamState q_opt;
    DqnHp dqn;

    // SAC
    MlpParams actor, q1, q2, q1_target, q2_target;
    AdamState actor_opt, q1_opt, q2_opt;
    double log_alpha = 0.0, alpha_m = 0.0, alpha_v = 0.0;
    long alpha_t = 0;
    SacHp sac;

    ReplayBuffer buffer;
    Rng act_rng, buf_rng, update_rng;
};

// Builds a ready-to-train state. Deterministic in all arguments.
// total_timesteps == 0 selects the environment's per-algorithm default
// budget; the buffer-size clamp and the epsilon schedule use it.
TrainingState init(Algo algo, const Configuration& config, const std::string& env_name, std::uint64_t seed,
                   long total_timesteps = 0);

// Advances training by n_steps environment steps (rounded up to whole
// vector steps). Slicing is invisible: train(m) then train(n-m) is
// bit-identical to train(n).
Metrics train(TrainingState& state, long n_steps);

// Mean return of the greedy/mean-action policy over n_episodes episodes on
// a fresh evaluation environment. Does not touch the training state.
double evaluate(const TrainingState& state, int n_episodes, std::uint64_t eval_seed);

// GAE over one trajectory: delta_t = r_t + gamma*(1-done_t)*V_{t+1} - V_t,
// A_t = delta_t + gamma*lambda*(1-done_t)*A_{t+1}, with V_T = bootstrap.
// Returns (advantages, returns).
std::pair<Vec, Vec> gae(const Vec& rewards, const Vec& values, const std::vector<std::uint8_t>& terminated,
                        double gamma, double lambda, double bootstrap);

// Linear decay from `initial` at step 0 to `target` at total_steps/2,
// constant afterwards.
double epsilon_schedule(double initial, double target, long step, long total_steps);

// Which hyperparameters may change on a live TrainingState (dynamic HPO).
bool hot_swappable(Algo algo, const std::string& hyperparameter);

// Applies a new configuration to a live state. Throws ConfigError if a
// non-swappable hyperparameter differs. Buffer capacity re-clamps without
// losing stored transitions.
void apply_config(TrainingState& state, const Configuration& config);

// Fixed discount factor, shared by all three algorithms.
inline constexpr double kGamma = 0.99;

}  // namespace arlb
