#pragma once

#include "arlb/trainer.hpp"

namespace arlb::detail {

// One vectorized environment step plus whatever updates it triggers.
void ppo_step(TrainingState& state, Metrics& metrics);
void dqn_step(TrainingState& state, Metrics& metrics);
void sac_step(TrainingState& state, Metrics& metrics);

void ppo_update(TrainingState& state, Metrics& metrics);
void dqn_update(TrainingState& state, Metrics& metrics);
void sac_update(TrainingState& state, Metrics& metrics);

// Greedy/mean actions for evaluation, already in environment scale.
Mat greedy_actions(const TrainingState& state, const Mat& obs);

// Bootstrapped one-step targets: r + gamma * (1 - terminated) * next_value.
Vec td_targets(const Vec& rewards, const Vec& terminated, const Vec& next_value, double gamma);

// target <- (1 - tau) * target + tau * online.
void polyak(MlpParams& target, const MlpParams& online, double tau);

// Maps squashed [-1, 1] actions into the environment's box bounds.
Mat scale_to_box(const Mat& squashed, const Space& space);

Vec squashed_gaussian_logp(const Mat& u, const Mat& mean, const Vec& log_std);

void check_finite(double value, const char* what, const Metrics& metrics);

inline constexpr double kTanhEps = 1e-6;
inline constexpr double kLogStdMin = -10.0;
inline constexpr double kLogStdMax = 2.0;

}  // namespace arlb::detail
