#include <cmath>

#include "trainer_detail.hpp"

namespace arlb::detail {

Vec td_targets(const Vec& rewards, const Vec& terminated, const Vec& next_value, double gamma) {
    return rewards.array() + gamma * (1.0 - terminated.array()) * next_value.array();
}

void dqn_step(TrainingState& state, Metrics& metrics) {
    const DqnHp& hp = state.dqn;
    const Mat obs = state.env.observations();
    const int n_envs = state.env.n_envs();
    const int n_actions = state.env.spec().action_space.n;

    const double eps = epsilon_schedule(hp.initial_epsilon, hp.target_epsilon, state.step_count,
                                        state.total_timesteps);
    const VecI greedy = categorical_argmax(forward(state.q, obs));
    Mat actions(n_envs, 1);
    for (int i = 0; i < n_envs; ++i) {
        if (state.act_rng.bernoulli(eps))
            actions(i, 0) = static_cast<double>(state.act_rng.uniform_int(0, n_actions - 1));
        else
            actions(i, 0) = static_cast<double>(greedy[i]);
    }

    const VecEnv::StepResult result = state.env.step(actions);
    for (std::size_t k = 0; k < result.finished_returns.size(); ++k) {
        metrics.episode_returns.push_back(result.finished_returns[k]);
        metrics.episode_lengths.push_back(result.finished_lengths[k]);
    }

    for (int i = 0; i < n_envs; ++i) {
        // The stored successor is the true next observation (pre-reset when
        // the episode ended); only real terminations cut the bootstrap, so
        // truncated episodes still bootstrap through their final state.
        const bool ended = result.episode_end[static_cast<std::size_t>(i)] != 0;
        const Vec next_obs = ended ? result.terminal_obs.row(i).transpose() : result.obs.row(i).transpose();
        state.buffer.add(obs.row(i).transpose(), actions.row(i).transpose(), result.reward[i], next_obs,
                         result.terminated[static_cast<std::size_t>(i)] != 0);
    }

    if (state.buffer.size() >= std::max(hp.learning_starts, hp.batch_size)) dqn_update(state, metrics);
}

void dqn_update(TrainingState& state, Metrics& metrics) {
    const DqnHp& hp = state.dqn;
    if (state.buffer.size() < std::max(hp.learning_starts, hp.batch_size)) return;  // no-op before learning starts

    const ReplayBuffer::Batch batch =
        state.buffer.sample(static_cast<int>(hp.batch_size), hp.buffer_beta, state.buf_rng);
    const long count = hp.batch_size;
    const double inv_n = 1.0 / static_cast<double>(count);

    const ForwardTrace q_trace = forward_trace(state.q, batch.obs);
    const Mat& q_all = q_trace.output();
    const Mat next_q = forward(hp.use_target_network ? state.q_target : state.q, batch.next_obs);

    const Vec next_max = next_q.rowwise().maxCoeff();
    const Vec targets = td_targets(batch.rewards, batch.terminated, next_max, kGamma);
    Mat loss_grad = Mat::Zero(count, q_all.cols());
    Vec td_abs(count);
    double loss = 0.0;
    for (long k = 0; k < count; ++k) {
        const int a = static_cast<int>(batch.actions(k, 0));
        const double delta = q_all(k, a) - targets[k];
        td_abs[k] = std::abs(delta);
        const double huber = td_abs[k] <= 1.0 ? 0.5 * delta * delta : td_abs[k] - 0.5;
        loss += batch.weights[k] * huber * inv_n;
        loss_grad(k, a) = batch.weights[k] * std::clamp(delta, -1.0, 1.0) * inv_n;
    }
    check_finite(loss, "dqn loss", metrics);

    MlpGrads grads = backward(state.q, q_trace, loss_grad);
    const double norm = grad_norm(grads);
    adam_update(state.q, grads, state.q_opt);
    state.grad_steps += 1;

    state.buffer.update_priorities(batch.indices, td_abs);

    if (hp.use_target_network && state.grad_steps % hp.target_update_interval == 0) state.q_target = state.q;

    metrics.value_losses.push_back(loss);
    metrics.losses.push_back(loss);
    metrics.grad_norms.push_back(norm);
}

}  // namespace arlb::detail
