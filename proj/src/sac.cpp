#include <cmath>

#include "trainer_detail.hpp"

namespace arlb::detail {

void polyak(MlpParams& target, const MlpParams& online, double tau) {
    for (std::size_t i = 0; i < target.layers.size(); ++i) {
        target.layers[i].weight = (1.0 - tau) * target.layers[i].weight + tau * online.layers[i].weight;
        target.layers[i].bias = (1.0 - tau) * target.layers[i].bias + tau * online.layers[i].bias;
    }
    if (target.log_std.size() > 0) target.log_std = (1.0 - tau) * target.log_std + tau * online.log_std;
}

namespace {

Mat concat_cols(const Mat& a, const Mat& b) {
    Mat out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

Mat sample_noise(long rows, long cols, Rng& rng) {
    Mat eps(rows, cols);
    for (long k = 0; k < rows; ++k)
        for (long d = 0; d < cols; ++d) eps(k, d) = rng.normal();
    return eps;
}

// One Adam step on the scalar entropy-temperature parameter.
void alpha_update(TrainingState& state, double grad) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    state.alpha_t += 1;
    state.alpha_m = beta1 * state.alpha_m + (1.0 - beta1) * grad;
    state.alpha_v = beta2 * state.alpha_v + (1.0 - beta2) * grad * grad;
    const double m_hat = state.alpha_m / (1.0 - std::pow(beta1, static_cast<double>(state.alpha_t)));
    const double v_hat = state.alpha_v / (1.0 - std::pow(beta2, static_cast<double>(state.alpha_t)));
    state.log_alpha -= state.sac.learning_rate * m_hat / (std::sqrt(v_hat) + eps);
}

}  // namespace

void sac_step(TrainingState& state, Metrics& metrics) {
    const SacHp& hp = state.sac;
    const Mat obs = state.env.observations();
    const int n_envs = state.env.n_envs();
    const Space& aspace = state.env.spec().action_space;

    const Mat mean = forward(state.actor, obs);
    const Mat u = mean + (sample_noise(n_envs, mean.cols(), state.act_rng).array().rowwise() *
                          state.actor.log_std.array().exp().transpose())
                             .matrix();
    const Mat squashed = u.array().tanh();
    const VecEnv::StepResult result = state.env.step(scale_to_box(squashed, aspace));
    for (std::size_t k = 0; k < result.finished_returns.size(); ++k) {
        metrics.episode_returns.push_back(result.finished_returns[k]);
        metrics.episode_lengths.push_back(result.finished_lengths[k]);
    }

    for (int i = 0; i < n_envs; ++i) {
        const bool ended = result.episode_end[static_cast<std::size_t>(i)] != 0;
        const Vec next_obs = ended ? result.terminal_obs.row(i).transpose() : result.obs.row(i).transpose();
        state.buffer.add(obs.row(i).transpose(), squashed.row(i).transpose(),
                         hp.reward_scale * result.reward[i], next_obs,
                         result.terminated[static_cast<std::size_t>(i)] != 0);
    }

    if (state.buffer.size() >= std::max(hp.learning_starts, hp.batch_size)) sac_update(state, metrics);
}

void sac_update(TrainingState& state, Metrics& metrics) {
    const SacHp& hp = state.sac;
    const long count = hp.batch_size;
    const double inv_n = 1.0 / static_cast<double>(count);
    const double alpha = std::exp(state.log_alpha);
    const double target_entropy = -static_cast<double>(state.actor.out_dim());

    const ReplayBuffer::Batch batch =
        state.buffer.sample(static_cast<int>(count), hp.buffer_beta, state.buf_rng);

    // Critic targets through the (possibly online) target networks.
    const Mat next_mean = forward(state.actor, batch.next_obs);
    const Mat next_eps = sample_noise(count, next_mean.cols(), state.update_rng);
    const Mat next_u =
        next_mean + (next_eps.array().rowwise() * state.actor.log_std.array().exp().transpose()).matrix();
    const Mat next_a = next_u.array().tanh();
    const Vec next_logp = squashed_gaussian_logp(next_u, next_mean, state.actor.log_std);
    const Mat next_in = concat_cols(batch.next_obs, next_a);
    const Vec tq1 = forward(hp.use_target_network ? state.q1_target : state.q1, next_in).col(0);
    const Vec tq2 = forward(hp.use_target_network ? state.q2_target : state.q2, next_in).col(0);

    Vec target(count);
    for (long k = 0; k < count; ++k)
        target[k] = batch.rewards[k] +
                    kGamma * (1.0 - batch.terminated[k]) * (std::min(tq1[k], tq2[k]) - alpha * next_logp[k]);

    const Mat critic_in = concat_cols(batch.obs, batch.actions);
    const ForwardTrace q1_trace = forward_trace(state.q1, critic_in);
    const ForwardTrace q2_trace = forward_trace(state.q2, critic_in);
    const Vec delta1 = q1_trace.output().col(0) - target;
    const Vec delta2 = q2_trace.output().col(0) - target;
    const double critic_loss =
        0.5 * inv_n * ((batch.weights.array() * delta1.array().square()).sum() +
                       (batch.weights.array() * delta2.array().square()).sum());
    check_finite(critic_loss, "sac critic loss", metrics);

    MlpGrads q1_grads = backward(state.q1, q1_trace, (batch.weights.array() * delta1.array()).matrix() * inv_n);
    MlpGrads q2_grads = backward(state.q2, q2_trace, (batch.weights.array() * delta2.array()).matrix() * inv_n);
    const double norm = grad_norm({&q1_grads, &q2_grads});
    adam_update(state.q1, q1_grads, state.q1_opt);
    adam_update(state.q2, q2_grads, state.q2_opt);

    // Actor: reparameterized a = tanh(mean + sigma * eps); gradients flow
    // through the smaller critic's action input.
    const ForwardTrace actor_trace = forward_trace(state.actor, batch.obs);
    const Mat& mean = actor_trace.output();
    const Mat eps = sample_noise(count, mean.cols(), state.update_rng);
    const Eigen::ArrayXd sigma = state.actor.log_std.array().exp();
    const Mat u = mean + (eps.array().rowwise() * sigma.transpose()).matrix();
    const Mat a = u.array().tanh();
    const Vec logp = squashed_gaussian_logp(u, mean, state.actor.log_std);

    const Mat actor_in = concat_cols(batch.obs, a);
    const ForwardTrace aq1_trace = forward_trace(state.q1, actor_in);
    const ForwardTrace aq2_trace = forward_trace(state.q2, actor_in);
    const Vec aq1 = aq1_trace.output().col(0);
    const Vec aq2 = aq2_trace.output().col(0);

    Mat pick1 = Mat::Zero(count, 1), pick2 = Mat::Zero(count, 1);
    double actor_loss = 0.0;
    for (long k = 0; k < count; ++k) {
        actor_loss += inv_n * (alpha * logp[k] - std::min(aq1[k], aq2[k]));
        (aq1[k] <= aq2[k] ? pick1 : pick2)(k, 0) = 1.0;
    }
    check_finite(actor_loss, "sac actor loss", metrics);

    Mat in_grad1, in_grad2;
    backward(state.q1, aq1_trace, pick1, &in_grad1);
    backward(state.q2, aq2_trace, pick2, &in_grad2);
    const Mat dq_da =
        in_grad1.rightCols(mean.cols()) + in_grad2.rightCols(mean.cols());  // d(min q)/d(action), per sample

    Mat mean_grad(count, mean.cols());
    Vec log_std_grad = Vec::Zero(mean.cols());
    for (long k = 0; k < count; ++k) {
        for (int d = 0; d < mean.cols(); ++d) {
            const double t = a(k, d);
            const double one_m_t2 = 1.0 - t * t;
            const double corr = 2.0 * t * one_m_t2 / (one_m_t2 + kTanhEps);
            const double g_u = alpha * corr - dq_da(k, d) * one_m_t2;
            mean_grad(k, d) = inv_n * g_u;
            log_std_grad[d] += inv_n * (-alpha + g_u * sigma[d] * eps(k, d));
        }
    }
    MlpGrads actor_grads = backward(state.actor, actor_trace, mean_grad);
    actor_grads.log_std = log_std_grad;
    adam_update(state.actor, actor_grads, state.actor_opt);
    state.actor.log_std = state.actor.log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);

    alpha_update(state, -(logp.array() + target_entropy).mean());

    if (hp.use_target_network) {
        polyak(state.q1_target, state.q1, hp.tau);
        polyak(state.q2_target, state.q2, hp.tau);
    }

    if (hp.priority_sampling)
        state.buffer.update_priorities(batch.indices, 0.5 * (delta1.cwiseAbs() + delta2.cwiseAbs()));

    state.grad_steps += 1;
    metrics.value_losses.push_back(critic_loss);
    metrics.policy_losses.push_back(actor_loss);
    metrics.entropies.push_back(-logp.mean());
    metrics.losses.push_back(critic_loss);
    metrics.grad_norms.push_back(norm);
}

}  // namespace arlb::detail
