#include <cmath>

#include "trainer_detail.hpp"

namespace arlb::detail {

namespace {

// Clips raw gaussian samples into the box for the environment; the stored
// action and its log-probability stay unclipped.
Mat clip_to_box(const Mat& actions, const Space& space) {
    Mat out = actions;
    for (int d = 0; d < space.dim(); ++d)
        out.col(d) = out.col(d).cwiseMax(space.low[d]).cwiseMin(space.high[d]);
    return out;
}

}  // namespace

void check_finite(double value, const char* what, const Metrics& metrics) {
    if (!std::isfinite(value)) throw TrainingDiverged(std::string(what) + " is not finite", metrics);
}

void ppo_step(TrainingState& state, Metrics& metrics) {
    const bool discrete = state.env.spec().action_space.kind == Space::Kind::Discrete;
    const Mat obs = state.env.observations();
    const Mat head_out = forward(state.policy, obs);
    Vec values = forward(state.value, obs).col(0);

    Mat stored_actions;
    Mat env_actions;
    Vec logp;
    if (discrete) {
        const VecI actions = categorical_sample(head_out, state.act_rng);
        logp = categorical_logp(head_out, actions);
        stored_actions = actions.cast<double>();
        env_actions = stored_actions;
    } else {
        stored_actions = gaussian_sample(head_out, state.policy.log_std, state.act_rng);
        logp = gaussian_logp(head_out, state.policy.log_std, stored_actions);
        env_actions = clip_to_box(stored_actions, state.env.spec().action_space);
    }

    const VecEnv::StepResult result = state.env.step(env_actions);
    for (std::size_t k = 0; k < result.finished_returns.size(); ++k) {
        metrics.episode_returns.push_back(result.finished_returns[k]);
        metrics.episode_lengths.push_back(result.finished_lengths[k]);
    }

    const long n_envs = state.env.n_envs();
    const long row0 = state.rollout.filled * n_envs;
    Vec reward = result.reward;
    for (long i = 0; i < n_envs; ++i) {
        // Truncation bootstraps through the true terminal observation; the
        // done flag then cuts the advantage recursion exactly like a
        // termination.
        if (result.truncated[static_cast<std::size_t>(i)]) {
            const double v_term =
                forward(state.value, result.terminal_obs.row(static_cast<int>(i)))(0, 0);
            reward[i] += kGamma * v_term;
        }
    }
    for (long i = 0; i < n_envs; ++i) {
        const long row = row0 + i;
        state.rollout.obs.row(row) = obs.row(i);
        state.rollout.actions.row(row) = stored_actions.row(i);
        state.rollout.logp[row] = logp[i];
        state.rollout.value[row] = values[i];
        state.rollout.reward[row] = reward[i];
        state.rollout.done[row] = result.terminated[static_cast<std::size_t>(i)] ||
                                          result.truncated[static_cast<std::size_t>(i)]
                                      ? 1.0
                                      : 0.0;
    }
    state.rollout.filled += 1;
    if (state.rollout.filled == state.ppo.n_steps) {
        ppo_update(state, metrics);
        state.rollout.filled = 0;
    }
}

void ppo_update(TrainingState& state, Metrics& metrics) {
    const PpoHp& hp = state.ppo;
    const bool discrete = state.env.spec().action_space.kind == Space::Kind::Discrete;
    const long n_envs = hp.n_envs;
    const long rows = hp.n_steps * n_envs;

    // Per-env GAE down the rollout columns, bootstrapped from the value of
    // the current (post-rollout) observations.
    const Vec bootstrap = forward(state.value, state.env.observations()).col(0);
    Vec advantages(rows), returns(rows);
    for (long i = 0; i < n_envs; ++i) {
        Vec r(hp.n_steps), v(hp.n_steps);
        std::vector<std::uint8_t> done(static_cast<std::size_t>(hp.n_steps));
        for (long t = 0; t < hp.n_steps; ++t) {
            r[t] = state.rollout.reward[t * n_envs + i];
            v[t] = state.rollout.value[t * n_envs + i];
            done[static_cast<std::size_t>(t)] = state.rollout.done[t * n_envs + i] != 0.0;
        }
        auto [adv, ret] = gae(r, v, done, kGamma, hp.gae_lambda, bootstrap[i]);
        for (long t = 0; t < hp.n_steps; ++t) {
            advantages[t * n_envs + i] = adv[t];
            returns[t * n_envs + i] = ret[t];
        }
    }

    std::vector<long> order(static_cast<std::size_t>(rows));
    for (long k = 0; k < rows; ++k) order[static_cast<std::size_t>(k)] = k;
    const long minibatch = std::min<long>(hp.batch_size, rows);

    for (long epoch = 0; epoch < hp.update_epochs; ++epoch) {
        // Fisher-Yates on the dedicated update stream.
        for (long k = rows - 1; k > 0; --k)
            std::swap(order[static_cast<std::size_t>(k)],
                      order[static_cast<std::size_t>(state.update_rng.uniform_int(0, k))]);

        for (long start = 0; start < rows; start += minibatch) {
            const long count = std::min(minibatch, rows - start);
            Mat mb_obs(count, state.rollout.obs.cols());
            Mat mb_actions(count, state.rollout.actions.cols());
            Vec mb_logp(count), mb_value_old(count), mb_adv(count), mb_ret(count);
            for (long k = 0; k < count; ++k) {
                const long row = order[static_cast<std::size_t>(start + k)];
                mb_obs.row(k) = state.rollout.obs.row(row);
                mb_actions.row(k) = state.rollout.actions.row(row);
                mb_logp[k] = state.rollout.logp[row];
                mb_value_old[k] = state.rollout.value[row];
                mb_adv[k] = advantages[row];
                mb_ret[k] = returns[row];
            }

            if (hp.normalize_advantages) {
                const double mu = mb_adv.mean();
                const double sd = std::sqrt((mb_adv.array() - mu).square().mean());
                mb_adv = (mb_adv.array() - mu) / std::max(sd, 1e-8);
            }

            const double inv_n = 1.0 / static_cast<double>(count);

            // Policy head: per-sample coefficient on d(logp)/d(head output),
            // with the clipped surrogate branch taken on ties so that
            // policy_clipping == 0 yields a zero policy gradient.
            const ForwardTrace pi_trace = forward_trace(state.policy, mb_obs);
            const Mat& head_out = pi_trace.output();
            Vec logp_new;
            double entropy_value = 0.0;
            if (discrete) {
                VecI acts(count);
                for (long k = 0; k < count; ++k) acts[k] = static_cast<std::int64_t>(mb_actions(k, 0));
                logp_new = categorical_logp(head_out, acts);
                entropy_value = categorical_entropy(head_out).mean();
            } else {
                logp_new = gaussian_logp(head_out, state.policy.log_std, mb_actions);
                entropy_value = gaussian_entropy(state.policy.log_std);
            }

            Vec coeff(count);  // dL/dlogp per sample (policy surrogate only)
            double policy_loss = 0.0;
            for (long k = 0; k < count; ++k) {
                const double ratio = std::exp(logp_new[k] - mb_logp[k]);
                const double clipped = std::clamp(ratio, 1.0 - hp.policy_clipping, 1.0 + hp.policy_clipping);
                const double surr1 = ratio * mb_adv[k];
                const double surr2 = clipped * mb_adv[k];
                policy_loss -= std::min(surr1, surr2) * inv_n;
                if (surr1 < surr2) {
                    coeff[k] = -mb_adv[k] * ratio * inv_n;
                } else {
                    const bool inside = ratio > 1.0 - hp.policy_clipping && ratio < 1.0 + hp.policy_clipping;
                    coeff[k] = inside ? -mb_adv[k] * ratio * inv_n : 0.0;
                }
            }

            MlpGrads pi_grads;
            if (discrete) {
                const Mat probs = softmax(head_out);
                const Mat logp_all = log_softmax(head_out);
                Mat head_grad = Mat::Zero(count, head_out.cols());
                for (long k = 0; k < count; ++k) {
                    const int a = static_cast<int>(mb_actions(k, 0));
                    head_grad.row(k) = -coeff[k] * probs.row(k);
                    head_grad(k, a) += coeff[k];
                }
                // Entropy bonus: dH/dz_j = -p_j (log p_j + H).
                const Vec h = -(logp_all.array().exp() * logp_all.array()).rowwise().sum();
                for (long k = 0; k < count; ++k)
                    head_grad.row(k) -= hp.entropy_coefficient * inv_n *
                                        (-probs.row(k).array() * (logp_all.row(k).array() + h[k])).matrix();
                pi_grads = backward(state.policy, pi_trace, head_grad);
            } else {
                const Eigen::ArrayXd sigma = state.policy.log_std.array().exp();
                Mat head_grad(count, head_out.cols());
                Vec log_std_grad = Vec::Zero(state.policy.log_std.size());
                for (long k = 0; k < count; ++k) {
                    for (int d = 0; d < head_out.cols(); ++d) {
                        const double z = (mb_actions(k, d) - head_out(k, d)) / sigma[d];
                        head_grad(k, d) = coeff[k] * z / sigma[d];
                        log_std_grad[d] += coeff[k] * (z * z - 1.0);
                    }
                }
                // Gaussian entropy is state-independent: only log_std moves.
                log_std_grad.array() -= hp.entropy_coefficient;
                pi_grads = backward(state.policy, pi_trace, head_grad);
                pi_grads.log_std = log_std_grad;
            }

            // Value loss, optionally clipped around the rollout-time values.
            const ForwardTrace v_trace = forward_trace(state.value, mb_obs);
            const Vec v = v_trace.output().col(0);
            Mat v_grad(count, 1);
            double value_loss = 0.0;
            for (long k = 0; k < count; ++k) {
                const double err = v[k] - mb_ret[k];
                if (hp.value_clipping > 0.0) {
                    const double v_clip =
                        mb_value_old[k] + std::clamp(v[k] - mb_value_old[k], -hp.value_clipping, hp.value_clipping);
                    const double err_clip = v_clip - mb_ret[k];
                    if (err * err >= err_clip * err_clip) {
                        value_loss += 0.5 * err * err * inv_n;
                        v_grad(k, 0) = hp.value_function_coefficient * err * inv_n;
                    } else {
                        value_loss += 0.5 * err_clip * err_clip * inv_n;
                        const bool inside = std::abs(v[k] - mb_value_old[k]) < hp.value_clipping;
                        v_grad(k, 0) = inside ? hp.value_function_coefficient * err_clip * inv_n : 0.0;
                    }
                } else {
                    value_loss += 0.5 * err * err * inv_n;
                    v_grad(k, 0) = hp.value_function_coefficient * err * inv_n;
                }
            }
            MlpGrads v_grads = backward(state.value, v_trace, v_grad);

            const double total_loss = policy_loss + hp.value_function_coefficient * value_loss -
                                      hp.entropy_coefficient * entropy_value;
            check_finite(total_loss, "ppo loss", metrics);

            const double norm = grad_norm({&pi_grads, &v_grads});
            clip_grad_norm({&pi_grads, &v_grads}, hp.max_gradient_norm);
            adam_update(state.policy, pi_grads, state.policy_opt);
            adam_update(state.value, v_grads, state.value_opt);

            metrics.policy_losses.push_back(policy_loss);
            metrics.value_losses.push_back(value_loss);
            metrics.entropies.push_back(entropy_value);
            metrics.grad_norms.push_back(norm);
            metrics.losses.push_back(total_loss);
        }
    }
}

Mat scale_to_box(const Mat& squashed, const Space& space) {
    Mat out(squashed.rows(), squashed.cols());
    for (int d = 0; d < space.dim(); ++d)
        out.col(d) = space.low[d] + (squashed.col(d).array() + 1.0) * 0.5 * (space.high[d] - space.low[d]);
    return out;
}

Vec squashed_gaussian_logp(const Mat& u, const Mat& mean, const Vec& log_std) {
    Vec logp = gaussian_logp(mean, log_std, u);
    for (Eigen::Index k = 0; k < u.rows(); ++k)
        for (Eigen::Index d = 0; d < u.cols(); ++d) {
            const double t = std::tanh(u(k, d));
            logp[k] -= std::log(1.0 - t * t + kTanhEps);
        }
    return logp;
}

Mat greedy_actions(const TrainingState& state, const Mat& obs) {
    const Space& aspace = state.env.spec().action_space;
    switch (state.algo) {
        case Algo::Ppo: {
            const Mat head_out = forward(state.policy, obs);
            if (aspace.kind == Space::Kind::Discrete) return categorical_argmax(head_out).cast<double>();
            Mat out = head_out;
            for (int d = 0; d < aspace.dim(); ++d)
                out.col(d) = out.col(d).cwiseMax(aspace.low[d]).cwiseMin(aspace.high[d]);
            return out;
        }
        case Algo::Dqn: return categorical_argmax(forward(state.q, obs)).cast<double>();
        case Algo::Sac: return scale_to_box(forward(state.actor, obs).array().tanh(), aspace);
    }
    return {};
}

}  // namespace arlb::detail
