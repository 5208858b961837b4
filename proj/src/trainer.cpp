#include "arlb/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "trainer_detail.hpp"

namespace arlb {

void Metrics::merge(const Metrics& other) {
    auto append = [](auto& dst, const auto& src) { dst.insert(dst.end(), src.begin(), src.end()); };
    append(policy_losses, other.policy_losses);
    append(value_losses, other.value_losses);
    append(entropies, other.entropies);
    append(grad_norms, other.grad_norms);
    append(losses, other.losses);
    append(episode_returns, other.episode_returns);
    append(episode_lengths, other.episode_lengths);
}

double mean_of(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double variance_of(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    const double mu = mean_of(values);
    double sum = 0.0;
    for (double v : values) sum += (v - mu) * (v - mu);
    return sum / static_cast<double>(values.size());
}

void RolloutBuffer::allocate(long n_steps, long n_envs, int obs_dim, int act_dim) {
    const long rows = n_steps * n_envs;
    filled = 0;
    obs = Mat::Zero(rows, obs_dim);
    actions = Mat::Zero(rows, act_dim);
    logp = Vec::Zero(rows);
    value = Vec::Zero(rows);
    reward = Vec::Zero(rows);
    done = Vec::Zero(rows);
}

std::pair<Vec, Vec> gae(const Vec& rewards, const Vec& values, const std::vector<std::uint8_t>& terminated,
                        double gamma, double lambda, double bootstrap) {
    const Eigen::Index n = rewards.size();
    if (values.size() != n || static_cast<Eigen::Index>(terminated.size()) != n)
        throw ShapeError("gae: rewards, values and terminated must have equal lengths");
    Vec advantages(n);
    double next_adv = 0.0;
    double next_value = bootstrap;
    for (Eigen::Index t = n - 1; t >= 0; --t) {
        const double not_done = terminated[static_cast<std::size_t>(t)] ? 0.0 : 1.0;
        const double delta = rewards[t] + gamma * not_done * next_value - values[t];
        next_adv = delta + gamma * lambda * not_done * next_adv;
        advantages[t] = next_adv;
        next_value = values[t];
    }
    Vec returns = advantages + values;
    return {std::move(advantages), std::move(returns)};
}

double epsilon_schedule(double initial, double target, long step, long total_steps) {
    const double decay_end = 0.5 * static_cast<double>(total_steps);
    if (static_cast<double>(step) >= decay_end) return target;
    return initial + (target - initial) * static_cast<double>(step) / decay_end;
}

namespace {

void resolve_hp(TrainingState& state, const ConfigurationSpace& space) {
    const Configuration& c = state.config;
    switch (state.algo) {
        case Algo::Ppo: {
            PpoHp& hp = state.ppo;
            hp.batch_size = space.int_of(c, "batch_size");
            hp.n_envs = space.int_of(c, "number_of_environments");
            hp.n_steps = space.int_of(c, "number_of_steps");
            hp.update_epochs = space.int_of(c, "update_epochs");
            hp.learning_rate = space.float_of(c, "learning_rate");
            hp.entropy_coefficient = space.float_of(c, "entropy_coefficient");
            hp.gae_lambda = space.float_of(c, "gae_lambda");
            hp.policy_clipping = space.float_of(c, "policy_clipping");
            hp.value_clipping = space.float_of(c, "value_clipping");
            hp.normalize_advantages = space.bool_of(c, "normalize_advantages");
            hp.value_function_coefficient = space.float_of(c, "value_function_coefficient");
            hp.max_gradient_norm = space.float_of(c, "max_gradient_norm");
            break;
        }
        case Algo::Dqn: {
            DqnHp& hp = state.dqn;
            hp.batch_size = space.int_of(c, "batch_size");
            hp.n_envs = space.int_of(c, "number_of_environments");
            hp.priority_sampling = space.bool_of(c, "buffer_priority_sampling");
            hp.buffer_alpha = hp.priority_sampling ? space.float_of(c, "buffer_alpha") : 0.0;
            hp.buffer_beta = hp.priority_sampling ? space.float_of(c, "buffer_beta") : 0.0;
            hp.buffer_epsilon = hp.priority_sampling ? space.float_of(c, "buffer_epsilon") : 0.0;
            hp.buffer_size = space.int_of(c, "buffer_size");
            hp.initial_epsilon = space.float_of(c, "initial_epsilon");
            hp.target_epsilon = space.float_of(c, "target_epsilon");
            hp.learning_rate = space.float_of(c, "learning_rate");
            hp.learning_starts = space.int_of(c, "learning_starts");
            hp.use_target_network = space.bool_of(c, "use_target_network");
            hp.target_update_interval = hp.use_target_network ? space.int_of(c, "target_update_interval") : 0;
            break;
        }
        case Algo::Sac: {
            SacHp& hp = state.sac;
            hp.batch_size = space.int_of(c, "batch_size");
            hp.n_envs = space.int_of(c, "number_of_environments");
            hp.priority_sampling = space.bool_of(c, "buffer_priority_sampling");
            hp.buffer_alpha = hp.priority_sampling ? space.float_of(c, "buffer_alpha") : 0.0;
            hp.buffer_beta = hp.priority_sampling ? space.float_of(c, "buffer_beta") : 0.0;
            hp.buffer_epsilon = hp.priority_sampling ? space.float_of(c, "buffer_epsilon") : 0.0;
            hp.buffer_size = space.int_of(c, "buffer_size");
            hp.learning_rate = space.float_of(c, "learning_rate");
            hp.learning_starts = space.int_of(c, "learning_starts");
            hp.use_target_network = space.bool_of(c, "use_target_network");
            hp.tau = hp.use_target_network ? space.float_of(c, "tau") : 0.0;
            hp.reward_scale = space.float_of(c, "reward_scale");
            break;
        }
    }
}

void set_learning_rate(TrainingState& state, double lr) {
    for (AdamState* opt : {&state.policy_opt, &state.value_opt, &state.q_opt, &state.actor_opt, &state.q1_opt,
                           &state.q2_opt})
        opt->lr = lr;
}

}  // namespace

TrainingState init(Algo algo, const Configuration& config, const std::string& env_name, std::uint64_t seed,
                   long total_timesteps) {
    const EnvSpec& spec = env_spec(env_name);
    const bool discrete = spec.action_space.kind == Space::Kind::Discrete;
    if (algo == Algo::Dqn && !discrete)
        throw ConfigError("dqn requires discrete actions; '" + spec.name + "' is continuous");
    if (algo == Algo::Sac && discrete)
        throw ConfigError("sac requires continuous actions; '" + spec.name + "' is discrete");

    const ConfigurationSpace space = builtin_space(algo, domain_of_env(env_name));
    if (config.space_id != space.id)
        throw ConfigError("configuration belongs to space '" + config.space_id + "', expected '" + space.id + "'");
    if (auto violations = validate(space, config); !violations.empty()) {
        std::ostringstream msg;
        msg << "invalid configuration for " << space.id << ":";
        for (const auto& v : violations) msg << "\n  " << v;
        throw ConfigError(msg.str());
    }

    TrainingState state;
    state.algo = algo;
    state.env_name = spec.name;
    state.seed = seed;
    state.total_timesteps = total_timesteps > 0 ? total_timesteps : default_budget(algo, env_name);
    state.config = buffer_size_clamp(space, config, state.total_timesteps);
    resolve_hp(state, space);

    const long n_envs = space.int_of(state.config, "number_of_environments");
    state.env = VecEnv::make(spec.name, static_cast<int>(n_envs), derive_seed(seed, "env"));
    state.act_rng = Rng(derive_seed(seed, "act"));
    state.buf_rng = Rng(derive_seed(seed, "buf"));
    state.update_rng = Rng(derive_seed(seed, "update"));

    Rng init_rng(derive_seed(seed, "init"));
    const int obs_dim = static_cast<int>(spec.observation_space.low.size());
    const int act_dim = discrete ? spec.action_space.n : spec.action_space.dim();
    const std::vector<int> hidden{64, 64};

    switch (algo) {
        case Algo::Ppo: {
            const Head head = discrete ? Head::CategoricalLogits : Head::GaussianMeanLogStd;
            state.policy = make_mlp(obs_dim, hidden, act_dim, Activation::Tanh, head, init_rng, 0.01);
            state.value = make_mlp(obs_dim, hidden, 1, Activation::Tanh, Head::Linear, init_rng, 1.0);
            state.policy_opt = make_adam(state.policy, state.ppo.learning_rate);
            state.value_opt = make_adam(state.value, state.ppo.learning_rate);
            state.rollout.allocate(state.ppo.n_steps, n_envs, obs_dim, discrete ? 1 : act_dim);
            break;
        }
        case Algo::Dqn: {
            state.q = make_mlp(obs_dim, hidden, act_dim, Activation::Tanh, Head::Linear, init_rng, 1.0);
            state.q_target = state.q;
            state.q_opt = make_adam(state.q, state.dqn.learning_rate);
            state.buffer = ReplayBuffer(state.config.i("buffer_size"), obs_dim, 1, state.dqn.priority_sampling,
                                        state.dqn.buffer_alpha, state.dqn.buffer_epsilon);
            break;
        }
        case Algo::Sac: {
            state.actor = make_mlp(obs_dim, hidden, act_dim, Activation::Tanh, Head::GaussianMeanLogStd, init_rng,
                                   0.01);
            state.q1 = make_mlp(obs_dim + act_dim, hidden, 1, Activation::Tanh, Head::Linear, init_rng, 1.0);
            state.q2 = make_mlp(obs_dim + act_dim, hidden, 1, Activation::Tanh, Head::Linear, init_rng, 1.0);
            state.q1_target = state.q1;
            state.q2_target = state.q2;
            state.actor_opt = make_adam(state.actor, state.sac.learning_rate);
            state.q1_opt = make_adam(state.q1, state.sac.learning_rate);
            state.q2_opt = make_adam(state.q2, state.sac.learning_rate);
            state.buffer = ReplayBuffer(state.config.i("buffer_size"), obs_dim, act_dim, state.sac.priority_sampling,
                                        state.sac.buffer_alpha, state.sac.buffer_epsilon);
            break;
        }
    }
    return state;
}

Metrics train(TrainingState& state, long n_steps) {
    if (n_steps < 1) throw ConfigError("train: n_steps must be >= 1");
    Metrics metrics;
    const long target = state.step_count + n_steps;
    while (state.step_count < target) {
        const std::size_t seen = metrics.episode_returns.size();
        switch (state.algo) {
            case Algo::Ppo: detail::ppo_step(state, metrics); break;
            case Algo::Dqn: detail::dqn_step(state, metrics); break;
            case Algo::Sac: detail::sac_step(state, metrics); break;
        }
        state.step_count += state.env.n_envs();
        for (std::size_t k = seen; k < metrics.episode_returns.size(); ++k)
            if (std::abs(metrics.episode_returns[k]) > 1e9)
                throw TrainingDiverged("training returns exceeded 1e9", metrics);
    }
    return metrics;
}

double evaluate(const TrainingState& state, int n_episodes, std::uint64_t eval_seed) {
    if (n_episodes < 1) throw ConfigError("evaluate: n_episodes must be >= 1");
    VecEnv env = VecEnv::make(state.env_name, n_episodes, eval_seed);
    std::vector<std::uint8_t> finished(static_cast<std::size_t>(n_episodes), 0);
    std::vector<double> returns(static_cast<std::size_t>(n_episodes), 0.0);
    int remaining = n_episodes;
    while (remaining > 0) {
        const Mat actions = detail::greedy_actions(state, env.observations());
        const VecEnv::StepResult result = env.step(actions);
        for (int i = 0; i < n_episodes; ++i) {
            if (finished[static_cast<std::size_t>(i)]) continue;
            returns[static_cast<std::size_t>(i)] += result.reward[i];
            if (result.episode_end[static_cast<std::size_t>(i)]) {
                finished[static_cast<std::size_t>(i)] = 1;
                --remaining;
            }
        }
    }
    double sum = 0.0;
    for (double r : returns) sum += r;
    return sum / static_cast<double>(n_episodes);
}

bool hot_swappable(Algo algo, const std::string& hp) {
    static const std::set<std::string> ppo{"learning_rate",    "policy_clipping",
                                           "value_clipping",   "entropy_coefficient",
                                           "value_function_coefficient", "max_gradient_norm",
                                           "gae_lambda",       "normalize_advantages",
                                           "batch_size"};
    static const std::set<std::string> dqn{"learning_rate", "initial_epsilon", "target_epsilon",
                                           "batch_size",    "buffer_size",     "learning_starts",
                                           "target_update_interval"};
    static const std::set<std::string> sac{"learning_rate", "tau",        "reward_scale",
                                           "batch_size",    "buffer_size", "learning_starts"};
    switch (algo) {
        case Algo::Ppo: return ppo.count(hp) > 0;
        case Algo::Dqn: return dqn.count(hp) > 0;
        case Algo::Sac: return sac.count(hp) > 0;
    }
    return false;
}

void apply_config(TrainingState& state, const Configuration& config) {
    const ConfigurationSpace space = builtin_space(state.algo, domain_of_env(state.env_name));
    if (auto violations = validate(space, config); !violations.empty())
        throw ConfigError("apply_config: invalid configuration: " + violations.front());

    const Configuration clamped = buffer_size_clamp(space, config, state.total_timesteps);
    for (const auto& [name, value] : clamped.values) {
        const bool differs = !state.config.has(name) || !hp_equal(state.config.at(name), value);
        if (differs && !hot_swappable(state.algo, name))
            throw ConfigError("hyperparameter '" + name + "' is structural and cannot change on a live state");
    }
    for (const auto& [name, value] : state.config.values)
        if (!clamped.has(name))
            throw ConfigError("hyperparameter '" + name + "' is structural and cannot change on a live state");

    const bool buffer_changed = clamped.has("buffer_size") && state.config.has("buffer_size") &&
                                !hp_equal(clamped.at("buffer_size"), state.config.at("buffer_size"));
    state.config = clamped;
    resolve_hp(state, space);
    double lr = 0.0;
    switch (state.algo) {
        case Algo::Ppo: lr = state.ppo.learning_rate; break;
        case Algo::Dqn: lr = state.dqn.learning_rate; break;
        case Algo::Sac: lr = state.sac.learning_rate; break;
    }
    set_learning_rate(state, lr);
    if (buffer_changed) state.buffer.set_capacity(state.config.i("buffer_size"));
    if (state.algo == Algo::Ppo && state.rollout.obs.rows() != state.ppo.n_steps * state.ppo.n_envs)
        throw ConfigError("rollout shape is structural and cannot change on a live state");
}

}  // namespace arlb
