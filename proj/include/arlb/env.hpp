#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "arlb/common.hpp"
#include "arlb/config_space.hpp"
#include "arlb/rng.hpp"

namespace arlb {

struct Space {
    enum class Kind { Discrete, Box };
    Kind kind = Kind::Discrete;
    int n = 0;                 // Discrete
    Eigen::VectorXd low, high;  // Box

    int dim() const { return kind == Kind::Discrete ? 1 : static_cast<int>(low.size()); }

    static Space discrete(int n);
    static Space box(Eigen::VectorXd low, Eigen::VectorXd high);
};

struct EnvSpec {
    std::string name;
    Space observation_space;
    Space action_space;
    int max_episode_steps = 0;
    long default_timesteps = 0;     // canonical training budget
    double divergence_floor = 0.0;  // score substituted for failed runs
};

// Single environment instance. Dynamics are deterministic; randomness enters
// only through reset().
class EnvCore {
  public:
    virtual ~EnvCore() = default;
    virtual void reset(Rng& rng) = 0;
    // One transition. `t` is the in-episode step count including this step.
    virtual double step(const Eigen::Ref<const Eigen::VectorXd>& action, int t, bool& terminated) = 0;
    virtual void observe(Eigen::Ref<Eigen::VectorXd> out) const = 0;
    virtual Eigen::VectorXd save_state() const = 0;
    virtual void load_state(const Eigen::Ref<const Eigen::VectorXd>& state) = 0;
    virtual std::unique_ptr<EnvCore> clone() const = 0;
};

// Vectorized environment. Sub-env i owns its own RNG stream derived from
// (seed, name, i); stepping one sub-env never touches another's state.
// Ended sub-envs reset within the same step() call: `obs` carries the fresh
// observation and `terminal_obs` the pre-reset one.
class VecEnv {
  public:
    VecEnv() = default;

    static VecEnv make(const std::string& name, int n_envs, std::uint64_t seed);
    // Raw per-env seeds, bypassing derivation (vectorization-equivalence hook).
    static VecEnv make_with_seeds(const std::string& name, const std::vector<std::uint64_t>& env_seeds);

    VecEnv(const VecEnv& other);
    VecEnv& operator=(const VecEnv& other);
    VecEnv(VecEnv&&) = default;
    VecEnv& operator=(VecEnv&&) = default;

    const EnvSpec& spec() const { return spec_; }
    int n_envs() const { return static_cast<int>(cores_.size()); }
    const Eigen::MatrixXd& observations() const { return obs_; }

    struct StepResult {
        Eigen::MatrixXd obs;           // post-reset where an episode ended
        Eigen::VectorXd reward;
        std::vector<std::uint8_t> terminated;
        std::vector<std::uint8_t> truncated;
        Eigen::MatrixXd terminal_obs;  // valid where episode_end
        std::vector<std::uint8_t> episode_end;
        std::vector<double> finished_returns;
        std::vector<int> finished_lengths;
    };

    // actions: n_envs x action_dim (discrete actions in column 0).
    StepResult step(const Eigen::MatrixXd& actions);

    // Checkpoint support: everything mutable, flattened to arrays.
    Eigen::MatrixXd pack_state() const;             // n_envs x (state_dim + 2)
    void unpack_state(const Eigen::MatrixXd& m);
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> pack_rng() const;  // n_envs x 4
    void unpack_rng(const Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>& m);

  private:
    void init(const std::string& name, const std::vector<std::uint64_t>& env_seeds);
    void refresh_obs(int i);

    EnvSpec spec_;
    std::vector<std::unique_ptr<EnvCore>> cores_;
    std::vector<Rng> rngs_;
    std::vector<int> steps_;
    std::vector<double> returns_;
    Eigen::MatrixXd obs_;
};

// Stable-ordered registry of every built-in environment.
const std::vector<EnvSpec>& registered_envs();
const EnvSpec& env_spec(const std::string& name);
bool env_known(const std::string& name);

// Per-algorithm training budget (the canonical budget tables).
long default_budget(Algo algo, const std::string& env_name);
Domain domain_of_env(const std::string& env_name);

// CSV registry dump: name,obs_dim,action_kind,action_dim,max_episode_steps,default_timesteps.
std::string envs_list_csv();

}  // namespace arlb
