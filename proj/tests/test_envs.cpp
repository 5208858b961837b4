#include <doctest.h>

#include <cmath>
#include <map>

#include "arlb/csv.hpp"
#include "arlb/env.hpp"

using namespace arlb;

TEST_CASE("registry contains the required set with the right spaces") {
    const auto& specs = registered_envs();
    std::map<std::string, EnvSpec> by_name;
    for (const auto& s : specs) by_name[s.name] = s;

    REQUIRE(by_name.count("cartpole"));
    CHECK(by_name["cartpole"].action_space.kind == Space::Kind::Discrete);
    CHECK(by_name["cartpole"].action_space.n == 2);
    CHECK(by_name["cartpole"].max_episode_steps == 500);

    REQUIRE(by_name.count("pendulum"));
    CHECK(by_name["pendulum"].action_space.kind == Space::Kind::Box);
    CHECK(by_name["pendulum"].action_space.low[0] == -2.0);
    CHECK(by_name["pendulum"].action_space.high[0] == 2.0);

    for (const char* name : {"mountaincar", "acrobot", "mountaincar-continuous", "gridworld-empty-random-5x5",
                             "gridworld-doorkey-5x5", "gridworld-fourrooms", "gridworld-unlock"})
        CHECK(by_name.count(name));
}

TEST_CASE("registry CSV round-trips every spec") {
    const CsvTable table = parse_csv(envs_list_csv());
    REQUIRE(table.rows.size() == registered_envs().size());
    const int name_col = table.require_column("name");
    const int obs_col = table.require_column("obs_dim");
    const int kind_col = table.require_column("action_kind");
    const int adim_col = table.require_column("action_dim");
    const int steps_col = table.require_column("max_episode_steps");
    const int budget_col = table.require_column("default_timesteps");
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const EnvSpec& spec = env_spec(table.cell(i, name_col));
        CHECK(parse_long(table.cell(i, obs_col)) == spec.observation_space.low.size());
        CHECK((table.cell(i, kind_col) == "discrete") == (spec.action_space.kind == Space::Kind::Discrete));
        if (spec.action_space.kind == Space::Kind::Discrete)
            CHECK(parse_long(table.cell(i, adim_col)) == spec.action_space.n);
        CHECK(parse_long(table.cell(i, steps_col)) == spec.max_episode_steps);
        CHECK(parse_long(table.cell(i, budget_col)) == spec.default_timesteps);
    }
}

TEST_CASE("unknown environment error lists the registry") {
    CHECK_THROWS_WITH_AS(VecEnv::make("atari-pong", 1, 0), doctest::Contains("cartpole"), ConfigError);
}

TEST_CASE("per-algorithm default budgets follow the tables") {
    CHECK(default_budget(Algo::Ppo, "cartpole") == 100000);
    CHECK(default_budget(Algo::Dqn, "cartpole") == 50000);
    CHECK(default_budget(Algo::Dqn, "mountaincar") == 120000);
    CHECK(default_budget(Algo::Sac, "pendulum") == 20000);
    CHECK(default_budget(Algo::Sac, "mountaincar-continuous") == 50000);
    CHECK(default_budget(Algo::Ppo, "mountaincar-continuous") == 20000);
    CHECK(default_budget(Algo::Ppo, "gridworld-empty-random-5x5") == 100000);
}

TEST_CASE("make is deterministic and cartpole resets inside [-0.05, 0.05]") {
    VecEnv a = VecEnv::make("cartpole", 4, 0);
    VecEnv b = VecEnv::make("cartpole", 4, 0);
    CHECK((a.observations() - b.observations()).cwiseAbs().maxCoeff() == 0.0);
    for (int seed = 0; seed < 32; ++seed) {
        VecEnv env = VecEnv::make("cartpole", 1, static_cast<std::uint64_t>(seed));
        CHECK(env.observations().cwiseAbs().maxCoeff() <= 0.05);
    }
}

TEST_CASE("gridworld-empty-random: agent uniform over free cells, goal fixed") {
    // 3x3 interior minus the fixed goal leaves 8 equally likely cells.
    std::map<std::pair<int, int>, int> counts;
    const int n = 10000;
    for (int seed = 0; seed < n; ++seed) {
        VecEnv env = VecEnv::make("gridworld-empty-random", 1, static_cast<std::uint64_t>(seed));
        const Eigen::MatrixXd state = env.pack_state();
        const int ax = static_cast<int>(state(0, 25));
        const int ay = static_cast<int>(state(0, 26));
        counts[{ax, ay}] += 1;
        CHECK(static_cast<int>(state(0, 3 * 5 + 3)) == 2);  // goal cell at (3, 3)
    }
    REQUIRE(counts.size() == 8);
    const double sigma = std::sqrt(n * (1.0 / 8) * (7.0 / 8));
    for (const auto& [cell, count] : counts) {
        CHECK(count > n / 8.0 - 4 * sigma);
        CHECK(count < n / 8.0 + 4 * sigma);
    }
}

TEST_CASE("cartpole terminates past 12 degrees with reward 1") {
    VecEnv env = VecEnv::make("cartpole", 1, 3);
    Eigen::MatrixXd action = Eigen::MatrixXd::Constant(1, 1, 1.0);  // always push right
    bool terminated = false;
    int steps = 0;
    while (!terminated && steps < 500) {
        const auto result = env.step(action);
        CHECK(result.reward[0] == 1.0);
        terminated = result.terminated[0] != 0;
        if (terminated) {
            const double x = result.terminal_obs(0, 0);
            const double theta = result.terminal_obs(0, 2);
            CHECK((std::abs(theta) > 12.0 * 2 * M_PI / 360.0 || std::abs(x) > 2.4));
            CHECK(result.obs.row(0).cwiseAbs().maxCoeff() <= 0.05);  // fresh reset
        }
        ++steps;
    }
    CHECK(terminated);
}

TEST_CASE("pendulum never terminates, truncates at 200, reward within [-16.2736, 0]") {
    VecEnv env = VecEnv::make("pendulum", 1, 5);
    Eigen::MatrixXd action = Eigen::MatrixXd::Constant(1, 1, 2.0);
    for (int t = 1; t <= 200; ++t) {
        const auto result = env.step(action);
        CHECK(result.terminated[0] == 0);
        CHECK(result.reward[0] <= 0.0);
        CHECK(result.reward[0] >= -16.2736);
        CHECK((result.truncated[0] != 0) == (t == 200));
    }
}

TEST_CASE("terminated and truncated are mutually exclusive") {
    VecEnv env = VecEnv::make("mountaincar", 2, 9);
    Eigen::MatrixXd action = Eigen::MatrixXd::Constant(2, 1, 1.0);
    for (int t = 0; t < 400; ++t) {
        const auto result = env.step(action);
        for (int i = 0; i < 2; ++i)
            CHECK((result.terminated[static_cast<std::size_t>(i)] & result.truncated[static_cast<std::size_t>(i)]) ==
                  0);
    }
}

TEST_CASE("identical states and actions give identical successors") {
    VecEnv a = VecEnv::make("acrobot", 3, 11);
    VecEnv b = a;  // deep copy
    Eigen::MatrixXd action(3, 1);
    action << 0, 1, 2;
    for (int t = 0; t < 50; ++t) {
        const auto ra = a.step(action);
        const auto rb = b.step(action);
        CHECK((ra.obs - rb.obs).cwiseAbs().maxCoeff() == 0.0);
        CHECK((ra.reward - rb.reward).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("vectorization equals independent single instances") {
    const std::vector<std::uint64_t> seeds{derive_seed(7, "cartpole", 0), derive_seed(7, "cartpole", 1),
                                           derive_seed(7, "cartpole", 2)};
    VecEnv vec = VecEnv::make("cartpole", 3, 7);
    std::vector<VecEnv> singles;
    for (auto s : seeds) singles.push_back(VecEnv::make_with_seeds("cartpole", {s}));

    Rng action_rng(123);
    for (int t = 0; t < 300; ++t) {
        Eigen::MatrixXd actions(3, 1);
        for (int i = 0; i < 3; ++i) actions(i, 0) = static_cast<double>(action_rng.uniform_int(0, 1));
        const auto rv = vec.step(actions);
        for (int i = 0; i < 3; ++i) {
            const auto rs = singles[static_cast<std::size_t>(i)].step(actions.row(i));
            CHECK(rs.reward[0] == rv.reward[i]);
            CHECK((rs.obs.row(0) - rv.obs.row(i)).cwiseAbs().maxCoeff() == 0.0);
            CHECK(rs.terminated[0] == rv.terminated[static_cast<std::size_t>(i)]);
        }
    }
}

TEST_CASE("trajectories are bit-identical across reruns") {
    auto run = [] {
        VecEnv env = VecEnv::make("mountaincar-continuous", 2, 17);
        Rng rng(4);
        double checksum = 0.0;
        for (int t = 0; t < 500; ++t) {
            Eigen::MatrixXd action(2, 1);
            action(0, 0) = rng.uniform(-1.0, 1.0);
            action(1, 0) = rng.uniform(-1.0, 1.0);
            const auto result = env.step(action);
            checksum += result.reward.sum() + result.obs.sum();
        }
        return checksum;
    };
    CHECK(run() == run());
}

TEST_CASE("gridworld rewards live in [0, 1] and goal sets terminated") {
    VecEnv env = VecEnv::make("gridworld-empty-random", 8, 21);
    Rng rng(2);
    int goals_seen = 0;
    for (int t = 0; t < 3000 && goals_seen < 5; ++t) {
        Eigen::MatrixXd action(8, 1);
        for (int i = 0; i < 8; ++i) action(i, 0) = static_cast<double>(rng.uniform_int(0, 4));
        const auto result = env.step(action);
        for (int i = 0; i < 8; ++i) {
            CHECK(result.reward[i] >= 0.0);
            CHECK(result.reward[i] <= 1.0);
            if (result.reward[i] > 0.0) {
                CHECK(result.terminated[static_cast<std::size_t>(i)] == 1);
                ++goals_seen;
            }
        }
    }
    CHECK(goals_seen >= 5);
}

TEST_CASE("doorkey and unlock are solvable through pickup and toggle") {
    for (const char* name : {"gridworld-doorkey-5x5", "gridworld-unlock"}) {
        VecEnv env = VecEnv::make(name, 16, 3);
        Rng rng(8);
        bool solved = false;
        for (int t = 0; t < 20000 && !solved; ++t) {
            Eigen::MatrixXd action(16, 1);
            for (int i = 0; i < 16; ++i) action(i, 0) = static_cast<double>(rng.uniform_int(0, 4));
            const auto result = env.step(action);
            for (int i = 0; i < 16; ++i)
                if (result.terminated[static_cast<std::size_t>(i)] != 0) {
                    solved = true;
                    CHECK(result.reward[i] > 0.0);
                }
        }
        CHECK(solved);
    }
}

TEST_CASE("out-of-space actions raise an error naming the env index") {
    VecEnv env = VecEnv::make("cartpole", 2, 0);
    Eigen::MatrixXd action(2, 1);
    action << 0, 5;
    CHECK_THROWS_WITH_AS(env.step(action), doctest::Contains("env 1"), ConfigError);
    VecEnv box = VecEnv::make("pendulum", 1, 0);
    CHECK_THROWS_AS(box.step(Eigen::MatrixXd::Constant(1, 1, 3.0)), ConfigError);
}

TEST_CASE("env state pack/unpack round trips") {
    VecEnv env = VecEnv::make("gridworld-doorkey-5x5", 2, 13);
    Rng rng(1);
    for (int t = 0; t < 37; ++t) {
        Eigen::MatrixXd action(2, 1);
        for (int i = 0; i < 2; ++i) action(i, 0) = static_cast<double>(rng.uniform_int(0, 4));
        env.step(action);
    }
    VecEnv copy = VecEnv::make("gridworld-doorkey-5x5", 2, 99);
    copy.unpack_state(env.pack_state());
    copy.unpack_rng(env.pack_rng());
    Eigen::MatrixXd action = Eigen::MatrixXd::Zero(2, 1);
    for (int t = 0; t < 200; ++t) {
        action(0, 0) = static_cast<double>(t % 5);
        action(1, 0) = static_cast<double>((t + 2) % 5);
        const auto ra = env.step(action);
        const auto rb = copy.step(action);
        CHECK((ra.obs - rb.obs).cwiseAbs().maxCoeff() == 0.0);
        CHECK((ra.reward - rb.reward).cwiseAbs().maxCoeff() == 0.0);
    }
}
