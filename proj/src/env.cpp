#include "arlb/env.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace arlb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double wrap_pi(double x) {
    while (x > M_PI) x -= 2.0 * M_PI;
    while (x < -M_PI) x += 2.0 * M_PI;
    return x;
}

// ---- Classic control -------------------------------------------------------
// Dynamics constants follow the canonical task definitions; integration is
// explicit Euler at each task's canonical step size. All constants live here.

// CartPole: gravity 9.8, cart mass 1.0, pole mass 0.1, half-pole length 0.5,
// force 10, dt 0.02. Terminates at |x| > 2.4 or |theta| > 12 deg; reward 1
// per step; 500-step limit.
class CartPoleCore final : public EnvCore {
  public:
    void reset(Rng& rng) override {
        for (double& v : s_) v = rng.uniform(-0.05, 0.05);
    }

    double step(const Eigen::Ref<const Eigen::VectorXd>& action, int, bool& terminated) override {
        const double force = action[0] > 0.5 ? 10.0 : -10.0;
        const double cos_th = std::cos(s_[2]), sin_th = std::sin(s_[2]);
        const double temp = (force + kPoleMassLength * s_[3] * s_[3] * sin_th) / kTotalMass;
        const double theta_acc =
            (kGravity * sin_th - cos_th * temp) / (kLength * (4.0 / 3.0 - kMassPole * cos_th * cos_th / kTotalMass));
        const double x_acc = temp - kPoleMassLength * theta_acc * cos_th / kTotalMass;
        s_[0] += kDt * s_[1];
        s_[1] += kDt * x_acc;
        s_[2] += kDt * s_[3];
        s_[3] += kDt * theta_acc;
        terminated = std::abs(s_[0]) > 2.4 || std::abs(s_[2]) > kThetaLimit;
        return 1.0;
    }

    void observe(Eigen::Ref<Eigen::VectorXd> out) const override {
        for (int i = 0; i < 4; ++i) out[i] = s_[i];
    }

    Eigen::VectorXd save_state() const override { return Eigen::Map<const Eigen::Vector4d>(s_.data()); }
    void load_state(const Eigen::Ref<const Eigen::VectorXd>& state) override {
        for (int i = 0; i < 4; ++i) s_[i] = state[i];
    }
    std::unique_ptr<EnvCore> clone() const override { return std::make_unique<CartPoleCore>(*this); }

  private:
    static constexpr double kGravity = 9.8, kMassCart = 1.0, kMassPole = 0.1;
    static constexpr double kTotalMass = kMassCart + kMassPole;
    static constexpr double kLength = 0.5, kPoleMassLength = kMassPole * kLength;
    static constexpr double kDt = 0.02, kThetaLimit = 12.0 * 2.0 * M_PI / 360.0;

    std::array<double, 4> s_{};  // x, x_dot, theta, theta_dot
};

// MountainCar (discrete): force 0.001, gravity term 0.0025, goal at 0.5 with
// non-negative velocity, reward -1 per step, 200-step limit.
class MountainCarCore final : public EnvCore {
  public:
    explicit MountainCarCore(bool continuous) : continuous_(continuous) {}

    void reset(Rng& rng) override {
        pos_ = rng.uniform(-0.6, -0.4);
        vel_ = 0.0;
    }

    double step(const Eigen::Ref<const Eigen::VectorXd>& action, int, bool& terminated) override {
        double reward;
        if (continuous_) {
            const double force = std::clamp(action[0], -1.0, 1.0);
            vel_ += force * 0.0015 - 0.0025 * std::cos(3.0 * pos_);
            reward = -0.1 * force * force;
        } else {
            vel_ += (action[0] - 1.0) * 0.001 - 0.0025 * std::cos(3.0 * pos_);
            reward = -1.0;
        }
        vel_ = std::clamp(vel_, -0.07, 0.07);
        pos_ += vel_;
        pos_ = std::clamp(pos_, -1.2, 0.6);
        if (pos_ <= -1.2 && vel_ < 0.0) vel_ = 0.0;
        const double goal = continuous_ ? 0.45 : 0.5;
        terminated = pos_ >= goal && vel_ >= 0.0;
        if (terminated && continuous_) reward += 100.0;
        return reward;
    }

    void observe(Eigen::Ref<Eigen::VectorXd> out) const override {
        out[0] = pos_;
        out[1] = vel_;
    }

    Eigen::VectorXd save_state() const override { return Eigen::Vector2d(pos_, vel_); }
    void load_state(const Eigen::Ref<const Eigen::VectorXd>& state) override {
        pos_ = state[0];
        vel_ = state[1];
    }
    std::unique_ptr<EnvCore> clone() const override { return std::make_unique<MountainCarCore>(*this); }

  private:
    bool continuous_;
    double pos_ = 0.0, vel_ = 0.0;
};

// Acrobot: two-link pendulum, torque in {-1, 0, +1} on the second joint,
// dt 0.2, link masses/lengths 1, reward -1 until -cos(th1) - cos(th1+th2) > 1
// (0 on the terminating step), 500-step limit.
class AcrobotCore final : public EnvCore {
  public:
    void reset(Rng& rng) override {
        for (double& v : s_) v = rng.uniform(-0.1, 0.1);
    }

    double step(const Eigen::Ref<const Eigen::VectorXd>& action, int, bool& terminated) override {
        const double torque = action[0] - 1.0;
        const double th1 = s_[0], th2 = s_[1], dth1 = s_[2], dth2 = s_[3];
        const double d1 = kM * kLc * kLc + kM * (kL * kL + kLc * kLc + 2.0 * kL * kLc * std::cos(th2)) + 2.0 * kI;
        const double d2 = kM * (kLc * kLc + kL * kLc * std::cos(th2)) + kI;
        const double phi2 = kM * kLc * kG * std::cos(th1 + th2 - M_PI_2);
        const double phi1 = -kM * kL * kLc * dth2 * dth2 * std::sin(th2) -
                            2.0 * kM * kL * kLc * dth2 * dth1 * std::sin(th2) +
                            (kM * kLc + kM * kL) * kG * std::cos(th1 - M_PI_2) + phi2;
        const double ddth2 = (torque + d2 / d1 * phi1 - kM * kL * kLc * dth1 * dth1 * std::sin(th2) - phi2) /
                             (kM * kLc * kLc + kI - d2 * d2 / d1);
        const double ddth1 = -(d2 * ddth2 + phi1) / d1;
        s_[0] = wrap_pi(th1 + kDt * dth1);
        s_[1] = wrap_pi(th2 + kDt * dth2);
        s_[2] = std::clamp(dth1 + kDt * ddth1, -4.0 * M_PI, 4.0 * M_PI);
        s_[3] = std::clamp(dth2 + kDt * ddth2, -9.0 * M_PI, 9.0 * M_PI);
        terminated = -std::cos(s_[0]) - std::cos(s_[0] + s_[1]) > 1.0;
        return terminated ? 0.0 : -1.0;
    }

    void observe(Eigen::Ref<Eigen::VectorXd> out) const override {
        out[0] = std::cos(s_[0]);
        out[1] = std::sin(s_[0]);
        out[2] = std::cos(s_[1]);
        out[3] = std::sin(s_[1]);
        out[4] = s_[2];
        out[5] = s_[3];
    }

    Eigen::VectorXd save_state() const override { return Eigen::Map<const Eigen::Vector4d>(s_.data()); }
    void load_state(const Eigen::Ref<const Eigen::VectorXd>& state) override {
        for (int i = 0; i < 4; ++i) s_[i] = state[i];
    }
    std::unique_ptr<EnvCore> clone() const override { return std::make_unique<AcrobotCore>(*this); }

  private:
    static constexpr double kM = 1.0, kL = 1.0, kLc = 0.5, kI = 1.0, kG = 9.8, kDt = 0.2;

    std::array<double, 4> s_{};  // th1, th2, dth1, dth2
};

// Pendulum: g 10, mass 1, length 1, dt 0.05, torque clipped to [-2, 2],
// reward -(theta^2 + 0.1 w^2 + 0.001 u^2), per-step range [-16.2736..., 0].
// Never terminates; 200-step limit.
class PendulumCore final : public EnvCore {
  public:
    void reset(Rng& rng) override {
        th_ = rng.uniform(-M_PI, M_PI);
        w_ = rng.uniform(-1.0, 1.0);
    }

    double step(const Eigen::Ref<const Eigen::VectorXd>& action, int, bool& terminated) override {
        const double u = std::clamp(action[0], -2.0, 2.0);
        const double th = wrap_pi(th_);
        const double cost = th * th + 0.1 * w_ * w_ + 0.001 * u * u;
        w_ += (3.0 * kG / (2.0 * kL) * std::sin(th_) + 3.0 / (kM * kL * kL) * u) * kDt;
        w_ = std::clamp(w_, -8.0, 8.0);
        th_ += w_ * kDt;
        terminated = false;
        return -cost;
    }

    void observe(Eigen::Ref<Eigen::VectorXd> out) const override {
        out[0] = std::cos(th_);
        out[1] = std::sin(th_);
        out[2] = w_;
    }

    Eigen::VectorXd save_state() const override { return Eigen::Vector2d(th_, w_); }
    void load_state(const Eigen::Ref<const Eigen::VectorXd>& state) override {
        th_ = state[0];
        w_ = state[1];
    }
    std::unique_ptr<EnvCore> clone() const override { return std::make_unique<PendulumCore>(*this); }

  private:
    static constexpr double kG = 10.0, kM = 1.0, kL = 1.0, kDt = 0.05;

    double th_ = 0.0, w_ = 0.0;
};

// ---- Gridworlds -------------------------------------------------------------
// Partially observed grids with a 5x5 egocentric one-hot view (6 cell
// channels, rotated so the agent faces up, out-of-bounds reads as wall, the
// center cell shows the carried key if any) plus a 4-way direction one-hot.
// Actions: 0 turn left, 1 turn right, 2 forward, 3 pickup, 4 toggle.
// Reaching the goal (or opening the lock, where that is the task) terminates
// with reward 1 - 0.9 * t / max_episode_steps; every other step scores 0.

constexpr int kGridChannels = 6;
constexpr int kGridView = 5;
constexpr int kGridObsDim = kGridView * kGridView * kGridChannels + 4;

class GridworldCore : public EnvCore {
  public:
    enum Cell : int { Floor = 0, Wall = 1, GoalCell = 2, KeyCell = 3, DoorLocked = 4, DoorOpen = 5 };

    GridworldCore(int w, int h, int t_max) : w_(w), h_(h), t_max_(t_max), grid_(h, w) {}

    void reset(Rng& rng) override {
        grid_.setConstant(Wall);
        carrying_ = false;
        build(rng);
    }

    double step(const Eigen::Ref<const Eigen::VectorXd>& action, int t, bool& terminated) override {
        terminated = false;
        const int a = static_cast<int>(std::llround(action[0]));
        switch (a) {
            case 0: dir_ = (dir_ + 3) % 4; break;
            case 1: dir_ = (dir_ + 1) % 4; break;
            case 2: {
                const auto [fx, fy] = front();
                const int cell = at(fx, fy);
                if (cell == Floor || cell == GoalCell || cell == DoorOpen) {
                    ax_ = fx;
                    ay_ = fy;
                    if (cell == GoalCell && goal_terminates()) {
                        terminated = true;
                        return success_reward(t);
                    }
                }
                break;
            }
            case 3: {
                const auto [fx, fy] = front();
                if (at(fx, fy) == KeyCell && !carrying_) {
                    carrying_ = true;
                    grid_(fy, fx) = Floor;
                }
                break;
            }
            case 4: {
                const auto [fx, fy] = front();
                if (at(fx, fy) == DoorLocked && carrying_) {
                    grid_(fy, fx) = DoorOpen;
                    if (open_terminates()) {
                        terminated = true;
                        return success_reward(t);
                    }
                }
                break;
            }
            default: break;
        }
        return 0.0;
    }

    void observe(Eigen::Ref<Eigen::VectorXd> out) const override {
        out.setZero();
        for (int vy = -2; vy <= 2; ++vy) {
            for (int vx = -2; vx <= 2; ++vx) {
                int dx = vx, dy = vy;
                switch (dir_) {  // rotate view so the agent faces up
                    case 0: break;
                    case 1: dx = -vy, dy = vx; break;
                    case 2: dx = -vx, dy = -vy; break;
                    case 3: dx = vy, dy = -vx; break;
                }
                int cell;
                if (vx == 0 && vy == 0)
                    cell = carrying_ ? KeyCell : Floor;
                else
                    cell = at(ax_ + dx, ay_ + dy);
                out[((vy + 2) * kGridView + (vx + 2)) * kGridChannels + cell] = 1.0;
            }
        }
        out[kGridView * kGridView * kGridChannels + dir_] = 1.0;
    }

    Eigen::VectorXd save_state() const override {
        Eigen::VectorXd s(w_ * h_ + 4);
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x) s[y * w_ + x] = grid_(y, x);
        s[w_ * h_ + 0] = ax_;
        s[w_ * h_ + 1] = ay_;
        s[w_ * h_ + 2] = dir_;
        s[w_ * h_ + 3] = carrying_ ? 1.0 : 0.0;
        return s;
    }

    void load_state(const Eigen::Ref<const Eigen::VectorXd>& state) override {
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x) grid_(y, x) = static_cast<int>(state[y * w_ + x]);
        ax_ = static_cast<int>(state[w_ * h_ + 0]);
        ay_ = static_cast<int>(state[w_ * h_ + 1]);
        dir_ = static_cast<int>(state[w_ * h_ + 2]);
        carrying_ = state[w_ * h_ + 3] != 0.0;
    }

    int agent_x() const { return ax_; }
    int agent_y() const { return ay_; }

  protected:
    virtual void build(Rng& rng) = 0;
    virtual bool goal_terminates() const { return true; }
    virtual bool open_terminates() const { return false; }

    double success_reward(int t) const { return 1.0 - 0.9 * static_cast<double>(t) / static_cast<double>(t_max_); }

    int at(int x, int y) const {
        if (x < 0 || y < 0 || x >= w_ || y >= h_) return Wall;
        return grid_(y, x);
    }

    std::pair<int, int> front() const {
        static constexpr int kDx[4] = {0, 1, 0, -1};
        static constexpr int kDy[4] = {-1, 0, 1, 0};
        return {ax_ + kDx[dir_], ay_ + kDy[dir_]};
    }

    // Uniform choice among floor cells, in row-major order.
    std::pair<int, int> random_floor(Rng& rng, int skip_x = -1, int skip_y = -1) {
        std::vector<std::pair<int, int>> cells;
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x)
                if (grid_(y, x) == Floor && !(x == skip_x && y == skip_y)) cells.emplace_back(x, y);
        return cells[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(cells.size()) - 1))];
    }

    void place_agent(Rng& rng) {
        auto [x, y] = random_floor(rng);
        ax_ = x;
        ay_ = y;
        dir_ = static_cast<int>(rng.uniform_int(0, 3));
    }

    int w_, h_, t_max_;
    Eigen::MatrixXi grid_;
    int ax_ = 1, ay_ = 1, dir_ = 0;
    bool carrying_ = false;
};

// 5x5 grid (3x3 free interior), fixed goal in the corner, random agent cell
// and facing.
class GridEmptyRandomCore final : public GridworldCore {
  public:
    GridEmptyRandomCore() : GridworldCore(5, 5, 100) {}

    std::unique_ptr<EnvCore> clone() const override { return std::make_unique<GridEmptyRandomCore>(*this); }

  protected:
    void build(Rng& rng) override {
        for (int y = 1; y < h_ - 1; ++y)
            for (int x = 1; x < w_ - 1; ++x) grid_(y, x) = Floor;
        grid_(h_ - 2, w_ - 2) = GoalCell;
        place_agent(rng);
    }
};

// 5x5 grid split by a wall with a locked door; key and agent start in the
// left column, goal behind the door.
class GridDoorKeyCore final : public GridworldCore {
  public:
    GridDoorKeyCore() : GridworldCore(5, 5, 250) {}

    std::unique_ptr<EnvCore> clone() const override { return std::make_unique<GridDoorKeyCore>(*this); }

  protected:
    void build(Rng& rng) override {
        for (int y = 1; y < h_ - 1; ++y)
            for (int x = 1; x < w_ - 1; ++x) grid_(y, x) = x == 2 ? Wall : Floor;
        const int door_y = static_cast<int>(rng.uniform_int(1, h_ - 2));
        grid_(door_y, 2) = DoorLocked;
        grid_(h_ - 2, w_ - 2) = GoalCell;
        const int key_y = static_cast<int>(rng.uniform_int(1, h_ - 2));
        grid_(key_y, 1) = KeyCell;
        std::vector<int> starts;
        for (int y = 1; y < h_ - 1; ++y)
            if (grid_(y, 1) == Floor) starts.push_back(y);
        ay_ = starts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(starts.size()) - 1))];
        ax_ = 1;
        dir_ = static_cast<int>(rng.uniform_int(0, 3));
    }
};

// 13x13 four-rooms layout with one gap per dividing wall, fixed goal,
// random agent cell and facing.
class GridFourRoomsCore final : public GridworldCore {
  public:
    GridFourRoomsCore() : GridworldCore(13, 13, 400) {}

    std::unique_ptr<EnvCore> clone() const override { return std::make_unique<GridFourRoomsCore>(*this); }

  protected:
    void build(Rng& rng) override {
        for (int y = 1; y < h_ - 1; ++y)
            for (int x = 1; x < w_ - 1; ++x) grid_(y, x) = x == 6 || y == 6 ? Wall : Floor;
        grid_(3, 6) = Floor;
        grid_(9, 6) = Floor;
        grid_(6, 3) = Floor;
        grid_(6, 9) = Floor;
        grid_(h_ - 2, w_ - 2) = GoalCell;
        place_agent(rng);
    }
};

// 7x5 two-room grid; the task is to pick up the key and open the locked
// door, which ends the episode.
class GridUnlockCore final : public GridworldCore {
  public:
    GridUnlockCore() : GridworldCore(7, 5, 150) {}

    std::unique_ptr<EnvCore> clone() const override { return std::make_unique<GridUnlockCore>(*this); }

  protected:
    void build(Rng& rng) override {
        for (int y = 1; y < h_ - 1; ++y)
            for (int x = 1; x < w_ - 1; ++x) grid_(y, x) = x == 3 ? Wall : Floor;
        const int door_y = static_cast<int>(rng.uniform_int(1, h_ - 2));
        grid_(door_y, 3) = DoorLocked;
        std::vector<std::pair<int, int>> left;
        for (int y = 1; y < h_ - 1; ++y)
            for (int x = 1; x < 3; ++x) left.emplace_back(x, y);
        const auto key = left[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(left.size()) - 1))];
        grid_(key.second, key.first) = KeyCell;
        std::vector<std::pair<int, int>> starts;
        for (const auto& c : left)
            if (grid_(c.second, c.first) == Floor) starts.push_back(c);
        const auto start = starts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(starts.size()) - 1))];
        ax_ = start.first;
        ay_ = start.second;
        dir_ = static_cast<int>(rng.uniform_int(0, 3));
    }

    bool goal_terminates() const override { return false; }
    bool open_terminates() const override { return true; }
};

// ---- Registry ---------------------------------------------------------------

Eigen::VectorXd constant_vec(int n, double v) { return Eigen::VectorXd::Constant(n, v); }

Space grid_obs_space() { return Space::box(constant_vec(kGridObsDim, 0.0), constant_vec(kGridObsDim, 1.0)); }

struct EnvEntry {
    EnvSpec spec;
    std::unique_ptr<EnvCore> (*make)();
};

const std::vector<EnvEntry>& entries() {
    static const std::vector<EnvEntry> table = [] {
        std::vector<EnvEntry> t;
        {
            Eigen::VectorXd lo(4), hi(4);
            lo << -4.8, -kInf, -0.41887902047863906, -kInf;
            hi = -lo;
            t.push_back({{"cartpole", Space::box(lo, hi), Space::discrete(2), 500, 100000, 0.0},
                         [] { return std::unique_ptr<EnvCore>(std::make_unique<CartPoleCore>()); }});
        }
        {
            Eigen::VectorXd lo(2), hi(2);
            lo << -1.2, -0.07;
            hi << 0.6, 0.07;
            t.push_back({{"mountaincar", Space::box(lo, hi), Space::discrete(3), 200, 1000000, -200.0},
                         [] { return std::unique_ptr<EnvCore>(std::make_unique<MountainCarCore>(false)); }});
            t.push_back({{"mountaincar-continuous", Space::box(lo, hi),
                          Space::box(constant_vec(1, -1.0), constant_vec(1, 1.0)), 999, 20000, -100.0},
                         [] { return std::unique_ptr<EnvCore>(std::make_unique<MountainCarCore>(true)); }});
        }
        {
            Eigen::VectorXd lo(6), hi(6);
            lo << -1, -1, -1, -1, -4.0 * M_PI, -9.0 * M_PI;
            hi = -lo;
            t.push_back({{"acrobot", Space::box(lo, hi), Space::discrete(3), 500, 1000000, -500.0},
                         [] { return std::unique_ptr<EnvCore>(std::make_unique<AcrobotCore>()); }});
        }
        {
            Eigen::VectorXd lo(3), hi(3);
            lo << -1, -1, -8;
            hi = -lo;
            t.push_back({{"pendulum", Space::box(lo, hi), Space::box(constant_vec(1, -2.0), constant_vec(1, 2.0)),
                          200, 100000, -1700.0},
                         [] { return std::unique_ptr<EnvCore>(std::make_unique<PendulumCore>()); }});
        }
        t.push_back({{"gridworld-empty-random-5x5", grid_obs_space(), Space::discrete(5), 100, 100000, 0.0},
                     [] { return std::unique_ptr<EnvCore>(std::make_unique<GridEmptyRandomCore>()); }});
        t.push_back({{"gridworld-doorkey-5x5", grid_obs_space(), Space::discrete(5), 250, 1000000, 0.0},
                     [] { return std::unique_ptr<EnvCore>(std::make_unique<GridDoorKeyCore>()); }});
        t.push_back({{"gridworld-fourrooms", grid_obs_space(), Space::discrete(5), 400, 1000000, 0.0},
                     [] { return std::unique_ptr<EnvCore>(std::make_unique<GridFourRoomsCore>()); }});
        t.push_back({{"gridworld-unlock", grid_obs_space(), Space::discrete(5), 150, 1000000, 0.0},
                     [] { return std::unique_ptr<EnvCore>(std::make_unique<GridUnlockCore>()); }});
        return t;
    }();
    return table;
}

std::string resolve_alias(const std::string& name) {
    if (name == "gridworld-empty-random") return "gridworld-empty-random-5x5";
    if (name == "gridworld-doorkey") return "gridworld-doorkey-5x5";
    return name;
}

const EnvEntry& entry(const std::string& name) {
    const std::string resolved = resolve_alias(name);
    for (const auto& e : entries())
        if (e.spec.name == resolved) return e;
    std::ostringstream msg;
    msg << "unknown environment '" << name << "'; registered:";
    for (const auto& e : entries()) msg << " " << e.spec.name;
    throw ConfigError(msg.str());
}

}  // namespace

Space Space::discrete(int n) {
    Space s;
    s.kind = Kind::Discrete;
    s.n = n;
    return s;
}

Space Space::box(Eigen::VectorXd low, Eigen::VectorXd high) {
    Space s;
    s.kind = Kind::Box;
    s.low = std::move(low);
    s.high = std::move(high);
    return s;
}

const std::vector<EnvSpec>& registered_envs() {
    static const std::vector<EnvSpec> specs = [] {
        std::vector<EnvSpec> out;
        for (const auto& e : entries()) out.push_back(e.spec);
        return out;
    }();
    return specs;
}

const EnvSpec& env_spec(const std::string& name) { return entry(name).spec; }

bool env_known(const std::string& name) {
    const std::string resolved = resolve_alias(name);
    for (const auto& e : entries())
        if (e.spec.name == resolved) return true;
    return false;
}

long default_budget(Algo algo, const std::string& env_name) {
    const EnvSpec& spec = env_spec(env_name);
    if (algo == Algo::Dqn) {
        if (spec.name == "cartpole") return 50000;
        if (spec.name == "mountaincar") return 120000;
        if (spec.name == "acrobot") return 100000;
    }
    if (algo == Algo::Sac) {
        if (spec.name == "pendulum") return 20000;
        if (spec.name == "mountaincar-continuous") return 50000;
    }
    return spec.default_timesteps;
}

Domain domain_of_env(const std::string& env_name) {
    return env_spec(env_name).name.rfind("gridworld-", 0) == 0 ? Domain::Gridworld : Domain::ClassicControl;
}

std::string envs_list_csv() {
    std::ostringstream out;
    out << "name,obs_dim,action_kind,action_dim,max_episode_steps,default_timesteps\n";
    for (const auto& spec : registered_envs()) {
        const bool discrete = spec.action_space.kind == Space::Kind::Discrete;
        out << spec.name << "," << spec.observation_space.low.size() << "," << (discrete ? "discrete" : "box") << ","
            << (discrete ? spec.action_space.n : static_cast<int>(spec.action_space.low.size())) << ","
            << spec.max_episode_steps << "," << spec.default_timesteps << "\n";
    }
    return out.str();
}

// ---- VecEnv -----------------------------------------------------------------

VecEnv VecEnv::make(const std::string& name, int n_envs, std::uint64_t seed) {
    if (n_envs < 1) throw ConfigError("n_envs must be >= 1");
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n_envs));
    for (int i = 0; i < n_envs; ++i)
        seeds[static_cast<std::size_t>(i)] = derive_seed(seed, resolve_alias(name), static_cast<std::uint64_t>(i));
    return make_with_seeds(name, seeds);
}

VecEnv VecEnv::make_with_seeds(const std::string& name, const std::vector<std::uint64_t>& env_seeds) {
    VecEnv env;
    env.init(name, env_seeds);
    return env;
}

void VecEnv::init(const std::string& name, const std::vector<std::uint64_t>& env_seeds) {
    const EnvEntry& e = entry(name);
    spec_ = e.spec;
    const int n = static_cast<int>(env_seeds.size());
    const int obs_dim = static_cast<int>(spec_.observation_space.low.size());
    obs_.resize(n, obs_dim);
    steps_.assign(static_cast<std::size_t>(n), 0);
    returns_.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        cores_.push_back(e.make());
        rngs_.emplace_back(env_seeds[static_cast<std::size_t>(i)]);
        cores_.back()->reset(rngs_.back());
        refresh_obs(i);
    }
}

VecEnv::VecEnv(const VecEnv& other)
    : spec_(other.spec_), rngs_(other.rngs_), steps_(other.steps_), returns_(other.returns_), obs_(other.obs_) {
    cores_.reserve(other.cores_.size());
    for (const auto& core : other.cores_) cores_.push_back(core->clone());
}

VecEnv& VecEnv::operator=(const VecEnv& other) {
    if (this == &other) return *this;
    VecEnv tmp(other);
    *this = std::move(tmp);
    return *this;
}

void VecEnv::refresh_obs(int i) {
    Eigen::VectorXd row(obs_.cols());
    cores_[static_cast<std::size_t>(i)]->observe(row);
    obs_.row(i) = row.transpose();
}

VecEnv::StepResult VecEnv::step(const Eigen::MatrixXd& actions) {
    const int n = n_envs();
    if (actions.rows() != n) throw ConfigError("action batch size does not match n_envs");
    const Space& aspace = spec_.action_space;
    if (actions.cols() != aspace.dim()) throw ConfigError("action dimension does not match the action space");

    StepResult result;
    result.obs.resize(n, obs_.cols());
    result.reward.resize(n);
    result.terminated.assign(static_cast<std::size_t>(n), 0);
    result.truncated.assign(static_cast<std::size_t>(n), 0);
    result.terminal_obs = Eigen::MatrixXd::Zero(n, obs_.cols());
    result.episode_end.assign(static_cast<std::size_t>(n), 0);

    for (int i = 0; i < n; ++i) {
        if (aspace.kind == Space::Kind::Discrete) {
            const double a = actions(i, 0);
            if (a < -0.5 || a >= static_cast<double>(aspace.n) - 0.5 || std::abs(a - std::round(a)) > 1e-9)
                throw ConfigError("env " + std::to_string(i) + ": action " + std::to_string(a) +
                                  " outside discrete(" + std::to_string(aspace.n) + ")");
        } else {
            for (int d = 0; d < aspace.dim(); ++d)
                if (actions(i, d) < aspace.low[d] - 1e-9 || actions(i, d) > aspace.high[d] + 1e-9)
                    throw ConfigError("env " + std::to_string(i) + ": action component " + std::to_string(d) +
                                      " outside the box bounds");
        }
        auto& core = cores_[static_cast<std::size_t>(i)];
        bool terminated = false;
        steps_[static_cast<std::size_t>(i)] += 1;
        const double reward = core->step(actions.row(i).transpose(), steps_[static_cast<std::size_t>(i)], terminated);
        returns_[static_cast<std::size_t>(i)] += reward;
        const bool truncated = !terminated && steps_[static_cast<std::size_t>(i)] >= spec_.max_episode_steps;
        result.reward[i] = reward;
        result.terminated[static_cast<std::size_t>(i)] = terminated ? 1 : 0;
        result.truncated[static_cast<std::size_t>(i)] = truncated ? 1 : 0;
        if (terminated || truncated) {
            Eigen::VectorXd last(obs_.cols());
            core->observe(last);
            result.terminal_obs.row(i) = last.transpose();
            result.episode_end[static_cast<std::size_t>(i)] = 1;
            result.finished_returns.push_back(returns_[static_cast<std::size_t>(i)]);
            result.finished_lengths.push_back(steps_[static_cast<std::size_t>(i)]);
            core->reset(rngs_[static_cast<std::size_t>(i)]);
            steps_[static_cast<std::size_t>(i)] = 0;
            returns_[static_cast<std::size_t>(i)] = 0.0;
        }
        refresh_obs(i);
    }
    result.obs = obs_;
    return result;
}

Eigen::MatrixXd VecEnv::pack_state() const {
    const Eigen::Index sd = cores_.front()->save_state().size();
    Eigen::MatrixXd m(n_envs(), sd + 2);
    for (int i = 0; i < n_envs(); ++i) {
        m.row(i).head(sd) = cores_[static_cast<std::size_t>(i)]->save_state().transpose();
        m(i, sd) = steps_[static_cast<std::size_t>(i)];
        m(i, sd + 1) = returns_[static_cast<std::size_t>(i)];
    }
    return m;
}

void VecEnv::unpack_state(const Eigen::MatrixXd& m) {
    const Eigen::Index sd = m.cols() - 2;
    for (int i = 0; i < n_envs(); ++i) {
        cores_[static_cast<std::size_t>(i)]->load_state(m.row(i).head(sd).transpose());
        steps_[static_cast<std::size_t>(i)] = static_cast<int>(m(i, sd));
        returns_[static_cast<std::size_t>(i)] = m(i, sd + 1);
        refresh_obs(i);
    }
}

Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> VecEnv::pack_rng() const {
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> m(n_envs(), 4);
    for (int i = 0; i < n_envs(); ++i)
        for (int k = 0; k < 4; ++k)
            m(i, k) = static_cast<std::int64_t>(rngs_[static_cast<std::size_t>(i)].state()[static_cast<std::size_t>(k)]);
    return m;
}

void VecEnv::unpack_rng(const Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>& m) {
    for (int i = 0; i < n_envs(); ++i)
        for (int k = 0; k < 4; ++k)
            rngs_[static_cast<std::size_t>(i)].state()[static_cast<std::size_t>(k)] = static_cast<std::uint64_t>(m(i, k));
}

}  // namespace arlb
