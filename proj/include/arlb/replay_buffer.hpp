#pragma once

#include <Eigen/Dense>
#include <vector>

#include "arlb/common.hpp"
#include "arlb/rng.hpp"

namespace arlb {

// Flat binary sum tree over `capacity` leaves. The root is the sum of all
// leaf priorities; sampling traverses proportionally to leaf mass.
class SumTree {
  public:
    SumTree() = default;
    explicit SumTree(long capacity);

    long capacity() const { return capacity_; }
    double total() const { return nodes_.empty() ? 0.0 : nodes_[1]; }
    double leaf(long i) const { return nodes_[static_cast<std::size_t>(base_ + i)]; }

    void set(long i, double priority);
    // Index of the leaf whose cumulative range contains `mass` in [0, total).
    long find(double mass) const;

    std::vector<double>& nodes() { return nodes_; }
    const std::vector<double>& nodes() const { return nodes_; }

  private:
    long capacity_ = 0;
    long base_ = 0;  // index of the first leaf
    std::vector<double> nodes_;
};

// Ring buffer of transitions with optional proportional prioritized
// sampling (priorities p^alpha in the tree, importance weights
// (N * P(i))^-beta normalized by the batch maximum). Storage grows
// geometrically up to capacity so short runs stay small.
class ReplayBuffer {
  public:
    ReplayBuffer() = default;
    ReplayBuffer(long capacity, int obs_dim, int act_dim, bool prioritized, double alpha, double priority_eps);

    long size() const { return size_; }
    long capacity() const { return capacity_; }
    bool prioritized() const { return prioritized_; }

    void add(const Eigen::Ref<const Eigen::VectorXd>& obs, const Eigen::Ref<const Eigen::VectorXd>& action,
             double reward, const Eigen::Ref<const Eigen::VectorXd>& next_obs, bool terminated);

    struct Batch {
        std::vector<long> indices;
        Eigen::MatrixXd obs, next_obs, actions;
        Eigen::VectorXd rewards, terminated, weights;
    };

    Batch sample(int batch_size, double beta, Rng& rng) const;

    // New priority for index i becomes (|td_error| + priority_eps)^alpha.
    void update_priorities(const std::vector<long>& indices, const Eigen::Ref<const Eigen::VectorXd>& td_abs);

    // Shrinks (keeping the most recent transitions) or grows the capacity.
    void set_capacity(long new_capacity);

    // Checkpoint access.
    Eigen::MatrixXd& obs_storage() { return obs_; }
    Eigen::MatrixXd& next_obs_storage() { return next_obs_; }
    Eigen::MatrixXd& actions_storage() { return actions_; }
    Eigen::VectorXd& rewards_storage() { return rewards_; }
    Eigen::VectorXd& terminated_storage() { return terminated_; }
    SumTree& tree() { return tree_; }
    long cursor() const { return cursor_; }
    double max_priority() const { return max_priority_; }
    void restore_counters(long cursor, long size, double max_priority);
    void ensure_rows(long rows);

  private:
    long capacity_ = 0;
    int obs_dim_ = 0, act_dim_ = 0;
    bool prioritized_ = false;
    double alpha_ = 0.6, priority_eps_ = 1e-6;
    long cursor_ = 0, size_ = 0;
    double max_priority_ = 1.0;
    Eigen::MatrixXd obs_, next_obs_, actions_;
    Eigen::VectorXd rewards_, terminated_;
    SumTree tree_;
};

}  // namespace arlb
