#include "arlb/replay_buffer.hpp"

#include <cmath>

namespace arlb {

SumTree::SumTree(long capacity) : capacity_(capacity) {
    base_ = 1;
    while (base_ < capacity) base_ <<= 1;
    nodes_.assign(static_cast<std::size_t>(2 * base_), 0.0);
}

void SumTree::set(long i, double priority) {
    long node = base_ + i;
    nodes_[static_cast<std::size_t>(node)] = priority;
    for (node >>= 1; node >= 1; node >>= 1)
        nodes_[static_cast<std::size_t>(node)] =
            nodes_[static_cast<std::size_t>(2 * node)] + nodes_[static_cast<std::size_t>(2 * node + 1)];
}

long SumTree::find(double mass) const {
    long node = 1;
    while (node < base_) {
        const double left = nodes_[static_cast<std::size_t>(2 * node)];
        if (mass < left) {
            node = 2 * node;
        } else {
            mass -= left;
            node = 2 * node + 1;
        }
    }
    return node - base_;
}

ReplayBuffer::ReplayBuffer(long capacity, int obs_dim, int act_dim, bool prioritized, double alpha,
                           double priority_eps)
    : capacity_(capacity),
      obs_dim_(obs_dim),
      act_dim_(act_dim),
      prioritized_(prioritized),
      alpha_(alpha),
      priority_eps_(priority_eps),
      tree_(prioritized ? SumTree(capacity) : SumTree()) {
    if (capacity < 1) throw ConfigError("replay buffer capacity must be >= 1");
}

void ReplayBuffer::ensure_rows(long rows) {
    if (obs_.rows() >= rows) return;
    long grown = std::max<long>(1024, obs_.rows() * 2);
    grown = std::min(capacity_, std::max(grown, rows));
    auto grow = [&](Eigen::MatrixXd& m, int cols) {
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(grown, cols);
        if (m.rows() > 0) next.topRows(m.rows()) = m;
        m = std::move(next);
    };
    grow(obs_, obs_dim_);
    grow(next_obs_, obs_dim_);
    grow(actions_, act_dim_);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(grown), t = Eigen::VectorXd::Zero(grown);
    if (rewards_.size() > 0) {
        r.head(rewards_.size()) = rewards_;
        t.head(terminated_.size()) = terminated_;
    }
    rewards_ = std::move(r);
    terminated_ = std::move(t);
}

void ReplayBuffer::add(const Eigen::Ref<const Eigen::VectorXd>& obs, const Eigen::Ref<const Eigen::VectorXd>& action,
                       double reward, const Eigen::Ref<const Eigen::VectorXd>& next_obs, bool terminated) {
    ensure_rows(std::min(capacity_, size_ + 1));
    obs_.row(cursor_) = obs.transpose();
    next_obs_.row(cursor_) = next_obs.transpose();
    actions_.row(cursor_) = action.transpose();
    rewards_[cursor_] = reward;
    terminated_[cursor_] = terminated ? 1.0 : 0.0;
    if (prioritized_) tree_.set(cursor_, std::pow(max_priority_, alpha_));
    cursor_ = (cursor_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
}

ReplayBuffer::Batch ReplayBuffer::sample(int batch_size, double beta, Rng& rng) const {
    if (size_ < 1) throw Error("replay buffer: sample from empty buffer");
    Batch batch;
    batch.indices.resize(static_cast<std::size_t>(batch_size));
    batch.obs.resize(batch_size, obs_dim_);
    batch.next_obs.resize(batch_size, obs_dim_);
    batch.actions.resize(batch_size, act_dim_);
    batch.rewards.resize(batch_size);
    batch.terminated.resize(batch_size);
    batch.weights.resize(batch_size);

    if (prioritized_) {
        const double total = tree_.total();
        for (int k = 0; k < batch_size; ++k) {
            long idx = tree_.find(rng.uniform() * total);
            if (idx >= size_) idx = size_ - 1;  // guard against top-of-range rounding
            batch.indices[static_cast<std::size_t>(k)] = idx;
            const double prob = tree_.leaf(idx) / total;
            batch.weights[k] = std::pow(static_cast<double>(size_) * prob, -beta);
        }
        batch.weights /= batch.weights.maxCoeff();
    } else {
        for (int k = 0; k < batch_size; ++k)
            batch.indices[static_cast<std::size_t>(k)] = rng.uniform_int(0, size_ - 1);
        batch.weights.setOnes();
    }

    for (int k = 0; k < batch_size; ++k) {
        const long idx = batch.indices[static_cast<std::size_t>(k)];
        batch.obs.row(k) = obs_.row(idx);
        batch.next_obs.row(k) = next_obs_.row(idx);
        batch.actions.row(k) = actions_.row(idx);
        batch.rewards[k] = rewards_[idx];
        batch.terminated[k] = terminated_[idx];
    }
    return batch;
}

void ReplayBuffer::update_priorities(const std::vector<long>& indices,
                                     const Eigen::Ref<const Eigen::VectorXd>& td_abs) {
    if (!prioritized_) return;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const double priority = td_abs[static_cast<Eigen::Index>(k)] + priority_eps_;
        tree_.set(indices[k], std::pow(priority, alpha_));
        max_priority_ = std::max(max_priority_, priority);
    }
}

void ReplayBuffer::set_capacity(long new_capacity) {
    if (new_capacity < 1) throw ConfigError("replay buffer capacity must be >= 1");
    if (new_capacity == capacity_) return;
    const long keep = std::min(size_, new_capacity);
    Eigen::MatrixXd obs(keep, obs_dim_), next_obs(keep, obs_dim_), actions(keep, act_dim_);
    Eigen::VectorXd rewards(keep), terminated(keep);
    std::vector<double> priorities(static_cast<std::size_t>(keep), 0.0);
    for (long k = 0; k < keep; ++k) {
        // Most recent `keep` transitions, oldest first.
        const long src = (cursor_ - keep + k + 2 * capacity_) % capacity_;
        obs.row(k) = obs_.row(src);
        next_obs.row(k) = next_obs_.row(src);
        actions.row(k) = actions_.row(src);
        rewards[k] = rewards_[src];
        terminated[k] = terminated_[src];
        if (prioritized_) priorities[static_cast<std::size_t>(k)] = tree_.leaf(src);
    }
    capacity_ = new_capacity;
    obs_ = std::move(obs);
    next_obs_ = std::move(next_obs);
    actions_ = std::move(actions);
    rewards_ = std::move(rewards);
    terminated_ = std::move(terminated);
    size_ = keep;
    cursor_ = keep % capacity_;
    if (prioritized_) {
        tree_ = SumTree(capacity_);
        for (long k = 0; k < keep; ++k) tree_.set(k, priorities[static_cast<std::size_t>(k)]);
    }
}

void ReplayBuffer::restore_counters(long cursor, long size, double max_priority) {
    cursor_ = cursor;
    size_ = size;
    max_priority_ = max_priority;
}

}  // namespace arlb
