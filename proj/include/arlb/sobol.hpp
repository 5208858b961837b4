#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace arlb {

// Base-2 Sobol sequence generator (Joe-Kuo D6 direction numbers, Gray-code
// ordering, origin point skipped). With scramble_seed == 0 the sequence is
// the plain one; any other seed applies a nested-uniform Owen scramble keyed
// per dimension, so scrambled streams stay reproducible.
class SobolSequence {
  public:
    explicit SobolSequence(int dim, std::uint64_t scramble_seed = 0);

    int dim() const { return dim_; }

    // Next point, components in (0, 1).
    Eigen::VectorXd next();

    // First n points as an n x dim matrix.
    static Eigen::MatrixXd points(int dim, int n, std::uint64_t scramble_seed = 0);

    static int max_dim();

  private:
    int dim_;
    std::uint64_t scramble_seed_;
    std::uint64_t index_ = 0;
    Eigen::Matrix<std::uint32_t, Eigen::Dynamic, Eigen::Dynamic> directions_;  // 32 x dim
    Eigen::VectorX<std::uint32_t> x_;
};

}  // namespace arlb
