#include "arlb/sobol.hpp"

#include <bit>
#include <string>

#include "arlb/common.hpp"
#include "arlb/rng.hpp"
#include "arlb/sobol_directions.hpp"

namespace arlb {

namespace {

constexpr int kBits = 32;

// Nested-uniform (Owen) scramble of a 32-bit Sobol component. Each node of
// the implicit binary tree gets an independent flip bit derived from the
// per-dimension key and the heap index of the node, which is exactly the
// random-permutation-per-prefix construction.
std::uint32_t owen_scramble(std::uint32_t x, std::uint64_t key) {
    std::uint32_t out = 0;
    for (int bit = kBits - 1; bit >= 0; --bit) {
        const int level = kBits - 1 - bit;
        const std::uint64_t prefix = level == 0 ? 0 : (x >> (bit + 1));
        const std::uint64_t node = (std::uint64_t{1} << level) + prefix;
        const std::uint32_t flip = static_cast<std::uint32_t>(mix64(key ^ mix64(node)) & 1);
        out |= (((x >> bit) & 1u) ^ flip) << bit;
    }
    return out;
}

}  // namespace

int SobolSequence::max_dim() { return detail::kSobolMaxDim; }

SobolSequence::SobolSequence(int dim, std::uint64_t scramble_seed) : dim_(dim), scramble_seed_(scramble_seed) {
    if (dim < 1) throw ConfigError("sobol: dimension must be >= 1");
    if (dim > detail::kSobolMaxDim)
        throw ConfigError("sobol: dimension " + std::to_string(dim) + " exceeds the direction-number table limit of " +
                          std::to_string(detail::kSobolMaxDim));
    directions_.resize(kBits, dim);
    x_ = Eigen::VectorX<std::uint32_t>::Zero(dim);

    // Dimension 1: van der Corput, m_k = 1.
    for (int k = 0; k < kBits; ++k) directions_(k, 0) = 1u << (kBits - 1 - k);

    for (int d = 1; d < dim; ++d) {
        const std::uint32_t poly = detail::kSobolPoly[d - 1];
        const int degree = std::bit_width(poly) - 1;
        std::array<std::uint32_t, kBits> m{};
        for (int k = 0; k < degree; ++k) m[k] = detail::kSobolVinit[d - 1][k];
        for (int k = degree; k < kBits; ++k) {
            std::uint32_t value = m[k - degree] ^ (m[k - degree] << degree);
            for (int i = 1; i < degree; ++i)
                if ((poly >> (degree - i)) & 1u) value ^= m[k - i] << i;
            m[k] = value;
        }
        for (int k = 0; k < kBits; ++k) directions_(k, d) = m[k] << (kBits - 1 - k);
    }
}

Eigen::VectorXd SobolSequence::next() {
    // Gray-code update: flip the direction picked by the lowest zero bit of
    // the running index. The first emitted point is (0.5, ..., 0.5).
    int bit = 0;
    while ((index_ >> bit) & 1ULL) ++bit;
    ++index_;
    Eigen::VectorXd point(dim_);
    for (int d = 0; d < dim_; ++d) {
        x_[d] ^= directions_(bit, d);
        std::uint32_t value = x_[d];
        if (scramble_seed_ != 0) value = owen_scramble(value, derive_seed(scramble_seed_, "sobol-owen", d));
        point[d] = static_cast<double>(value) * 0x1.0p-32;
    }
    return point;
}

Eigen::MatrixXd SobolSequence::points(int dim, int n, std::uint64_t scramble_seed) {
    SobolSequence seq(dim, scramble_seed);
    Eigen::MatrixXd out(n, dim);
    for (int i = 0; i < n; ++i) out.row(i) = seq.next().transpose();
    return out;
}

}  // namespace arlb
