#pragma once

// Small hand-checkable models and seeded random Hermitian models.

#include "dtnkrein/boundary_model.hpp"
#include "dtnkrein/numerics.hpp"

#include <cstdint>
#include <numeric>

namespace dtnkrein {

/// SplitMix64: 64-bit state advanced by the golden-ratio increment and
/// finalized with the (30, 27, 31) xor-shift/multiply mix. split() derives an
/// independent child stream from the next output.
class SplitMix64 {
public:
    static constexpr std::uint64_t kIncrement = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t kMul1 = 0xBF58476D1CE4E5B9ULL;
    static constexpr std::uint64_t kMul2 = 0x94D049BB133111EBULL;

    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += kIncrement);
        z = (z ^ (z >> 30)) * kMul1;
        z = (z ^ (z >> 27)) * kMul2;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    SplitMix64 split() noexcept { return SplitMix64(next()); }

    [[nodiscard]] std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

inline IndexList index_range(Index begin, Index end) {
    IndexList v(static_cast<std::size_t>(end - begin));
    std::iota(v.begin(), v.end(), begin);
    return v;
}

/// H = [[2, -1], [-1, 1]], I = {0}, B = {1}.
inline PartitionedHermitian toy_model() {
    ComplexMatrix h(2, 2);
    h << 2.0, -1.0, -1.0, 1.0;
    return PartitionedHermitian(h, Partition{{0}, {1}, std::nullopt});
}

inline ComplexMatrix path3_matrix() {
    ComplexMatrix h(3, 3);
    h << 2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0;
    return h;
}

/// 3-node path, I = {0, 2}, B = {1}.
inline PartitionedHermitian path3_bounded_model() {
    return PartitionedHermitian(path3_matrix(), Partition{{0, 2}, {1}, std::nullopt});
}

/// 3-node path, I = {0}, B = {1}, E = {2}; H_BB = 2 split as 1 + 1.
inline PartitionedHermitian path3_coupled_model() {
    ComplexMatrix one(1, 1);
    one(0, 0) = 1.0;
    return PartitionedHermitian(path3_matrix(), Partition{{0}, {1}, IndexList{2}}, BoundarySplit{one, one});
}

/// Random Hermitian (G + G^*)/2 with complex entries uniform in [-1,1]^2;
/// the first n_interior indices are I, the rest B.
inline PartitionedHermitian random_model(SplitMix64& rng, Index n_interior, Index n_boundary) {
    const Index n = n_interior + n_boundary;
    ComplexMatrix g(n, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            const double re = rng.uniform(-1.0, 1.0);
            const double im = rng.uniform(-1.0, 1.0);
            g(i, j) = Complex(re, im);
        }
    }
    return PartitionedHermitian(hermitian_part(g), Partition{index_range(0, n_interior), index_range(n_interior, n),
                                                             std::nullopt});
}

/// Random model whose last `hidden` interior nodes form a block that does not
/// couple to B or to the rest of I, so the minimal operator is not simple.
inline PartitionedHermitian decoupled_model(SplitMix64& rng, Index n_interior, Index n_boundary, Index hidden) {
    const PartitionedHermitian base = random_model(rng, n_interior, n_boundary);
    ComplexMatrix h = base.matrix();
    const Index visible = n_interior - hidden;
    for (Index a = visible; a < n_interior; ++a) {
        for (Index b = 0; b < h.rows(); ++b) {
            const bool same_block = b >= visible && b < n_interior;
            if (!same_block) {
                h(a, b) = 0.0;
                h(b, a) = 0.0;
            }
        }
    }
    return PartitionedHermitian(h, base.partition());
}

/// Random model with H_IB of rank `rank` (< |B|).
inline PartitionedHermitian rank_deficient_model(SplitMix64& rng, Index n_interior, Index n_boundary, Index rank) {
    const PartitionedHermitian base = random_model(rng, n_interior, n_boundary);
    ComplexMatrix h = base.matrix();
    ComplexMatrix left(n_interior, rank);
    ComplexMatrix right(rank, n_boundary);
    for (Index j = 0; j < rank; ++j)
        for (Index i = 0; i < n_interior; ++i) left(i, j) = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    for (Index j = 0; j < n_boundary; ++j)
        for (Index i = 0; i < rank; ++i) right(i, j) = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const ComplexMatrix hib = left * right / static_cast<double>(rank);
    h.block(0, n_interior, n_interior, n_boundary) = hib;
    h.block(n_interior, 0, n_boundary, n_interior) = hib.adjoint();
    return PartitionedHermitian(h, base.partition());
}

}  // namespace dtnkrein
