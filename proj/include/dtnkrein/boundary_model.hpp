#pragma once

// Discrete boundary triple: a Hermitian matrix with an interior/boundary
// (optionally interior/interface/exterior) partition, its gamma field and
// Q-function (the negated-flux Dirichlet-to-Neumann matrix), and the algebraic
// checks that make those objects a generalized Q-function.
//
// Conventions: the Hilbert space is the interior-node space. For a node vector
// u = (u_I, u_B) the boundary value is u_B and the conormal derivative is
// (Hu)_B. With R(l) = (H_II - l)^{-1}:
//
//   Gamma(l) = -R(l) H_IB
//   Q(l)     = -(H_BB + H_BI Gamma(l)) = -H_BB + H_BI R(l) H_IB

#include "dtnkrein/errors.hpp"
#include "dtnkrein/numerics.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dtnkrein {

using IndexList = std::vector<Index>;

struct Partition {
    IndexList interior;
    IndexList boundary;
    std::optional<IndexList> exterior;

    /// Throws LayoutError unless the sets are disjoint, cover 0..n-1 and I, B are nonempty.
    void validate(Index n) const {
        if (interior.empty() || boundary.empty()) {
            throw LayoutError("partition: interior and boundary sets must be nonempty");
        }
        std::vector<int> seen(static_cast<std::size_t>(n), 0);
        auto mark = [&](const IndexList& set) {
            for (Index k : set) {
                if (k < 0 || k >= n) {
                    throw LayoutError("partition: index " + std::to_string(k) + " out of range");
                }
                if (seen[static_cast<std::size_t>(k)]++) {
                    throw LayoutError("partition: index " + std::to_string(k) + " listed twice");
                }
            }
        };
        mark(interior);
        mark(boundary);
        if (exterior) {
            mark(*exterior);
        }
        if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
            throw LayoutError("partition: index sets do not cover every node");
        }
    }
};

/// Two Hermitian parts of H_BB owned by the inner and outer side of an interface.
struct BoundarySplit {
    ComplexMatrix inner;
    ComplexMatrix outer;
};

enum class QSide { whole, inner, outer };

class PartitionedHermitian {
public:
    PartitionedHermitian(ComplexMatrix h, Partition partition, std::optional<BoundarySplit> split = std::nullopt,
                         double singular_rel = kDefaultSingularRel)
        : h_(std::move(h)), partition_(std::move(partition)), split_(std::move(split)) {
        require_valid(h_, "PartitionedHermitian");
        if (h_.rows() != h_.cols()) {
            throw NotHermitian("PartitionedHermitian: matrix is not square");
        }
        if (hermitian_defect(h_) > kHermitianRel * h_.norm()) {
            throw NotHermitian("PartitionedHermitian: ||H - H*||_F exceeds 1e-12 ||H||_F");
        }
        partition_.validate(h_.rows());

        const auto& in = partition_.interior;
        const auto& bd = partition_.boundary;
        h_ii_ = h_(in, in);
        h_ib_ = h_(in, bd);
        h_bi_ = h_(bd, in);
        h_bb_ = h_(bd, bd);
        if (partition_.exterior) {
            const auto& ex = *partition_.exterior;
            h_ee_ = h_(ex, ex);
            h_eb_ = h_(ex, bd);
            h_be_ = h_(bd, ex);
            if (h_(in, ex).norm() != 0.0) {
                throw LayoutError("PartitionedHermitian: interior and exterior blocks must not couple");
            }
        }
        if (split_) {
            const Index nb = static_cast<Index>(bd.size());
            if (split_->inner.rows() != nb || split_->inner.cols() != nb || split_->outer.rows() != nb ||
                split_->outer.cols() != nb) {
                throw LayoutError("PartitionedHermitian: boundary split has wrong shape");
            }
            const double scale = std::max(1.0, h_bb_.norm());
            if (hermitian_defect(split_->inner) > kHermitianRel * scale ||
                hermitian_defect(split_->outer) > kHermitianRel * scale) {
                throw NotHermitian("PartitionedHermitian: boundary split parts must be Hermitian");
            }
            if ((split_->inner + split_->outer - h_bb_).norm() > kHermitianRel * scale) {
                throw LayoutError("PartitionedHermitian: boundary split parts must sum to H_BB");
            }
        }

        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h_, Eigen::EigenvaluesOnly);
        norm_ = es.eigenvalues().cwiseAbs().maxCoeff();
        threshold_ = singular_rel * norm_;
        dirichlet_ = ShiftedHermitian(h_ii_, threshold_, "A_D");
        if (partition_.exterior) {
            exterior_ = ShiftedHermitian(h_ee_, threshold_, "A_ext");
        }
        lazy_ = std::make_shared<Lazy>();
    }

    [[nodiscard]] const ComplexMatrix& matrix() const noexcept { return h_; }
    [[nodiscard]] const Partition& partition() const noexcept { return partition_; }
    [[nodiscard]] const std::optional<BoundarySplit>& split() const noexcept { return split_; }
    [[nodiscard]] bool has_exterior() const noexcept { return partition_.exterior.has_value(); }

    [[nodiscard]] Index n_interior() const noexcept { return h_ii_.rows(); }
    [[nodiscard]] Index n_boundary() const noexcept { return h_bb_.rows(); }
    [[nodiscard]] Index n_exterior() const noexcept { return h_ee_.rows(); }

    [[nodiscard]] const ComplexMatrix& h_ii() const noexcept { return h_ii_; }
    [[nodiscard]] const ComplexMatrix& h_ib() const noexcept { return h_ib_; }
    [[nodiscard]] const ComplexMatrix& h_bi() const noexcept { return h_bi_; }
    [[nodiscard]] const ComplexMatrix& h_bb() const noexcept { return h_bb_; }
    [[nodiscard]] const ComplexMatrix& h_ee() const {
        require_exterior();
        return h_ee_;
    }
    [[nodiscard]] const ComplexMatrix& h_eb() const {
        require_exterior();
        return h_eb_;
    }
    [[nodiscard]] const ComplexMatrix& h_be() const {
        require_exterior();
        return h_be_;
    }

    /// ||H||_2
    [[nodiscard]] double norm() const noexcept { return norm_; }
    /// Resolvent-set acceptance threshold (singular_rel * ||H||_2).
    [[nodiscard]] double singular_threshold() const noexcept { return threshold_; }

    /// H_II with cached spectrum (the Dirichlet realization).
    [[nodiscard]] const ShiftedHermitian& dirichlet() const noexcept { return dirichlet_; }

    /// H_EE with cached spectrum (the exterior Dirichlet realization).
    [[nodiscard]] const ShiftedHermitian& exterior() const {
        require_exterior();
        return exterior_;
    }

    /// Neumann realization with cached spectrum; computed on first use.
    [[nodiscard]] const ShiftedHermitian& neumann() const;

    /// Transmission operator on I u E with cached spectrum; computed on first use.
    [[nodiscard]] const ShiftedHermitian& transmission() const;

    /// FNV-1a over the dimensions, partition and matrix entries.
    [[nodiscard]] std::uint64_t hash() const {
        std::uint64_t x = 0xcbf29ce484222325ULL;
        auto mix = [&x](const void* data, std::size_t len) {
            const auto* p = static_cast<const unsigned char*>(data);
            for (std::size_t k = 0; k < len; ++k) {
                x ^= p[k];
                x *= 0x100000001b3ULL;
            }
        };
        auto mix_index = [&](Index v) {
            const auto u = static_cast<std::int64_t>(v);
            mix(&u, sizeof u);
        };
        mix_index(h_.rows());
        auto mix_set = [&](const IndexList& s) {
            mix_index(static_cast<Index>(s.size()));
            for (Index k : s) {
                mix_index(k);
            }
        };
        mix_set(partition_.interior);
        mix_set(partition_.boundary);
        mix_set(partition_.exterior ? *partition_.exterior : IndexList{});
        for (Index j = 0; j < h_.cols(); ++j) {
            for (Index i = 0; i < h_.rows(); ++i) {
                const double re = h_(i, j).real() + 0.0;  // fold -0.0
                const double im = h_(i, j).imag() + 0.0;
                mix(&re, sizeof re);
                mix(&im, sizeof im);
            }
        }
        return x;
    }

private:
    void require_exterior() const {
        if (!partition_.exterior) {
            throw NoExteriorPartition();
        }
    }

    struct Lazy {
        std::once_flag neumann_once;
        std::optional<ShiftedHermitian> neumann;
        std::string neumann_error;
        std::once_flag transmission_once;
        std::optional<ShiftedHermitian> transmission;
        std::string transmission_error;
    };

    ComplexMatrix h_;
    Partition partition_;
    std::optional<BoundarySplit> split_;
    ComplexMatrix h_ii_, h_ib_, h_bi_, h_bb_, h_ee_, h_eb_, h_be_;
    double norm_ = 0.0;
    double threshold_ = 0.0;
    ShiftedHermitian dirichlet_;
    ShiftedHermitian exterior_;
    std::shared_ptr<Lazy> lazy_;
};

// ---------------------------------------------------------------------------
// Realizations
// ---------------------------------------------------------------------------

/// A_D = H_II
[[nodiscard]] inline ComplexMatrix dirichlet_op(const PartitionedHermitian& m) { return m.h_ii(); }

namespace detail {

/// H_BB^{-1} X, guarded by the singular-value threshold of the model.
inline ComplexMatrix boundary_block_solve(const PartitionedHermitian& m, const ComplexMatrix& rhs) {
    try {
        return solve(m.h_bb(), 0.0, rhs, m.singular_threshold(), "H_BB");
    } catch (const NearSingularShift& e) {
        throw SingularBoundaryBlock("H_BB is not invertible (sigma_min=" + std::to_string(e.sigma_min()) +
                                    ", threshold=" + std::to_string(e.threshold()) + ")");
    }
}

}  // namespace detail

/// A_N = H_II - H_IB H_BB^{-1} H_BI, the realization with (Hu)_B = 0.
[[nodiscard]] inline ComplexMatrix neumann_op(const PartitionedHermitian& m) {
    const ComplexMatrix an = m.h_ii() - m.h_ib() * detail::boundary_block_solve(m, m.h_bi());
    return hermitian_part(an);
}

inline const ShiftedHermitian& PartitionedHermitian::neumann() const {
    std::call_once(lazy_->neumann_once, [this] {
        try {
            lazy_->neumann.emplace(neumann_op(*this), threshold_, "A_N");
        } catch (const SingularBoundaryBlock& e) {
            lazy_->neumann_error = e.what();
        }
    });
    if (!lazy_->neumann) {
        throw SingularBoundaryBlock(lazy_->neumann_error);
    }
    return *lazy_->neumann;
}

/// diag(H_II, H_EE) on I u E (interior unknowns first).
[[nodiscard]] inline ComplexMatrix orthogonal_sum_op(const PartitionedHermitian& m) {
    const Index ni = m.n_interior();
    const Index ne = m.h_ee().rows();
    ComplexMatrix a = ComplexMatrix::Zero(ni + ne, ni + ne);
    a.topLeftCorner(ni, ni) = m.h_ii();
    a.bottomRightCorner(ne, ne) = m.h_ee();
    return a;
}

/// [H_IB; H_EB], the coupling of I u E to the interface.
[[nodiscard]] inline ComplexMatrix stacked_interface_coupling(const PartitionedHermitian& m) {
    const Index ni = m.n_interior();
    const Index ne = m.h_eb().rows();
    ComplexMatrix c(ni + ne, m.n_boundary());
    c.topRows(ni) = m.h_ib();
    c.bottomRows(ne) = m.h_eb();
    return c;
}

/// Transmission operator: interface unknowns eliminated from (Hu)_B = 0,
///   diag(H_II, H_EE) - [H_IB; H_EB] H_BB^{-1} [H_BI, H_BE].
[[nodiscard]] inline ComplexMatrix transmission_op(const PartitionedHermitian& m) {
    const ComplexMatrix c = stacked_interface_coupling(m);
    const ComplexMatrix a = orthogonal_sum_op(m) - c * detail::boundary_block_solve(m, c.adjoint());
    return hermitian_part(a);
}

inline const ShiftedHermitian& PartitionedHermitian::transmission() const {
    require_exterior();
    std::call_once(lazy_->transmission_once, [this] {
        try {
            lazy_->transmission.emplace(transmission_op(*this), threshold_, "A_transmission");
        } catch (const SingularBoundaryBlock& e) {
            lazy_->transmission_error = e.what();
        }
    });
    if (!lazy_->transmission) {
        throw SingularBoundaryBlock(lazy_->transmission_error);
    }
    return *lazy_->transmission;
}

// ---------------------------------------------------------------------------
// Gamma field
// ---------------------------------------------------------------------------

/// Gamma(l) = -(H_II - l)^{-1} H_IB; column j is the interior part of the
/// discrete l-solution with boundary value e_j.
[[nodiscard]] inline ComplexMatrix gamma_at(const PartitionedHermitian& m, Complex lambda) {
    return -m.dirichlet().solve(lambda, m.h_ib());
}

/// (I + (l - l0)(H_II - l)^{-1}) Gamma(l0)
[[nodiscard]] inline ComplexMatrix gamma_update(const PartitionedHermitian& m, Complex lambda, Complex lambda0,
                                                const ComplexMatrix& anchor) {
    m.dirichlet().require_accepted(lambda0);
    m.dirichlet().require_accepted(lambda);
    if (lambda == lambda0) {
        return anchor;
    }
    return anchor + (lambda - lambda0) * m.dirichlet().solve(lambda, anchor);
}

/// Gamma field anchored at lambda0; evaluation elsewhere goes through the
/// resolvent update rather than a fresh Dirichlet solve.
class GammaField {
public:
    GammaField(const PartitionedHermitian& model, Complex anchor)
        : model_(&model), anchor_(anchor), anchor_matrix_(gamma_at(model, anchor)) {}

    [[nodiscard]] Complex anchor() const noexcept { return anchor_; }
    [[nodiscard]] const ComplexMatrix& anchor_matrix() const noexcept { return anchor_matrix_; }
    [[nodiscard]] ComplexMatrix operator()(Complex lambda) const {
        return gamma_update(*model_, lambda, anchor_, anchor_matrix_);
    }

private:
    const PartitionedHermitian* model_;
    Complex anchor_;
    ComplexMatrix anchor_matrix_;
};

/// Gamma(conj(l))^* g computed through the adjoint matrix and, independently,
/// as -H_BI f where (H_II - l) f = g. Throws FluxMismatch if they disagree.
inline ComplexVector gamma_adjoint_flux(const PartitionedHermitian& m, Complex lambda, const ComplexVector& f,
                                        double tol = 1e-10) {
    if (f.size() != m.n_interior()) {
        throw InvalidMatrix("gamma_adjoint_flux: f must live on the interior nodes");
    }
    const ComplexVector g = m.h_ii() * f - lambda * f;
    const ComplexVector adjoint_route = gamma_at(m, std::conj(lambda)).adjoint() * g;
    const ComplexVector flux_route = -(m.h_bi() * f);
    const double scale = std::max(adjoint_route.norm(), flux_route.norm());
    if ((adjoint_route - flux_route).norm() > tol * scale) {
        throw FluxMismatch("gamma_adjoint_flux: adjoint and conormal routes disagree");
    }
    return adjoint_route;
}

// ---------------------------------------------------------------------------
// Q-function
// ---------------------------------------------------------------------------

/// Q(l) = -(H_BB^side + H_BX Gamma_X(l)) with X the interior (whole, inner)
/// or the exterior (outer).
[[nodiscard]] inline ComplexMatrix q_at(const PartitionedHermitian& m, Complex lambda, QSide side = QSide::whole) {
    switch (side) {
        case QSide::whole:
            return -(m.h_bb() + m.h_bi() * gamma_at(m, lambda));
        case QSide::inner:
        case QSide::outer: {
            if (!m.split()) {
                throw LayoutError("q_at: model has no boundary split");
            }
            if (side == QSide::inner) {
                return -(m.split()->inner + m.h_bi() * gamma_at(m, lambda));
            }
            const ComplexMatrix gamma_ext = -m.exterior().solve(lambda, m.h_eb());
            return -(m.split()->outer + m.h_be() * gamma_ext);
        }
    }
    throw Error("q_at: unknown side");
}

class QFunction {
public:
    explicit QFunction(const PartitionedHermitian& model, QSide side = QSide::whole) : model_(&model), side_(side) {}

    [[nodiscard]] QSide side() const noexcept { return side_; }
    [[nodiscard]] ComplexMatrix operator()(Complex lambda) const { return q_at(*model_, lambda, side_); }

private:
    const PartitionedHermitian* model_;
    QSide side_;
};

/// ||Q(l) - Q(mu)^* - (l - conj(mu)) Gamma(mu)^* Gamma(l)||_F / max(1, ||Q(l)||_F)
[[nodiscard]] inline double q_identity_residual(const PartitionedHermitian& m, Complex lambda, Complex mu) {
    const ComplexMatrix q_l = q_at(m, lambda);
    const ComplexMatrix q_mu = q_at(m, mu);
    const ComplexMatrix g_l = gamma_at(m, lambda);
    const ComplexMatrix g_mu = gamma_at(m, mu);
    const ComplexMatrix rhs = (lambda - std::conj(mu)) * (g_mu.adjoint() * g_l);
    return floored_relative(q_l - q_mu.adjoint() - rhs, q_l);
}

/// dQ/dl = Gamma(conj(l))^* Gamma(l)
[[nodiscard]] inline ComplexMatrix q_derivative(const PartitionedHermitian& m, Complex lambda) {
    return gamma_at(m, std::conj(lambda)).adjoint() * gamma_at(m, lambda);
}

/// ||(Q(l+h) - Q(l-h))/(2h) - Gamma(conj(l))^* Gamma(l)||_F
[[nodiscard]] inline double central_difference_error(const PartitionedHermitian& m, Complex lambda, double step) {
    const ComplexMatrix fd = (q_at(m, lambda + step) - q_at(m, lambda - step)) / (2.0 * step);
    return (fd - q_derivative(m, lambda)).norm();
}

/// Re Q(l0) + Gamma0^*((l - Re l0) + (l - l0)(l - conj(l0))(H_II - l)^{-1}) Gamma0,
/// the resolvent representation of Q anchored at l0.
[[nodiscard]] inline ComplexMatrix q_representation(const PartitionedHermitian& m, Complex lambda, Complex lambda0) {
    const ComplexMatrix g0 = gamma_at(m, lambda0);
    const ComplexMatrix re_q0 = hermitian_part(q_at(m, lambda0));
    const ComplexMatrix inner = (lambda - lambda0.real()) * g0 +
                                (lambda - lambda0) * (lambda - std::conj(lambda0)) * m.dirichlet().solve(lambda, g0);
    return re_q0 + g0.adjoint() * inner;
}

/// ||Q(l) - q_representation(l, l0)||_F / max(1, ||Q(l)||_F)
[[nodiscard]] inline double q_representation_residual(const PartitionedHermitian& m, Complex lambda,
                                                      Complex lambda0) {
    const ComplexMatrix q = q_at(m, lambda);
    return floored_relative(q - q_representation(m, lambda, lambda0), q);
}

// ---------------------------------------------------------------------------
// Integral (Stieltjes) representation of Q~(l) = Q(l) - Re Q(l0)
// ---------------------------------------------------------------------------

/// Discrete Nevanlinna measure: point masses W_j = w_j w_j^* at the poles t_j
/// (eigenvalues of A_D), so that
///   Q~(l) = alpha + l beta + sum_j (1/(t_j - l) - t_j/(1 + t_j^2)) W_j.
struct StieltjesData {
    Complex anchor;
    RealVector poles;           // t_j, ascending
    ComplexMatrix factors;      // |B| x |I|, column j is w_j
    ComplexMatrix alpha;        // Hermitian
    ComplexMatrix beta;         // zero for these models

    [[nodiscard]] Index pole_count() const noexcept { return poles.size(); }

    [[nodiscard]] ComplexMatrix weight(Index j) const { return factors.col(j) * factors.col(j).adjoint(); }

    [[nodiscard]] ComplexMatrix evaluate(Complex lambda) const {
        Eigen::VectorXcd c(poles.size());
        for (Index j = 0; j < poles.size(); ++j) {
            const double t = poles(j);
            c(j) = 1.0 / (t - lambda) - t / (1.0 + t * t);
        }
        return alpha + lambda * beta + factors * c.asDiagonal() * factors.adjoint();
    }
};

/// Builds the measure from the spectral decomposition of A_D and the anchor
/// Gamma(l0): W_j = |t_j - l0|^2 Gamma0^* P_j Gamma0.
inline StieltjesData stieltjes(const PartitionedHermitian& m, Complex lambda0) {
    if (lambda0.imag() == 0.0) {
        throw InvalidMatrix("stieltjes: anchor must be nonreal");
    }
    const ComplexMatrix g0 = gamma_at(m, lambda0);
    const HermitianEigen& eig = m.dirichlet().eigen();
    const Index n = eig.eigenvalues.size();

    StieltjesData d;
    d.anchor = lambda0;
    d.poles = eig.eigenvalues;
    // row j of U^* Gamma0 is u_j^* Gamma0
    const ComplexMatrix projected = eig.eigenvectors.adjoint() * g0;
    d.factors.resize(m.n_boundary(), n);
    RealVector c(n);
    for (Index j = 0; j < n; ++j) {
        const double t = eig.eigenvalues(j);
        const double dist = std::abs(Complex(t) - lambda0);
        d.factors.col(j) = dist * projected.row(j).adjoint();
        c(j) = (lambda0.real() - t) / (dist * dist) + t / (1.0 + t * t);
    }
    d.alpha = hermitian_part(d.factors * c.cast<Complex>().asDiagonal() * d.factors.adjoint());
    d.beta = ComplexMatrix::Zero(m.n_boundary(), m.n_boundary());
    return d;
}

/// Relative residual of the reconstruction against Q(l) - Re Q(l0).
[[nodiscard]] inline double stieltjes_residual(const PartitionedHermitian& m, const StieltjesData& d,
                                               Complex lambda) {
    const ComplexMatrix target = q_at(m, lambda) - hermitian_part(q_at(m, d.anchor));
    return relative(target - d.evaluate(lambda), target);
}

// ---------------------------------------------------------------------------
// Nevanlinna structure
// ---------------------------------------------------------------------------

struct NevanlinnaSample {
    Complex lambda;
    double min_eig_im_ratio;  // min eig of Im Q(l) / Im l
    double symmetry_gap;      // ||Q(conj l) - Q(l)^*||_F / ||Q(l)||_F
};

struct SkippedPoint {
    Complex lambda;
    std::string reason;
};

struct NevanlinnaReport {
    std::vector<NevanlinnaSample> samples;
    std::vector<SkippedPoint> skipped;

    [[nodiscard]] bool passes(double positivity_tol = 1e-12, double symmetry_tol = 1e-12) const {
        return std::all_of(samples.begin(), samples.end(), [&](const NevanlinnaSample& s) {
            return s.min_eig_im_ratio >= -positivity_tol && s.symmetry_gap <= symmetry_tol;
        });
    }
};

[[nodiscard]] inline NevanlinnaSample nevanlinna_sample(const PartitionedHermitian& m, Complex lambda) {
    if (lambda.imag() == 0.0) {
        throw InvalidMatrix("nevanlinna_sample: lambda must be nonreal");
    }
    const ComplexMatrix q = q_at(m, lambda);
    const ComplexMatrix q_conj = q_at(m, std::conj(lambda));
    const ComplexMatrix ratio = imaginary_part(q) / lambda.imag();
    const double min_eig = heig(hermitian_part(ratio)).eigenvalues(0);
    return {lambda, min_eig, relative(q_conj - q.adjoint(), q)};
}

inline NevanlinnaReport nevanlinna_check(const PartitionedHermitian& m, std::span<const Complex> samples) {
    NevanlinnaReport report;
    for (Complex l : samples) {
        try {
            report.samples.push_back(nevanlinna_sample(m, l));
        } catch (const NearSingularShift& e) {
            report.skipped.push_back({l, e.what()});
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Simplicity and characterization
// ---------------------------------------------------------------------------

/// Dimension of the block Krylov space span{H_IB, H_II H_IB, H_II^2 H_IB, ...}
/// (at most |I| blocks). Equal to |I| iff the discrete minimal operator is
/// simple. Each block is orthogonalized against the basis found so far and new
/// directions are kept when their singular value exceeds rel_cutoff times the
/// block norm before orthogonalization.
inline Index simplicity_rank(const PartitionedHermitian& m, double rel_cutoff = 1e-8) {
    const Index n = m.n_interior();
    ComplexMatrix basis(n, 0);
    ComplexMatrix block = m.h_ib();
    for (Index step = 0; step < n && basis.cols() < n && block.cols() > 0; ++step) {
        const double block_norm = spectral_norm(block);
        if (block_norm == 0.0) {
            break;
        }
        for (int pass = 0; pass < 2 && basis.cols() > 0; ++pass) {
            block -= basis * (basis.adjoint() * block);
        }
        Eigen::BDCSVD<ComplexMatrix> svd(block, Eigen::ComputeThinU);
        const RealVector& sv = svd.singularValues();
        Index keep = 0;
        while (keep < sv.size() && sv(keep) > rel_cutoff * block_norm) {
            ++keep;
        }
        keep = std::min(keep, n - basis.cols());
        if (keep == 0) {
            break;
        }
        const ComplexMatrix fresh = svd.matrixU().leftCols(keep);
        ComplexMatrix grown(n, basis.cols() + keep);
        grown << basis, fresh;
        basis = std::move(grown);
        block = m.h_ii() * fresh;
    }
    return basis.cols();
}

struct CharacterizationReport {
    Complex anchor;
    std::vector<Complex> alpha_points;
    std::vector<double> alpha_residuals;  // (Q(l) - Re Q(l0)) vs the Stieltjes reconstruction
    double beta_min_singular = 0.0;       // of Im Q~(i)
    bool beta_injective = false;
    std::vector<double> etas;
    std::vector<double> gamma_norm_over_eta;  // (1/eta) ||Q~(i eta)||_F
    std::vector<double> gamma_eta_min_eig;    // eta * min eig Im Q~(i eta)
    Index simplicity_rank = 0;
    Index interior_size = 0;
};

inline const std::vector<Complex>& default_alpha_points() {
    static const std::vector<Complex> pts{{0.0, 1.0}, {1.0, 1.0}, {-2.0, 0.5}, {3.0, -1.0}, {0.5, 2.0}};
    return pts;
}

/// Reports the three structural conditions for Q~ = Q - Re Q(l0). The eta
/// asymptotics are recorded, not judged.
inline CharacterizationReport characterization_report(const PartitionedHermitian& m, Complex lambda0,
                                                      std::span<const double> etas,
                                                      std::span<const Complex> alpha_points = default_alpha_points(),
                                                      double injectivity_tol = 1e-12) {
    CharacterizationReport r;
    r.anchor = lambda0;
    const StieltjesData data = stieltjes(m, lambda0);
    const ComplexMatrix re_q0 = hermitian_part(q_at(m, lambda0));
    for (Complex l : alpha_points) {
        r.alpha_points.push_back(l);
        r.alpha_residuals.push_back(stieltjes_residual(m, data, l));
    }

    const ComplexMatrix im_q_i = imaginary_part(q_at(m, kI) - re_q0);
    const RealVector sv = svd_values(im_q_i);
    r.beta_min_singular = sv(sv.size() - 1);
    r.beta_injective = r.beta_min_singular > injectivity_tol;

    for (double eta : etas) {
        const ComplexMatrix qt = q_at(m, Complex(0.0, eta)) - re_q0;
        r.etas.push_back(eta);
        r.gamma_norm_over_eta.push_back(qt.norm() / eta);
        r.gamma_eta_min_eig.push_back(eta * heig(hermitian_part(imaginary_part(qt))).eigenvalues(0));
    }
    r.simplicity_rank = simplicity_rank(m);
    r.interior_size = m.n_interior();
    return r;
}

}  // namespace dtnkrein
