#pragma once

// Dense complex linear algebra used by every identity check: shifted solves
// with a resolvent-set acceptance test, Hermitian eigendecomposition,
// singular values and a handful of norm/part helpers. Backed by Eigen.

#include "dtnkrein/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <utility>

namespace dtnkrein {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kDefaultSingularRel = 1e-10;
inline constexpr double kHermitianRel = 1e-12;
inline constexpr Complex kI{0.0, 1.0};

/// Throws InvalidMatrix unless M has positive dimensions and finite entries.
inline void require_valid(const ComplexMatrix& m, const char* what = "matrix") {
    if (m.rows() <= 0 || m.cols() <= 0) {
        throw InvalidMatrix(std::string(what) + ": dimensions must be positive");
    }
    if (!m.allFinite()) {
        throw InvalidMatrix(std::string(what) + ": entries must be finite");
    }
}

[[nodiscard]] inline ComplexMatrix identity(Index n) { return ComplexMatrix::Identity(n, n); }

/// (M + M*)/2
[[nodiscard]] inline ComplexMatrix hermitian_part(const ComplexMatrix& m) {
    return (m + m.adjoint()) * 0.5;
}

/// (M - M*)/(2i), the Hermitian "imaginary part" of M.
[[nodiscard]] inline ComplexMatrix imaginary_part(const ComplexMatrix& m) {
    return (m - m.adjoint()) / Complex(0.0, 2.0);
}

[[nodiscard]] inline double hermitian_defect(const ComplexMatrix& h) { return (h - h.adjoint()).norm(); }

[[nodiscard]] inline bool is_hermitian(const ComplexMatrix& h, double rel = kHermitianRel) {
    return h.rows() == h.cols() && hermitian_defect(h) <= rel * h.norm();
}

/// ||a - b||_F / max(1, ||ref||_F)
[[nodiscard]] inline double floored_relative(const ComplexMatrix& diff, const ComplexMatrix& ref) {
    return diff.norm() / std::max(1.0, ref.norm());
}

/// ||diff||_F / ||ref||_F, falling back to the absolute norm when ref vanishes.
[[nodiscard]] inline double relative(const ComplexMatrix& diff, const ComplexMatrix& ref) {
    const double r = ref.norm();
    return r > 0.0 ? diff.norm() / r : diff.norm();
}

// ---------------------------------------------------------------------------
// Spectral data
// ---------------------------------------------------------------------------

struct HermitianEigen {
    RealVector eigenvalues;      // ascending
    ComplexMatrix eigenvectors;  // unitary, columns match eigenvalues
};

/// Eigendecomposition of a Hermitian matrix.
inline HermitianEigen heig(const ComplexMatrix& h) {
    require_valid(h, "heig");
    if (h.rows() != h.cols()) {
        throw NotHermitian("heig: matrix is not square");
    }
    if (hermitian_defect(h) > kHermitianRel * h.norm()) {
        throw NotHermitian("heig: ||H - H*||_F exceeds 1e-12 ||H||_F");
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
    if (es.info() != Eigen::Success) {
        throw Error("heig: eigensolver did not converge");
    }
    return {es.eigenvalues(), es.eigenvectors()};
}

/// Singular values in descending order.
inline RealVector svd_values(const ComplexMatrix& m) {
    if (m.size() == 0) {
        return RealVector{};
    }
    Eigen::BDCSVD<ComplexMatrix> svd(m);
    return svd.singularValues();
}

/// Number of singular values above rel_cutoff * sigma_1 (0 for the zero matrix).
[[nodiscard]] inline Index numerical_rank(const RealVector& sv, double rel_cutoff = 1e-8) {
    if (sv.size() == 0 || sv(0) <= 0.0) {
        return 0;
    }
    const double cut = rel_cutoff * sv(0);
    return static_cast<Index>(std::count_if(sv.begin(), sv.end(), [cut](double s) { return s > cut; }));
}

[[nodiscard]] inline double spectral_norm(const ComplexMatrix& m) {
    const RealVector sv = svd_values(m);
    return sv.size() ? sv(0) : 0.0;
}

// ---------------------------------------------------------------------------
// Shifted solves
// ---------------------------------------------------------------------------

namespace detail {

inline ComplexMatrix lu_solve_refined(const ComplexMatrix& shifted, const ComplexMatrix& rhs) {
    Eigen::PartialPivLU<ComplexMatrix> lu(shifted);
    ComplexMatrix x = lu.solve(rhs);
    const ComplexMatrix residual = rhs - shifted * x;
    x += lu.solve(residual);
    return x;
}

}  // namespace detail

/// Solves (H - shift I) X = rhs for a general square H.
///
/// The shift is accepted only if the smallest singular value of H - shift I
/// exceeds `threshold` (default 1e-10 * ||H||_2). One step of iterative
/// refinement follows the LU solve.
inline ComplexMatrix solve(const ComplexMatrix& h, Complex shift, const ComplexMatrix& rhs,
                           std::optional<double> threshold = std::nullopt, const std::string& op = "H") {
    require_valid(h, "solve: H");
    require_valid(rhs, "solve: rhs");
    if (h.rows() != h.cols() || rhs.rows() != h.rows()) {
        throw InvalidMatrix("solve: dimension mismatch");
    }
    const double tau = threshold ? *threshold : kDefaultSingularRel * spectral_norm(h);
    ComplexMatrix shifted = h;
    shifted.diagonal().array() -= shift;
    const RealVector sv = svd_values(shifted);
    const double smin = sv(sv.size() - 1);
    if (!(smin > tau)) {
        throw NearSingularShift(op, shift, smin, tau);
    }
    return detail::lu_solve_refined(shifted, rhs);
}

/// A Hermitian matrix with its spectrum cached, so that the smallest singular
/// value of H - shift I is available exactly as min_j |t_j - shift|.
class ShiftedHermitian {
public:
    ShiftedHermitian() = default;

    ShiftedHermitian(ComplexMatrix h, double threshold, std::string name)
        : h_(std::move(h)), eig_(heig(h_)), threshold_(threshold), name_(std::move(name)) {}

    [[nodiscard]] const ComplexMatrix& matrix() const noexcept { return h_; }
    [[nodiscard]] const HermitianEigen& eigen() const noexcept { return eig_; }
    [[nodiscard]] const RealVector& spectrum() const noexcept { return eig_.eigenvalues; }
    [[nodiscard]] double threshold() const noexcept { return threshold_; }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] Index size() const noexcept { return h_.rows(); }

    [[nodiscard]] double min_singular(Complex shift) const {
        double best = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < eig_.eigenvalues.size(); ++j) {
            best = std::min(best, std::abs(Complex(eig_.eigenvalues(j)) - shift));
        }
        return best;
    }

    [[nodiscard]] bool accepts(Complex shift) const { return min_singular(shift) > threshold_; }

    void require_accepted(Complex shift) const {
        const double smin = min_singular(shift);
        if (!(smin > threshold_)) {
            throw NearSingularShift(name_, shift, smin, threshold_);
        }
    }

    /// (H - shift)^{-1} rhs
    [[nodiscard]] ComplexMatrix solve(Complex shift, const ComplexMatrix& rhs) const {
        require_accepted(shift);
        if (rhs.rows() != h_.rows()) {
            throw InvalidMatrix(name_ + ": rhs row count mismatch");
        }
        if (rhs.cols() == 0) {
            return rhs;
        }
        ComplexMatrix shifted = h_;
        shifted.diagonal().array() -= shift;
        return detail::lu_solve_refined(shifted, rhs);
    }

    [[nodiscard]] ComplexMatrix resolvent(Complex shift) const { return solve(shift, identity(h_.rows())); }

private:
    ComplexMatrix h_;
    HermitianEigen eig_;
    double threshold_ = 0.0;
    std::string name_;
};

}  // namespace dtnkrein
