#pragma once

// Resolvent difference of the Dirichlet and Neumann realizations and the
// checks built on it: the Krein formula
//   (A_D - l)^{-1} - (A_N - l)^{-1} = Gamma(l) Q(l)^{-1} Gamma(conj l)^*,
// the trace formula, and the finite-rank bound rank <= |B|.

#include "dtnkrein/boundary_model.hpp"
#include "dtnkrein/numerics.hpp"

#include <cmath>
#include <map>
#include <span>
#include <vector>

namespace dtnkrein {

struct TraceGap {
    Complex lhs;
    Complex rhs;
    double gap = 0.0;  // |lhs - rhs| / max(1, |lhs|)
};

struct KreinReport {
    Complex lambda;
    double krein_residual = 0.0;
    Complex lhs_trace;
    Complex rhs_trace;
    double trace_gap = 0.0;
    RealVector singular_values;  // descending
    Index numerical_rank = 0;
    Index boundary_size = 0;
    std::map<double, double> schatten_norms;

    [[nodiscard]] bool rank_bound_holds() const noexcept { return numerical_rank <= boundary_size; }
};

/// Q(l)^{-1} X; SingularQ when Q(l) fails the singular-value test.
inline ComplexMatrix q_inverse_apply(const ComplexMatrix& q, Complex lambda, const ComplexMatrix& rhs,
                                     double threshold) {
    try {
        return solve(q, 0.0, rhs, threshold, "Q");
    } catch (const NearSingularShift& e) {
        throw SingularQ(lambda, e.sigma_min(), e.threshold());
    }
}

/// (A_D - l)^{-1} - (A_N - l)^{-1}
inline ComplexMatrix resolvent_difference(const PartitionedHermitian& m, Complex lambda) {
    const ComplexMatrix rd = m.dirichlet().resolvent(lambda);
    const ComplexMatrix rn = m.neumann().resolvent(lambda);
    return rd - rn;
}

/// Gamma(l) Q(l)^{-1} Gamma(conj l)^*
inline ComplexMatrix krein_factorization(const PartitionedHermitian& m, Complex lambda) {
    const ComplexMatrix g = gamma_at(m, lambda);
    const ComplexMatrix g_conj_adj = gamma_at(m, std::conj(lambda)).adjoint();
    return g * q_inverse_apply(q_at(m, lambda), lambda, g_conj_adj, m.singular_threshold());
}

[[nodiscard]] inline double krein_residual(const PartitionedHermitian& m, Complex lambda) {
    m.neumann().require_accepted(lambda);
    const ComplexMatrix rhs = krein_factorization(m, lambda);
    const ComplexMatrix lhs = resolvent_difference(m, lambda);
    return floored_relative(lhs - rhs, lhs);
}

/// tr(resolvent difference) against tr(Q(l)^{-1} dQ/dl).
[[nodiscard]] inline TraceGap trace_formula(const PartitionedHermitian& m, Complex lambda) {
    m.neumann().require_accepted(lambda);
    const ComplexMatrix dq = q_derivative(m, lambda);
    const Complex rhs = q_inverse_apply(q_at(m, lambda), lambda, dq, m.singular_threshold()).trace();
    const Complex lhs = resolvent_difference(m, lambda).trace();
    return {lhs, rhs, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs))};
}

/// (sum_j sigma_j^p)^{1/p}
[[nodiscard]] inline double schatten_norm(const RealVector& sv, double p) {
    if (sv.size() == 0) {
        return 0.0;
    }
    const double top = sv(0);
    if (top == 0.0) {
        return 0.0;
    }
    double sum = 0.0;
    for (Index j = 0; j < sv.size(); ++j) {
        sum += std::pow(sv(j) / top, p);
    }
    return top * std::pow(sum, 1.0 / p);
}

inline void fill_spectral_part(KreinReport& r, const ComplexMatrix& difference, std::span<const double> p_list,
                               double rank_cutoff) {
    r.singular_values = svd_values(difference);
    r.numerical_rank = numerical_rank(r.singular_values, rank_cutoff);
    for (double p : p_list) {
        r.schatten_norms[p] = schatten_norm(r.singular_values, p);
    }
}

inline const std::vector<double>& default_schatten_orders() {
    static const std::vector<double> p{1.0, 2.0, 3.0};
    return p;
}

/// Full report at one lambda: Krein residual, trace formula, singular values,
/// numerical rank (cutoff rank_cutoff * sigma_1) and Schatten norms.
inline KreinReport schatten_report(const PartitionedHermitian& m, Complex lambda,
                                   std::span<const double> p_list = default_schatten_orders(),
                                   double rank_cutoff = 1e-8) {
    m.neumann().require_accepted(lambda);
    KreinReport r;
    r.lambda = lambda;
    r.boundary_size = m.n_boundary();
    const ComplexMatrix difference = resolvent_difference(m, lambda);
    r.krein_residual = floored_relative(difference - krein_factorization(m, lambda), difference);
    const TraceGap t = trace_formula(m, lambda);
    r.lhs_trace = t.lhs;
    r.rhs_trace = t.rhs;
    r.trace_gap = t.gap;
    fill_spectral_part(r, difference, p_list, rank_cutoff);
    return r;
}

}  // namespace dtnkrein
