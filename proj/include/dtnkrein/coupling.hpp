#pragma once

// Interface coupling: the orthogonal sum A = diag(A_I, A_E) of the two
// one-sided Dirichlet operators against the transmission operator A~ whose
// domain carries a vanishing conormal jump across the interface ring. The
// coupled Q-function maps a common interface value to minus the sum of the
// two one-sided fluxes.

#include "dtnkrein/boundary_model.hpp"
#include "dtnkrein/krein_verify.hpp"
#include "dtnkrein/numerics.hpp"

#include <span>
#include <vector>

namespace dtnkrein {

/// (A - l)^{-1} = diag((H_II - l)^{-1}, (H_EE - l)^{-1})
inline ComplexMatrix orthogonal_sum_resolvent(const PartitionedHermitian& m, Complex lambda) {
    const ComplexMatrix ri = m.dirichlet().resolvent(lambda);
    const ComplexMatrix re = m.exterior().resolvent(lambda);
    ComplexMatrix r = ComplexMatrix::Zero(ri.rows() + re.rows(), ri.cols() + re.cols());
    r.topLeftCorner(ri.rows(), ri.cols()) = ri;
    r.bottomRightCorner(re.rows(), re.cols()) = re;
    return r;
}

/// Stacked two-sided Dirichlet solution map [-(H_II - l)^{-1} H_IB; -(H_EE - l)^{-1} H_EB].
inline ComplexMatrix coupled_gamma(const PartitionedHermitian& m, Complex lambda) {
    const ComplexMatrix gi = -m.dirichlet().solve(lambda, m.h_ib());
    const ComplexMatrix ge = -m.exterior().solve(lambda, m.h_eb());
    ComplexMatrix g(gi.rows() + ge.rows(), m.n_boundary());
    g.topRows(gi.rows()) = gi;
    g.bottomRows(ge.rows()) = ge;
    return g;
}

/// Q(l) = -(H_BB - H_BI (H_II - l)^{-1} H_IB - H_BE (H_EE - l)^{-1} H_EB)
inline ComplexMatrix coupled_q(const PartitionedHermitian& m, Complex lambda) {
    return -(m.h_bb() + stacked_interface_coupling(m).adjoint() * coupled_gamma(m, lambda));
}

/// Gap between the coupled Q and the sum of the one-sided inner and outer Q-functions.
[[nodiscard]] inline double steklov_additivity_residual(const PartitionedHermitian& m, Complex lambda) {
    const ComplexMatrix q = coupled_q(m, lambda);
    const ComplexMatrix sum = q_at(m, lambda, QSide::inner) + q_at(m, lambda, QSide::outer);
    return floored_relative(q - sum, q);
}

[[nodiscard]] inline double coupled_q_identity_residual(const PartitionedHermitian& m, Complex lambda, Complex mu) {
    const ComplexMatrix q_l = coupled_q(m, lambda);
    const ComplexMatrix q_mu = coupled_q(m, mu);
    const ComplexMatrix rhs = (lambda - std::conj(mu)) * (coupled_gamma(m, mu).adjoint() * coupled_gamma(m, lambda));
    return floored_relative(q_l - q_mu.adjoint() - rhs, q_l);
}

/// (A - l)^{-1} - (A~ - l)^{-1}
inline ComplexMatrix coupled_resolvent_difference(const PartitionedHermitian& m, Complex lambda) {
    return orthogonal_sum_resolvent(m, lambda) - m.transmission().resolvent(lambda);
}

inline ComplexMatrix coupled_krein_factorization(const PartitionedHermitian& m, Complex lambda) {
    const ComplexMatrix g = coupled_gamma(m, lambda);
    const ComplexMatrix g_conj_adj = coupled_gamma(m, std::conj(lambda)).adjoint();
    return g * q_inverse_apply(coupled_q(m, lambda), lambda, g_conj_adj, m.singular_threshold());
}

[[nodiscard]] inline double coupled_krein_residual(const PartitionedHermitian& m, Complex lambda) {
    m.transmission().require_accepted(lambda);
    const ComplexMatrix lhs = coupled_resolvent_difference(m, lambda);
    return floored_relative(lhs - coupled_krein_factorization(m, lambda), lhs);
}

[[nodiscard]] inline TraceGap coupled_trace_formula(const PartitionedHermitian& m, Complex lambda) {
    m.transmission().require_accepted(lambda);
    const ComplexMatrix dq = coupled_gamma(m, std::conj(lambda)).adjoint() * coupled_gamma(m, lambda);
    const Complex rhs = q_inverse_apply(coupled_q(m, lambda), lambda, dq, m.singular_threshold()).trace();
    const Complex lhs = coupled_resolvent_difference(m, lambda).trace();
    return {lhs, rhs, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs))};
}

struct FluxJump {
    double jump = 0.0;      // ||H_BI k_I + H_BB u_B + H_BE k_E|| / (||H|| ||u||)
    double equation = 0.0;  // ||((H - l) u)_{I u E} - h|| / (||H|| ||u|| + ||h||)
};

/// For k = (A~ - l)^{-1} h, rebuilds the interface value
/// u_B = -H_BB^{-1}(H_BI k_I + H_BE k_E) and measures the conormal jump of
/// the assembled node vector u = (k_I, u_B, k_E).
inline FluxJump transmission_flux_jump(const PartitionedHermitian& m, Complex lambda, const ComplexVector& h) {
    const Index ni = m.n_interior();
    const Index ne = m.n_exterior();
    if (h.size() != ni + ne) {
        throw InvalidMatrix("transmission_flux_jump: h must live on I u E");
    }
    const ComplexVector k = m.transmission().solve(lambda, h);
    const ComplexMatrix c = stacked_interface_coupling(m);
    const ComplexVector flux_in = c.adjoint() * k;
    const ComplexVector ub = -detail::boundary_block_solve(m, flux_in);

    const auto& part = m.partition();
    ComplexVector u = ComplexVector::Zero(m.matrix().rows());
    for (Index a = 0; a < ni; ++a) u(part.interior[static_cast<std::size_t>(a)]) = k(a);
    for (Index a = 0; a < ne; ++a) u((*part.exterior)[static_cast<std::size_t>(a)]) = k(ni + a);
    for (Index a = 0; a < m.n_boundary(); ++a) u(part.boundary[static_cast<std::size_t>(a)]) = ub(a);

    const ComplexVector hu = m.matrix() * u;
    const double scale = m.norm() * u.norm();
    FluxJump out;
    const ComplexVector jump = hu(part.boundary);
    out.jump = scale > 0.0 ? jump.norm() / scale : jump.norm();
    ComplexVector eq(ni + ne);
    eq.head(ni) = hu(part.interior) - lambda * k.head(ni);
    eq.tail(ne) = hu(*part.exterior) - lambda * k.tail(ne);
    out.equation = (eq - h).norm() / (scale + h.norm());
    return out;
}

inline KreinReport coupled_schatten_report(const PartitionedHermitian& m, Complex lambda,
                                           std::span<const double> p_list = default_schatten_orders(),
                                           double rank_cutoff = 1e-8) {
    m.transmission().require_accepted(lambda);
    KreinReport r;
    r.lambda = lambda;
    r.boundary_size = m.n_boundary();
    const ComplexMatrix difference = coupled_resolvent_difference(m, lambda);
    r.krein_residual = floored_relative(difference - coupled_krein_factorization(m, lambda), difference);
    const TraceGap t = coupled_trace_formula(m, lambda);
    r.lhs_trace = t.lhs;
    r.rhs_trace = t.rhs;
    r.trace_gap = t.gap;
    fill_spectral_part(r, difference, p_list, rank_cutoff);
    return r;
}

struct InterlacingReport {
    RealVector orthogonal_sum_spectrum;  // A = diag(A_I, A_E), ascending
    RealVector transmission_spectrum;    // A~, ascending
    /// min eig(A) - min eig(A~); nonnegative when Dirichlet bracketing holds
    [[nodiscard]] double bracketing_margin() const {
        return orthogonal_sum_spectrum(0) - transmission_spectrum(0);
    }
};

inline InterlacingReport interlacing_report(const PartitionedHermitian& m) {
    InterlacingReport r;
    const RealVector& si = m.dirichlet().spectrum();
    const RealVector& se = m.exterior().spectrum();
    r.orthogonal_sum_spectrum.resize(si.size() + se.size());
    r.orthogonal_sum_spectrum << si, se;
    std::sort(r.orthogonal_sum_spectrum.begin(), r.orthogonal_sum_spectrum.end());
    r.transmission_spectrum = m.transmission().spectrum();
    return r;
}

}  // namespace dtnkrein
