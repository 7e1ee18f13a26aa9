#pragma once

// Assembly of PartitionedHermitian models from a uniformly elliptic 2D
// expression  -div(A grad u) + a0 u  on a uniform node grid.
//
// Stiffness: bilinear quadrilateral elements, coefficient tensor sampled at the
// cell midpoint, gradient products integrated exactly, scaled by the lumped
// inverse mass 1/h^2. The potential a0 is added on the diagonal.

#include "dtnkrein/boundary_model.hpp"
#include "dtnkrein/errors.hpp"
#include "dtnkrein/numerics.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace dtnkrein {

enum class Layout { bounded, coupled };

/// Inner box for the coupled layout, inclusive node index extents.
struct InnerBox {
    Index i0 = 0, j0 = 0, i1 = 0, j1 = 0;
};

struct GridSpec {
    Index nx = 8;
    Index ny = 8;
    double h = 1.0;
    Layout layout = Layout::bounded;
    std::optional<InnerBox> inner;

    [[nodiscard]] Index cells_x() const noexcept { return nx - 1; }
    [[nodiscard]] Index cells_y() const noexcept { return ny - 1; }
    [[nodiscard]] Index cell_count() const noexcept { return cells_x() * cells_y(); }
    [[nodiscard]] Index node_count() const noexcept { return nx * ny; }

    void validate() const {
        if (nx < 3 || ny < 3) {
            throw LayoutError("grid: nx and ny must be at least 3");
        }
        if (!(h > 0.0) || !std::isfinite(h)) {
            throw LayoutError("grid: spacing h must be positive");
        }
        if (layout == Layout::coupled) {
            if (!inner) {
                throw LayoutError("grid: coupled layout requires an inner box");
            }
            const InnerBox& b = *inner;
            // one exterior node between the truncation ring and the box on every side
            if (b.i0 < 2 || b.j0 < 2 || b.i1 > nx - 3 || b.j1 > ny - 3) {
                throw LayoutError("grid: inner box needs at least one node of clearance from the outer ring");
            }
            if (b.i1 - b.i0 < 2 || b.j1 - b.j0 < 2) {
                throw LayoutError("grid: inner box must contain at least one strictly interior node");
            }
        }
    }
};

/// Square coupled grid around an inner box of `inner_nodes` nodes per side,
/// with the truncation ring `far_factor` box diameters away from the box.
inline GridSpec coupled_grid(Index inner_nodes, double h = 1.0, double far_factor = 3.0) {
    const Index diameter = inner_nodes - 1;
    const auto gap = std::max<Index>(2, static_cast<Index>(std::ceil(far_factor * static_cast<double>(diameter))));
    GridSpec g;
    g.nx = g.ny = inner_nodes + 2 * gap;
    g.h = h;
    g.layout = Layout::coupled;
    g.inner = InnerBox{gap, gap, gap + diameter, gap + diameter};
    g.validate();
    return g;
}

/// c0 + cx * x + cy * y in physical coordinates (x = i h, y = j h).
struct Affine {
    double c0 = 0.0, cx = 0.0, cy = 0.0;
    [[nodiscard]] double operator()(double x, double y) const noexcept { return c0 + cx * x + cy * y; }
};

struct CoefficientField {
    Index cells_x = 0;
    Index cells_y = 0;
    std::vector<double> a11, a12, a22;  // per cell, index cj * cells_x + ci
    std::vector<double> a0;             // per node, index j * (cells_x + 1) + i
    std::string source;

    [[nodiscard]] Index cell_count() const noexcept { return cells_x * cells_y; }
};

/// Smaller eigenvalue of [[a11, a12], [a12, a22]].
[[nodiscard]] inline double tensor_min_eigenvalue(double a11, double a12, double a22) noexcept {
    const double mean = 0.5 * (a11 + a22);
    const double half_diff = 0.5 * (a11 - a22);
    return mean - std::hypot(half_diff, a12);
}

/// Uniform ellipticity constant: the minimum over cells of the smaller
/// eigenvalue of the coefficient tensor. Throws NotElliptic if it is not positive.
inline double ellipticity_check(const CoefficientField& c) {
    const auto n = static_cast<std::size_t>(c.cell_count());
    if (c.a11.size() != n || c.a12.size() != n || c.a22.size() != n) {
        throw LayoutError("coefficients: per-cell arrays have the wrong length");
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        const double e = tensor_min_eigenvalue(c.a11[k], c.a12[k], c.a22[k]);
        if (!(e > 0.0)) {
            throw NotElliptic(k, e);
        }
        best = std::min(best, e);
    }
    for (double v : c.a0) {
        if (!std::isfinite(v)) {
            throw LayoutError("coefficients: potential a0 must be finite");
        }
    }
    return best;
}

struct AffineCoefficients {
    Affine a11{1.0, 0.0, 0.0};
    Affine a12{0.0, 0.0, 0.0};
    Affine a22{1.0, 0.0, 0.0};
    Affine a0{0.0, 0.0, 0.0};
};

/// Tensor entries sampled at cell midpoints, potential at nodes.
inline CoefficientField affine_coefficients(const GridSpec& g, const AffineCoefficients& a,
                                            std::string source = "affine") {
    CoefficientField c;
    c.cells_x = g.cells_x();
    c.cells_y = g.cells_y();
    c.source = std::move(source);
    for (Index cj = 0; cj < c.cells_y; ++cj) {
        for (Index ci = 0; ci < c.cells_x; ++ci) {
            const double x = (static_cast<double>(ci) + 0.5) * g.h;
            const double y = (static_cast<double>(cj) + 0.5) * g.h;
            c.a11.push_back(a.a11(x, y));
            c.a12.push_back(a.a12(x, y));
            c.a22.push_back(a.a22(x, y));
        }
    }
    for (Index j = 0; j < g.ny; ++j) {
        for (Index i = 0; i < g.nx; ++i) {
            c.a0.push_back(a.a0(static_cast<double>(i) * g.h, static_cast<double>(j) * g.h));
        }
    }
    return c;
}

/// Named presets: "laplacian", "anisotropic" (a11=2, a12=0.5, a22=1) and
/// "affine" (slowly varying full tensor with a positive potential).
inline CoefficientField preset_coefficients(const GridSpec& g, std::string_view name) {
    AffineCoefficients a;
    if (name == "laplacian") {
        // defaults
    } else if (name == "anisotropic") {
        a.a11 = {2.0, 0.0, 0.0};
        a.a12 = {0.5, 0.0, 0.0};
        a.a22 = {1.0, 0.0, 0.0};
    } else if (name == "affine") {
        a.a11 = {1.0, 0.05, 0.02};
        a.a12 = {0.1, 0.004, -0.004};
        a.a22 = {1.0, 0.03, 0.04};
        a.a0 = {0.1, 0.01, 0.0};
    } else {
        throw ConfigError("unknown coefficient preset '" + std::string(name) + "'");
    }
    return affine_coefficients(g, a, std::string(name));
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        std::string_view field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
            field.remove_suffix(1);
        out.push_back(field);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <class T>
T parse_number(std::string_view s, std::size_t line_no) {
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ConfigError("coefficient table line " + std::to_string(line_no) + ": bad number '" +
                          std::string(s) + "'");
    }
    return value;
}

}  // namespace detail

/// Per-cell coefficient table with header `cell_i,cell_j,a11,a12,a22,a0`.
/// Rows may come in any order; every cell must appear exactly once. The
/// per-cell potential is averaged onto nodes over the adjacent cells.
inline CoefficientField table_coefficients(const GridSpec& g, std::istream& in, std::string source = "table") {
    static constexpr std::array<std::string_view, 6> kHeader{"cell_i", "cell_j", "a11", "a12", "a22", "a0"};
    CoefficientField c;
    c.cells_x = g.cells_x();
    c.cells_y = g.cells_y();
    c.source = std::move(source);
    const auto n = static_cast<std::size_t>(g.cell_count());
    c.a11.assign(n, 0.0);
    c.a12.assign(n, 0.0);
    c.a22.assign(n, 0.0);
    std::vector<double> cell_a0(n, 0.0);
    std::vector<char> seen(n, 0);

    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto fields = detail::split_csv_line(line);
        if (!header_seen) {
            if (fields.size() != kHeader.size() || !std::equal(fields.begin(), fields.end(), kHeader.begin())) {
                throw ConfigError("coefficient table: header must be cell_i,cell_j,a11,a12,a22,a0");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != kHeader.size()) {
            throw ConfigError("coefficient table line " + std::to_string(line_no) + ": expected 6 columns");
        }
        const auto ci = detail::parse_number<long long>(fields[0], line_no);
        const auto cj = detail::parse_number<long long>(fields[1], line_no);
        if (ci < 0 || cj < 0 || ci >= c.cells_x || cj >= c.cells_y) {
            throw ConfigError("coefficient table line " + std::to_string(line_no) + ": cell out of range");
        }
        const auto k = static_cast<std::size_t>(cj * c.cells_x + ci);
        if (seen[k]++) {
            throw ConfigError("coefficient table line " + std::to_string(line_no) + ": duplicate cell");
        }
        c.a11[k] = detail::parse_number<double>(fields[2], line_no);
        c.a12[k] = detail::parse_number<double>(fields[3], line_no);
        c.a22[k] = detail::parse_number<double>(fields[4], line_no);
        cell_a0[k] = detail::parse_number<double>(fields[5], line_no);
    }
    if (!header_seen) {
        throw ConfigError("coefficient table: empty input");
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (!seen[k]) {
            throw ConfigError("coefficient table: missing cell (" + std::to_string(k % c.cells_x) + "," +
                              std::to_string(k / c.cells_x) + ")");
        }
    }
    c.a0.assign(static_cast<std::size_t>(g.node_count()), 0.0);
    for (Index j = 0; j < g.ny; ++j) {
        for (Index i = 0; i < g.nx; ++i) {
            double sum = 0.0;
            int count = 0;
            for (Index cj = j - 1; cj <= j; ++cj) {
                for (Index ci = i - 1; ci <= i; ++ci) {
                    if (ci >= 0 && cj >= 0 && ci < c.cells_x && cj < c.cells_y) {
                        sum += cell_a0[static_cast<std::size_t>(cj * c.cells_x + ci)];
                        ++count;
                    }
                }
            }
            c.a0[static_cast<std::size_t>(j * g.nx + i)] = sum / count;
        }
    }
    return c;
}

namespace detail {

// Exact integrals over the unit square of products of bilinear shape-function
// derivatives. Local node order: (0,0), (1,0), (0,1), (1,1).
inline constexpr double kStiffXX[4][4] = {{2.0 / 6, -2.0 / 6, 1.0 / 6, -1.0 / 6},
                                          {-2.0 / 6, 2.0 / 6, -1.0 / 6, 1.0 / 6},
                                          {1.0 / 6, -1.0 / 6, 2.0 / 6, -2.0 / 6},
                                          {-1.0 / 6, 1.0 / 6, -2.0 / 6, 2.0 / 6}};
inline constexpr double kStiffYY[4][4] = {{2.0 / 6, 1.0 / 6, -2.0 / 6, -1.0 / 6},
                                          {1.0 / 6, 2.0 / 6, -1.0 / 6, -2.0 / 6},
                                          {-2.0 / 6, -1.0 / 6, 2.0 / 6, 1.0 / 6},
                                          {-1.0 / 6, -2.0 / 6, 1.0 / 6, 2.0 / 6}};
// d/dx d/dy + d/dy d/dx
inline constexpr double kStiffXY[4][4] = {{0.5, 0.0, 0.0, -0.5},
                                          {0.0, -0.5, 0.5, 0.0},
                                          {0.0, 0.5, -0.5, 0.0},
                                          {-0.5, 0.0, 0.0, 0.5}};

}  // namespace detail

/// Local 4x4 stiffness of one cell (before the 1/h^2 scaling).
[[nodiscard]] inline std::array<std::array<double, 4>, 4> cell_stiffness(double a11, double a12, double a22) {
    std::array<std::array<double, 4>, 4> k{};
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            k[a][b] = a11 * detail::kStiffXX[a][b] + a22 * detail::kStiffYY[a][b] + a12 * detail::kStiffXY[a][b];
        }
    }
    return k;
}

/// Assembles the model for the given grid layout.
///
/// Bounded: all nx*ny nodes, B = outermost ring, I = the rest.
/// Coupled: the outermost ring is dropped (homogeneous Dirichlet truncation),
/// B = the node ring of the inner box, I = strictly inside it, E = everything
/// else. The boundary split records which side's cells produced each H_BB entry.
inline PartitionedHermitian assemble(const GridSpec& g, const CoefficientField& c,
                                     double singular_rel = kDefaultSingularRel) {
    g.validate();
    if (c.cells_x != g.cells_x() || c.cells_y != g.cells_y() ||
        c.a0.size() != static_cast<std::size_t>(g.node_count())) {
        throw LayoutError("assemble: coefficient field does not match the grid");
    }
    ellipticity_check(c);

    const bool coupled = g.layout == Layout::coupled;
    const Index off = coupled ? 1 : 0;
    const Index mx = g.nx - 2 * off;
    const Index my = g.ny - 2 * off;
    const Index n = mx * my;
    // model index of grid node (i, j), -1 for truncated nodes
    auto id = [&](Index i, Index j) -> Index {
        if (i < off || j < off || i >= g.nx - off || j >= g.ny - off) return -1;
        return (j - off) * mx + (i - off);
    };

    enum class Role { interior, boundary, exterior };
    auto role = [&](Index i, Index j) {
        if (!coupled) {
            const bool ring = i == 0 || j == 0 || i == g.nx - 1 || j == g.ny - 1;
            return ring ? Role::boundary : Role::interior;
        }
        const InnerBox& b = *g.inner;
        const bool in_x = i >= b.i0 && i <= b.i1;
        const bool in_y = j >= b.j0 && j <= b.j1;
        if (!in_x || !in_y) return Role::exterior;
        if (i == b.i0 || i == b.i1 || j == b.j0 || j == b.j1) return Role::boundary;
        return Role::interior;
    };
    auto cell_inside = [&](Index ci, Index cj) {
        if (!coupled) return true;
        const InnerBox& b = *g.inner;
        return ci >= b.i0 && ci < b.i1 && cj >= b.j0 && cj < b.j1;
    };

    Partition part;
    IndexList exterior;
    std::vector<Index> boundary_slot(static_cast<std::size_t>(n), -1);
    for (Index j = off; j < g.ny - off; ++j) {
        for (Index i = off; i < g.nx - off; ++i) {
            const Index k = id(i, j);
            switch (role(i, j)) {
                case Role::interior: part.interior.push_back(k); break;
                case Role::boundary:
                    boundary_slot[static_cast<std::size_t>(k)] = static_cast<Index>(part.boundary.size());
                    part.boundary.push_back(k);
                    break;
                case Role::exterior: exterior.push_back(k); break;
            }
        }
    }
    if (coupled) part.exterior = std::move(exterior);

    const double inv_mass = 1.0 / (g.h * g.h);
    const Index nb = static_cast<Index>(part.boundary.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd bb_in = Eigen::MatrixXd::Zero(nb, nb);
    Eigen::MatrixXd bb_out = Eigen::MatrixXd::Zero(nb, nb);

    for (Index cj = 0; cj < g.cells_y(); ++cj) {
        for (Index ci = 0; ci < g.cells_x(); ++ci) {
            const auto cell = static_cast<std::size_t>(cj * g.cells_x() + ci);
            const auto k = cell_stiffness(c.a11[cell], c.a12[cell], c.a22[cell]);
            const std::array<Index, 4> nodes{id(ci, cj), id(ci + 1, cj), id(ci, cj + 1), id(ci + 1, cj + 1)};
            const bool inside = cell_inside(ci, cj);
            for (int a = 0; a < 4; ++a) {
                if (nodes[a] < 0) continue;
                for (int b = 0; b < 4; ++b) {
                    if (nodes[b] < 0) continue;
                    const double v = k[a][b] * inv_mass;
                    h(nodes[a], nodes[b]) += v;
                    const Index sa = boundary_slot[static_cast<std::size_t>(nodes[a])];
                    const Index sb = boundary_slot[static_cast<std::size_t>(nodes[b])];
                    if (sa >= 0 && sb >= 0) {
                        (inside ? bb_in : bb_out)(sa, sb) += v;
                    }
                }
            }
        }
    }

    for (Index j = off; j < g.ny - off; ++j) {
        for (Index i = off; i < g.nx - off; ++i) {
            const Index k = id(i, j);
            const double pot = c.a0[static_cast<std::size_t>(j * g.nx + i)];
            h(k, k) += pot;
            const Index s = boundary_slot[static_cast<std::size_t>(k)];
            if (s < 0) continue;
            int inside_cells = 0;
            for (Index cj = j - 1; cj <= j; ++cj)
                for (Index ci = i - 1; ci <= i; ++ci) inside_cells += cell_inside(ci, cj) ? 1 : 0;
            const double in_share = pot * inside_cells / 4.0;
            bb_in(s, s) += in_share;
            bb_out(s, s) += pot - in_share;
        }
    }

    std::optional<BoundarySplit> split;
    if (coupled) {
        // H_BB is defined as the sum of the two sides, entry by entry.
        for (Index a = 0; a < nb; ++a) {
            for (Index b = 0; b < nb; ++b) {
                h(part.boundary[static_cast<std::size_t>(a)], part.boundary[static_cast<std::size_t>(b)]) =
                    bb_in(a, b) + bb_out(a, b);
            }
        }
        split = BoundarySplit{bb_in.cast<Complex>(), bb_out.cast<Complex>()};
    }
    return PartitionedHermitian(h.cast<Complex>(), std::move(part), std::move(split), singular_rel);
}

/// Full-node-space discrete Green identity residual:
///   |<(Hu)_X, v_X> - <u_X, (Hv)_X> - <u_B, (Hv)_B> + <(Hu)_B, v_B>| / (||u|| ||v|| ||H||)
/// where X is every non-boundary node.
inline double green_identity_residual(const PartitionedHermitian& m, const ComplexVector& u, const ComplexVector& v) {
    const ComplexMatrix& h = m.matrix();
    if (u.size() != h.rows() || v.size() != h.rows()) {
        throw InvalidMatrix("green_identity_residual: vectors must live on all nodes");
    }
    const ComplexVector hu = h * u;
    const ComplexVector hv = h * v;
    std::vector<char> on_boundary(static_cast<std::size_t>(h.rows()), 0);
    for (Index k : m.partition().boundary) on_boundary[static_cast<std::size_t>(k)] = 1;

    Complex interior_term = 0.0;
    Complex boundary_term = 0.0;
    for (Index k = 0; k < h.rows(); ++k) {
        // <x, y> = conj(y) x
        if (on_boundary[static_cast<std::size_t>(k)]) {
            boundary_term += -std::conj(hv(k)) * u(k) + std::conj(v(k)) * hu(k);
        } else {
            interior_term += std::conj(v(k)) * hu(k) - std::conj(hv(k)) * u(k);
        }
    }
    const double scale = u.norm() * v.norm() * m.norm();
    const double gap = std::abs(interior_term + boundary_term);
    return scale > 0.0 ? gap / scale : gap;
}

/// Discrete conormal derivative (Hu)|_B.
[[nodiscard]] inline ComplexVector conormal_trace(const PartitionedHermitian& m, const ComplexVector& u) {
    if (u.size() != m.matrix().rows()) {
        throw InvalidMatrix("conormal_trace: vector must live on all nodes");
    }
    return m.matrix()(m.partition().boundary, Eigen::indexing::all) * u;
}

}  // namespace dtnkrein
