#include <catch2/catch_amalgamated.hpp>

#include "dtnkrein/boundary_model.hpp"
#include "dtnkrein/elliptic_assembly.hpp"
#include "dtnkrein/models.hpp"

#include <cmath>
#include <sstream>

using namespace dtnkrein;

namespace {

/// Independent cell stiffness: 2x2 Gauss quadrature of grad(phi_a) . A grad(phi_b)
/// over the unit square (exact for bilinear shape functions).
std::array<std::array<double, 4>, 4> gauss_cell_stiffness(double a11, double a12, double a22) {
    const double g = 0.5 / std::sqrt(3.0);
    const double pts[2] = {0.5 - g, 0.5 + g};
    std::array<std::array<double, 4>, 4> k{};
    for (double xi : pts) {
        for (double eta : pts) {
            // (0,0), (1,0), (0,1), (1,1)
            const double dx[4] = {-(1 - eta), (1 - eta), -eta, eta};
            const double dy[4] = {-(1 - xi), -xi, (1 - xi), xi};
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b)
                    k[a][b] += 0.25 * (a11 * dx[a] * dx[b] + a12 * (dx[a] * dy[b] + dy[a] * dx[b]) +
                                       a22 * dy[a] * dy[b]);
        }
    }
    return k;
}

GridSpec bounded(Index n, double h = 1.0) {
    GridSpec g;
    g.nx = g.ny = n;
    g.h = h;
    return g;
}

GridSpec coupled_12() {
    GridSpec g;
    g.nx = g.ny = 12;
    g.layout = Layout::coupled;
    g.inner = InnerBox{3, 3, 8, 8};
    return g;
}

}  // namespace

TEST_CASE("ellipticity_check", "[assembly][ellipticity]") {
    const GridSpec g = bounded(4);
    CHECK(ellipticity_check(preset_coefficients(g, "laplacian")) == 1.0);
    CHECK(std::abs(ellipticity_check(preset_coefficients(g, "anisotropic")) - (3.0 - std::sqrt(2.0)) / 2.0) <= 1e-15);

    AffineCoefficients bad;
    bad.a12 = {1.5, 0.0, 0.0};
    CHECK_THROWS_AS(ellipticity_check(affine_coefficients(g, bad)), NotElliptic);

    // only one cell violates the bound
    AffineCoefficients local;
    local.a12 = {0.0, 0.5, 0.0};  // a12 = 0.5 x, reaches 1.25 at the last column of cells
    try {
        (void)ellipticity_check(affine_coefficients(g, local));
        FAIL("expected NotElliptic");
    } catch (const NotElliptic& e) {
        CHECK(e.cell() == 2);
    }
    CHECK_THROWS_AS(preset_coefficients(g, "nope"), ConfigError);
}

TEST_CASE("cell stiffness matches Gauss quadrature", "[assembly]") {
    SplitMix64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const double a11 = rng.uniform(0.5, 3), a22 = rng.uniform(0.5, 3), a12 = rng.uniform(-0.4, 0.4);
        const auto lib = cell_stiffness(a11, a12, a22);
        const auto oracle = gauss_cell_stiffness(a11, a12, a22);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) CHECK(std::abs(lib[a][b] - oracle[a][b]) <= 1e-14);
    }
}

TEST_CASE("3x3 Laplacian center row", "[assembly]") {
    const GridSpec g = bounded(3);
    const PartitionedHermitian m = assemble(g, preset_coefficients(g, "laplacian"));
    const ComplexMatrix& h = m.matrix();
    REQUIRE(h.rows() == 9);
    REQUIRE(m.partition().interior == IndexList{4});
    CHECK(std::abs(h(4, 4).real() - 8.0 / 3.0) <= 1e-15);
    for (Index k = 0; k < 9; ++k) {
        if (k != 4) CHECK(std::abs(h(4, k).real() + 1.0 / 3.0) <= 1e-15);
    }
    CHECK(h.imag().norm() == 0.0);
}

TEST_CASE("assembled matrices are exactly symmetric", "[assembly]") {
    for (const char* preset : {"laplacian", "anisotropic", "affine"}) {
        const GridSpec g = bounded(9, 0.25);
        const PartitionedHermitian m = assemble(g, preset_coefficients(g, preset));
        const Eigen::MatrixXd h = m.matrix().real();
        CHECK(h == h.transpose());
    }
    const GridSpec c = coupled_12();
    const Eigen::MatrixXd hc = assemble(c, preset_coefficients(c, "affine")).matrix().real();
    CHECK(hc == hc.transpose());
}

TEST_CASE("constant potential shifts the matrix and the Dirichlet spectrum", "[assembly]") {
    const GridSpec g = bounded(7);
    const double c = 0.37;
    AffineCoefficients base;
    base.a11 = {1.2, 0.02, 0.0};
    base.a12 = {0.1, 0.0, 0.0};
    AffineCoefficients shifted = base;
    shifted.a0 = {c, 0.0, 0.0};
    const PartitionedHermitian m0 = assemble(g, affine_coefficients(g, base));
    const PartitionedHermitian m1 = assemble(g, affine_coefficients(g, shifted));
    ComplexMatrix expected = m0.matrix();
    expected.diagonal().array() += c;
    CHECK((m1.matrix() - expected).norm() == 0.0);
    const RealVector s0 = m0.dirichlet().spectrum();
    const RealVector s1 = m1.dirichlet().spectrum();
    CHECK((s1 - s0 - RealVector::Constant(s0.size(), c)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("Laplacian Dirichlet operator is positive definite", "[assembly]") {
    for (Index n : {4, 8, 12}) {
        const GridSpec g = bounded(n);
        CHECK(assemble(g, preset_coefficients(g, "laplacian")).dirichlet().spectrum()(0) > 0.0);
    }
}

TEST_CASE("coupled layout structure", "[assembly][coupled]") {
    const GridSpec g = coupled_12();
    const PartitionedHermitian m = assemble(g, preset_coefficients(g, "laplacian"));
    const Partition& p = m.partition();
    REQUIRE(p.exterior);
    CHECK(m.matrix().rows() == 100);
    CHECK(m.n_interior() == 16);
    CHECK(m.n_boundary() == 20);
    CHECK(m.n_exterior() == 64);
    CHECK(m.matrix()(p.interior, *p.exterior).norm() == 0.0);
    REQUIRE(m.split());
    const ComplexMatrix sum = m.split()->inner + m.split()->outer;
    CHECK((sum - m.h_bb()).norm() == 0.0);
    // every retained node has a full stencil: rows of the Laplacian sum to zero
    // except next to the truncation ring
    CHECK(std::abs(m.matrix().row(m.partition().interior[5]).sum()) <= 1e-15);
}

TEST_CASE("coupled layout validation", "[assembly][coupled]") {
    GridSpec g = coupled_12();
    g.inner = InnerBox{1, 3, 8, 8};
    CHECK_THROWS_AS(g.validate(), LayoutError);
    g.inner = InnerBox{3, 3, 4, 8};
    CHECK_THROWS_AS(g.validate(), LayoutError);
    g.inner.reset();
    CHECK_THROWS_AS(g.validate(), LayoutError);
    GridSpec tiny = bounded(2);
    CHECK_THROWS_AS(tiny.validate(), LayoutError);

    const GridSpec far = coupled_grid(4);
    CHECK(far.inner->i0 == 9);
    CHECK(far.nx == 22);
}

TEST_CASE("coefficient tables", "[assembly][csv]") {
    const GridSpec g = bounded(5, 0.5);
    const CoefficientField preset = preset_coefficients(g, "anisotropic");
    std::ostringstream csv;
    csv.precision(17);
    csv << "cell_i,cell_j,a11,a12,a22,a0\n";
    // reverse order on purpose
    for (Index k = g.cell_count() - 1; k >= 0; --k) {
        const auto s = static_cast<std::size_t>(k);
        csv << k % g.cells_x() << "," << k / g.cells_x() << "," << preset.a11[s] << "," << preset.a12[s] << ","
            << preset.a22[s] << ",0.25\n";
    }
    std::istringstream in(csv.str());
    const CoefficientField table = table_coefficients(g, in);
    CHECK(table.a11 == preset.a11);
    CHECK(table.a12 == preset.a12);
    for (double v : table.a0) CHECK(v == 0.25);

    std::istringstream missing("cell_i,cell_j,a11,a12,a22,a0\n0,0,1,0,1,0\n");
    CHECK_THROWS_AS(table_coefficients(g, missing), ConfigError);
    std::istringstream header("i,j,a11,a12,a22,a0\n");
    CHECK_THROWS_AS(table_coefficients(g, header), ConfigError);
    std::istringstream dup("cell_i,cell_j,a11,a12,a22,a0\n0,0,1,0,1,0\n0,0,1,0,1,0\n");
    CHECK_THROWS_AS(table_coefficients(g, dup), ConfigError);
}

TEST_CASE("green_identity_residual", "[assembly][green]") {
    const GridSpec g = bounded(5);
    const PartitionedHermitian m = assemble(g, preset_coefficients(g, "affine"));
    SplitMix64 rng(9);
    ComplexVector u(25), v(25);
    for (Index k = 0; k < 25; ++k) {
        u(k) = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
        v(k) = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    }
    const ComplexVector ur = u.real().cast<Complex>();
    CHECK(green_identity_residual(m, ur, ur) == 0.0);
    CHECK(green_identity_residual(m, u, u) <= 1e-15);
    CHECK(green_identity_residual(m, u, v) <= 1e-14);

    ComplexVector ui = ComplexVector::Zero(25), vb = ComplexVector::Zero(25);
    for (Index k : m.partition().interior) ui(k) = u(k);
    for (Index k : m.partition().boundary) vb(k) = v(k);
    CHECK(green_identity_residual(m, ui, vb) <= 1e-14);
}

TEST_CASE("conormal_trace", "[assembly][conormal]") {
    const GridSpec g = bounded(6);
    const PartitionedHermitian m = assemble(g, preset_coefficients(g, "laplacian"));
    const Index n = m.matrix().rows();
    CHECK(conormal_trace(m, ComplexVector::Ones(n)).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(conormal_trace(m, ComplexVector::Zero(n)).norm() == 0.0);

    // Dirichlet solution with boundary value phi has conormal trace -Q(l) phi
    const Complex l(0.7, 0.4);
    SplitMix64 rng(4);
    ComplexVector phi(m.n_boundary());
    for (Index k = 0; k < phi.size(); ++k) phi(k) = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const ComplexVector inner = gamma_at(m, l) * phi;
    ComplexVector u(n);
    u(m.partition().interior) = inner;
    u(m.partition().boundary) = phi;
    const ComplexVector expected = -(q_at(m, l) * phi);
    CHECK((conormal_trace(m, u) - expected).norm() <= 1e-12 * expected.norm());
}

TEST_CASE("generic assembled grids are simple", "[assembly][simplicity]") {
    for (const char* preset : {"laplacian", "anisotropic", "affine"}) {
        const GridSpec g = bounded(8);
        const PartitionedHermitian m = assemble(g, preset_coefficients(g, preset));
        CHECK(simplicity_rank(m) == m.n_interior());
    }
}
