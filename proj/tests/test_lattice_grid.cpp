#include "latgrid/lattice_grid.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace latgrid;

namespace {

// ---- test-side oracles: embeddings built by hand from closed forms --------

double newton_root(double a, double b, double c, double d, double seed) {
    double x = seed;
    for (int i = 0; i < 80; ++i) {
        double f = ((a * x + b) * x + c) * x + d;
        double fp = (3 * a * x + 2 * b) * x + c;
        x -= f / fp;
    }
    return x;
}

// Quadratic field of squarefree D > 1, basis {1, omega}.
EmbeddedLattice quad_field(i64 D) {
    bool one_mod4 = ((D % 4) + 4) % 4 == 1;
    double rt = std::sqrt(double(D));
    double w1 = one_mod4 ? (1.0 + rt) / 2.0 : rt;
    double w2 = one_mod4 ? (1.0 - rt) / 2.0 : -rt;
    EmbeddedLattice lat;
    lat.sig = {2, 0};
    lat.basis = RealMatrix(2, 2);
    lat.basis.at(0, 0) = 1.0; lat.basis.at(0, 1) = w1;
    lat.basis.at(1, 0) = 1.0; lat.basis.at(1, 1) = w2;
    lat.one_coords = {1, 0};
    lat.provenance = "quad D=" + std::to_string(D);
    return lat;
}

// Closed form for the aligned coordinate of a quadratic field at the
// hyperplane with normal (1, p).
double aligned_oracle(i64 D, double p) {
    double rt = std::sqrt(double(D));
    bool one_mod4 = ((D % 4) + 4) % 4 == 1;
    double c = one_mod4 ? (1.0 + p + (1.0 - p) * rt) / (2.0 * (1.0 + p))
                        : (1.0 - p) * rt / (1.0 + p);
    return mod1(c);
}

// Monic cubic with three real roots, basis {1, th, th^2}.
EmbeddedLattice cubic_real_field(double b, double c, double d, double s1, double s2, double s3,
                                 const std::string& tag) {
    double r[3] = {newton_root(1, b, c, d, s1), newton_root(1, b, c, d, s2),
                   newton_root(1, b, c, d, s3)};
    EmbeddedLattice lat;
    lat.sig = {3, 0};
    lat.basis = RealMatrix(3, 3);
    for (int i = 0; i < 3; ++i) {
        lat.basis.at(i, 0) = 1.0;
        lat.basis.at(i, 1) = r[i];
        lat.basis.at(i, 2) = r[i] * r[i];
    }
    lat.one_coords = {1, 0, 0};
    lat.provenance = tag;
    return lat;
}

// x^3 - x - 1: one real root th, complex pair with Re = -th/2, |z|^2 = 1/th.
EmbeddedLattice cubic_m23_field() {
    double th = newton_root(1, 0, -1, -1, 1.3);
    double re = -th / 2.0;
    double im = std::sqrt(1.0 / th - th * th / 4.0);
    EmbeddedLattice lat;
    lat.sig = {1, 1};
    lat.basis = RealMatrix(3, 3);
    double pw_re[3] = {1.0, re, re * re - im * im};
    double pw_im[3] = {0.0, im, 2.0 * re * im};
    for (int j = 0; j < 3; ++j) {
        lat.basis.at(0, j) = std::pow(th, j);
        lat.basis.at(1, j) = pw_re[j];
        lat.basis.at(2, j) = pw_im[j];
    }
    lat.one_coords = {1, 0, 0};
    lat.provenance = "cubic disc -23";
    return lat;
}

RealMatrix int_to_real(const IntMatrix& m) {
    RealMatrix r(m.rows, m.cols);
    for (size_t i = 0; i < m.a.size(); ++i) r.a[i] = m.a[i].convert_to<double>();
    return r;
}

// Same lattice test: columns of each matrix reconstruct as integer
// combinations of the other.  The residual is measured after rounding, in the
// ambient space, so skewed bases do not poison the verdict.
bool lattice_equal(const RealMatrix& a, const RealMatrix& b, double tol = 1e-6) {
    if (a.rows != b.rows || a.cols != b.cols) return false;
    for (int pass = 0; pass < 2; ++pass) {
        const RealMatrix& x = pass == 0 ? a : b;
        const RealMatrix& y = pass == 0 ? b : a;
        for (int j = 0; j < y.cols; ++j) {
            Vec target = y.column(j);
            Vec coords = span_coordinates(x, target);
            Vec rec(target.size(), 0.0);
            for (int k = 0; k < x.cols; ++k) {
                double r = std::round(coords[size_t(k)]);
                for (int i = 0; i < x.rows; ++i) rec[size_t(i)] += x.at(i, k) * r;
            }
            if (norm(vec_sub(rec, target)) > tol * (1.0 + norm(target))) return false;
        }
    }
    return true;
}

RealMatrix cols2(double a00, double a01, double a10, double a11) {
    RealMatrix m(2, 2);
    m.at(0, 0) = a00; m.at(0, 1) = a01;
    m.at(1, 0) = a10; m.at(1, 1) = a11;
    return m;
}

} // namespace

TEST_CASE("signature layout and weighted one vector") {
    Signature tr{3, 0}, mix{1, 1}, cpx{0, 1};
    REQUIRE(tr.n() == 3);
    REQUIRE(mix.n() == 3);
    REQUIRE(cpx.n() == 2);
    REQUIRE(mix.places() == 2);

    Vec ob = one_bar(mix);
    REQUIRE(ob == Vec{1.0, 1.0, 0.0});
    Vec obw = one_bar_w(mix, FormMode::trace);
    REQUIRE(obw[0] == 1.0);
    REQUIRE(obw[1] == Catch::Approx(std::sqrt(2.0)).margin(1e-15));
    REQUIRE(obw[2] == 0.0);

    REQUIRE(norm_one_bar(mix, FormMode::trace) == Catch::Approx(std::sqrt(3.0)).margin(1e-15));
    REQUIRE(norm_one_bar(mix, FormMode::euclid) == Catch::Approx(std::sqrt(2.0)).margin(1e-15));
    REQUIRE(norm(one_bar_w(mix, FormMode::trace)) ==
            Catch::Approx(norm_one_bar(mix, FormMode::trace)).margin(1e-14));
    REQUIRE(norm(one_bar_w(cpx, FormMode::euclid)) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("covolumes of hand-built ring lattices match discriminants") {
    EmbeddedLattice z2;
    z2.sig = {2, 0};
    z2.basis = RealMatrix::identity(2);
    z2.one_coords = {1, 0};
    REQUIRE(covolume(z2) == Catch::Approx(1.0).margin(1e-15));

    // disc 5 field: covolume sqrt(5)
    EmbeddedLattice q5 = quad_field(5);
    REQUIRE(covolume(q5) == Catch::Approx(std::sqrt(5.0)).margin(1e-12));
    REQUIRE(covolume_working(q5, FormMode::trace) == Catch::Approx(std::sqrt(5.0)).margin(1e-12));

    // disc 229 field: covolume sqrt(229)
    EmbeddedLattice c229 = cubic_real_field(0, -4, -1, 2.1, -0.25, -1.9, "cubic disc 229");
    REQUIRE(covolume(c229) == Catch::Approx(std::sqrt(229.0)).margin(1e-9));

    // disc -23 field: plain covolume 2^{-s} sqrt(23), trace-form covolume sqrt(23)
    EmbeddedLattice m23 = cubic_m23_field();
    REQUIRE(covolume(m23) == Catch::Approx(std::sqrt(23.0) / 2.0).margin(1e-12));
    REQUIRE(covolume_working(m23, FormMode::trace) == Catch::Approx(std::sqrt(23.0)).margin(1e-12));
    REQUIRE(covolume_working(m23, FormMode::euclid) ==
            Catch::Approx(std::sqrt(23.0) / 2.0).margin(1e-12));

    // scaling law
    EmbeddedLattice scaled = m23;
    for (auto& x : scaled.basis.a) x *= 2.0;
    REQUIRE(covolume(scaled) == Catch::Approx(8.0 * covolume(m23)).margin(1e-10));
}

TEST_CASE("change_basis keeps the lattice and the embedded unit") {
    EmbeddedLattice m23 = cubic_m23_field();
    Vec unit_before = v0_normal(m23, FormMode::trace);
    auto g = oracle::rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        IntMatrix u = oracle::random_unimodular(3, g);
        EmbeddedLattice other = change_basis(m23, u);
        REQUIRE(covolume(other) == Catch::Approx(covolume(m23)).margin(1e-9));
        Vec unit_after = v0_normal(other, FormMode::trace);
        for (int i = 0; i < 3; ++i)
            REQUIRE(unit_after[size_t(i)] == Catch::Approx(unit_before[size_t(i)]).margin(1e-8));
        REQUIRE(lattice_equal(working_basis(other, FormMode::trace),
                              working_basis(m23, FormMode::trace)));
    }
}

TEST_CASE("rescale_unimodular lands on working covolume 1") {
    EmbeddedLattice m23 = cubic_m23_field();
    for (FormMode mode : {FormMode::trace, FormMode::euclid}) {
        EmbeddedLattice r = rescale_unimodular(m23, mode);
        REQUIRE(covolume_working(r, mode) == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("apply_normalization: identity, diagonal action, group law") {
    RealMatrix I2 = RealMatrix::identity(2);
    RealMatrix e1(2, 1), e2(2, 1);
    e1.at(0, 0) = 1.0;
    e2.at(1, 0) = 1.0;

    RealMatrix id = apply_normalization(I2, e1, e2, 0.0);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            REQUIRE(id.at(i, j) == Catch::Approx(I2.at(i, j)).margin(1e-14));

    double t = std::log(2.0);
    RealMatrix d = apply_normalization(I2, e1, e2, t);
    REQUIRE(d.at(0, 0) == Catch::Approx(2.0).margin(1e-12));
    REQUIRE(d.at(1, 1) == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(d.at(0, 1) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(d.at(1, 0) == Catch::Approx(0.0).margin(1e-12));

    // oblique spans in R^3: volume preserved, one-parameter group law
    RealMatrix b(3, 3);
    b.at(0, 0) = 1.2; b.at(0, 1) = -0.3; b.at(0, 2) = 0.4;
    b.at(1, 0) = 0.1; b.at(1, 1) = 0.9;  b.at(1, 2) = -1.1;
    b.at(2, 0) = 0.7; b.at(2, 1) = 0.2;  b.at(2, 2) = 0.5;
    RealMatrix ex(3, 2), co(3, 1);
    ex.at(0, 0) = 2; ex.at(1, 0) = -1; ex.at(2, 0) = 0;
    ex.at(0, 1) = 3; ex.at(1, 1) = 0;  ex.at(2, 1) = -1;
    co.at(0, 0) = 1; co.at(1, 0) = 1;  co.at(2, 0) = 1;

    RealMatrix once = apply_normalization(b, ex, co, 0.8);
    REQUIRE(std::fabs(mat_det(once)) == Catch::Approx(std::fabs(mat_det(b))).margin(1e-10));
    RealMatrix twice = apply_normalization(once, ex, co, 0.5);
    RealMatrix direct = apply_normalization(b, ex, co, 1.3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            REQUIRE(twice.at(i, j) == Catch::Approx(direct.at(i, j)).margin(1e-10));

    RealMatrix bad(3, 1);
    bad.at(0, 0) = 1;
    REQUIRE_THROWS_AS(apply_normalization(b, bad, co, 1.0), ConfigError);
}

TEST_CASE("deform_to_Y1 reaches covolume 1 and a unit generator") {
    Tolerances tol;

    EmbeddedLattice q5 = quad_field(5);
    DeformedLattice d5 = deform_to_Y1(q5, {{1.0, 0.0}, FormMode::trace}, tol);
    // time to contract the unit: log(|1_w| / cov^{1/n}) = log(sqrt(2) * 5^{-1/4})
    REQUIRE(d5.t == Catch::Approx(std::log(std::sqrt(2.0) * std::pow(5.0, -0.25))).margin(1e-12));
    REQUIRE(std::fabs(mat_det(d5.basis)) == Catch::Approx(1.0).margin(1e-12));
    Vec w5 = d5.basis.column(0); // one_coords = e_1
    REQUIRE(norm(w5) == Catch::Approx(1.0).margin(1e-12));

    EmbeddedLattice c229 = cubic_real_field(0, -4, -1, 2.1, -0.25, -1.9, "cubic disc 229");
    DeformedLattice d229 = deform_to_Y1(c229, {{1.0, 2.0, 3.0}, FormMode::trace}, tol);
    REQUIRE(d229.t ==
            Catch::Approx(std::log(std::sqrt(3.0) * std::pow(229.0, -1.0 / 6.0))).margin(1e-12));

    EmbeddedLattice m23 = cubic_m23_field();
    for (FormMode mode : {FormMode::trace, FormMode::euclid}) {
        DeformedLattice dm = deform_to_Y1(m23, {{1.0, 2.0, 3.0}, mode}, tol);
        REQUIRE(std::fabs(mat_det(dm.basis)) == Catch::Approx(1.0).margin(1e-12));
        REQUIRE(norm(dm.basis.column(0)) == Catch::Approx(1.0).margin(1e-12));
    }

    // hyperplane through the unit direction is rejected
    REQUIRE_THROWS_AS(deform_to_Y1(q5, {{1.0, -1.0}, FormMode::trace}, tol), ConfigError);
    REQUIRE_THROWS_AS(deform_to_Y1(q5, {{1.0, 0.0, 0.0}, FormMode::trace}, tol), ConfigError);
}

TEST_CASE("grid_of on the integer lattice and input validation") {
    Tolerances tol;
    DeformedLattice z3;
    z3.basis = RealMatrix::identity(3);
    z3.one_coords = {1, 0, 0};
    z3.sig = {3, 0};
    GridPoint gp = grid_of(z3, tol);
    REQUIRE(norm(gp.translation) == Catch::Approx(0.0).margin(1e-12));
    for (double c : gp.torus_canonical) REQUIRE(int_dist(c) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(gp.torsion == 1);

    DeformedLattice imprim = z3;
    imprim.one_coords = {2, 0, 0};
    REQUIRE_THROWS_AS(grid_of(imprim, tol), ConfigError);

    DeformedLattice fat = z3;
    for (auto& x : fat.basis.a) x *= 2.0;
    REQUIRE_THROWS_AS(grid_of(fat, tol), NumericalError);
}

TEST_CASE("quadratic aligned coordinates match the closed form") {
    EmbeddedLattice q5 = quad_field(5);
    Tolerances tol;

    ConsistencyWitness w0 = consistency_witness(q5, {{1.0, 0.0}, FormMode::trace}, tol);
    REQUIRE(w0.torus_aligned[0] == Catch::Approx(aligned_oracle(5, 0.0)).margin(1e-12));
    REQUIRE(w0.torus_aligned[0] == Catch::Approx(0.6180339887).margin(1e-9));

    ConsistencyWitness w2 = consistency_witness(q5, {{1.0, 2.0}, FormMode::trace}, tol);
    REQUIRE(w2.torus_aligned[0] == Catch::Approx(aligned_oracle(5, 2.0)).margin(1e-12));
    REQUIRE(w2.torus_aligned[0] == Catch::Approx(0.1273220037).margin(1e-9));

    // other residue class: omega = sqrt(2)
    EmbeddedLattice q2 = quad_field(2);
    ConsistencyWitness v0 = consistency_witness(q2, {{1.0, 0.0}, FormMode::trace}, tol);
    REQUIRE(v0.torus_aligned[0] == Catch::Approx(aligned_oracle(2, 0.0)).margin(1e-12));
    REQUIRE(v0.torus_aligned[0] == Catch::Approx(std::sqrt(2.0) - 1.0).margin(1e-12));

    // E orthogonal to the unit direction: coordinate trace(omega)/2 = 1/2, torsion 2
    ConsistencyWitness wv = consistency_witness(q5, {v0_normal(q5, FormMode::trace), FormMode::trace}, tol);
    REQUIRE(wv.torus_aligned[0] == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(wv.grid.torsion == 2);

    // quadratic witness internals: pairing -1, translation closed form
    for (const ConsistencyWitness* w : {&w0, &w2, &wv}) {
        REQUIRE(w->pairing_diag[0] == Catch::Approx(-1.0).margin(1e-10));
        REQUIRE(w->pairing_residual < 1e-10);
        REQUIRE(w->one_orth_residual < 1e-10);
        REQUIRE(w->translation_residual < 1e-10);
        REQUIRE(w->grid_residual < 1e-9);
        REQUIRE(w->beta_lattice_residual < 1e-9);
        REQUIRE(std::abs(w->beta_det) == 1);
    }
}

TEST_CASE("cubic witness closes the deformation-to-grid loop") {
    Tolerances tol;
    EmbeddedLattice m23 = cubic_m23_field();
    EmbeddedLattice c229 = cubic_real_field(0, -4, -1, 2.1, -0.25, -1.9, "cubic disc 229");

    for (FormMode mode : {FormMode::trace, FormMode::euclid}) {
        for (const EmbeddedLattice* lat : {&m23, &c229}) {
            ConsistencyWitness w = consistency_witness(*lat, {{1.0, 2.0, 3.0}, mode}, tol);
            REQUIRE(w.pairing_residual < 1e-9);
            REQUIRE(w.one_orth_residual < 1e-9);
            REQUIRE(w.translation_residual < 1e-9);
            REQUIRE(w.grid_residual < 1e-9);
            REQUIRE(w.beta_lattice_residual < 1e-9);
            REQUIRE(std::abs(w.beta_det) == 1);
            for (double p : w.pairing_diag) REQUIRE(p == Catch::Approx(-1.0).margin(1e-9));

            // the witness columns are exactly the deformed completed basis vectors
            DeformedLattice d = deform_to_Y1(*lat, {{1.0, 2.0, 3.0}, mode}, tol);
            RealMatrix bw = working_basis(*lat, mode);
            CompletedBasis cb = complete_one_basis(bw, lat->one_coords);
            RealMatrix expect = mat_mul(d.basis, int_to_real(cb.completion));
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 2; ++j)
                    REQUIRE(w.alpha0.at(i, j) == Catch::Approx(expect.at(i, j)).margin(1e-10));
        }
    }

    // lattice part does not depend on the chosen hyperplane
    Vec u1{1.0, 2.0, 3.0}, u2{1.0, 0.0, 2.0}, uv = v0_normal(m23, FormMode::trace);
    GridPoint g1 = consistency_witness(m23, {u1, FormMode::trace}, tol).grid;
    GridPoint g2 = consistency_witness(m23, {u2, FormMode::trace}, tol).grid;
    GridPoint g3 = consistency_witness(m23, {uv, FormMode::trace}, tol).grid;
    REQUIRE(lattice_equal(g1.lat_basis, g2.lat_basis));
    REQUIRE(lattice_equal(g1.lat_basis, g3.lat_basis));
    double covol = std::sqrt(std::fabs(mat_det(gram(g1.lat_basis))));
    REQUIRE(covol == Catch::Approx(1.0).margin(1e-9));

    // trace pairing with the unit direction is the algebraic trace, so for
    // E orthogonal to it n * translation lies in the lattice part
    for (const EmbeddedLattice* lat : {&m23, &c229}) {
        Vec uu = v0_normal(*lat, FormMode::trace);
        ConsistencyWitness w = consistency_witness(*lat, {uu, FormMode::trace}, tol);
        for (double c : w.c)
            REQUIRE(int_dist(3.0 * c) == Catch::Approx(0.0).margin(1e-9));
        REQUIRE(w.grid.torsion >= 1);
        REQUIRE(3 % w.grid.torsion == 0);
    }
}

TEST_CASE("grid data is invariant under integral change of basis") {
    Tolerances tol;
    EmbeddedLattice m23 = cubic_m23_field();
    DeformationParams par{{1.0, 2.0, 3.0}, FormMode::trace};
    GridPoint base = grid_of(deform_to_Y1(m23, par, tol), tol);
    auto g = oracle::rng(11);
    for (int trial = 0; trial < 12; ++trial) {
        EmbeddedLattice other = change_basis(m23, oracle::random_unimodular(3, g));
        GridPoint gp = grid_of(deform_to_Y1(other, par, tol), tol);
        REQUIRE(gp.torsion == base.torsion);
        REQUIRE(lattice_equal(gp.lat_basis, base.lat_basis));
        // translations agree modulo the lattice part
        Vec coords = span_coordinates(base.lat_basis, vec_sub(gp.translation, base.translation));
        for (double c : coords) REQUIRE(int_dist(c) == Catch::Approx(0.0).margin(1e-8));
    }
}

TEST_CASE("torsion_order detects small denominators") {
    Tolerances tol;
    RealMatrix I2 = RealMatrix::identity(2);
    REQUIRE(torsion_order(I2, {0.0, 0.0}, tol) == 1);
    REQUIRE(torsion_order(I2, {0.5, 0.0}, tol) == 2);
    REQUIRE(torsion_order(I2, {1.0 / 3.0, 2.0 / 3.0}, tol) == 3);
    REQUIRE(torsion_order(I2, {0.2, 0.4}, tol) == 5);
    double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    REQUIRE(torsion_order(I2, {phi, 0.0}, tol) == 0);

    // invariant under unimodular change of the basis
    auto g = oracle::rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        RealMatrix u = int_to_real(oracle::random_unimodular(2, g));
        RealMatrix b = mat_mul(I2, u);
        Vec tr = mat_vec(u, Vec{1.0 / 3.0, 2.0 / 3.0});
        REQUIRE(torsion_order(b, tr, tol) == 3);
    }
}

TEST_CASE("shape_of_columns: square, hexagonal, invariances") {
    Tolerances tol;
    ShapePoint sq = shape_of_columns(RealMatrix::identity(2), tol);
    REQUIRE(sq.x == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(sq.y == Catch::Approx(1.0).margin(1e-12));

    ShapePoint hex = shape_of_columns(cols2(1.0, 0.5, 0.0, std::sqrt(3.0) / 2.0), tol);
    REQUIRE(hex.x == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(hex.y == Catch::Approx(std::sqrt(3.0) / 2.0).margin(1e-12));

    auto g = oracle::rng(5);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    int kept = 0;
    while (kept < 30) {
        RealMatrix b = cols2(dist(g), dist(g), dist(g), dist(g));
        if (std::fabs(mat_det(b)) < 0.1) continue;
        ++kept;
        ShapePoint sp = shape_of_columns(b, tol);
        REQUIRE(sp.x >= -1e-12);
        REQUIRE(sp.x <= 0.5 + 1e-9);
        REQUIRE(sp.x * sp.x + sp.y * sp.y >= 1.0 - 1e-9);

        double a = 0.7, ca = std::cos(a), sa = std::sin(a);
        RealMatrix rot = cols2(ca, -sa, sa, ca);
        ShapePoint rp = shape_of_columns(mat_mul(rot, b), tol);
        REQUIRE(rp.x == Catch::Approx(sp.x).margin(1e-9));
        REQUIRE(rp.y == Catch::Approx(sp.y).margin(1e-9));

        RealMatrix sc = b;
        for (auto& v : sc.a) v *= 3.0;
        ShapePoint scp = shape_of_columns(sc, tol);
        REQUIRE(scp.x == Catch::Approx(sp.x).margin(1e-9));
        REQUIRE(scp.y == Catch::Approx(sp.y).margin(1e-9));

        RealMatrix u = int_to_real(oracle::random_unimodular(2, g));
        ShapePoint up = shape_of_columns(mat_mul(b, u), tol);
        REQUIRE(up.x == Catch::Approx(sp.x).margin(1e-9));
        REQUIRE(up.y == Catch::Approx(sp.y).margin(1e-9));
    }

    RealMatrix one(2, 1);
    one.at(0, 0) = 2.5;
    ShapePoint pt = shape_of_columns(one, tol);
    REQUIRE(pt.x == 0.0);
    REQUIRE(pt.y == 1.0);
}

TEST_CASE("projected shape agrees between the grid route and the direct route") {
    Tolerances tol;
    EmbeddedLattice q5 = quad_field(5);
    PiPiReport r2 = pi1_pi2_consistency(q5, {{1.0, 0.0}, FormMode::trace}, tol);
    REQUIRE(r2.residual < 1e-9);

    EmbeddedLattice m23 = cubic_m23_field();
    EmbeddedLattice c229 = cubic_real_field(0, -4, -1, 2.1, -0.25, -1.9, "cubic disc 229");
    for (FormMode mode : {FormMode::trace, FormMode::euclid}) {
        PiPiReport ra = pi1_pi2_consistency(m23, {{1.0, 2.0, 3.0}, mode}, tol);
        REQUIRE(ra.residual < 1e-9);
        REQUIRE(ra.direct.y > 0.0);
        PiPiReport rb = pi1_pi2_consistency(c229, {v0_normal(c229, mode), mode}, tol);
        REQUIRE(rb.residual < 1e-9);
    }

    // the shape itself is hyperplane-independent
    PiPiReport s1 = pi1_pi2_consistency(m23, {{1.0, 2.0, 3.0}, FormMode::trace}, tol);
    PiPiReport s2 = pi1_pi2_consistency(m23, {{1.0, 0.0, 2.0}, FormMode::trace}, tol);
    REQUIRE(s1.via_grid.x == Catch::Approx(s2.via_grid.x).margin(1e-9));
    REQUIRE(s1.via_grid.y == Catch::Approx(s2.via_grid.y).margin(1e-9));
}
