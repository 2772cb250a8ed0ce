#pragma once

// Embedded ring lattices and their deformation into grids.
//
// An EmbeddedLattice holds the real-embedding basis of a rank-n ring lattice
// together with the integer coordinates of the unit element.  deform_to_Y1
// rescales to covolume 1 and applies the one-parameter expansion/contraction
// that fixes a chosen transverse hyperplane E and shrinks the unit direction
// until the unit generator has length exactly 1.  grid_of then reads off the
// induced affine lattice (grid) in the hyperplane orthogonal to that
// generator: lattice part from the dual lattice, translation part from the
// dual complement vector.
//
// Two quadratic forms are supported on the complex embedding pairs: the
// euclidean form on raw (Re, Im) coordinates, and the trace form which scales
// both by sqrt(2).  Under the trace form the pairing of a lattice vector with
// the all-ones direction is the algebraic trace, which is what makes the
// aligned torus coordinates rational for rational data.  Stored bases are
// always in plain euclidean coordinates; the form only enters through
// working_basis().

#include "common.hpp"
#include "exact_linalg.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace latgrid {

enum class FormMode { trace, euclid };

inline const char* form_name(FormMode m) { return m == FormMode::trace ? "trace" : "euclid"; }

struct Signature {
    int r = 0; // real embeddings
    int s = 0; // conjugate pairs of complex embeddings
    int n() const { return r + 2 * s; }
    int places() const { return r + s; }
    bool operator==(const Signature& o) const { return r == o.r && s == o.s; }
};

// Coordinate layout: r real slots, then s (Re, Im) pairs.

inline Vec one_bar(const Signature& sig) {
    Vec v(size_t(sig.n()), 0.0);
    for (int i = 0; i < sig.r; ++i) v[size_t(i)] = 1.0;
    for (int j = 0; j < sig.s; ++j) v[size_t(sig.r + 2 * j)] = 1.0;
    return v;
}

inline Vec form_weights(const Signature& sig, FormMode mode) {
    Vec w(size_t(sig.n()), 1.0);
    if (mode == FormMode::trace) {
        double rt2 = std::sqrt(2.0);
        for (int i = sig.r; i < sig.n(); ++i) w[size_t(i)] = rt2;
    }
    return w;
}

inline Vec one_bar_w(const Signature& sig, FormMode mode) {
    Vec v = one_bar(sig);
    Vec w = form_weights(sig, mode);
    for (size_t i = 0; i < v.size(); ++i) v[i] *= w[i];
    return v;
}

// |1_w|: sqrt(n) under the trace form, sqrt(r+s) euclidean.
inline double norm_one_bar(const Signature& sig, FormMode mode) {
    return std::sqrt(mode == FormMode::trace ? double(sig.n()) : double(sig.r + sig.s));
}

struct EmbeddedLattice {
    RealMatrix basis;            // n x n, columns = basis vectors, plain coordinates
    std::vector<i64> one_coords; // coordinates of the unit element in this basis
    Signature sig;
    std::string provenance;      // free-form label for diagnostics and cache rows
};

inline RealMatrix working_basis(const EmbeddedLattice& lat, FormMode mode) {
    RealMatrix b = lat.basis;
    if (mode == FormMode::trace && lat.sig.s > 0) {
        Vec w = form_weights(lat.sig, mode);
        for (int i = 0; i < b.rows; ++i)
            for (int j = 0; j < b.cols; ++j) b.at(i, j) *= w[size_t(i)];
    }
    return b;
}

inline double covolume(const EmbeddedLattice& lat) { return std::fabs(mat_det(lat.basis)); }

inline double covolume_working(const EmbeddedLattice& lat, FormMode mode) {
    double c = covolume(lat);
    if (mode == FormMode::trace) c *= std::pow(2.0, lat.sig.s);
    return c;
}

// Same lattice, new integral basis: columns recombined by U, unit coordinates
// pulled through U^{-1}.
inline EmbeddedLattice change_basis(const EmbeddedLattice& lat, const IntMatrix& u) {
    const int n = lat.sig.n();
    if (u.rows != n || u.cols != n) throw ConfigError("change_basis: shape mismatch");
    IntMatrix uinv = int_inverse_unimodular(u);
    EmbeddedLattice out = lat;
    RealMatrix ud(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) ud.at(i, j) = u.at(i, j).convert_to<double>();
    out.basis = mat_mul(lat.basis, ud);
    for (int i = 0; i < n; ++i) {
        BigInt s = 0;
        for (int j = 0; j < n; ++j) s += uinv.at(i, j) * lat.one_coords[size_t(j)];
        out.one_coords[size_t(i)] = s.convert_to<i64>();
    }
    return out;
}

// Scale so the working covolume is 1.
inline EmbeddedLattice rescale_unimodular(const EmbeddedLattice& lat, FormMode mode) {
    double c = covolume_working(lat, mode);
    if (!(c > 0)) throw NumericalError("rescale_unimodular: degenerate basis");
    double f = std::pow(c, -1.0 / lat.sig.n());
    EmbeddedLattice out = lat;
    for (auto& x : out.basis.a) x *= f;
    return out;
}

// The volume-preserving map that expands the span of `expand` by e^{t/dim} and
// contracts the span of `contract` by e^{-t/dim}.  The two spans must be
// complementary.  Used directly only for generic subspace pairs; deform_to_Y1
// has a rank-1 fast path for its hyperplane/line split.
inline RealMatrix apply_normalization(const RealMatrix& basis, const RealMatrix& expand,
                                      const RealMatrix& contract, double t,
                                      double cond_budget = 1e12) {
    const int n = basis.rows;
    const int d1 = expand.cols, d2 = contract.cols;
    if (expand.rows != n || contract.rows != n || d1 + d2 != n || d1 < 1 || d2 < 1)
        throw ConfigError("apply_normalization: spans must be complementary");
    RealMatrix s(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d1; ++j) s.at(i, j) = expand.at(i, j);
        for (int j = 0; j < d2; ++j) s.at(i, d1 + j) = contract.at(i, j);
    }
    RealMatrix sinv = mat_inverse(s, cond_budget);
    double e1 = std::exp(t / d1), e2 = std::exp(-t / d2);
    for (int i = 0; i < d1; ++i)
        for (int j = 0; j < n; ++j) sinv.at(i, j) *= e1;
    for (int i = d1; i < n; ++i)
        for (int j = 0; j < n; ++j) sinv.at(i, j) *= e2;
    return mat_mul(s, mat_mul(sinv, basis));
}

// The hyperplane E is given by its normal vector u (working coordinates); the
// contracted line is the one spanned by the embedded unit.
struct DeformationParams {
    Vec u;
    FormMode form = FormMode::trace;
};

struct DeformedLattice {
    RealMatrix basis; // n x n working coordinates, covolume 1, unit generator of length 1
    std::vector<i64> one_coords;
    Signature sig;
    FormMode form = FormMode::trace;
    double t = 0.0; // deformation time that was applied
    Vec u;          // hyperplane normal that was used
};

// Normal vector for the choice E = orthogonal complement of the unit direction.
inline Vec v0_normal(const EmbeddedLattice& lat, FormMode mode) {
    RealMatrix bw = working_basis(lat, mode);
    Vec one_vec(size_t(bw.rows), 0.0);
    for (int i = 0; i < bw.rows; ++i)
        for (int j = 0; j < bw.cols; ++j)
            one_vec[size_t(i)] += bw.at(i, j) * double(lat.one_coords[size_t(j)]);
    return one_vec;
}

inline DeformedLattice deform_to_Y1(const EmbeddedLattice& lat, const DeformationParams& par,
                                    const Tolerances& tol = {}) {
    const int n = lat.sig.n();
    if (n < 2) throw ConfigError("deform_to_Y1: need rank >= 2");
    if (int(par.u.size()) != n) throw ConfigError("deform_to_Y1: normal vector has wrong length");
    if (int(lat.one_coords.size()) != n) throw ConfigError("deform_to_Y1: one_coords length");

    RealMatrix bw = working_basis(lat, par.form);
    double cov = std::fabs(mat_det(bw));
    if (!(cov > 0)) throw NumericalError("deform_to_Y1: degenerate basis");
    double dv = std::pow(cov, -1.0 / n);

    Vec one_vec(size_t(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) one_vec[size_t(i)] += bw.at(i, j) * double(lat.one_coords[size_t(j)]);
    double one_norm = norm(one_vec);
    if (!(one_norm > 0)) throw NumericalError("deform_to_Y1: zero unit generator");

    double denom = dot(one_vec, par.u);
    if (std::fabs(denom) <= tol.geometry * one_norm * norm(par.u))
        throw ConfigError("deform_to_Y1: hyperplane contains the unit direction");

    double t = std::log(dv * one_norm);
    double e_exp = std::exp(t / (n - 1)) * dv;
    double e_con = std::exp(-t) * dv;

    DeformedLattice out;
    out.basis = RealMatrix(n, n);
    for (int j = 0; j < n; ++j) {
        Vec x = bw.column(j);
        double xi = dot(x, par.u) / denom;
        for (int i = 0; i < n; ++i)
            out.basis.at(i, j) =
                e_exp * (x[size_t(i)] - xi * one_vec[size_t(i)]) + e_con * xi * one_vec[size_t(i)];
    }
    out.one_coords = lat.one_coords;
    out.sig = lat.sig;
    out.form = par.form;
    out.t = t;
    out.u = par.u;

    double det_err = std::fabs(std::fabs(mat_det(out.basis)) - 1.0);
    if (det_err > tol.geometry)
        throw NumericalError("deform_to_Y1: covolume check failed by " + fmt_double(det_err));
    Vec w(size_t(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) w[size_t(i)] += out.basis.at(i, j) * double(lat.one_coords[size_t(j)]);
    if (std::fabs(norm(w) - 1.0) > tol.geometry)
        throw NumericalError("deform_to_Y1: unit generator check failed");
    return out;
}

// Columns of the dual basis: <dual_j, basis_i> = delta_ij.
inline RealMatrix dual_basis(const RealMatrix& b, double cond_budget = 1e12) {
    return transpose(mat_inverse(b, cond_budget));
}

struct GridPoint {
    RealMatrix lat_basis;    // n x (n-1), LLL-reduced and sign-normalized lattice part
    Vec translation;         // representative of the affine part, orthogonal to the generator
    Vec torus_canonical;     // translation coordinates in lat_basis, reduced mod 1
    int torsion = 0;         // smallest m with m * translation in the lattice part, 0 if none found
};

// Smallest m in [1, mmax] such that m * translation lies in the column lattice
// of `basis` up to tol.torsion, or 0 when no such m exists.
inline int torsion_order(const RealMatrix& basis, const Vec& translation, const Tolerances& tol = {}) {
    for (int m = 1; m <= tol.torsion_mmax; ++m) {
        Vec coords = span_coordinates(basis, vec_scale(translation, double(m)), tol.cond_budget);
        double worst = 0.0;
        for (double c : coords) worst = std::max(worst, int_dist(c));
        if (worst < tol.torsion) return m;
    }
    return 0;
}

inline GridPoint grid_of(const DeformedLattice& d, const Tolerances& tol = {}) {
    const int n = d.sig.n();
    i64 g = 0;
    for (i64 c : d.one_coords) g = std::gcd(g, c);
    if (g != 1) throw ConfigError("grid_of: unit coordinates are not primitive");

    Vec w(size_t(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) w[size_t(i)] += d.basis.at(i, j) * double(d.one_coords[size_t(j)]);
    if (std::fabs(norm(w) - 1.0) > tol.geometry)
        throw NumericalError("grid_of: generator does not have unit length");

    std::vector<BigInt> oc(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) oc[size_t(i)] = d.one_coords[size_t(i)];
    KernelSplit ks = kernel_and_complement(oc);
    RealMatrix dual = dual_basis(d.basis, tol.cond_budget);

    RealMatrix part(n, n - 1);
    for (int k = 0; k < n - 1; ++k)
        for (int i = 0; i < n; ++i) {
            double s = 0;
            for (int j = 0; j < n; ++j) s += dual.at(i, j) * ks.kernel.at(k, j).convert_to<double>();
            part.at(i, k) = s;
        }
    Vec u_vec(size_t(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) u_vec[size_t(i)] += dual.at(i, j) * ks.complement[size_t(j)].convert_to<double>();

    GridPoint gp;
    gp.translation = vec_sub(u_vec, vec_scale(w, dot(u_vec, w)));

    LLLResult red = lll_reduce(part, tol.lll_delta);
    gp.lat_basis = red.basis;

    double covol = std::sqrt(std::fabs(mat_det(gram(gp.lat_basis))));
    if (std::fabs(covol - 1.0) > 1e3 * tol.geometry)
        throw NumericalError("grid_of: lattice part covolume " + fmt_double(covol));

    Vec coords = span_coordinates(gp.lat_basis, gp.translation, tol.cond_budget);
    gp.torus_canonical.resize(size_t(n - 1));
    for (int i = 0; i < n - 1; ++i) gp.torus_canonical[size_t(i)] = mod1(coords[size_t(i)]);
    gp.torsion = torsion_order(gp.lat_basis, gp.translation, tol);
    return gp;
}

// ------------------------------------------------------------------- shapes

struct ShapePoint {
    double x = 0.0, y = 1.0;  // upper half plane coordinates for rank-2 lattices
    RealMatrix gram_reduced;  // reduced Gram matrix, any rank
};

// Reduce a rank-2 Gram to |x| <= 1/2, x^2 + y^2 >= 1, then fold x to [0, 1/2].
inline void reduce_binary_gram(double& g00, double& g01, double& g11) {
    if (!(g00 > 0) || !(g11 > 0)) throw NumericalError("reduce_binary_gram: not positive definite");
    if (g11 < g00) std::swap(g00, g11);
    for (int iter = 0; iter < 64; ++iter) {
        double q = std::round(g01 / g00);
        if (q != 0.0) {
            g11 += q * q * g00 - 2.0 * q * g01;
            g01 -= q * g00;
        }
        if (g11 >= g00 * (1.0 - 1e-12)) break;
        std::swap(g00, g11);
    }
}

// Shape of the lattice spanned by the columns: scale-free reduced form.  For
// rank 2 this is the folded fundamental-domain point (x, y); rank 1 is a
// single point; higher ranks return the LLL-reduced Gram normalized to
// determinant 1 (comparisons there are only reliable away from reduction
// ties, which is all we need).
inline ShapePoint shape_of_columns(const RealMatrix& cols, const Tolerances& tol = {}) {
    const int k = cols.cols;
    if (k < 1) throw ConfigError("shape_of_columns: empty basis");
    ShapePoint sp;
    if (k == 1) {
        sp.x = 0.0;
        sp.y = 1.0;
        sp.gram_reduced = RealMatrix::identity(1);
        return sp;
    }
    LLLResult red = lll_reduce(cols, tol.lll_delta);
    RealMatrix g = gram(red.basis);
    if (k == 2) {
        double g00 = g.at(0, 0), g01 = g.at(0, 1), g11 = g.at(1, 1);
        reduce_binary_gram(g00, g01, g11);
        sp.x = std::fabs(g01 / g00);
        double disc = g00 * g11 - g01 * g01;
        if (!(disc > 0)) throw NumericalError("shape_of_columns: degenerate rank-2 lattice");
        sp.y = std::sqrt(disc) / g00;
        sp.gram_reduced = RealMatrix(2, 2);
        sp.gram_reduced.at(0, 0) = g00;
        sp.gram_reduced.at(0, 1) = sp.gram_reduced.at(1, 0) = g01;
        sp.gram_reduced.at(1, 1) = g11;
        return sp;
    }
    double det = mat_det(g);
    if (!(det > 0)) throw NumericalError("shape_of_columns: degenerate lattice");
    double f = std::pow(det, -1.0 / k);
    for (auto& v : g.a) v *= f;
    sp.x = 0.0;
    sp.y = 0.0;
    sp.gram_reduced = g;
    return sp;
}

// Integer completion of the unit coordinates to a basis of Z^n, realized on a
// working basis: the unit generator plus n-1 complementary columns.
struct CompletedBasis {
    Vec one_vec;          // embedded unit generator
    RealMatrix alphas;    // n x (n-1) complementary basis vectors
    IntMatrix completion; // their integer coordinates in the stored basis, n x (n-1)
};

inline CompletedBasis complete_one_basis(const RealMatrix& bw, const std::vector<i64>& one_coords) {
    const int n = bw.rows;
    if (int(one_coords.size()) != n || bw.cols != n)
        throw ConfigError("complete_one_basis: shape mismatch");
    std::vector<BigInt> oc(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) oc[size_t(i)] = one_coords[size_t(i)];
    KernelSplit ks = kernel_and_complement(oc);
    IntMatrix u(n, n);
    for (int i = 0; i < n - 1; ++i)
        for (int j = 0; j < n; ++j) u.at(i, j) = ks.kernel.at(i, j);
    for (int j = 0; j < n; ++j) u.at(n - 1, j) = ks.complement[size_t(j)];
    IntMatrix uinv = int_inverse_unimodular(u); // last column is one_coords
    CompletedBasis cb;
    cb.one_vec.assign(size_t(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cb.one_vec[size_t(i)] += bw.at(i, j) * double(one_coords[size_t(j)]);
    cb.completion = IntMatrix(n, n - 1);
    cb.alphas = RealMatrix(n, n - 1);
    for (int k = 0; k < n - 1; ++k)
        for (int i = 0; i < n; ++i) {
            cb.completion.at(i, k) = uinv.at(i, k);
            double s = 0;
            for (int j = 0; j < n; ++j) s += bw.at(i, j) * uinv.at(j, k).convert_to<double>();
            cb.alphas.at(i, k) = s;
        }
    return cb;
}

// Shape of the projection of the lattice onto the orthogonal complement of the
// unit direction.  Independent of the chosen hyperplane E, so this can be
// computed on the undeformed lattice.
inline ShapePoint shape_of(const EmbeddedLattice& lat, FormMode mode, const Tolerances& tol = {}) {
    RealMatrix bw = working_basis(lat, mode);
    CompletedBasis cb = complete_one_basis(bw, lat.one_coords);
    RealMatrix proj(bw.rows, bw.cols - 1);
    double nn = dot(cb.one_vec, cb.one_vec);
    for (int k = 0; k < proj.cols; ++k) {
        Vec a = cb.alphas.column(k);
        double f = dot(a, cb.one_vec) / nn;
        for (int i = 0; i < proj.rows; ++i) proj.at(i, k) = a[size_t(i)] - f * cb.one_vec[size_t(i)];
    }
    return shape_of_columns(proj, tol);
}

struct PiPiReport {
    ShapePoint via_grid; // shape of the dual (inside the hyperplane) of the grid's lattice part
    ShapePoint direct;   // shape of the projected undeformed lattice
    double residual = 0.0;
};

// The grid's lattice part, dualized within its hyperplane, must have the same
// shape as the projected lattice no matter which E was used.
inline PiPiReport pi1_pi2_consistency(const EmbeddedLattice& lat, const DeformationParams& par,
                                      const Tolerances& tol = {}) {
    DeformedLattice d = deform_to_Y1(lat, par, tol);
    GridPoint gp = grid_of(d, tol);
    RealMatrix g = gram(gp.lat_basis);
    RealMatrix dual_in_plane = mat_mul(gp.lat_basis, mat_inverse(g, tol.cond_budget));
    PiPiReport rep;
    rep.via_grid = shape_of_columns(dual_in_plane, tol);
    rep.direct = shape_of(lat, par.form, tol);
    if (gp.lat_basis.cols == 2) {
        rep.residual = std::max(std::fabs(rep.via_grid.x - rep.direct.x),
                                std::fabs(rep.via_grid.y - rep.direct.y));
    } else {
        double worst = 0.0;
        const RealMatrix& a = rep.via_grid.gram_reduced;
        const RealMatrix& b = rep.direct.gram_reduced;
        for (size_t i = 0; i < a.a.size(); ++i) worst = std::max(worst, std::fabs(a.a[i] - b.a[i]));
        rep.residual = worst;
    }
    return rep;
}

// ------------------------------------------------------- consistency witness

// Closed-form cross-check of the whole deformation-to-grid pipeline, computed
// from the undeformed working basis.  With the unit generator written as l and
// a completed basis alpha_1..alpha_{n-1}:
//
//   c_i       = <u, alpha_i> / <u, l>          affine coordinate across E
//   perp_i    = alpha_i - c_i l                E-component of alpha_i
//   alpha0_i  = e^{t/(n-1)} Dv perp_i + c_i Dv e^{-t} l     deformed columns
//   beta_i    = e^{-t/(n-1)} cross(perp_1 .. l@i .. perp_{n-1})
//               / (Dv <cross(perp_1 .. perp_{n-1}), l>)
//   tau_v     = cross(alpha0_1 .. alpha0_{n-1}) normalized to pair 1 with the
//               deformed unit generator
//
// The beta_i span the grid's lattice part, pair with alpha0_j as -delta_ij,
// and are orthogonal to l.  Projecting tau_v off the unit direction gives the
// grid translation as  |l| P(u)/<u,l> + sum_i c_i beta_i.  The diagonal
// pairing value is -1 for every i: the substituted cross product differs from
// the unsubstituted one by a single column transposition.
struct ConsistencyWitness {
    double t = 0.0, dv = 0.0, lambda_v = 0.0;
    Vec c;             // affine coordinates c_i
    Vec torus_aligned; // c_i mod 1
    RealMatrix alpha0; // n x (n-1)
    RealMatrix beta;   // n x (n-1)
    Vec tau_v;
    Vec pairing_diag;               // <beta_i, alpha0_i>
    double pairing_residual = 0.0;  // max | |<beta_i, alpha0_j>| - delta_ij |
    double one_orth_residual = 0.0; // max |<beta_i, l>| / |l|
    double translation_residual = 0.0; // P(tau_v) against the closed form, direct
    double grid_residual = 0.0;        // grid translation against the closed form, mod lattice part
    double beta_lattice_residual = 0.0; // integrality of beta in the grid's lattice basis
    i64 beta_det = 0;                   // determinant of those integer coordinates
    GridPoint grid;
};

inline ConsistencyWitness consistency_witness(const EmbeddedLattice& lat,
                                              const DeformationParams& par,
                                              const Tolerances& tol = {}) {
    const int n = lat.sig.n();
    if (n < 2) throw ConfigError("consistency_witness: need rank >= 2");
    if (int(par.u.size()) != n) throw ConfigError("consistency_witness: normal vector length");

    RealMatrix bw = working_basis(lat, par.form);
    CompletedBasis cb = complete_one_basis(bw, lat.one_coords);
    const Vec& l = cb.one_vec;
    double lnorm = norm(l);

    double cov = std::fabs(mat_det(bw));
    if (!(cov > 0)) throw NumericalError("consistency_witness: degenerate basis");

    ConsistencyWitness w;
    w.dv = std::pow(cov, -1.0 / n);
    w.lambda_v = 1.0 / (w.dv * lnorm);
    w.t = std::log(w.dv * lnorm);

    double denom = dot(par.u, l);
    if (std::fabs(denom) <= tol.geometry * lnorm * norm(par.u))
        throw ConfigError("consistency_witness: hyperplane contains the unit direction");

    std::vector<Vec> perp(size_t(n - 1));
    w.c.resize(size_t(n - 1));
    w.torus_aligned.resize(size_t(n - 1));
    for (int i = 0; i < n - 1; ++i) {
        Vec a = cb.alphas.column(i);
        double ci = dot(par.u, a) / denom;
        w.c[size_t(i)] = ci;
        w.torus_aligned[size_t(i)] = mod1(ci);
        perp[size_t(i)] = vec_sub(a, vec_scale(l, ci));
    }

    double e_exp = std::pow(w.lambda_v, -1.0 / (n - 1));
    w.alpha0 = RealMatrix(n, n - 1);
    for (int i = 0; i < n - 1; ++i)
        for (int r = 0; r < n; ++r)
            w.alpha0.at(r, i) = e_exp * w.dv * perp[size_t(i)][size_t(r)] +
                                w.c[size_t(i)] * w.dv * w.lambda_v * l[size_t(r)];

    Vec cr = cross_product(perp);
    double beta_denom = w.dv * dot(cr, l);
    if (std::fabs(beta_denom) <= 0)
        throw NumericalError("consistency_witness: degenerate completed basis");
    w.beta = RealMatrix(n, n - 1);
    for (int i = 0; i < n - 1; ++i) {
        std::vector<Vec> args = perp;
        args[size_t(i)] = l;
        Vec bi = vec_scale(cross_product(args), std::pow(w.lambda_v, 1.0 / (n - 1)) / beta_denom);
        for (int r = 0; r < n; ++r) w.beta.at(r, i) = bi[size_t(r)];
    }

    std::vector<Vec> a0cols(size_t(n - 1));
    for (int i = 0; i < n - 1; ++i) a0cols[size_t(i)] = w.alpha0.column(i);
    Vec cr0 = cross_product(a0cols);
    Vec w_def = vec_scale(l, w.dv * w.lambda_v); // deformed unit generator, length 1
    double tau_denom = dot(cr0, w_def);
    if (std::fabs(tau_denom) <= 0) throw NumericalError("consistency_witness: degenerate deformed basis");
    w.tau_v = vec_scale(cr0, 1.0 / tau_denom);

    w.pairing_diag.resize(size_t(n - 1));
    for (int i = 0; i < n - 1; ++i) {
        Vec bi = w.beta.column(i);
        w.one_orth_residual = std::max(w.one_orth_residual, std::fabs(dot(bi, l)) / lnorm);
        for (int j = 0; j < n - 1; ++j) {
            double p = dot(bi, w.alpha0.column(j));
            if (i == j) w.pairing_diag[size_t(i)] = p;
            double target = i == j ? 1.0 : 0.0;
            w.pairing_residual = std::max(w.pairing_residual, std::fabs(std::fabs(p) - target));
        }
    }

    // closed form for the translation part
    Vec rhs = vec_scale(orth_project(par.u, l), lnorm / denom);
    for (int i = 0; i < n - 1; ++i)
        rhs = vec_add(rhs, vec_scale(w.beta.column(i), w.c[size_t(i)]));
    Vec lhs = orth_project(w.tau_v, l);
    w.translation_residual = norm(vec_sub(lhs, rhs));

    DeformedLattice d = deform_to_Y1(lat, par, tol);
    w.grid = grid_of(d, tol);

    Vec diff = vec_sub(w.grid.translation, rhs);
    Vec coords = span_coordinates(w.grid.lat_basis, diff, tol.cond_budget);
    for (double cval : coords) w.grid_residual = std::max(w.grid_residual, int_dist(cval));

    IntMatrix bcoord(n - 1, n - 1);
    for (int i = 0; i < n - 1; ++i) {
        Vec bc = span_coordinates(w.grid.lat_basis, w.beta.column(i), tol.cond_budget);
        for (int j = 0; j < n - 1; ++j) {
            double cj = bc[size_t(j)];
            w.beta_lattice_residual = std::max(w.beta_lattice_residual, int_dist(cj));
            bcoord.at(j, i) = checked_i64(std::round(cj), "beta lattice coordinate");
        }
    }
    w.beta_det = int_det(bcoord).convert_to<i64>();
    return w;
}

} // namespace latgrid
