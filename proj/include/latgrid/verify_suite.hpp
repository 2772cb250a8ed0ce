#pragma once

// Acceptance suite: eight numbered criteria, each printed as one PASS/FAIL
// line with the measured quantities.  Two scales are pinned below: desk() is
// the full run the suite is specified against, quick() is a reduced run with
// thresholds recalibrated for the smaller samples so that `verify` stays
// under a minute.  Oracles here are written against definitions only: the
// quadratic sieve counts, the brute-force class partition, and the Hunter-box
// monic enumeration share no code with the library paths they check.

#include "latgrid/common.hpp"
#include "latgrid/cubic_enumerator.hpp"
#include "latgrid/equidist_stats.hpp"
#include "latgrid/lattice_grid.hpp"
#include "latgrid/number_fields.hpp"

#include <array>
#include <complex>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace latgrid {

struct AcceptanceScale {
    std::string name;
    // C1 quadratic closed form
    i64 c1_D = 0;
    double c1_tol = 1e-9;
    // C2 quadratic two-atom law
    i64 c2_T = 0;
    double c2_atom_tol = 1e-9;
    double c2_mass_tol = 0.005;
    // C3 cubic torsion
    i64 c3_T = 0;
    double c3_min_complex_classified = 0.999; // signature (3,0) must reach 1.0
    // C4 cubic Weyl sums at E = (1,2,3)^perp
    i64 c4_T = 0, c4_T0 = 0;
    double c4_max_sk = 0.05;
    int c4_min_decreasing = 7;
    // C5 shape recovery.  The histogram cap is the reachability ceiling: the
    // shortest projected ring vector obeys lambda1^2 >= |disc|^{1/3}, so any
    // shape from |disc| <= T has y <= T^{1/6}/sqrt(3).  Binning past that
    // ceiling only adds reference mass no sample of this size can reach.
    i64 c5_T = 0;
    double c5_y_cap = 0.0;
    double c5_tv = 0.1;
    int c5_min_groups = 20;
    double c5_min_expected = 50.0;
    double c5_joint_min_expected = 20.0;
    double c5_alpha = 0.01;
    // C6 structural identities
    i64 c6_X = 0;
    double c6_tol = 1e-9;
    // C7 enumeration correctness
    i64 c7_partition_X = 0, c7_partition_box = 0, c7_partition_cap = 0;
    i64 c7_hunter_X = 0;
    // C8 exact Weyl identities (scale-free)

    static AcceptanceScale desk() {
        AcceptanceScale s;
        s.name = "desk";
        s.c1_D = 100000;
        s.c2_T = 10000000;
        s.c3_T = 100000;
        s.c4_T = 1000000;
        s.c4_T0 = 10000;
        s.c4_max_sk = 0.05;
        s.c4_min_decreasing = 7;
        s.c5_T = 1000000;
        s.c5_y_cap = std::pow(double(s.c5_T), 1.0 / 6.0) / std::sqrt(3.0);
        s.c5_tv = 0.1;
        s.c5_min_groups = 20;
        s.c5_min_expected = 50.0;
        s.c5_alpha = 0.01;
        s.c6_X = 10000;
        s.c7_partition_X = 500;
        s.c7_partition_box = 14;
        s.c7_partition_cap = 90;
        s.c7_hunter_X = 10000;
        return s;
    }

    // Reduced sizes for the CLI `verify` subcommand.  Statistical thresholds
    // are loosened to match the smaller samples; the exact and structural
    // tolerances stay at their desk values.
    static AcceptanceScale quick() {
        AcceptanceScale s;
        s.name = "quick";
        s.c1_D = 2000;
        s.c2_T = 100000;
        s.c3_T = 3000;
        s.c4_T = 30000;
        s.c4_T0 = 3000;
        s.c4_max_sk = 0.15;
        s.c4_min_decreasing = 5;
        s.c5_T = 50000;
        s.c5_y_cap = std::pow(double(s.c5_T), 1.0 / 6.0) / std::sqrt(3.0);
        s.c5_tv = 0.2; // finite-size bias toward the ceiling; measured 0.14 at this T
        s.c5_min_groups = 8;
        s.c5_min_expected = 15.0;
        s.c5_joint_min_expected = 5.0;
        s.c5_alpha = 0.005;
        s.c6_X = 500;
        s.c7_partition_X = 120;
        s.c7_partition_box = 10;
        s.c7_partition_cap = 70;
        s.c7_hunter_X = 500;
        return s;
    }
};

struct CriterionResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace verify_detail {

inline std::string fmtsci(double x) {
    std::ostringstream o;
    o.precision(3);
    o << x;
    return o.str();
}

inline std::vector<char> squarefree_flags(i64 L) {
    std::vector<char> sf(size_t(L) + 1, 1);
    if (L >= 0) sf[0] = 0;
    for (i64 p = 2; p * p <= L; ++p) {
        if (!sf[size_t(p)]) continue;
        for (i64 m = p * p; m <= L; m += p * p) sf[size_t(m)] = 0;
    }
    return sf;
}

// Pointwise product in R^r x C^s on plain embedded coordinates.
inline Vec emb_mul(const Signature& sig, const Vec& x, const Vec& y) {
    Vec out(size_t(sig.n()), 0.0);
    for (int i = 0; i < sig.r; ++i) out[size_t(i)] = x[size_t(i)] * y[size_t(i)];
    for (int k = 0; k < sig.s; ++k) {
        size_t re = size_t(sig.r + 2 * k), im = re + 1;
        out[re] = x[re] * y[re] - x[im] * y[im];
        out[im] = x[re] * y[im] + x[im] * y[re];
    }
    return out;
}

inline double covolume_of_columns(const RealMatrix& m) {
    return std::sqrt(std::fabs(mat_det(gram(m))));
}

// --------------------------------------------------------------- C7 oracles

// Twisted substitution action in machine integers, by explicit convolution.
inline Form64 subst64(const Mat2& g, const Form64& f) {
    auto mul = [](const std::vector<i64>& u, const std::vector<i64>& v) {
        std::vector<i64> w(u.size() + v.size() - 1, 0);
        for (size_t i = 0; i < u.size(); ++i)
            for (size_t j = 0; j < v.size(); ++j) w[i + j] += u[i] * v[j];
        return w;
    };
    std::vector<i64> X{g.m00, g.m10}, Y{g.m01, g.m11};
    auto X2 = mul(X, X);
    auto X3 = mul(X2, X);
    auto X2Y = mul(X2, Y);
    auto Y2 = mul(Y, Y);
    auto XY2 = mul(X, Y2);
    auto Y3 = mul(Y2, Y);
    i64 det = g.det();
    if (det == 0) throw ConfigError("subst64: singular transform");
    Form64 r;
    i64* out[4] = {&r.a, &r.b, &r.c, &r.d};
    for (int k = 0; k < 4; ++k) {
        i64 v = f.a * X3[size_t(k)] + f.b * X2Y[size_t(k)] + f.c * XY2[size_t(k)] +
                f.d * Y3[size_t(k)];
        if (v % det != 0) throw NumericalError("subst64: determinant does not divide");
        *out[k] = v / det;
    }
    return r;
}

inline const std::vector<Mat2>& unimodular_window() {
    static const std::vector<Mat2> w = [] {
        std::vector<Mat2> v;
        for (i64 a = -1; a <= 1; ++a)
            for (i64 b = -1; b <= 1; ++b)
                for (i64 c = -1; c <= 1; ++c)
                    for (i64 d = -1; d <= 1; ++d)
                        if (a * d - b * c == 1 || a * d - b * c == -1) v.push_back(Mat2{a, b, c, d});
        return v;
    }();
    return w;
}

// Forms in a seed box partitioned into connected components under single
// small unimodular steps.  The d coordinate gets a larger box: classes
// divisible by y have a reduced last coefficient growing like |disc| / 4.
inline std::vector<std::set<Form64>> brute_components(i64 limit, int sign, i64 box, i64 cap) {
    const i64 dbox = std::max(box, limit / 3 + 2);
    const i64 dcap = limit + 20;
    auto in_range = [&](const Form64& f) {
        i64 D = form_disc(f);
        return sign > 0 ? (D > 0 && D <= limit) : (D < 0 && D >= -limit);
    };
    std::vector<Form64> seeds;
    for (i64 a = -box; a <= box; ++a)
        for (i64 b = -box; b <= box; ++b)
            for (i64 c = -box; c <= box; ++c)
                for (i64 d = -dbox; d <= dbox; ++d) {
                    Form64 f{a, b, c, d};
                    if (in_range(f)) seeds.push_back(f);
                }
    std::set<Form64> visited;
    std::vector<std::set<Form64>> comps;
    for (const Form64& s : seeds) {
        if (visited.count(s)) continue;
        std::set<Form64> comp{s};
        std::vector<Form64> stack{s};
        while (!stack.empty()) {
            Form64 g = stack.back();
            stack.pop_back();
            for (const Mat2& m : unimodular_window()) {
                Form64 h = subst64(m, g);
                if (std::llabs(h.a) > cap || std::llabs(h.b) > cap || std::llabs(h.c) > cap ||
                    std::llabs(h.d) > dcap)
                    continue;
                if (!in_range(h))
                    throw NumericalError("brute walk left the discriminant range");
                if (comp.insert(h).second) stack.push_back(h);
            }
        }
        for (const Form64& f : comp) visited.insert(f);
        comps.push_back(std::move(comp));
    }
    return comps;
}

inline bool check_partition(i64 limit, int sign, i64 box, i64 cap, std::string& err) {
    auto comps = brute_components(limit, sign, box, cap);
    auto lib = enumerate_classes(limit, sign);
    std::ostringstream where;
    where << "limit " << limit << " sign " << sign << ": ";
    if (lib.size() != comps.size()) {
        err = where.str() + "library " + std::to_string(lib.size()) + " classes, oracle " +
              std::to_string(comps.size());
        return false;
    }
    std::vector<int> hits(comps.size(), 0);
    for (const Form64& rep : lib) {
        int found = -1;
        for (size_t i = 0; i < comps.size(); ++i)
            if (comps[i].count(rep)) {
                found = int(i);
                break;
            }
        if (found < 0) {
            err = where.str() + "representative not reached by the brute walk";
            return false;
        }
        ++hits[size_t(found)];
    }
    for (int h : hits)
        if (h != 1) {
            err = where.str() + "component hit " + std::to_string(h) + " times";
            return false;
        }
    return true;
}

// ---- Hunter-box monic enumeration with its own maximality descent

inline i64 monic_disc(i64 a1, i64 a2, i64 a3) {
    return 18 * a1 * a2 * a3 - 4 * a1 * a1 * a1 * a3 + a1 * a1 * a2 * a2 - 4 * a2 * a2 * a2 -
           27 * a3 * a3;
}

inline bool monic_irreducible(i64 a1, i64 a2, i64 a3) {
    if (a3 == 0) return false;
    i64 m = std::llabs(a3);
    for (i64 r = 1; r * r <= m; ++r) {
        if (m % r != 0) continue;
        for (i64 q : {r, m / r})
            for (i64 s : {q, -q})
                if (((s + a1) * s + a2) * s + a3 == 0) return false;
    }
    return true;
}

inline bool is_square_i64(i64 v) {
    if (v < 0) return false;
    i64 r = i64(std::sqrt(double(v)));
    for (i64 t = std::max<i64>(0, r - 2); t <= r + 2; ++t)
        if (t * t == v) return true;
    return false;
}

inline i64 form_content(const Form64& f) {
    i64 g = std::gcd(std::gcd(std::llabs(f.a), std::llabs(f.b)),
                     std::gcd(std::llabs(f.c), std::llabs(f.d)));
    return g == 0 ? 1 : g;
}

// Removes the full index from the order of a form: at every prime p with
// p^2 | disc, a repeated projective root moved to (0:1) flags a p-enlargement
// when p | c' and p^2 | d'; the enlarged form is (pa', b', c'/p, d'/p^2) with
// discriminant divided by p^2.  Content p means the ring is Z + p * (ring of
// f/p), an index-p^2 step.  Returns the discriminant of the maximal order.
inline i64 descend_to_field_disc(Form64 f) {
    i64 D = form_disc(f);
    if (D == 0) throw ConfigError("descend: zero discriminant");
    bool changed = true;
    while (changed) {
        changed = false;
        for (i64 p = 2; p * p <= std::llabs(D) && !changed; ++p) {
            if (std::llabs(D) % (p * p) != 0) continue;
            if (form_content(f) % p == 0) {
                f = {f.a / p, f.b / p, f.c / p, f.d / p};
                D = form_disc(f);
                changed = true;
                break;
            }
            // affine roots (r:1), then the root at infinity via a swap
            for (i64 r = 0; r <= p && !changed; ++r) {
                Form64 t = r < p ? subst64(Mat2{1, 0, r, 1}, f) : subst64(Mat2{0, 1, 1, 0}, f);
                i64 dm = ((t.d % p) + p) % p, cm = ((t.c % p) + p) % p;
                if (dm != 0 || cm != 0) continue;           // not a repeated root there
                if (((t.d % (p * p)) + p * p) % (p * p) != 0) continue;
                f = {p * t.a, t.b, t.c / p, t.d / (p * p)};
                D = form_disc(f);
                changed = true;
            }
        }
    }
    return D;
}

inline std::array<std::complex<double>, 3> monic_cubic_roots(i64 a1, i64 a2, i64 a3) {
    using C = std::complex<double>;
    const C b1{double(a1)}, b2{double(a2)}, b3{double(a3)};
    C d0 = b1 * b1 - 3.0 * b2;
    C d1 = 2.0 * b1 * b1 * b1 - 9.0 * b1 * b2 + 27.0 * b3;
    C inner = std::sqrt(d1 * d1 - 4.0 * d0 * d0 * d0);
    C big = (d1 + inner) / 2.0;
    if (std::abs(big) < 1e-30) big = (d1 - inner) / 2.0;
    C croot = std::pow(big, 1.0 / 3.0);
    const C zeta(-0.5, std::sqrt(3.0) / 2.0);
    std::array<C, 3> roots;
    for (int k = 0; k < 3; ++k) {
        C ck = croot;
        for (int j = 0; j < k; ++j) ck *= zeta;
        C x = std::abs(ck) < 1e-30 ? -b1 / 3.0 : -(b1 + ck + d0 / ck) / 3.0;
        for (int it = 0; it < 6; ++it) { // Newton polish
            C fx = ((x + b1) * x + b2) * x + b3;
            C dfx = (3.0 * x + 2.0 * b1) * x + b2;
            if (std::abs(dfx) < 1e-30) break;
            x -= fx / dfx;
        }
        roots[size_t(k)] = x;
    }
    return roots;
}

inline bool round_rational(double x, i64 qmax, BigRat& out) {
    double p0 = 0, q0 = 1, p1 = 1, q1 = 0, v = x;
    for (int it = 0; it < 64; ++it) {
        double fl = std::floor(v);
        double p2 = fl * p1 + p0, q2 = fl * q1 + q0;
        if (q2 > double(qmax)) break;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        double rem = v - fl;
        if (std::fabs(q1 * x - p1) < 1e-9 * std::max(1.0, std::fabs(x)) * q1) break;
        if (rem < 1e-15) break;
        v = 1.0 / rem;
    }
    if (q1 <= 0) return false;
    if (std::fabs(x - p1 / q1) > 1e-7 * std::max(1.0, std::fabs(x))) return false;
    out = BigRat(BigInt(i64(p1)), BigInt(i64(q1)));
    return true;
}

using RVec3 = std::array<BigRat, 3>;

inline RVec3 mulmod_monic(const std::array<i64, 3>& f, const RVec3& u, const RVec3& v) {
    std::array<BigRat, 5> w{};
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 3; ++j) w[i + j] += u[i] * v[j];
    for (size_t k = 4; k >= 3; --k) { // theta^k = -a1 theta^{k-1} - a2 theta^{k-2} - a3 theta^{k-3}
        BigRat lead = w[k];
        if (lead == 0) continue;
        w[k] = 0;
        w[k - 1] -= lead * f[0];
        w[k - 2] -= lead * f[1];
        w[k - 3] -= lead * f[2];
    }
    return {w[0], w[1], w[2]};
}

// Exact isomorphism test for the fields of two monic irreducible cubics: a
// numeric Vandermonde solve proposes the image of the second generator as a
// rational polynomial in the first, then the candidate is verified in exact
// arithmetic.  No false positives are possible; a false negative would need
// the rounding to miss, which the caller treats as a count mismatch.
inline bool monic_cubics_isomorphic(const std::array<i64, 3>& f, const std::array<i64, 3>& g) {
    if (f == g) return true;
    auto th = monic_cubic_roots(f[0], f[1], f[2]);
    auto mu = monic_cubic_roots(g[0], g[1], g[2]);
    int perm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (auto& pr : perm) {
        using C = std::complex<double>;
        C m[3][4];
        for (int i = 0; i < 3; ++i) {
            m[i][0] = 1.0;
            m[i][1] = th[size_t(i)];
            m[i][2] = th[size_t(i)] * th[size_t(i)];
            m[i][3] = mu[size_t(pr[i])];
        }
        bool singular = false;
        for (int col = 0; col < 3 && !singular; ++col) { // Gaussian elimination
            int piv = col;
            for (int rr = col + 1; rr < 3; ++rr)
                if (std::abs(m[rr][col]) > std::abs(m[piv][col])) piv = rr;
            if (std::abs(m[piv][col]) < 1e-12) {
                singular = true;
                break;
            }
            std::swap_ranges(m[col], m[col] + 4, m[piv]);
            for (int rr = 0; rr < 3; ++rr) {
                if (rr == col) continue;
                C factor = m[rr][col] / m[col][col];
                for (int cc = col; cc < 4; ++cc) m[rr][cc] -= factor * m[col][cc];
            }
        }
        if (singular) continue;
        RVec3 h;
        bool ok = true;
        for (int i = 0; i < 3 && ok; ++i) {
            C hv = m[i][3] / m[i][i];
            if (std::fabs(hv.imag()) > 1e-6 * std::max(1.0, std::abs(hv))) ok = false;
            else ok = round_rational(hv.real(), 1000000, h[size_t(i)]);
        }
        if (!ok) continue;
        // exact check: g(h(theta)) = 0 in Q[theta]/(f)
        RVec3 phi = h;
        RVec3 phi2 = mulmod_monic(f, phi, phi);
        RVec3 phi3 = mulmod_monic(f, phi2, phi);
        RVec3 val;
        for (size_t i = 0; i < 3; ++i)
            val[i] = phi3[i] + BigRat(g[0]) * phi2[i] + BigRat(g[1]) * phi[i];
        val[0] += BigRat(g[2]);
        if (val[0] == 0 && val[1] == 0 && val[2] == 0) return true;
    }
    return false;
}

// Every cubic field with |disc| <= X has a generator with trace in {-1,0,1}
// and T2 below the Hunter bound; the coefficient boxes follow from the power
// sums.  Returns the per-sign multisets of field discriminants.
inline std::map<int, std::vector<i64>> hunter_field_discs(i64 X) {
    const double B = 1.0 / 3.0 + (2.0 / std::sqrt(3.0)) * std::sqrt(double(X) / 3.0);
    std::map<i64, std::vector<std::array<i64, 3>>> groups; // field disc -> generators kept
    std::map<int, std::vector<i64>> out;
    for (i64 a1 = -1; a1 <= 1; ++a1) {
        i64 a2_lo = i64(std::ceil((double(a1 * a1) - B) / 2.0));
        i64 a2_hi = i64(std::floor((double(a1 * a1) + B) / 2.0));
        i64 a3_max = i64(std::floor(std::pow(B / 3.0, 1.5)));
        for (i64 a2 = a2_lo; a2 <= a2_hi; ++a2)
            for (i64 a3 = -a3_max; a3 <= a3_max; ++a3) {
                i64 D = monic_disc(a1, a2, a3);
                if (D == 0) continue;
                if (!monic_irreducible(a1, a2, a3)) continue;
                if (D > 0 && is_square_i64(D)) continue; // cyclic cubic, not S3
                i64 dk = descend_to_field_disc(Form64{1, a1, a2, a3});
                if (std::llabs(dk) > X) continue;
                auto& reps = groups[dk];
                bool known = false;
                for (const auto& r : reps)
                    if (monic_cubics_isomorphic(r, {a1, a2, a3})) {
                        known = true;
                        break;
                    }
                if (!known) reps.push_back({a1, a2, a3});
            }
    }
    for (const auto& [dk, reps] : groups)
        for (size_t i = 0; i < reps.size(); ++i) out[dk > 0 ? +1 : -1].push_back(dk);
    for (auto& [sign, v] : out) std::sort(v.begin(), v.end());
    return out;
}

} // namespace verify_detail

// ---------------------------------------------------------------------------
// C1: quadratic closed form against the geometric pipeline

inline CriterionResult criterion_c1(const AcceptanceScale& s) {
    CriterionResult r{"C1 quadratic closed form", false, ""};
    const double params[3] = {0.0, 2.0, -3.0};
    auto sf = verify_detail::squarefree_flags(s.c1_D);
    i64 tested = 0;
    double worst = 0.0;
    i64 worst_d = 0;
    for (i64 d = 5; d <= s.c1_D; d += 4) {
        if (!sf[size_t(d)]) continue;
        EmbeddedLattice lat = quadratic_lattice(quadratic_field(d));
        for (double p : params) {
            double closed = quadratic_aligned_closed_form(d, p);
            DeformationParams par;
            par.form = FormMode::trace;
            par.u = {1.0, p};
            ConsistencyWitness w = consistency_witness(lat, par);
            double dev = int_dist(closed - w.torus_aligned[0]);
            dev = std::max(dev, w.grid_residual);
            if (dev > worst) {
                worst = dev;
                worst_d = d;
            }
            ++tested;
        }
    }
    std::ostringstream o;
    o << tested << " checks over squarefree D = 1 mod 4 up to " << s.c1_D
      << ", worst deviation " << verify_detail::fmtsci(worst) << " at D = " << worst_d;
    r.detail = o.str();
    r.pass = tested > 0 && worst <= s.c1_tol;
    return r;
}

// ---------------------------------------------------------------------------
// C2: quadratic two-atom law with a sieve counting oracle

inline CriterionResult criterion_c2(const AcceptanceScale& s) {
    CriterionResult r{"C2 quadratic two-atom law", false, ""};
    // oracle first: which discriminants carry each atom, by counting alone
    auto sf = verify_detail::squarefree_flags(s.c2_T);
    i64 oracle_half = 0, oracle_zero = 0;
    for (i64 m = 2; m <= s.c2_T; ++m)
        if (sf[size_t(m)] && (m % 4 == 1 || m % 4 == 3)) ++oracle_half;
    for (i64 k = 1; 4 * k <= s.c2_T; ++k) {
        if (!sf[size_t(k)]) continue;
        if (k % 4 == 2) oracle_zero += 2; // both sqrt(k) and sqrt(-k)
        else if (k % 4 == 3 || (k % 4 == 1 && k >= 1)) ++oracle_zero;
    }

    i64 at_zero = 0, at_half = 0, outliers = 0;
    double worst_atom_dev = 0.0;
    std::string outlier_note;
    for (int sign : {+1, -1}) {
        for_each_quadratic_field(s.c2_T, sign, [&](const QuadraticField& q) {
            EmbeddedLattice lat = quadratic_lattice(q);
            DeformationParams par;
            par.form = FormMode::trace;
            par.u = v0_normal(lat, par.form);
            GridPoint gp = grid_of(deform_to_Y1(lat, par));
            double x = gp.torus_canonical[0];
            double d0 = int_dist(x), dh = int_dist(x - 0.5);
            double dev = std::min(d0, dh);
            worst_atom_dev = std::max(worst_atom_dev, dev);
            if (dev > s.c2_atom_tol) {
                ++outliers;
                if (outlier_note.empty())
                    outlier_note = " first outlier d = " + std::to_string(q.d) + " at x = " + fmt_double(x);
            } else if (d0 <= dh)
                ++at_zero;
            else
                ++at_half;
        });
    }
    i64 total = at_zero + at_half + outliers;
    double mass = total > 0 ? double(at_half) / double(total) : 0.0;
    double oracle_mass = double(oracle_half) / double(oracle_half + oracle_zero);
    std::ostringstream o;
    o << total << " fields with |disc| <= " << s.c2_T << ": " << outliers << " outliers, mass at 1/2 = "
      << mass << " vs sieve oracle " << oracle_mass << " (counts " << at_half << "/" << oracle_half
      << "), worst atom deviation " << verify_detail::fmtsci(worst_atom_dev) << outlier_note;
    r.detail = o.str();
    r.pass = outliers == 0 && total == oracle_half + oracle_zero &&
             std::fabs(mass - oracle_mass) <= s.c2_mass_tol;
    return r;
}

// ---------------------------------------------------------------------------
// C3..C6 share one enumeration pass per signature

struct CubicBatchResults {
    CriterionResult c3{"C3 cubic torsion in {1,3}", false, ""};
    CriterionResult c4{"C4 cubic Weyl sums at E = (1,2,3)", false, ""};
    CriterionResult c5{"C5 shape recovery", false, ""};
    CriterionResult c6{"C6 structural identities", false, ""};
};

namespace verify_detail {

struct SignStream {
    // C3
    i64 c3_fields = 0, c3_grids = 0, c3_t1 = 0, c3_t3 = 0, c3_bad_order = 0, c3_unclassified = 0;
    std::vector<std::string> c3_quarantine;
    // C4
    WeylAccumulator acc0{2, 3}, acc1{2, 3};
    // C5
    std::vector<ShapePoint> shapes;
    std::vector<double> joint_torus;
    // C6
    i64 c6_fields = 0;
    double c6_worst = 0.0;
    std::string c6_worst_what;
    bool c6_signs_uniform = true;
    double c6_diag_dev = 0.0;
    i64 c6_route_errors = 0;

    void track6(double v, const char* what, i64 disc) {
        if (v > c6_worst) {
            c6_worst = v;
            c6_worst_what = std::string(what) + " at disc " + std::to_string(disc);
        }
    }
};

inline void stream_sign(const AcceptanceScale& s, int sign, SignStream& st) {
    const i64 T = std::max({s.c3_T, s.c4_T, s.c5_T, s.c6_X});
    const Tolerances tol;
    for (const Form64& g : enumerate_classes(T, sign)) {
        if (!is_irreducible_s3(g) || !is_maximal(g)) continue;
        const i64 disc = form_disc(g);
        const i64 adisc = std::llabs(disc);
        CubicRing ring = cubic_ring_from_form(g);
        EmbeddedLattice lat = cubic_lattice(ring);

        if (adisc <= std::max(s.c4_T, s.c5_T)) {
            DeformationParams par;
            par.form = FormMode::trace;
            par.u = {1.0, 2.0, 3.0};
            try {
                GridPoint gp = grid_of(deform_to_Y1(lat, par, tol), tol);
                if (adisc <= s.c4_T) {
                    st.acc1.add(gp.torus_canonical);
                    if (adisc <= s.c4_T0) st.acc0.add(gp.torus_canonical);
                }
                if (adisc <= s.c5_T) {
                    st.shapes.push_back(shape_of(lat, FormMode::trace, tol));
                    st.joint_torus.push_back(gp.torus_canonical[0]);
                }
            } catch (const NumericalError&) {
                ++st.c6_route_errors;
            }
        }

        if (adisc <= s.c3_T) {
            ++st.c3_fields;
            for (int o = 0; o < num_orderings(lat.sig); ++o) {
                EmbeddedLattice l2 = o == 0 ? lat : reorder_embedding(lat, o);
                DeformationParams par;
                par.form = FormMode::trace;
                par.u = v0_normal(l2, par.form);
                try {
                    GridPoint gp = grid_of(deform_to_Y1(l2, par, tol), tol);
                    ++st.c3_grids;
                    if (gp.torsion == 1) ++st.c3_t1;
                    else if (gp.torsion == 3) ++st.c3_t3;
                    else if (gp.torsion == 0) {
                        ++st.c3_unclassified;
                        if (st.c3_quarantine.size() < 8)
                            st.c3_quarantine.push_back("disc " + std::to_string(disc) + " ordering " +
                                                       std::to_string(o) + " unclassified");
                    } else {
                        ++st.c3_bad_order;
                        if (st.c3_quarantine.size() < 8)
                            st.c3_quarantine.push_back("disc " + std::to_string(disc) + " ordering " +
                                                       std::to_string(o) + " torsion " +
                                                       std::to_string(gp.torsion));
                    }
                } catch (const NumericalError& e) {
                    ++st.c3_unclassified;
                    if (st.c3_quarantine.size() < 8)
                        st.c3_quarantine.push_back("disc " + std::to_string(disc) + " ordering " +
                                                   std::to_string(o) + ": " + e.what());
                }
            }
        }

        if (adisc <= s.c6_X) {
            ++st.c6_fields;
            // multiplication table, checked on the embedded columns
            MultTable3 mt = mult_table(ring);
            const int n = lat.sig.n();
            Vec cols[3];
            double colmax = 1.0;
            for (int j = 0; j < 3; ++j) {
                cols[j] = lat.basis.column(j);
                for (double v : cols[j]) colmax = std::max(colmax, std::fabs(v));
            }
            auto check_product = [&](const Vec& x, const Vec& y, const std::array<i64, 3>& combo) {
                Vec lhs = emb_mul(lat.sig, x, y);
                double dev = 0.0;
                for (int rrow = 0; rrow < n; ++rrow) {
                    double rhs = 0.0;
                    for (int j = 0; j < 3; ++j) rhs += double(combo[size_t(j)]) * cols[j][size_t(rrow)];
                    dev = std::max(dev, std::fabs(lhs[size_t(rrow)] - rhs));
                }
                st.track6(dev / (colmax * colmax), "mult table", disc);
            };
            check_product(cols[1], cols[1], mt.x1x1);
            check_product(cols[1], cols[2], mt.x1x2);
            check_product(cols[2], cols[2], mt.x2x2);

            RealMatrix first_part;
            const Vec hyperplanes[2] = {{1.0, 2.0, 3.0}, {1.0, 0.0, 2.0}};
            for (int e = 0; e < 3; ++e) {
                DeformationParams par;
                par.form = FormMode::trace;
                par.u = e < 2 ? hyperplanes[size_t(e)] : v0_normal(lat, par.form);
                try {
                    ConsistencyWitness w = consistency_witness(lat, par, tol);
                    PiPiReport pp = pi1_pi2_consistency(lat, par, tol);
                    st.track6(w.pairing_residual, "dual pairing", disc);
                    st.track6(w.one_orth_residual, "beta orthogonality", disc);
                    st.track6(w.translation_residual, "translation identity", disc);
                    st.track6(w.grid_residual, "grid translation", disc);
                    st.track6(w.beta_lattice_residual, "beta integrality", disc);
                    st.track6(pp.residual, "shape route consistency", disc);
                    st.track6(std::fabs(covolume_of_columns(w.grid.lat_basis) - 1.0),
                              "lattice part covolume", disc);
                    if (std::llabs(w.beta_det) != 1)
                        st.track6(1.0, "beta determinant not a unit", disc);
                    for (double dg : w.pairing_diag) {
                        st.c6_diag_dev = std::max(st.c6_diag_dev, std::fabs(dg + 1.0));
                        if (dg > 0) st.c6_signs_uniform = false;
                    }
                    if (first_part.rows == 0) {
                        first_part = w.grid.lat_basis;
                    } else {
                        // same lattice regardless of E: integer coordinates, unit determinant
                        IntMatrix m(2, 2);
                        double dev = 0.0;
                        for (int jcol = 0; jcol < 2; ++jcol) {
                            Vec coords =
                                span_coordinates(first_part, w.grid.lat_basis.column(jcol), tol.cond_budget);
                            for (int irow = 0; irow < 2; ++irow) {
                                dev = std::max(dev, int_dist(coords[size_t(irow)]));
                                m.at(irow, jcol) =
                                    checked_i64(std::round(coords[size_t(irow)]), "lattice part change");
                            }
                        }
                        st.track6(dev, "lattice part depends on E", disc);
                        BigInt det = int_det(m);
                        if (det != 1 && det != -1) st.track6(1.0, "lattice part index across E", disc);
                    }
                } catch (const NumericalError&) {
                    ++st.c6_route_errors;
                }
            }
        }
    }
}

} // namespace verify_detail

inline CubicBatchResults run_cubic_batch(const AcceptanceScale& s, std::ostream& log) {
    verify_detail::SignStream pos, neg;
    verify_detail::stream_sign(s, +1, pos);
    verify_detail::stream_sign(s, -1, neg);

    CubicBatchResults out;

    { // C3
        std::ostringstream o;
        bool pass = true;
        for (auto* st : {&pos, &neg}) {
            bool totally_real = st == &pos;
            i64 classified = st->c3_t1 + st->c3_t3;
            double frac = st->c3_grids > 0 ? double(classified) / double(st->c3_grids) : 0.0;
            double need = totally_real ? 1.0 : s.c3_min_complex_classified;
            if (st->c3_bad_order > 0 || st->c3_grids == 0 || frac < need) pass = false;
            o << (totally_real ? "(3,0): " : "  (1,1): ") << st->c3_fields << " fields, " << st->c3_grids
              << " grids, torsion 1/3 = " << st->c3_t1 << "/" << st->c3_t3 << ", other "
              << st->c3_bad_order << ", unclassified " << st->c3_unclassified;
        }
        for (auto* st : {&pos, &neg})
            for (const auto& q : st->c3_quarantine) log << "    quarantined: " << q << "\n";
        out.c3.detail = o.str() + " (|disc| <= " + std::to_string(s.c3_T) + ")";
        out.c3.pass = pass;
    }

    { // C4
        std::ostringstream o;
        bool pass = true;
        for (auto* st : {&pos, &neg}) {
            if (st->acc1.n == 0 || st->acc0.n == 0) {
                pass = false;
                continue;
            }
            WeylSumReport w0 = st->acc0.report(), w1 = st->acc1.report();
            int dec = 0;
            for (const auto& k : representative_frequencies(2))
                if (w1.magnitude_of(k) < w0.magnitude_of(k)) ++dec;
            double mx = w1.max_magnitude();
            if (mx >= s.c4_max_sk || dec < s.c4_min_decreasing) pass = false;
            o << (st == &pos ? "(3,0): " : "  (1,1): ") << "max |S_k| " << verify_detail::fmtsci(mx)
              << " over " << w1.n << " grids, " << dec << "/8 representatives decreasing from T = "
              << s.c4_T0;
        }
        if (pos.c6_route_errors + neg.c6_route_errors > 0) {
            o << "  route errors " << (pos.c6_route_errors + neg.c6_route_errors);
            pass = false;
        }
        out.c4.detail = o.str();
        out.c4.pass = pass;
    }

    { // C5
        std::ostringstream o;
        bool pass = true;
        for (auto* st : {&pos, &neg}) {
            if (st->shapes.empty()) {
                pass = false;
                continue;
            }
            try {
                ShapeHistogram h = shape_histogram(st->shapes, 24, 6, s.c5_y_cap);
                Chi2Result c = shape_chi2(h, s.c5_min_expected);
                int groups = c.dof + 1;
                // joint independence: 4 quantile strips of y x 4 torus bins
                std::vector<double> ys(st->shapes.size());
                for (size_t i = 0; i < st->shapes.size(); ++i) ys[i] = st->shapes[i].y;
                auto table = quantile_joint_table(ys, st->joint_torus, 4, 4);
                Chi2Result joint = joint_independence_chi2(table, s.c5_joint_min_expected);
                if (c.tv >= s.c5_tv || groups < s.c5_min_groups || joint.p_value < s.c5_alpha)
                    pass = false;
                o << (st == &pos ? "(3,0): " : "  (1,1): ") << "TV " << verify_detail::fmtsci(c.tv)
                  << " on " << groups << " groups (" << st->shapes.size() << " shapes), joint p = "
                  << verify_detail::fmtsci(joint.p_value);
            } catch (const ConfigError& e) {
                pass = false;
                o << (st == &pos ? "(3,0): " : "  (1,1): ") << "undersized sample: " << e.what();
            }
        }
        out.c5.detail = o.str();
        out.c5.pass = pass;
    }

    { // C6
        double worst = std::max(pos.c6_worst, neg.c6_worst);
        double diag = std::max(pos.c6_diag_dev, neg.c6_diag_dev);
        bool uniform = pos.c6_signs_uniform && neg.c6_signs_uniform;
        i64 fields = pos.c6_fields + neg.c6_fields;
        i64 errors = pos.c6_route_errors + neg.c6_route_errors;
        std::ostringstream o;
        o << fields << " fields x 3 hyperplanes (|disc| <= " << s.c6_X << "), worst residual "
          << verify_detail::fmtsci(worst) << " (" << (pos.c6_worst >= neg.c6_worst ? pos.c6_worst_what
                                                                                   : neg.c6_worst_what)
          << "); diagonal pairings uniformly -1 (max |diag + 1| = " << verify_detail::fmtsci(diag)
          << ")";
        if (errors > 0) o << "; route errors " << errors;
        out.c6.detail = o.str();
        out.c6.pass = fields > 0 && worst <= s.c6_tol && uniform && diag <= s.c6_tol && errors == 0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// C7: enumeration against the brute partition and the Hunter-box oracle

inline CriterionResult criterion_c7(const AcceptanceScale& s) {
    CriterionResult r{"C7 enumeration correctness", false, ""};
    std::string err;
    for (int sign : {+1, -1})
        if (!verify_detail::check_partition(s.c7_partition_X, sign, s.c7_partition_box,
                                            s.c7_partition_cap, err)) {
            r.detail = "class partition mismatch: " + err;
            return r;
        }

    auto oracle = verify_detail::hunter_field_discs(s.c7_hunter_X);
    std::ostringstream o;
    o << "class partition exact at X = " << s.c7_partition_X << "; fields at X = " << s.c7_hunter_X
      << ":";
    bool pass = true;
    for (int sign : {+1, -1}) {
        std::vector<i64> lib;
        for (const Form64& g : enumerate_classes(s.c7_hunter_X, sign))
            if (is_irreducible_s3(g) && is_maximal(g)) lib.push_back(form_disc(g));
        std::sort(lib.begin(), lib.end());
        const auto& ora = oracle[sign];
        o << (sign > 0 ? " +" : " -") << lib.size() << " vs oracle " << ora.size();
        if (lib != ora) {
            pass = false;
            size_t i = 0;
            while (i < std::min(lib.size(), ora.size()) && lib[i] == ora[i]) ++i;
            o << " (first difference at index " << i << ": library "
              << (i < lib.size() ? std::to_string(lib[i]) : std::string("none")) << ", oracle "
              << (i < ora.size() ? std::to_string(ora[i]) : std::string("none")) << ")";
        }
    }
    r.detail = o.str();
    r.pass = pass;
    return r;
}

// ---------------------------------------------------------------------------
// C8: exact Weyl identities on m x m grids

inline CriterionResult criterion_c8(const AcceptanceScale&) {
    CriterionResult r{"C8 Weyl unit identities", false, ""};
    double worst = 0.0;
    for (int m : {5, 7}) { // no frequency with |k|_inf <= 3 is divisible by m
        std::vector<Vec> pts;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) pts.push_back({double(i) / m, double(j) / m});
        WeylSumReport w = weyl_sums(pts, 3);
        worst = std::max(worst, w.max_magnitude());
    }
    double worst2 = 0.0;
    {
        std::vector<Vec> pts;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) pts.push_back({double(i) / 2, double(j) / 2});
        WeylSumReport w = weyl_sums(pts, 3);
        for (size_t i = 0; i < w.frequencies.size(); ++i) {
            bool divisible = w.frequencies[i][0] % 2 == 0 && w.frequencies[i][1] % 2 == 0;
            worst2 = std::max(worst2, std::fabs(w.magnitudes[i] - (divisible ? 1.0 : 0.0)));
        }
    }
    std::ostringstream o;
    o << "5x5 and 7x7 grids: max |S_k| = " << verify_detail::fmtsci(worst)
      << "; 2x2 grid deviation from 0/1 pattern " << verify_detail::fmtsci(worst2);
    r.detail = o.str();
    r.pass = worst < 1e-12 && worst2 < 1e-12;
    return r;
}

// ---------------------------------------------------------------------------

inline std::vector<CriterionResult> run_acceptance_suite(const AcceptanceScale& s, std::ostream& out) {
    out << "acceptance suite, " << s.name << " scale\n";
    std::vector<CriterionResult> results;
    auto emit = [&](const CriterionResult& r) {
        out << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        out.flush();
        results.push_back(r);
    };
    emit(criterion_c1(s));
    emit(criterion_c2(s));
    {
        std::ostringstream quarantine_log;
        CubicBatchResults batch = run_cubic_batch(s, quarantine_log);
        emit(batch.c3);
        if (!quarantine_log.str().empty()) out << quarantine_log.str();
        emit(batch.c4);
        emit(batch.c5);
        emit(batch.c6);
    }
    emit(criterion_c7(s));
    emit(criterion_c8(s));
    int failures = 0;
    for (const auto& r : results)
        if (!r.pass) ++failures;
    out << (failures == 0 ? "all criteria passed\n"
                          : std::to_string(failures) + " criteria failed\n");
    return results;
}

} // namespace latgrid
