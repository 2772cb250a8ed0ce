#pragma once

// Number field constructions feeding the lattice pipeline: quadratic fields
// from squarefree d, cubic rings from binary cubic forms through the standard
// multiplication table, and externally supplied fields of degree up to 5 read
// from JSON lines.  Every constructor emits an EmbeddedLattice whose first
// basis vector is the unit.
//
// Embedding slot conventions: real embeddings are ordered by ascending root,
// complex pairs by (Re, Im) of the upper root.  The quadratic constructor is
// the one exception: its first slot sends sqrt(d) to the positive square
// root, which is the normalization the closed-form translation coordinate
// refers to.  Alternative slot orders are explicit reorderings.

#include "common.hpp"
#include "cubic_enumerator.hpp"
#include "exact_linalg.hpp"
#include "lattice_grid.hpp"
#include "roots.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <istream>
#include <string>
#include <vector>

namespace latgrid {

inline bool is_squarefree(i64 d) {
    if (d == 0) return false;
    i64 ad = std::llabs(d);
    for (i64 p = 2; p * p <= ad; ++p)
        if (ad % (p * p) == 0) return false;
    return true;
}

// d squarefree and not 0 or 1; d = 1 mod 4 keeps d, otherwise 4d.
inline i64 fundamental_disc(i64 d) {
    i64 m = ((d % 4) + 4) % 4;
    return m == 1 ? d : 4 * d;
}

struct QuadraticField {
    i64 d = 0;    // squarefree generator
    i64 disc = 0; // fundamental discriminant
};

inline QuadraticField quadratic_field(i64 d) {
    if (d == 0 || d == 1) throw ConfigError("quadratic_field: d must not be 0 or 1");
    if (!is_squarefree(d)) throw ConfigError("quadratic_field: d must be squarefree");
    return {d, fundamental_disc(d)};
}

inline EmbeddedLattice quadratic_lattice(const QuadraticField& q) {
    const double sd = std::sqrt(double(std::llabs(q.d)));
    const bool one_mod_four = ((q.d % 4) + 4) % 4 == 1;
    EmbeddedLattice lat;
    lat.one_coords = {1, 0};
    char buf[64];
    std::snprintf(buf, sizeof buf, "quadratic d=%lld", (long long)q.d);
    lat.provenance = buf;
    if (q.d > 0) {
        lat.sig = {2, 0};
        double w = one_mod_four ? (1.0 + sd) / 2.0 : sd;
        double wc = one_mod_four ? (1.0 - sd) / 2.0 : -sd;
        lat.basis = RealMatrix::from_columns({{1.0, 1.0}, {w, wc}});
    } else {
        lat.sig = {0, 1};
        double re = one_mod_four ? 0.5 : 0.0;
        double im = one_mod_four ? sd / 2.0 : sd;
        lat.basis = RealMatrix::from_columns({{1.0, 0.0}, {re, im}});
    }
    return lat;
}

// Translation coordinate of the grid of a real quadratic ring deformed along
// E = (1, p)^perp, reduced mod 1.  Matches the aligned chart of the witness.
inline double quadratic_aligned_closed_form(i64 d, double p) {
    QuadraticField q = quadratic_field(d);
    if (q.d < 0) throw ConfigError("closed form needs a real quadratic field");
    if (std::fabs(1.0 + p) < 1e-12) throw ConfigError("closed form: u = (1, -1) is inadmissible");
    const double sd = std::sqrt(double(q.d));
    const bool one_mod_four = ((q.d % 4) + 4) % 4 == 1;
    double v = one_mod_four ? (1.0 + p + (1.0 - p) * sd) / (2.0 * (1.0 + p))
                            : (1.0 - p) * sd / (1.0 + p);
    return mod1(v);
}

// Fields in ascending |disc| order with |disc| <= max_abs_disc, one sign at a
// time.  A block-free squarefree sieve keeps this linear in the bound.
template <class Fn>
void for_each_quadratic_field(i64 max_abs_disc, int sign, Fn&& fn) {
    if (max_abs_disc < 3) return;
    if (sign == 0) throw ConfigError("for_each_quadratic_field: sign must be nonzero");
    const i64 L = max_abs_disc;
    std::vector<char> sf(size_t(L) + 1, 1);
    sf[0] = 0;
    for (i64 p = 2; p * p <= L; ++p) {
        if (!sf[size_t(p)]) continue; // composite squarefull p: its square multiples are already marked
        for (i64 m = p * p; m <= L; m += p * p) sf[size_t(m)] = 0;
    }
    for (i64 m = 3; m <= L; ++m) {
        if (sign > 0) {
            if (m % 4 == 1 && sf[size_t(m)])
                fn(QuadraticField{m, m});
            else if (m % 4 == 0) {
                i64 k = m / 4;
                if ((k % 4 == 2 || k % 4 == 3) && sf[size_t(k)]) fn(QuadraticField{k, m});
            }
        } else {
            if (m % 4 == 3 && sf[size_t(m)])
                fn(QuadraticField{-m, -m});
            else if (m % 4 == 0) {
                i64 k = m / 4;
                if ((k % 4 == 1 || k % 4 == 2) && sf[size_t(k)]) fn(QuadraticField{-k, -m});
            }
        }
    }
}

struct CubicRing {
    Form64 form; // leading coefficient nonzero
    i64 disc = 0;
};

// The ring of a form does not depend on the representative, so forms with a
// vanishing leading coefficient are first moved inside their class.
inline CubicRing cubic_ring_from_form(Form64 f) {
    i64 disc = form_disc(f);
    if (disc == 0) throw ConfigError("cubic_ring_from_form: zero discriminant");
    if (f.a == 0) {
        for (i64 k = 1; k <= 4 && f.a == 0; ++k) {
            Mat2 g{1, k, 0, 1};
            Form64 t = act(g, Form64{f.a, f.b, f.c, f.d});
            if (t.a != 0) f = t;
        }
        if (f.a == 0) throw ConfigError("cubic_ring_from_form: could not normalize");
    }
    return {f, disc};
}

// Products in the basis {1, x1, x2} with x1 = -a t, x2 = -(a t^2 + b t + c)
// for a root t of the dehomogenized form.
struct MultTable3 {
    std::array<i64, 3> x1x1, x1x2, x2x2;
};

inline MultTable3 mult_table(const CubicRing& r) {
    const i64 a = r.form.a, b = r.form.b, c = r.form.c, d = r.form.d;
    MultTable3 t;
    t.x1x1 = {-a * c, b, -a};
    t.x1x2 = {-a * d, 0, 0};
    t.x2x2 = {-b * d, d, -c};
    return t;
}

inline int num_orderings(const Signature& sig) {
    auto fact = [](int n) {
        int f = 1;
        for (int i = 2; i <= n; ++i) f *= i;
        return f;
    };
    return fact(sig.r) * fact(sig.s);
}

namespace detail {

inline std::vector<int> permutation_of_index(int idx, int n) {
    std::vector<int> avail(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) avail[size_t(i)] = i;
    std::vector<int> fact(size_t(n) + 1, 1);
    for (int i = 1; i <= n; ++i) fact[size_t(i)] = fact[size_t(i - 1)] * i;
    std::vector<int> perm;
    for (int i = 0; i < n; ++i) {
        int f = fact[size_t(n - 1 - i)];
        int q = idx / f;
        idx %= f;
        perm.push_back(avail[size_t(q)]);
        avail.erase(avail.begin() + q);
    }
    return perm;
}

} // namespace detail

// Output slot i reads input slot perm(i); real slots and complex pairs are
// permuted independently, ordering = (real index) + r! * (pair index).
inline EmbeddedLattice reorder_embedding(const EmbeddedLattice& lat, int ordering) {
    const int r = lat.sig.r, s = lat.sig.s;
    const int total = num_orderings(lat.sig);
    if (ordering < 0 || ordering >= total)
        throw ConfigError("reorder_embedding: ordering out of range");
    auto fact = [](int n) {
        int f = 1;
        for (int i = 2; i <= n; ++i) f *= i;
        return f;
    };
    std::vector<int> pr = detail::permutation_of_index(ordering % fact(r), r);
    std::vector<int> ps = detail::permutation_of_index(ordering / fact(r), s);
    EmbeddedLattice out = lat;
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < lat.basis.cols; ++j) out.basis.at(i, j) = lat.basis.at(pr[size_t(i)], j);
    for (int i = 0; i < s; ++i)
        for (int half = 0; half < 2; ++half)
            for (int j = 0; j < lat.basis.cols; ++j)
                out.basis.at(r + 2 * i + half, j) = lat.basis.at(r + 2 * ps[size_t(i)] + half, j);
    if (ordering != 0) out.provenance += " ord=" + std::to_string(ordering);
    return out;
}

inline EmbeddedLattice cubic_lattice(const CubicRing& ring, int ordering = 0) {
    const double a = double(ring.form.a), b = double(ring.form.b), c = double(ring.form.c),
                 d = double(ring.form.d);
    RootSplit roots = split_roots(poly_roots({d, c, b, a}));
    EmbeddedLattice lat;
    lat.one_coords = {1, 0, 0};
    if (ring.disc > 0) {
        if (roots.real.size() != 3) throw NumericalError("cubic_lattice: expected three real roots");
        lat.sig = {3, 0};
    } else {
        if (roots.real.size() != 1 || roots.upper.size() != 1)
            throw NumericalError("cubic_lattice: expected one real root and one pair");
        lat.sig = {1, 1};
    }
    lat.basis = RealMatrix(3, 3);
    auto x1 = [&](std::complex<double> t) { return -a * t; };
    auto x2 = [&](std::complex<double> t) { return -(a * t * t + b * t + c); };
    for (size_t i = 0; i < roots.real.size(); ++i) {
        std::complex<double> t(roots.real[i], 0.0);
        lat.basis.at(int(i), 0) = 1.0;
        lat.basis.at(int(i), 1) = x1(t).real();
        lat.basis.at(int(i), 2) = x2(t).real();
    }
    for (size_t i = 0; i < roots.upper.size(); ++i) {
        std::complex<double> t = roots.upper[i];
        int row = int(roots.real.size() + 2 * i);
        lat.basis.at(row, 0) = 1.0;
        lat.basis.at(row + 1, 0) = 0.0;
        lat.basis.at(row, 1) = x1(t).real();
        lat.basis.at(row + 1, 1) = x1(t).imag();
        lat.basis.at(row, 2) = x2(t).real();
        lat.basis.at(row + 1, 2) = x2(t).imag();
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "cubic form=(%lld,%lld,%lld,%lld)", (long long)ring.form.a,
                  (long long)ring.form.b, (long long)ring.form.c, (long long)ring.form.d);
    lat.provenance = buf;
    return ordering == 0 ? lat : reorder_embedding(lat, ordering);
}

struct ExternalField {
    int degree = 0;
    Signature sig{0, 0};
    i64 disc = 0;
    std::vector<i64> poly;                  // c0 .. cn, ascending
    std::vector<std::vector<BigRat>> basis; // rows: elements in powers of theta
    std::string label;
};

namespace detail {

// Exact solve of a small rational system; returns false when singular.
inline bool rational_solve(std::vector<std::vector<BigRat>> m, std::vector<BigRat> rhs,
                           std::vector<BigRat>& out) {
    const int n = int(m.size());
    for (int col = 0; col < n; ++col) {
        int piv = -1;
        for (int row = col; row < n; ++row)
            if (m[size_t(row)][size_t(col)] != 0) {
                piv = row;
                break;
            }
        if (piv < 0) return false;
        std::swap(m[size_t(col)], m[size_t(piv)]);
        std::swap(rhs[size_t(col)], rhs[size_t(piv)]);
        BigRat p = m[size_t(col)][size_t(col)];
        for (int row = 0; row < n; ++row) {
            if (row == col) continue;
            BigRat f = m[size_t(row)][size_t(col)] / p;
            if (f == 0) continue;
            for (int k = col; k < n; ++k) m[size_t(row)][size_t(k)] -= f * m[size_t(col)][size_t(k)];
            rhs[size_t(row)] -= f * rhs[size_t(col)];
        }
    }
    out.resize(size_t(n));
    for (int i = 0; i < n; ++i) out[size_t(i)] = rhs[size_t(i)] / m[size_t(i)][size_t(i)];
    return true;
}

inline BigRat parse_rational(const nlohmann::json& j, const char* what) {
    try {
        if (j.is_number_integer()) return BigRat(BigInt(j.get<long long>()));
        if (j.is_string()) return BigRat(j.get<std::string>());
    } catch (const std::exception&) {
    }
    throw IoError(std::string("ingest: bad rational in ") + what);
}

} // namespace detail

// One JSON object per line: degree, signature [r, s], disc, poly (integer
// coefficients, constant first), basis (rows of rationals in powers of the
// root).  Blank lines and lines starting with # are skipped.
namespace detail {

inline ExternalField parse_field_line(const nlohmann::json& j, const std::string& where) {
    for (const char* key : {"degree", "signature", "disc", "poly", "basis"})
        if (!j.contains(key)) throw IoError("ingest: " + where + ": missing key " + key);
    ExternalField f;
    f.degree = j["degree"].get<int>();
    if (f.degree < 2 || f.degree > 5)
        throw ConfigError("ingest: " + where + ": degree must be between 2 and 5");
    auto sig = j["signature"];
    if (!sig.is_array() || sig.size() != 2)
        throw IoError("ingest: " + where + ": signature must be [r, s]");
    f.sig = {sig[0].get<int>(), sig[1].get<int>()};
    if (f.sig.r < 0 || f.sig.s < 0 || f.sig.n() != f.degree)
        throw ConfigError("ingest: " + where + ": signature does not match degree");
    f.disc = j["disc"].get<i64>();
    if (f.disc == 0) throw ConfigError("ingest: " + where + ": zero discriminant");
    auto poly = j["poly"];
    if (!poly.is_array() || int(poly.size()) != f.degree + 1)
        throw IoError("ingest: " + where + ": poly needs degree+1 coefficients");
    for (const auto& v : poly) f.poly.push_back(v.get<i64>());
    if (f.poly.back() == 0)
        throw ConfigError("ingest: " + where + ": vanishing leading coefficient");
    auto basis = j["basis"];
    if (!basis.is_array() || int(basis.size()) != f.degree)
        throw IoError("ingest: " + where + ": basis needs degree rows");
    for (const auto& row : basis) {
        if (!row.is_array() || int(row.size()) != f.degree)
            throw IoError("ingest: " + where + ": basis rows need degree entries");
        std::vector<BigRat> r;
        for (const auto& v : row) r.push_back(parse_rational(v, where.c_str()));
        f.basis.push_back(std::move(r));
    }
    if (j.contains("label")) f.label = j["label"].get<std::string>();
    return f;
}

} // namespace detail

inline std::vector<ExternalField> ingest_external_fields(std::istream& in) {
    std::vector<ExternalField> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const std::string where = "line " + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw IoError("ingest: " + where + ": " + e.what());
        }
        try {
            out.push_back(detail::parse_field_line(j, where));
        } catch (const nlohmann::json::exception& e) {
            // wrong value types; ConfigError and IoError from the explicit checks pass through
            throw IoError("ingest: " + where + ": " + e.what());
        }
    }
    return out;
}

inline EmbeddedLattice external_lattice(const ExternalField& f, int ordering = 0) {
    std::vector<double> co;
    for (i64 c : f.poly) co.push_back(double(c));
    RootSplit roots = split_roots(poly_roots(co));
    if (int(roots.real.size()) != f.sig.r || int(roots.upper.size()) != f.sig.s)
        throw ConfigError("external_lattice: declared signature disagrees with the roots");

    // the unit must be an integral combination of the basis rows
    {
        std::vector<std::vector<BigRat>> m(size_t(f.degree),
                                           std::vector<BigRat>(size_t(f.degree)));
        for (int i = 0; i < f.degree; ++i)
            for (int k = 0; k < f.degree; ++k) m[size_t(k)][size_t(i)] = f.basis[size_t(i)][size_t(k)];
        std::vector<BigRat> rhs(size_t(f.degree), BigRat(0));
        rhs[0] = 1;
        std::vector<BigRat> coords;
        if (!detail::rational_solve(m, rhs, coords))
            throw ConfigError("external_lattice: basis is singular");
        for (const BigRat& c : coords)
            if (denominator(c) != 1)
                throw ConfigError("external_lattice: the unit is not in the span");
        EmbeddedLattice lat;
        lat.sig = f.sig;
        for (const BigRat& c : coords) lat.one_coords.push_back(numerator(c).convert_to<i64>());

        lat.basis = RealMatrix(f.degree, f.degree);
        for (int j = 0; j < f.degree; ++j) {
            // values of basis element j at every embedding
            std::vector<double> q;
            for (int k = 0; k < f.degree; ++k) q.push_back(f.basis[size_t(j)][size_t(k)].convert_to<double>());
            for (int i = 0; i < f.sig.r; ++i) {
                double t = roots.real[size_t(i)], val = 0.0, tp = 1.0;
                for (double qq : q) {
                    val += qq * tp;
                    tp *= t;
                }
                lat.basis.at(i, j) = val;
            }
            for (int i = 0; i < f.sig.s; ++i) {
                std::complex<double> t = roots.upper[size_t(i)], val(0.0, 0.0), tp(1.0, 0.0);
                for (double qq : q) {
                    val += qq * tp;
                    tp *= t;
                }
                lat.basis.at(f.sig.r + 2 * i, j) = val.real();
                lat.basis.at(f.sig.r + 2 * i + 1, j) = val.imag();
            }
        }
        double expect = std::ldexp(std::sqrt(std::fabs(double(f.disc))), -f.sig.s);
        double got = covolume(lat);
        if (std::fabs(got - expect) > 1e-6 * expect)
            throw ConfigError("external_lattice: covolume disagrees with the discriminant");
        lat.provenance = f.label.empty()
                             ? "external deg=" + std::to_string(f.degree) +
                                   " disc=" + std::to_string(f.disc)
                             : f.label;
        return ordering == 0 ? lat : reorder_embedding(lat, ordering);
    }
}

} // namespace latgrid
