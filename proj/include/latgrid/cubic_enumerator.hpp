#pragma once

// Integral binary cubic forms up to the twisted GL2(Z) action
//   (g . f)(x, y) = f((x, y) g) / det g,
// one canonical representative per class, enumerated by discriminant range.
// Classes with positive discriminant are reduced through their Hessian
// covariant (a positive definite quadratic), classes with negative
// discriminant through the unique complex root in the upper half plane.
// The canonical key is the lexicographic minimum over the finite set of
// reduced forms of the class, found by closing over single-step unimodular
// transforms, so boundary and automorphism ambiguities cannot split a class.
//
// The maximality test is the local criterion at each prime whose square
// divides the discriminant: the ring attached to f is non-maximal at p
// exactly when p divides the content, or some multiple root of f mod p
// (including the one at infinity), translated to x = 0, leaves p | c' and
// p^2 | d'.

#include "common.hpp"
#include "exact_linalg.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <set>
#include <unordered_map>
#include <vector>

namespace latgrid {

template <class I>
struct FormT {
    I a{}, b{}, c{}, d{};

    bool operator==(const FormT& o) const { return a == o.a && b == o.b && c == o.c && d == o.d; }
    bool operator!=(const FormT& o) const { return !(*this == o); }
    bool operator<(const FormT& o) const {
        if (a != o.a) return a < o.a;
        if (b != o.b) return b < o.b;
        if (c != o.c) return c < o.c;
        return d < o.d;
    }
};

using Form64 = FormT<i64>;
using FormBig = FormT<BigInt>;

template <class I>
I form_disc(const FormT<I>& f) {
    return I(18) * f.a * f.b * f.c * f.d - I(4) * f.b * f.b * f.b * f.d +
           f.b * f.b * f.c * f.c - I(4) * f.a * f.c * f.c * f.c -
           I(27) * f.a * f.a * f.d * f.d;
}

struct Mat2 {
    i64 m00 = 1, m01 = 0, m10 = 0, m11 = 1;
    i64 det() const { return m00 * m11 - m01 * m10; }
};

inline Mat2 mat2_mul(const Mat2& x, const Mat2& y) {
    return {x.m00 * y.m00 + x.m01 * y.m10, x.m00 * y.m01 + x.m01 * y.m11,
            x.m10 * y.m00 + x.m11 * y.m10, x.m10 * y.m01 + x.m11 * y.m11};
}

// Twisted substitution: row vector (x, y) times g, then divide by det.
template <class I>
FormT<I> act(const Mat2& g, const FormT<I>& f) {
    i64 det = g.det();
    if (det != 1 && det != -1) throw ConfigError("act: transform must be in GL2(Z)");
    I al(g.m00), be(g.m01), ga(g.m10), de(g.m11);
    FormT<I> r;
    r.a = f.a * al * al * al + f.b * al * al * be + f.c * al * be * be + f.d * be * be * be;
    r.b = I(3) * f.a * al * al * ga + f.b * (al * al * de + I(2) * al * be * ga) +
          f.c * (I(2) * al * be * de + be * be * ga) + I(3) * f.d * be * be * de;
    r.c = I(3) * f.a * al * ga * ga + f.b * (I(2) * al * ga * de + be * ga * ga) +
          f.c * (al * de * de + I(2) * be * ga * de) + I(3) * f.d * be * de * de;
    r.d = f.a * ga * ga * ga + f.b * ga * ga * de + f.c * ga * de * de + f.d * de * de * de;
    if (det == -1) {
        r.a = -r.a;
        r.b = -r.b;
        r.c = -r.c;
        r.d = -r.d;
    }
    return r;
}

struct Hessian {
    i64 p = 0, q = 0, r = 0; // P x^2 + Q xy + R y^2, with Q^2 - 4PR = -3 disc(f)
};

inline Hessian hessian(const Form64& f) {
    return {f.b * f.b - 3 * f.a * f.c, f.b * f.c - 9 * f.a * f.d, f.c * f.c - 3 * f.b * f.d};
}

namespace detail {

inline Mat2 shift_mat(i64 k) { return {1, 0, k, 1}; }       // x -> x + k y
inline Mat2 swap_mat() { return {0, 1, -1, 0}; }            // (a,b,c,d) -> (d,-c,b,-a)

// All single-step transforms: entries in {-1,0,1}, det +-1.
inline const std::vector<Mat2>& window_transforms() {
    static const std::vector<Mat2> w = [] {
        std::vector<Mat2> v;
        for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b)
                for (int c = -1; c <= 1; ++c)
                    for (int d = -1; d <= 1; ++d) {
                        Mat2 m{a, b, c, d};
                        if (m.det() == 1 || m.det() == -1) v.push_back(m);
                    }
        return v;
    }();
    return w;
}

inline bool hessian_reduced(const Form64& f) {
    Hessian h = hessian(f);
    return h.p > 0 && std::llabs(h.q) <= h.p && h.p <= h.r;
}

// Unique root in the open upper half plane of a negative-discriminant form.
inline std::complex<double> upper_root(const Form64& f) {
    if (f.a == 0) {
        if (f.b == 0) throw NumericalError("upper_root: degenerate form");
        double b = double(f.b), c = double(f.c), d = double(f.d);
        double disc = c * c - 4.0 * b * d;
        if (disc >= 0) throw NumericalError("upper_root: quadratic part not definite");
        return {-c / (2.0 * b), std::sqrt(-disc) / (2.0 * std::fabs(b))};
    }
    double a = double(f.a), b = double(f.b), c = double(f.c), d = double(f.d);
    if (a < 0) { a = -a; b = -b; c = -c; d = -d; }
    // Cardano for the single real root of the depressed cubic t^3 + pt + q,
    // picking the non-cancelling cube root.
    const double sh = b / (3.0 * a);
    const double pp = c / a - 3.0 * sh * sh;
    const double qq = 2.0 * sh * sh * sh - sh * c / a + d / a;
    double s2 = qq * qq / 4.0 + pp * pp * pp / 27.0;
    if (s2 < 0) throw NumericalError("upper_root: form has three real roots");
    double s = std::sqrt(s2);
    double t = (qq <= 0) ? (-qq / 2.0 + s) : (-qq / 2.0 - s);
    double u = std::cbrt(t);
    double th = (u == 0.0 ? 0.0 : u - pp / (3.0 * u)) - sh;
    auto ev = [&](double x) { return ((a * x + b) * x + c) * x + d; };
    for (int i = 0; i < 3; ++i) {
        double fp = (3.0 * a * th + 2.0 * b) * th + c;
        if (fp != 0.0) th -= ev(th) / fp;
    }
    // deflate: remaining quadratic x^2 + px + q
    double dp = b / a + th;
    double dq = th * th + (b / a) * th + c / a;
    double disc = dp * dp - 4.0 * dq;
    if (disc >= 0) throw NumericalError("upper_root: no complex pair");
    return {-dp / 2.0, std::sqrt(-disc) / 2.0};
}

inline bool root_reduced(const Form64& f, double eps = 1e-7) {
    std::complex<double> z = upper_root(f);
    return std::fabs(z.real()) <= 0.5 + eps && std::norm(z) >= 1.0 - eps;
}

inline Form64 reduce_pos(Form64 f) {
    for (int iter = 0; iter < 256; ++iter) {
        Hessian h = hessian(f);
        if (h.p <= 0) throw NumericalError("reduce_pos: Hessian not definite");
        if (std::llabs(h.q) <= h.p && h.p <= h.r) return f;
        if (h.p > h.r) {
            f = act(swap_mat(), f);
            continue;
        }
        f = act(shift_mat(i64(std::llround(-double(h.q) / (2.0 * double(h.p))))), f);
    }
    throw NumericalError("reduce_pos: iteration cap");
}

inline Form64 reduce_neg(Form64 f) {
    for (int iter = 0; iter < 256; ++iter) {
        std::complex<double> z = upper_root(f);
        if (std::fabs(z.real()) > 0.5 + 1e-12) {
            f = act(shift_mat(i64(std::llround(z.real()))), f);
            continue;
        }
        if (std::norm(z) < 1.0 - 1e-12) {
            f = act(swap_mat(), f);
            continue;
        }
        return f;
    }
    throw NumericalError("reduce_neg: iteration cap");
}

} // namespace detail

// Canonical representative of the GL2(Z) class of f.  Requires disc != 0.
inline Form64 canonical_key(Form64 f) {
    i64 disc = form_disc(f);
    if (disc == 0) throw ConfigError("canonical_key: zero discriminant");
    const bool pos = disc > 0;
    f = pos ? detail::reduce_pos(f) : detail::reduce_neg(f);
    auto reduced = [&](const Form64& g) {
        return pos ? detail::hessian_reduced(g) : detail::root_reduced(g);
    };
    if (!reduced(f)) throw NumericalError("canonical_key: reduction left the domain");

    std::set<Form64> closure{f};
    std::vector<Form64> queue{f};
    while (!queue.empty()) {
        Form64 g = queue.back();
        queue.pop_back();
        for (const Mat2& m : detail::window_transforms()) {
            Form64 h = act(m, g);
            if (!reduced(h)) continue;
            if (closure.insert(h).second) queue.push_back(h);
        }
        if (closure.size() > 4096) throw NumericalError("canonical_key: closure blow-up");
    }
    Form64 best = *closure.begin();
    // prefer a positive leading coefficient among the pair {best, -best}
    Form64 neg{-best.a, -best.b, -best.c, -best.d};
    if (closure.count(neg)) {
        i64 lead[4] = {best.a, best.b, best.c, best.d};
        for (i64 v : lead)
            if (v != 0) {
                if (v < 0) best = neg;
                break;
            }
    }
    return best;
}

// No linear factor over Q and non-square discriminant: exactly the forms whose
// root field is a cubic with the full symmetric group.
inline bool is_irreducible_s3(const Form64& f) {
    if (f.a == 0 || f.d == 0) return false;
    i64 ad = std::llabs(f.d), aa = std::llabs(f.a);
    for (i64 p = 1; p * p <= ad; ++p) {
        if (ad % p) continue;
        for (i64 pp : {p, ad / p})
            for (i64 q = 1; q * q <= aa; ++q) {
                if (aa % q) continue;
                for (i64 qq : {q, aa / q}) {
                    if (std::gcd(pp, qq) != 1) continue;
                    for (i64 sp : {pp, -pp}) {
                        __int128 v = (__int128)f.a * sp * sp * sp + (__int128)f.b * sp * sp * qq +
                                     (__int128)f.c * sp * qq * qq + (__int128)f.d * qq * qq * qq;
                        if (v == 0) return false;
                    }
                }
            }
    }
    i64 disc = form_disc(f);
    if (disc > 0) {
        i64 s = i64(std::llround(std::sqrt(double(disc))));
        for (i64 t = std::max<i64>(0, s - 2); t <= s + 2; ++t)
            if (t * t == disc) return false;
    }
    return true;
}

namespace detail {

inline const std::vector<i64>& small_primes() {
    static const std::vector<i64> primes = [] {
        const int limit = 1 << 20;
        std::vector<bool> comp(limit, false);
        std::vector<i64> out;
        for (int i = 2; i < limit; ++i) {
            if (comp[size_t(i)]) continue;
            out.push_back(i);
            for (long long j = (long long)i * i; j < limit; j += i) comp[size_t(j)] = true;
        }
        return out;
    }();
    return primes;
}

// f translated so the mod-p root r sits at x = 0; reports c' mod p, d' mod p^2.
inline bool sublattice_at_root(const Form64& f, i64 p, i64 r) {
    __int128 p2 = (__int128)p * p;
    auto md = [&](__int128 x, __int128 m) { return (i64)(((x % m) + m) % m); };
    i64 a = md(f.a, p2), b = md(f.b, p2), c = md(f.c, p2), d = md(f.d, p2);
    __int128 cp = ((__int128)3 * a % p2 * r % p2 * r + (__int128)2 * b * r + c) % p2;
    __int128 dp = ((((__int128)a * r + b) % p2 * r + c) % p2 * r + d) % p2;
    return md(cp, p) == 0 && md(dp, p2) == 0;
}

inline bool maximal_at(const Form64& f, i64 p) {
    auto md = [&](i64 x) { return ((x % p) + p) % p; };
    if (md(f.a) == 0 && md(f.b) == 0 && md(f.c) == 0 && md(f.d) == 0) return false;
    // finite multiple roots of f mod p
    for (i64 r = 0; r < p; ++r) {
        __int128 v = (((__int128)f.a * r + f.b) * r + f.c) * r + f.d;
        __int128 dv = ((__int128)3 * f.a * r + 2 * f.b) * r + f.c;
        if ((i64)(((v % p) + p) % p) != 0 || (i64)(((dv % p) + p) % p) != 0) continue;
        if (sublattice_at_root(f, p, r)) return false;
    }
    // multiple root at infinity: y^2 divides f mod p
    if (md(f.a) == 0 && md(f.b) == 0) {
        Form64 sw{f.d, f.c, f.b, f.a};
        if (sublattice_at_root(sw, p, 0)) return false;
    }
    return true;
}

} // namespace detail

// Whether the cubic ring of f is the maximal order of its discriminant.
inline bool is_maximal(const Form64& f) {
    i64 disc = form_disc(f);
    if (disc == 0) throw ConfigError("is_maximal: zero discriminant");
    i64 ad = std::llabs(disc);
    for (i64 p : detail::small_primes()) {
        if (p * p > ad) return true;
        if (ad % (p * p) == 0 && !detail::maximal_at(f, p)) return false;
    }
    // primes beyond the sieve: |disc| >= 2^40, fall back to trial steps
    i64 start = detail::small_primes().back() + 2;
    for (i64 p = start; p * p <= ad; p += 2) {
        bool prime = p % 3 != 0;
        for (i64 q = 5; prime && q * q <= p; q += 6)
            if (p % q == 0 || p % (q + 2) == 0) prime = false;
        if (!prime) continue;
        if (ad % (p * p) == 0 && !detail::maximal_at(f, p)) return false;
    }
    return true;
}

namespace detail {

struct ClassCollector {
    std::unordered_map<uint64_t, std::vector<Form64>> buckets;
    std::vector<Form64> out;

    static uint64_t mix(uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }
    static uint64_t hash(const Form64& f) {
        uint64_t h = mix(uint64_t(f.a));
        h = mix(h ^ uint64_t(f.b));
        h = mix(h ^ uint64_t(f.c));
        return mix(h ^ uint64_t(f.d));
    }
    void offer(const Form64& f) {
        auto& v = buckets[hash(f)];
        for (const Form64& g : v)
            if (g == f) return;
        v.push_back(f);
        out.push_back(f);
    }
};

} // namespace detail

// One canonical form per GL2(Z) class with 0 < disc <= limit (disc_sign > 0)
// or -limit <= disc < 0 (disc_sign < 0), sorted by (|disc|, coefficients).
// The search boxes cover every reduced form in range; duplicates collapse
// through the canonical key.
inline std::vector<Form64> enumerate_classes(i64 limit, int disc_sign) {
    if (limit < 1) throw ConfigError("enumerate_classes: limit must be positive");
    if (disc_sign == 0) throw ConfigError("enumerate_classes: disc_sign must be nonzero");
    detail::ClassCollector cls;
    std::unordered_map<uint64_t, std::vector<Form64>> seen_reduced;
    const double X = double(limit);

    auto offer = [&](i64 a, i64 b, i64 c, i64 d) {
        Form64 f{a, b, c, d};
        i64 disc = form_disc(f);
        if (disc_sign > 0 ? (disc <= 0 || disc > limit) : (disc >= 0 || disc < -limit)) return;
        Form64 red = disc > 0 ? detail::reduce_pos(f) : detail::reduce_neg(f);
        auto& bucket = seen_reduced[detail::ClassCollector::hash(red)];
        for (const Form64& g : bucket)
            if (g == red) return;
        bucket.push_back(red);
        cls.offer(canonical_key(red));
    };

    if (disc_sign > 0) {
        const i64 pmax = i64(std::sqrt(X)) + 1;
        const i64 amax = i64(0.91 * std::pow(X, 0.25)) + 1;
        for (i64 a = 1; a <= amax; ++a) {
            const i64 bmax = i64(std::sqrt(2.0) * std::pow(X, 0.25) + 1.5 * double(a)) + 2;
            for (i64 b = -bmax; b <= bmax; ++b) {
                // P = b^2 - 3ac in (0, pmax]
                i64 clo = (b * b - pmax) / (3 * a) - 2, chi = b * b / (3 * a) + 2;
                for (i64 c = clo; c <= chi; ++c) {
                    i64 P = b * b - 3 * a * c;
                    if (P <= 0 || P > pmax) continue;
                    // Q = bc - 9ad in [-P, P]
                    i64 dlo = (b * c - P) / (9 * a) - 2, dhi = (b * c + P) / (9 * a) + 2;
                    for (i64 d = dlo; d <= dhi; ++d) {
                        if (std::llabs(b * c - 9 * a * d) > P) continue;
                        offer(a, b, c, d);
                    }
                }
            }
        }
        // forms divisible by y, Hessian-reduced: |c| <= b, b^2 <= c^2 - 3bd
        const i64 b0max = i64(std::pow(X, 0.25)) + 1;
        for (i64 b = 1; b <= b0max; ++b)
            for (i64 c = -b; c <= b; ++c) {
                i64 dhi = i64(std::floor(double(c * c - b * b) / (3.0 * b)));
                i64 dlo = i64(std::ceil((double(c * c) - X / double(b * b)) / (4.0 * b))) - 1;
                for (i64 d = dlo; d <= dhi; ++d) offer(0, b, c, d);
            }
    } else {
        const i64 amax = i64(std::pow(16.0 * X / 27.0, 0.25)) + 1;
        for (i64 a = 1; a <= amax; ++a) {
            const double rho = 0.5 + std::pow(X / (3.0 * std::pow(double(a), 4.0)), 0.25);
            const double im = std::pow(X / 4.0, 1.0 / 6.0) / std::pow(double(a), 2.0 / 3.0);
            const i64 bmax = i64(double(a) * (rho + 1.0)) + 2;
            const i64 cmax = i64(double(a) * (rho + 0.25 + im * im)) + 2;
            for (i64 b = -bmax; b <= bmax; ++b)
                for (i64 c = -cmax; c <= cmax; ++c) {
                    // disc as a quadratic in d: -27 a^2 d^2 + (18abc - 4b^3) d + (b^2c^2 - 4ac^3)
                    double A = -27.0 * double(a) * double(a);
                    double B = 18.0 * double(a) * double(b) * double(c) - 4.0 * std::pow(double(b), 3.0);
                    double C = double(b) * double(b) * double(c) * double(c) -
                               4.0 * double(a) * std::pow(double(c), 3.0);
                    double rad = B * B - 4.0 * A * (C + X);
                    if (rad < 0) continue;
                    double r1 = (-B + std::sqrt(rad)) / (2.0 * A);
                    double r2 = (-B - std::sqrt(rad)) / (2.0 * A);
                    i64 dlo = i64(std::ceil(std::min(r1, r2))) - 1;
                    i64 dhi = i64(std::floor(std::max(r1, r2))) + 1;
                    for (i64 d = dlo; d <= dhi; ++d) offer(a, b, c, d);
                }
        }
        // forms divisible by y, definite quadratic part, Gauss-reduced
        const i64 b0max = i64(std::pow(X / 3.0, 0.25)) + 1;
        for (i64 b = 1; b <= b0max; ++b)
            for (i64 c = -b; c <= b; ++c) {
                i64 dhi = i64((X / double(b * b) + double(c * c)) / (4.0 * b)) + 1;
                for (i64 d = b; d <= dhi; ++d) offer(0, b, c, d);
            }
    }

    std::sort(cls.out.begin(), cls.out.end(), [](const Form64& x, const Form64& y) {
        i64 dx = std::llabs(form_disc(x)), dy = std::llabs(form_disc(y));
        if (dx != dy) return dx < dy;
        return x < y;
    });
    return cls.out;
}

} // namespace latgrid
