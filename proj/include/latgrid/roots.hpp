#pragma once

// Roots of low-degree real polynomials with simple roots, to near machine
// precision.  Degree 2 uses the stable quadratic formula; degrees 3 to 5 run
// Durand-Kerner from deterministic starts and polish with Newton.  Inputs
// with repeated roots are rejected through the residual check rather than
// silently returning garbage.

#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace latgrid {

namespace detail {

inline std::complex<double> poly_eval(const std::vector<double>& co, std::complex<double> z) {
    std::complex<double> v(0.0, 0.0);
    for (size_t i = co.size(); i-- > 0;) v = v * z + co[i];
    return v;
}

inline std::complex<double> poly_eval_deriv(const std::vector<double>& co,
                                            std::complex<double> z) {
    std::complex<double> v(0.0, 0.0);
    for (size_t i = co.size(); i-- > 1;) v = v * z + double(i) * co[i];
    return v;
}

inline double poly_scale(const std::vector<double>& co, std::complex<double> z) {
    double s = 0.0, zp = 1.0, az = std::abs(z);
    for (double c : co) {
        s += std::fabs(c) * zp;
        zp *= az;
    }
    return std::max(s, 1e-300);
}

} // namespace detail

// All complex roots of c[0] + c[1] x + ... + c[n] x^n, n between 1 and 5.
inline std::vector<std::complex<double>> poly_roots(const std::vector<double>& co,
                                                    double rel_tol = 1e-14) {
    if (co.size() < 2) throw ConfigError("poly_roots: degree must be at least 1");
    const int n = int(co.size()) - 1;
    if (n > 5) throw ConfigError("poly_roots: degree above 5 is not supported");
    double lead = co[size_t(n)];
    double maxc = 0.0;
    for (double c : co) maxc = std::max(maxc, std::fabs(c));
    if (std::fabs(lead) < 1e-12 * maxc) throw ConfigError("poly_roots: vanishing leading term");

    std::vector<std::complex<double>> roots;
    if (n == 1) {
        roots = {std::complex<double>(-co[0] / co[1], 0.0)};
    } else if (n == 2) {
        double a = co[2], b = co[1], c = co[0];
        double disc = b * b - 4.0 * a * c;
        if (disc >= 0) {
            double q = -0.5 * (b + std::copysign(std::sqrt(disc), b == 0.0 ? 1.0 : b));
            std::complex<double> r1(q / a, 0.0);
            std::complex<double> r2(q != 0.0 ? c / q : -b / a - q / a, 0.0);
            roots = {r1, r2};
        } else {
            double re = -b / (2.0 * a), im = std::sqrt(-disc) / (2.0 * a);
            roots = {{re, std::fabs(im)}, {re, -std::fabs(im)}};
        }
    } else {
        std::vector<std::complex<double>> monic(static_cast<size_t>(n));
        double radius = 1.0;
        for (int i = 0; i < n; ++i) {
            double m = co[size_t(i)] / lead;
            monic[size_t(i)] = m;
            radius = std::max(radius, std::fabs(m));
        }
        radius = 1.0 + radius;
        roots.resize(size_t(n));
        const std::complex<double> seed(0.4, 0.9);
        std::complex<double> w = seed;
        for (int k = 0; k < n; ++k) {
            roots[size_t(k)] = radius * w;
            w *= seed;
        }
        auto eval_monic = [&](std::complex<double> z) {
            std::complex<double> v(1.0, 0.0);
            for (int i = n; i-- > 0;) v = v * z + monic[size_t(i)];
            return v;
        };
        for (int iter = 0; iter < 400; ++iter) {
            double worst = 0.0;
            for (int k = 0; k < n; ++k) {
                std::complex<double> den(1.0, 0.0);
                for (int j = 0; j < n; ++j)
                    if (j != k) den *= roots[size_t(k)] - roots[size_t(j)];
                if (den == std::complex<double>(0.0, 0.0))
                    throw NumericalError("poly_roots: coincident iterates");
                std::complex<double> step = eval_monic(roots[size_t(k)]) / den;
                roots[size_t(k)] -= step;
                worst = std::max(worst, std::abs(step) / (1.0 + std::abs(roots[size_t(k)])));
            }
            if (worst < 1e-15) break;
        }
    }

    for (auto& z : roots) {
        for (int i = 0; i < 6; ++i) {
            std::complex<double> d = detail::poly_eval_deriv(co, z);
            if (std::abs(d) == 0.0) break;
            std::complex<double> step = detail::poly_eval(co, z) / d;
            z -= step;
            if (std::abs(step) <= 1e-16 * (1.0 + std::abs(z))) break;
        }
        if (std::abs(detail::poly_eval(co, z)) > rel_tol * 100.0 * detail::poly_scale(co, z))
            throw NumericalError("poly_roots: residual too large (repeated roots?)");
    }
    return roots;
}

struct RootSplit {
    std::vector<double> real;                     // ascending
    std::vector<std::complex<double>> upper;      // Im > 0, sorted by (Re, Im)
};

// Classify the roots of a real polynomial into real embeddings and complex
// pairs, in the slot order used by the Minkowski embedding.
inline RootSplit split_roots(const std::vector<std::complex<double>>& roots,
                             double im_tol = 1e-8) {
    RootSplit out;
    int lower = 0;
    for (const auto& z : roots) {
        double cut = im_tol * (1.0 + std::abs(z));
        if (std::fabs(z.imag()) <= cut)
            out.real.push_back(z.real());
        else if (z.imag() > 0)
            out.upper.push_back(z);
        else
            ++lower;
    }
    if (int(out.upper.size()) != lower)
        throw NumericalError("split_roots: unpaired complex roots");
    if (out.real.size() + 2 * out.upper.size() != roots.size())
        throw NumericalError("split_roots: classification lost roots");
    std::sort(out.real.begin(), out.real.end());
    std::sort(out.upper.begin(), out.upper.end(), [](const auto& a, const auto& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return out;
}

} // namespace latgrid
