#pragma once

// Independent reference implementations used to pin expected values in the
// test suites.  Everything here is deliberately naive (cofactor expansions,
// exhaustive searches, sieves): slow, but with no shared code or shared
// algorithmic ideas with the library under test.

#include "latgrid/exact_linalg.hpp"

#include <map>
#include <random>
#include <set>

namespace oracle {

using latgrid::BigInt;
using latgrid::IntMatrix;
using latgrid::RealMatrix;
using latgrid::Vec;

// Recursive cofactor-expansion determinant, O(n!).
inline double det_cofactor(const RealMatrix& m) {
    const int n = m.rows;
    if (n == 1) return m.at(0, 0);
    double s = 0, sign = 1;
    for (int j = 0; j < n; ++j) {
        RealMatrix minor(n - 1, n - 1);
        for (int i = 1; i < n; ++i) {
            int cc = 0;
            for (int c = 0; c < n; ++c) {
                if (c == j) continue;
                minor.at(i - 1, cc++) = m.at(i, c);
            }
        }
        s += sign * m.at(0, j) * det_cofactor(minor);
        sign = -sign;
    }
    return s;
}

inline BigInt det_cofactor_int(const IntMatrix& m) {
    const int n = m.rows;
    if (n == 1) return m.at(0, 0);
    BigInt s = 0;
    int sign = 1;
    for (int j = 0; j < n; ++j) {
        IntMatrix minor(n - 1, n - 1);
        for (int i = 1; i < n; ++i) {
            int cc = 0;
            for (int c = 0; c < n; ++c) {
                if (c == j) continue;
                minor.at(i - 1, cc++) = m.at(i, c);
            }
        }
        s += sign * m.at(0, j) * det_cofactor_int(minor);
        sign = -sign;
    }
    return s;
}

// All nonzero lattice vectors sum c_i b_i with |c_i| <= box, sorted by norm.
// Used to check LLL output against the true successive short vectors.
inline std::vector<Vec> short_vectors(const RealMatrix& basis, int box) {
    const int m = basis.cols;
    std::vector<Vec> out;
    std::vector<int> c(m, -box);
    while (true) {
        bool all0 = true;
        for (int x : c)
            if (x != 0) { all0 = false; break; }
        if (!all0) {
            Vec v(basis.rows, 0.0);
            for (int j = 0; j < m; ++j)
                for (int i = 0; i < basis.rows; ++i) v[size_t(i)] += c[size_t(j)] * basis.at(i, j);
            out.push_back(v);
        }
        int k = 0;
        while (k < m && c[size_t(k)] == box) { c[size_t(k)] = -box; ++k; }
        if (k == m) break;
        ++c[size_t(k)];
    }
    std::sort(out.begin(), out.end(), [](const Vec& a, const Vec& b) {
        return latgrid::dot(a, a) < latgrid::dot(b, b);
    });
    return out;
}

// Deterministic RNG for property tests; fixed seed, values frozen by the suite.
inline std::mt19937_64 rng(uint64_t seed = 0x5eed1a77) { return std::mt19937_64(seed); }

// Random unimodular integer matrix as a product of elementary shears/swaps.
inline IntMatrix random_unimodular(int n, std::mt19937_64& g, int steps = 12, int shear = 3) {
    IntMatrix u = IntMatrix::identity(n);
    std::uniform_int_distribution<int> row(0, n - 1), sh(-shear, shear);
    for (int s = 0; s < steps; ++s) {
        int i = row(g), j = row(g);
        if (i == j) continue;
        BigInt k = sh(g);
        if (k == 0) k = 1;
        for (int c = 0; c < n; ++c) u.at(i, c) += k * u.at(j, c); // det unchanged
    }
    return u;
}

} // namespace oracle
