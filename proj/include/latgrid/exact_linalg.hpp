#pragma once

// Exact and floating-point linear algebra for small dense systems (n <= 8).
//
// Integer side: arbitrary-precision matrices, fraction-free determinants and
// a primitive-vector kernel/complement splitter used by the grid map.
// Real side: plain double matrices with an explicit condition-number estimate;
// operations refuse to proceed (NumericalError) instead of silently degrading.

#include "common.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <array>
#include <optional>
#include <utility>

namespace latgrid {

using BigInt = boost::multiprecision::cpp_int;
using BigRat = boost::multiprecision::cpp_rational;

// ---------------------------------------------------------------- IntMatrix

struct IntMatrix {
    int rows = 0, cols = 0;
    std::vector<BigInt> a; // row-major

    IntMatrix() = default;
    IntMatrix(int r, int c) : rows(r), cols(c), a(size_t(r) * c) {}

    BigInt& at(int i, int j) { return a[size_t(i) * cols + j]; }
    const BigInt& at(int i, int j) const { return a[size_t(i) * cols + j]; }

    static IntMatrix identity(int n) {
        IntMatrix m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = 1;
        return m;
    }

    bool operator==(const IntMatrix& o) const {
        return rows == o.rows && cols == o.cols && a == o.a;
    }
};

inline IntMatrix int_mul(const IntMatrix& x, const IntMatrix& y) {
    if (x.cols != y.rows) throw Error("int_mul: shape mismatch");
    IntMatrix z(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) {
            const BigInt& v = x.at(i, k);
            if (v == 0) continue;
            for (int j = 0; j < y.cols; ++j) z.at(i, j) += v * y.at(k, j);
        }
    return z;
}

// Bareiss fraction-free elimination: exact determinant, no rationals.
inline BigInt int_det(IntMatrix m) {
    if (m.rows != m.cols) throw Error("int_det: not square");
    const int n = m.rows;
    if (n == 0) return 1;
    BigInt prev = 1;
    int sign = 1;
    for (int k = 0; k < n - 1; ++k) {
        if (m.at(k, k) == 0) {
            int p = -1;
            for (int i = k + 1; i < n; ++i)
                if (m.at(i, k) != 0) { p = i; break; }
            if (p < 0) return 0;
            for (int j = 0; j < n; ++j) std::swap(m.at(k, j), m.at(p, j));
            sign = -sign;
        }
        for (int i = k + 1; i < n; ++i)
            for (int j = k + 1; j < n; ++j)
                m.at(i, j) = (m.at(i, j) * m.at(k, k) - m.at(i, k) * m.at(k, j)) / prev;
        prev = m.at(k, k);
    }
    return sign > 0 ? m.at(n - 1, n - 1) : -m.at(n - 1, n - 1);
}

// Adjugate-based inverse for |det| = 1 matrices.  Dimensions here are tiny
// (n <= 8), so cofactor expansion is fine.
inline IntMatrix int_inverse_unimodular(const IntMatrix& m) {
    if (m.rows != m.cols) throw Error("int_inverse_unimodular: not square");
    const int n = m.rows;
    BigInt d = int_det(m);
    if (d != 1 && d != -1)
        throw Error("int_inverse_unimodular: determinant " + d.str() + " is not a unit");
    IntMatrix inv(n, n);
    IntMatrix minor(n - 1, n - 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            int r = 0;
            for (int p = 0; p < n; ++p) {
                if (p == i) continue;
                int c = 0;
                for (int q = 0; q < n; ++q) {
                    if (q == j) continue;
                    minor.at(r, c) = m.at(p, q);
                    ++c;
                }
                ++r;
            }
            BigInt cof = int_det(minor);
            if ((i + j) % 2 != 0) cof = -cof;
            inv.at(j, i) = cof * d; // adj/det with det = +-1
        }
    return inv;
}

inline BigInt ext_gcd(const BigInt& a, const BigInt& b, BigInt& x, BigInt& y) {
    if (b == 0) {
        if (a >= 0) { x = 1; y = 0; return a; }
        x = -1; y = 0; return -a;
    }
    BigInt x1, y1;
    BigInt g = ext_gcd(b, a % b, x1, y1);
    x = y1;
    y = x1 - (a / b) * y1;
    return g;
}

struct KernelSplit {
    IntMatrix kernel; // (n-1) x n, rows k with <k, c> = 0, basis of the kernel lattice
    std::vector<BigInt> complement; // k0 with <k0, c> = 1
};

// For primitive integer c, produce a basis of {k : <k,c> = 0} plus one k0 with
// <k0,c> = 1, the stacked matrix [kernel; k0] being unimodular.  This is the
// integer-coordinates engine behind the grid map's dual-lattice splitting.
inline KernelSplit kernel_and_complement(const std::vector<BigInt>& c) {
    const int n = int(c.size());
    if (n < 1) throw Error("kernel_and_complement: empty vector");
    IntMatrix U = IntMatrix::identity(n);
    std::vector<BigInt> v = c;
    // Row-reduce v to (g, 0, ..., 0) by unimodular row ops on U.
    for (int i = 1; i < n; ++i) {
        if (v[i] == 0) continue;
        BigInt x, y;
        BigInt g = ext_gcd(v[0], v[i], x, y);
        BigInt p = v[0] / g, q = v[i] / g;
        for (int j = 0; j < n; ++j) {
            BigInt r0 = x * U.at(0, j) + y * U.at(i, j);
            BigInt ri = -q * U.at(0, j) + p * U.at(i, j);
            U.at(0, j) = r0;
            U.at(i, j) = ri;
        }
        v[0] = g;
        v[i] = 0;
    }
    if (v[0] != 1 && v[0] != -1)
        throw Error("kernel_and_complement: vector not primitive (gcd = " + v[0].str() + ")");
    KernelSplit out;
    out.complement.resize(n);
    for (int j = 0; j < n; ++j) out.complement[j] = v[0] * U.at(0, j); // <k0, c> = +1
    out.kernel = IntMatrix(n - 1, n);
    for (int i = 1; i < n; ++i) {
        // sign-normalize each kernel row: first nonzero entry positive
        int lead = -1;
        for (int j = 0; j < n; ++j)
            if (U.at(i, j) != 0) { lead = j; break; }
        BigInt s = (lead >= 0 && U.at(i, lead) < 0) ? -1 : 1;
        for (int j = 0; j < n; ++j) out.kernel.at(i - 1, j) = s * U.at(i, j);
    }
    return out;
}

// ---------------------------------------------------------------- RealMatrix

using Vec = std::vector<double>;

inline double dot(const Vec& x, const Vec& y) {
    double s = 0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}
inline double norm(const Vec& x) { return std::sqrt(dot(x, x)); }

inline Vec vec_add(Vec x, const Vec& y) {
    for (size_t i = 0; i < x.size(); ++i) x[i] += y[i];
    return x;
}
inline Vec vec_sub(Vec x, const Vec& y) {
    for (size_t i = 0; i < x.size(); ++i) x[i] -= y[i];
    return x;
}
inline Vec vec_scale(Vec x, double s) {
    for (auto& v : x) v *= s;
    return x;
}

// P_{u^perp}(x): remove the u-component.
inline Vec orth_project(const Vec& x, const Vec& u) {
    double uu = dot(u, u);
    if (uu <= 0) throw NumericalError("orth_project: zero direction");
    return vec_sub(x, vec_scale(u, dot(x, u) / uu));
}

// Row-major real matrix.  `cond` is a 1-norm condition estimate refreshed by
// inverse()/solve(); consumers compare it against Tolerances::cond_budget.
struct RealMatrix {
    int rows = 0, cols = 0;
    std::vector<double> a;
    mutable double cond = 0.0;

    RealMatrix() = default;
    RealMatrix(int r, int c) : rows(r), cols(c), a(size_t(r) * c, 0.0) {}

    double& at(int i, int j) { return a[size_t(i) * cols + j]; }
    double at(int i, int j) const { return a[size_t(i) * cols + j]; }

    static RealMatrix identity(int n) {
        RealMatrix m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }
    static RealMatrix from_columns(const std::vector<Vec>& cols) {
        if (cols.empty()) return {};
        RealMatrix m(int(cols[0].size()), int(cols.size()));
        for (int j = 0; j < m.cols; ++j)
            for (int i = 0; i < m.rows; ++i) m.at(i, j) = cols[size_t(j)][size_t(i)];
        return m;
    }
    Vec column(int j) const {
        Vec v(rows);
        for (int i = 0; i < rows; ++i) v[size_t(i)] = at(i, j);
        return v;
    }
    std::vector<Vec> columns() const {
        std::vector<Vec> cs(cols);
        for (int j = 0; j < cols; ++j) cs[size_t(j)] = column(j);
        return cs;
    }
};

inline RealMatrix mat_mul(const RealMatrix& x, const RealMatrix& y) {
    if (x.cols != y.rows) throw Error("mat_mul: shape mismatch");
    RealMatrix z(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) {
            double v = x.at(i, k);
            if (v == 0) continue;
            for (int j = 0; j < y.cols; ++j) z.at(i, j) += v * y.at(k, j);
        }
    return z;
}

inline Vec mat_vec(const RealMatrix& m, const Vec& x) {
    if (int(x.size()) != m.cols) throw Error("mat_vec: shape mismatch");
    Vec y(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) y[size_t(i)] += m.at(i, j) * x[size_t(j)];
    return y;
}

inline RealMatrix transpose(const RealMatrix& m) {
    RealMatrix t(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
    return t;
}

inline double norm1(const RealMatrix& m) {
    double best = 0;
    for (int j = 0; j < m.cols; ++j) {
        double s = 0;
        for (int i = 0; i < m.rows; ++i) s += std::fabs(m.at(i, j));
        best = std::max(best, s);
    }
    return best;
}

// LU with partial pivoting; determinant only.
inline double mat_det(RealMatrix m) {
    if (m.rows != m.cols) throw Error("mat_det: not square");
    const int n = m.rows;
    double det = 1.0;
    for (int k = 0; k < n; ++k) {
        int p = k;
        for (int i = k + 1; i < n; ++i)
            if (std::fabs(m.at(i, k)) > std::fabs(m.at(p, k))) p = i;
        if (m.at(p, k) == 0.0) return 0.0;
        if (p != k) {
            for (int j = 0; j < n; ++j) std::swap(m.at(k, j), m.at(p, j));
            det = -det;
        }
        det *= m.at(k, k);
        for (int i = k + 1; i < n; ++i) {
            double f = m.at(i, k) / m.at(k, k);
            for (int j = k; j < n; ++j) m.at(i, j) -= f * m.at(k, j);
        }
    }
    return det;
}

// Gauss-Jordan inverse; refreshes m.cond and throws past the budget.
inline RealMatrix mat_inverse(const RealMatrix& m, double cond_budget = 1e12) {
    if (m.rows != m.cols) throw Error("mat_inverse: not square");
    const int n = m.rows;
    RealMatrix w = m, inv = RealMatrix::identity(n);
    for (int k = 0; k < n; ++k) {
        int p = k;
        for (int i = k + 1; i < n; ++i)
            if (std::fabs(w.at(i, k)) > std::fabs(w.at(p, k))) p = i;
        if (w.at(p, k) == 0.0) throw NumericalError("mat_inverse: singular matrix");
        if (p != k)
            for (int j = 0; j < n; ++j) {
                std::swap(w.at(k, j), w.at(p, j));
                std::swap(inv.at(k, j), inv.at(p, j));
            }
        double piv = w.at(k, k);
        for (int j = 0; j < n; ++j) { w.at(k, j) /= piv; inv.at(k, j) /= piv; }
        for (int i = 0; i < n; ++i) {
            if (i == k) continue;
            double f = w.at(i, k);
            if (f == 0.0) continue;
            for (int j = 0; j < n; ++j) {
                w.at(i, j) -= f * w.at(k, j);
                inv.at(i, j) -= f * inv.at(k, j);
            }
        }
    }
    m.cond = norm1(m) * norm1(inv);
    if (m.cond > cond_budget)
        throw NumericalError("mat_inverse: condition estimate " + fmt_double(m.cond) +
                             " exceeds budget " + fmt_double(cond_budget));
    return inv;
}

inline Vec mat_solve(const RealMatrix& m, const Vec& b, double cond_budget = 1e12) {
    return mat_vec(mat_inverse(m, cond_budget), b);
}

// Generalized cross product of n-1 vectors in R^n, defined by
//   <cross(u_1..u_{n-1}), w> = det[u_1 ... u_{n-1} w]   (columns, in order).
// Computed by cofactor expansion along the final column.
inline Vec cross_product(const std::vector<Vec>& u) {
    const int n = int(u.size()) + 1;
    for (auto& v : u)
        if (int(v.size()) != n) throw Error("cross_product: need n-1 vectors of length n");
    Vec res(n);
    RealMatrix minor(n - 1, n - 1);
    for (int drop = 0; drop < n; ++drop) {
        int r = 0;
        for (int i = 0; i < n; ++i) {
            if (i == drop) continue;
            for (int j = 0; j < n - 1; ++j) minor.at(r, j) = u[size_t(j)][size_t(i)];
            ++r;
        }
        double sign = ((drop + n - 1) % 2 == 0) ? 1.0 : -1.0;
        res[size_t(drop)] = sign * mat_det(minor);
    }
    return res;
}

// ---------------------------------------------------------------------- LLL

struct LLLResult {
    RealMatrix basis;    // reduced basis, columns, sign-normalized
    IntMatrix transform; // U with basis = input * U, det(U) = +-1
};

// Column j sign convention: first entry exceeding 1e-7 * |col| is positive.
inline void sign_normalize_columns(RealMatrix& b, IntMatrix* u = nullptr) {
    for (int j = 0; j < b.cols; ++j) {
        double nrm = 0;
        for (int i = 0; i < b.rows; ++i) nrm += sqr(b.at(i, j));
        nrm = std::sqrt(nrm);
        double flip = 0;
        for (int i = 0; i < b.rows; ++i) {
            if (std::fabs(b.at(i, j)) > 1e-7 * nrm) { flip = b.at(i, j) < 0 ? -1.0 : 1.0; break; }
        }
        if (flip < 0) {
            for (int i = 0; i < b.rows; ++i) b.at(i, j) = -b.at(i, j);
            if (u)
                for (int i = 0; i < u->rows; ++i) u->at(i, j) = -u->at(i, j);
        }
    }
}

// Textbook LLL on basis columns (delta = 0.99 by default downstream), tracking
// the integral change of basis.  Gram-Schmidt data is recomputed after swaps;
// fine at these dimensions, and it keeps the loop easy to audit.
inline LLLResult lll_reduce(const RealMatrix& input, double delta = 0.99) {
    const int m = input.cols;
    RealMatrix b = input;
    IntMatrix u = IntMatrix::identity(m);
    if (m <= 1) {
        LLLResult r{b, u};
        sign_normalize_columns(r.basis, &r.transform);
        return r;
    }

    std::vector<Vec> bs(m);   // Gram-Schmidt vectors
    std::vector<double> bn(m); // their squared norms
    std::vector<std::vector<double>> mu(m, std::vector<double>(m, 0.0));
    auto recompute = [&]() {
        for (int i = 0; i < m; ++i) {
            Vec v = b.column(i);
            for (int j = 0; j < i; ++j) {
                mu[i][j] = bn[j] > 0 ? dot(b.column(i), bs[j]) / bn[j] : 0.0;
                v = vec_sub(v, vec_scale(bs[j], mu[i][j]));
            }
            bs[i] = v;
            bn[i] = dot(v, v);
        }
    };
    recompute();

    int iter = 0, iter_cap = 10000 * m * m;
    int k = 1;
    while (k < m) {
        if (++iter > iter_cap) throw NumericalError("lll_reduce: iteration cap hit");
        for (int j = k - 1; j >= 0; --j) {
            double q = std::round(mu[k][j]);
            if (q != 0.0) {
                i64 qi = checked_i64(q, "lll_reduce coefficient");
                for (int i = 0; i < b.rows; ++i) b.at(i, k) -= q * b.at(i, j);
                for (int i = 0; i < m; ++i) u.at(i, k) -= BigInt(qi) * u.at(i, j);
                recompute();
            }
        }
        if (bn[k] >= (delta - mu[k][k - 1] * mu[k][k - 1]) * bn[k - 1]) {
            ++k;
        } else {
            for (int i = 0; i < b.rows; ++i) std::swap(b.at(i, k), b.at(i, k - 1));
            for (int i = 0; i < m; ++i) std::swap(u.at(i, k), u.at(i, k - 1));
            recompute();
            k = std::max(k - 1, 1);
        }
    }
    LLLResult r{b, u};
    sign_normalize_columns(r.basis, &r.transform);
    if (int_det(r.transform) != 1 && int_det(r.transform) != -1)
        throw NumericalError("lll_reduce: transform not unimodular");
    return r;
}

// Gram matrix of column vectors.
inline RealMatrix gram(const RealMatrix& b) {
    RealMatrix g(b.cols, b.cols);
    for (int i = 0; i < b.cols; ++i)
        for (int j = 0; j < b.cols; ++j) {
            double s = 0;
            for (int r = 0; r < b.rows; ++r) s += b.at(r, i) * b.at(r, j);
            g.at(i, j) = s;
        }
    return g;
}

// Coordinates of v in the column span of b (least squares via normal equations).
inline Vec span_coordinates(const RealMatrix& b, const Vec& v, double cond_budget = 1e12) {
    RealMatrix g = gram(b);
    Vec rhs(b.cols, 0.0);
    for (int j = 0; j < b.cols; ++j) rhs[size_t(j)] = dot(b.column(j), v);
    return mat_solve(g, rhs, cond_budget);
}

} // namespace latgrid
