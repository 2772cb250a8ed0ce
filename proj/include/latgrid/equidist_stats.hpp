#pragma once

// Statistical layer: turns streams of torus points, shapes, and torsion
// orders into equidistribution evidence.  Everything is built from mergeable
// accumulators so chunked runs can be reduced deterministically.
//
// Reference measure for rank-2 shapes: density proportional to dx dy / y^2 on
// the folded domain {0 <= x <= 1/2, x^2 + y^2 >= 1}, truncated at y_cap; the
// cusp mass above y_cap is tracked separately.  Cell masses are computed in
// closed form, so refining a binning and re-aggregating is exact.

#include "latgrid/common.hpp"
#include "latgrid/lattice_grid.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

namespace latgrid {

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Weyl sums

struct WeylSumReport {
    std::vector<std::vector<int>> frequencies;
    std::vector<double> magnitudes; // |S_k| = |sum exp(2 pi i <k,x>)| / N
    i64 n = 0;
    std::string run_id;

    double max_magnitude() const {
        double m = 0.0;
        for (double v : magnitudes) m = std::max(m, v);
        return m;
    }
    double magnitude_of(const std::vector<int>& k) const {
        for (size_t i = 0; i < frequencies.size(); ++i)
            if (frequencies[i] == k) return magnitudes[i];
        throw ConfigError("WeylSumReport: frequency not tracked");
    }
};

// All integer vectors k with 0 < |k|_inf <= kmax, in lexicographic order.
inline std::vector<std::vector<int>> weyl_frequencies(int dim, int kmax) {
    if (dim < 1 || kmax < 1) throw ConfigError("weyl_frequencies: bad dimension or bound");
    std::vector<std::vector<int>> out;
    std::vector<int> k(size_t(dim), -kmax);
    for (;;) {
        bool zero = true;
        for (int v : k)
            if (v != 0) { zero = false; break; }
        if (!zero) out.push_back(k);
        int pos = dim - 1;
        while (pos >= 0 && k[size_t(pos)] == kmax) k[size_t(pos--)] = -kmax;
        if (pos < 0) break;
        ++k[size_t(pos)];
    }
    return out;
}

// Small fixed set used for convergence tracking across checkpoints.
inline std::vector<std::vector<int>> representative_frequencies(int dim) {
    if (dim == 1) return {{1}, {2}, {3}};
    if (dim == 2)
        return {{1, 0}, {0, 1}, {1, 1}, {1, -1}, {2, 0}, {0, 2}, {2, 1}, {1, 2}};
    throw ConfigError("representative_frequencies: only dimensions 1 and 2 are tracked");
}

struct WeylAccumulator {
    int dim = 0, kmax = 0;
    std::vector<std::vector<int>> frequencies;
    std::vector<std::complex<double>> sums;
    i64 n = 0;

    WeylAccumulator() = default;
    WeylAccumulator(int dim_, int kmax_)
        : dim(dim_), kmax(kmax_), frequencies(weyl_frequencies(dim_, kmax_)),
          sums(frequencies.size(), {0.0, 0.0}) {}

    void add(const Vec& x) {
        if (int(x.size()) != dim) throw ConfigError("WeylAccumulator: dimension mismatch");
        // powers e^{2 pi i m x_j} for m in [-kmax, kmax], per coordinate
        static thread_local std::vector<std::complex<double>> pw;
        const size_t stride = size_t(2 * kmax + 1);
        pw.assign(size_t(dim) * stride, {1.0, 0.0});
        for (int j = 0; j < dim; ++j) {
            std::complex<double>* row = pw.data() + size_t(j) * stride;
            const std::complex<double> e1 = std::polar(1.0, 2.0 * kPi * x[size_t(j)]);
            row[size_t(kmax)] = {1.0, 0.0};
            for (int m = 1; m <= kmax; ++m) {
                row[size_t(kmax + m)] = row[size_t(kmax + m - 1)] * e1;
                row[size_t(kmax - m)] = std::conj(row[size_t(kmax + m)]);
            }
        }
        for (size_t i = 0; i < frequencies.size(); ++i) {
            std::complex<double> v(1.0, 0.0);
            for (int j = 0; j < dim; ++j)
                v *= pw[size_t(j) * stride + size_t(kmax + frequencies[i][size_t(j)])];
            sums[i] += v;
        }
        ++n;
    }

    void merge(const WeylAccumulator& o) {
        if (o.n == 0) return;
        if (dim == 0) { *this = o; return; }
        if (o.dim != dim || o.kmax != kmax)
            throw ConfigError("WeylAccumulator: merge shape mismatch");
        for (size_t i = 0; i < sums.size(); ++i) sums[i] += o.sums[i];
        n += o.n;
    }

    WeylSumReport report() const {
        if (n == 0) throw ConfigError("WeylAccumulator: empty sample");
        WeylSumReport r;
        r.frequencies = frequencies;
        r.n = n;
        r.magnitudes.reserve(sums.size());
        for (const auto& s : sums) r.magnitudes.push_back(std::abs(s) / double(n));
        return r;
    }
};

inline WeylSumReport weyl_sums(const std::vector<Vec>& points, int kmax) {
    if (points.empty()) throw ConfigError("weyl_sums: empty sample");
    WeylAccumulator acc(int(points[0].size()), kmax);
    for (const Vec& p : points) acc.add(p);
    return acc.report();
}

inline WeylSumReport weyl_sums_scalar(const std::vector<double>& points, int kmax) {
    if (points.empty()) throw ConfigError("weyl_sums: empty sample");
    WeylAccumulator acc(1, kmax);
    for (double p : points) acc.add(Vec{p});
    return acc.report();
}

// ---------------------------------------------------------------------------
// Torsion census

struct TorsionHistogram {
    std::vector<i64> counts; // counts[m-1] = number of samples with order m
    i64 unclassified = 0;
    i64 total = 0;
    std::string run_id;

    double fraction(int m) const {
        if (total == 0 || m < 1 || m > int(counts.size())) return 0.0;
        return double(counts[size_t(m - 1)]) / double(total);
    }
};

inline TorsionHistogram torsion_census(const std::vector<int>& orders, int m_max) {
    if (m_max < 1) throw ConfigError("torsion_census: m_max must be positive");
    TorsionHistogram h;
    h.counts.assign(size_t(m_max), 0);
    for (int m : orders) {
        if (m >= 1 && m <= m_max)
            ++h.counts[size_t(m - 1)];
        else
            ++h.unclassified;
        ++h.total;
    }
    return h;
}

inline TorsionHistogram torsion_census(const std::vector<GridPoint>& grids, int m_max,
                                       const Tolerances& tol = {}) {
    std::vector<int> orders;
    orders.reserve(grids.size());
    Tolerances t = tol;
    t.torsion_mmax = m_max;
    for (const GridPoint& g : grids)
        orders.push_back(torsion_order(g.lat_basis, g.translation, t));
    return torsion_census(orders, m_max);
}

// ---------------------------------------------------------------------------
// Two-atom fit for scalar torus samples

struct TwoAtomFit {
    double mass0 = 0.0, mass1 = 0.0;
    i64 outliers = 0;
    i64 total = 0;
    std::string run_id;
};

inline TwoAtomFit two_atom_fit(const std::vector<double>& points, double atom0 = 0.0,
                               double atom1 = 0.5, double tol = 1e-6) {
    TwoAtomFit f;
    i64 c0 = 0, c1 = 0;
    for (double x : points) {
        double d0 = int_dist(x - atom0), d1 = int_dist(x - atom1);
        if (d0 <= tol && d0 <= d1)
            ++c0;
        else if (d1 <= tol)
            ++c1;
        else
            ++f.outliers;
    }
    f.total = i64(points.size());
    if (f.total > 0) {
        f.mass0 = double(c0) / double(f.total);
        f.mass1 = double(c1) / double(f.total);
    }
    return f;
}

// ---------------------------------------------------------------------------
// Shape histogram against the hyperbolic reference measure

namespace detail {

// antiderivative of sqrt(1-y^2)/y^2 on (0, 1]
inline double circ_antideriv(double y) {
    y = std::min(y, 1.0);
    return -std::sqrt(std::max(0.0, 1.0 - y * y)) / y - std::asin(y);
}

// integral of the domain width over a cell [x1,x2] x [y1,y2] against dy/y^2,
// where the domain is {x >= sqrt(max(0, 1-y^2))}
inline double clipped_cell_mass(double x1, double x2, double y1, double y2) {
    if (!(x2 > x1) || !(y2 > y1)) return 0.0;
    auto inv_int = [](double lo, double hi) { return 1.0 / lo - 1.0 / hi; };
    const double ya = std::sqrt(std::max(0.0, 1.0 - x2 * x2)); // below: cell fully outside
    const double yb = std::sqrt(std::max(0.0, 1.0 - x1 * x1)); // above: full width
    double mass = 0.0;
    double a_lo = std::max(y1, ya), a_hi = std::min({y2, yb, 1.0});
    if (a_hi > a_lo)
        mass += x2 * inv_int(a_lo, a_hi) - (circ_antideriv(a_hi) - circ_antideriv(a_lo));
    double b_lo = std::max(y1, yb), b_hi = y2;
    if (b_hi > b_lo) mass += (x2 - x1) * inv_int(b_lo, b_hi);
    return mass;
}

} // namespace detail

struct ShapeBin {
    double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
    double mass = 0.0; // unnormalized reference mass of the cell
    i64 observed = 0;
};

// Rows uniform in u = -1/y between y = sqrt(3)/2 and y_cap, columns uniform in
// x over [0, 1/2].  Cells with zero reference mass are dropped.
inline std::vector<ShapeBin> make_shape_bins(int rows, int cols, double y_cap = 10.0) {
    if (rows < 1 || cols < 1 || !(y_cap > 1.0))
        throw ConfigError("make_shape_bins: bad bin counts or cap");
    const double u_lo = -2.0 / std::sqrt(3.0), u_hi = -1.0 / y_cap;
    std::vector<ShapeBin> bins;
    for (int i = 0; i < rows; ++i) {
        double u1 = u_lo + (u_hi - u_lo) * double(i) / rows;
        double u2 = u_lo + (u_hi - u_lo) * double(i + 1) / rows;
        double y1 = -1.0 / u1, y2 = -1.0 / u2;
        for (int j = 0; j < cols; ++j) {
            ShapeBin b;
            b.x_lo = 0.5 * double(j) / cols;
            b.x_hi = 0.5 * double(j + 1) / cols;
            b.y_lo = y1;
            b.y_hi = y2;
            b.mass = detail::clipped_cell_mass(b.x_lo, b.x_hi, y1, y2);
            if (b.mass > 0) bins.push_back(b);
        }
    }
    return bins;
}

struct ShapeHistogram {
    std::vector<ShapeBin> bins; // masses normalized to sum to 1 over the capped domain
    double y_cap = 10.0;
    i64 in_cap = 0;
    i64 cusp_observed = 0;
    double cusp_expected = 0.0; // fraction of the full folded measure pi/6
    i64 total = 0;
    std::string run_id;
};

inline ShapeHistogram shape_histogram(const std::vector<ShapePoint>& shapes,
                                      int rows = 24, int cols = 6, double y_cap = 10.0) {
    ShapeHistogram h;
    h.y_cap = y_cap;
    h.bins = make_shape_bins(rows, cols, y_cap);
    double total_mass = 0.0;
    for (const ShapeBin& b : h.bins) total_mass += b.mass;
    for (ShapeBin& b : h.bins) b.mass /= total_mass;
    h.cusp_expected = (0.5 / y_cap) / (kPi / 6.0);

    const double eps = 1e-9;
    for (const ShapePoint& s : shapes) {
        ++h.total;
        if (s.y > y_cap) {
            ++h.cusp_observed;
            continue;
        }
        if (s.x < -eps || s.x > 0.5 + eps || s.y < std::sqrt(3.0) / 2 - eps)
            throw ConfigError("shape_histogram: point outside the reduced domain");
        bool placed = false;
        for (ShapeBin& b : h.bins) {
            // half-open cells, with the global boundary rows/cols closed
            bool in_x = s.x >= b.x_lo - eps && (s.x < b.x_hi || (b.x_hi > 0.5 - eps && s.x <= b.x_hi + eps));
            bool in_y = s.y >= b.y_lo - eps * 10 && (s.y < b.y_hi || (b.y_hi > y_cap - eps && s.y <= b.y_hi + eps));
            if (in_x && in_y) {
                ++b.observed;
                ++h.in_cap;
                placed = true;
                break;
            }
        }
        if (!placed) { // boundary sliver under the unit circle arc
            double best = 1e300;
            ShapeBin* bb = nullptr;
            for (ShapeBin& b : h.bins) {
                double cx = std::max(b.x_lo - s.x, std::max(s.x - b.x_hi, 0.0));
                double cy = std::max(b.y_lo - s.y, std::max(s.y - b.y_hi, 0.0));
                double d = cx * cx + cy * cy;
                if (d < best) { best = d; bb = &b; }
            }
            ++bb->observed;
            ++h.in_cap;
        }
    }
    return h;
}

// ---------------------------------------------------------------------------
// Chi-square machinery

namespace detail {

// regularized upper incomplete gamma Q(a, x)
inline double gamma_q(double a, double x) {
    if (x < 0 || a <= 0) throw ConfigError("gamma_q: bad arguments");
    if (x == 0) return 1.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) { // series for P(a,x)
        double ap = a, del = 1.0 / a, sum = del;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
        }
        double p = sum * std::exp(-x + a * std::log(x) - lg);
        return std::max(0.0, 1.0 - p);
    }
    // continued fraction for Q(a,x), modified Lentz
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, hh = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        hh *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - lg) * hh;
}

} // namespace detail

inline double chi2_upper_tail(double stat, int dof) {
    if (dof < 1) throw ConfigError("chi2_upper_tail: dof must be positive");
    if (stat <= 0) return 1.0;
    return detail::gamma_q(0.5 * dof, 0.5 * stat);
}

struct Chi2Result {
    double stat = 0.0;
    int dof = 0;
    double p_value = 1.0;
    double tv = 0.0; // total variation distance on the binned partition
    std::string run_id;
};

// Pools bins in stored order until each group has expected count >= min_expected,
// then runs the goodness-of-fit test on the pooled partition.
inline Chi2Result shape_chi2(const ShapeHistogram& h, double min_expected = 50.0) {
    if (h.in_cap <= 0) throw ConfigError("shape_chi2: no in-cap samples");
    std::vector<double> exp_mass;
    std::vector<i64> obs;
    double acc_mass = 0.0;
    i64 acc_obs = 0;
    for (const ShapeBin& b : h.bins) {
        acc_mass += b.mass;
        acc_obs += b.observed;
        if (acc_mass * double(h.in_cap) >= min_expected) {
            exp_mass.push_back(acc_mass);
            obs.push_back(acc_obs);
            acc_mass = 0.0;
            acc_obs = 0;
        }
    }
    if (acc_mass > 0 || acc_obs > 0) {
        if (!exp_mass.empty() && acc_mass * double(h.in_cap) < min_expected) {
            exp_mass.back() += acc_mass;
            obs.back() += acc_obs;
        } else {
            exp_mass.push_back(acc_mass);
            obs.push_back(acc_obs);
        }
    }
    if (exp_mass.size() < 2)
        throw ConfigError("shape_chi2: sample too small for the requested bin resolution");

    Chi2Result r;
    r.dof = int(exp_mass.size()) - 1;
    for (size_t i = 0; i < exp_mass.size(); ++i) {
        double e = exp_mass[i] * double(h.in_cap);
        double d = double(obs[i]) - e;
        r.stat += d * d / e;
        r.tv += std::fabs(double(obs[i]) / double(h.in_cap) - exp_mass[i]);
    }
    r.tv *= 0.5;
    r.p_value = chi2_upper_tail(r.stat, r.dof);
    return r;
}

inline Chi2Result joint_independence_chi2(const std::vector<std::vector<i64>>& table,
                                          double min_expected = 20.0) {
    const size_t nr = table.size();
    if (nr < 2) throw ConfigError("joint_independence_chi2: need at least 2 rows");
    const size_t nc = table[0].size();
    if (nc < 2) throw ConfigError("joint_independence_chi2: need at least 2 columns");
    std::vector<double> row(nr, 0.0), col(nc, 0.0);
    double n = 0.0;
    for (size_t i = 0; i < nr; ++i) {
        if (table[i].size() != nc) throw ConfigError("joint_independence_chi2: ragged table");
        for (size_t j = 0; j < nc; ++j) {
            if (table[i][j] < 0) throw ConfigError("joint_independence_chi2: negative count");
            row[i] += double(table[i][j]);
            col[j] += double(table[i][j]);
            n += double(table[i][j]);
        }
    }
    if (n <= 0) throw ConfigError("joint_independence_chi2: empty table");
    Chi2Result r;
    r.dof = int(nr - 1) * int(nc - 1);
    for (size_t i = 0; i < nr; ++i)
        for (size_t j = 0; j < nc; ++j) {
            double e = row[i] * col[j] / n;
            if (e < min_expected)
                throw ConfigError("joint_independence_chi2: expected cell count below threshold");
            double d = double(table[i][j]) - e;
            r.stat += d * d / e;
        }
    r.p_value = chi2_upper_tail(r.stat, r.dof);
    return r;
}

// Contingency table for an independence test between a real statistic and a
// torus coordinate.  Rows are quantile strips of `a` (so row sums stay
// balanced regardless of how `a` is distributed), columns are fixed uniform
// bins of `t` mod 1.  Ties on a quantile edge go to the lower strip.
inline std::vector<std::vector<i64>> quantile_joint_table(const std::vector<double>& a,
                                                          const std::vector<double>& t,
                                                          int rows, int cols) {
    if (rows < 2 || cols < 2) throw ConfigError("quantile_joint_table: need at least 2x2");
    if (a.size() != t.size()) throw ConfigError("quantile_joint_table: length mismatch");
    const size_t n = a.size();
    if (n < size_t(rows) * size_t(cols)) throw ConfigError("quantile_joint_table: too few samples");
    std::vector<double> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edge(static_cast<size_t>(rows - 1));
    for (int i = 1; i < rows; ++i)
        edge[static_cast<size_t>(i - 1)] = sorted[n * size_t(i) / size_t(rows)];
    std::vector<std::vector<i64>> table(static_cast<size_t>(rows),
                                        std::vector<i64>(static_cast<size_t>(cols), 0));
    for (size_t k = 0; k < n; ++k) {
        size_t i = size_t(std::lower_bound(edge.begin(), edge.end(), a[k]) - edge.begin());
        double frac = t[k] - std::floor(t[k]);
        size_t j = std::min(size_t(frac * cols), size_t(cols - 1));
        table[i][j] += 1;
    }
    return table;
}

// ---------------------------------------------------------------------------
// Convergence tracking

struct ConvergenceRow {
    double checkpoint = 0.0;
    double value = 0.0;
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    int decreasing_steps = 0;
    int increasing_steps = 0;
    std::string run_id;
};

template <class Fn>
ConvergenceReport convergence_report(const std::vector<double>& checkpoints, Fn&& stat) {
    if (checkpoints.size() < 2)
        throw ConfigError("convergence_report: need at least two checkpoints");
    for (size_t i = 0; i + 1 < checkpoints.size(); ++i)
        if (!(checkpoints[i] < checkpoints[i + 1]))
            throw ConfigError("convergence_report: checkpoints must increase");
    ConvergenceReport r;
    for (double t : checkpoints) r.rows.push_back({t, double(stat(t))});
    for (size_t i = 0; i + 1 < r.rows.size(); ++i) {
        double d = r.rows[i + 1].value - r.rows[i].value;
        if (d < 0)
            ++r.decreasing_steps;
        else if (d > 0)
            ++r.increasing_steps;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Combined report

struct EquidistReport {
    std::string run_id;
    int degree = 0;
    Signature sig;
    std::string hyperplane; // label for the choice of E
    std::vector<double> checkpoints;
    std::vector<WeylSumReport> weyl;
    ShapeHistogram shape;
    TorsionHistogram torsion;
    TwoAtomFit two_atom;
    Chi2Result joint;

    void stamp(const std::string& id) {
        run_id = id;
        for (auto& w : weyl) w.run_id = id;
        shape.run_id = id;
        torsion.run_id = id;
        two_atom.run_id = id;
        joint.run_id = id;
    }
};

} // namespace latgrid
