#include "latgrid/equidist_stats.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

using namespace latgrid;

namespace {

// ---- reference implementations, written before the checks that use them ----

double naive_weyl(const std::vector<Vec>& pts, const std::vector<int>& k) {
    std::complex<double> s(0.0, 0.0);
    for (const Vec& x : pts) {
        double phase = 0.0;
        for (size_t j = 0; j < k.size(); ++j) phase += k[j] * x[j];
        s += std::polar(1.0, 2.0 * kPi * phase);
    }
    return std::abs(s) / double(pts.size());
}

// chi-square upper tails in closed form for small even/odd dof
double chi2_tail_dof1(double x) { return std::erfc(std::sqrt(x / 2.0)); }
double chi2_tail_dof2(double x) { return std::exp(-x / 2.0); }
double chi2_tail_dof4(double x) { return (1.0 + x / 2.0) * std::exp(-x / 2.0); }

// numeric mass of a shape cell by Simpson integration of the width function
double numeric_cell_mass(double x1, double x2, double y1, double y2) {
    auto width = [&](double y) {
        double w = std::sqrt(std::max(0.0, 1.0 - y * y));
        return std::max(0.0, x2 - std::max(x1, w));
    };
    const int n = 20000;
    double h = (y2 - y1) / n, s = 0.0;
    for (int i = 0; i <= n; ++i) {
        double y = y1 + h * i;
        double f = width(y) / (y * y);
        s += (i == 0 || i == n) ? f : (i % 2 ? 4.0 * f : 2.0 * f);
    }
    return s * h / 3.0;
}

// exact sampler for the reference shape density: u = -1/y and x are jointly
// uniform on the box, restricted to the domain x^2 + y^2 >= 1
std::vector<ShapePoint> hyperbolic_sample(size_t n, double y_cap, std::mt19937_64& g) {
    std::uniform_real_distribution<double> ux(0.0, 0.5);
    std::uniform_real_distribution<double> uu(-2.0 / std::sqrt(3.0), -1.0 / y_cap);
    std::vector<ShapePoint> out;
    while (out.size() < n) {
        double x = ux(g), y = -1.0 / uu(g);
        if (x * x + y * y < 1.0) continue;
        ShapePoint s;
        s.x = x;
        s.y = y;
        out.push_back(s);
    }
    return out;
}

} // namespace

TEST_CASE("weyl frequency enumeration is deterministic and complete") {
    auto f2 = weyl_frequencies(2, 3);
    REQUIRE(f2.size() == 48);
    REQUIRE(std::is_sorted(f2.begin(), f2.end()));
    REQUIRE(std::adjacent_find(f2.begin(), f2.end()) == f2.end());
    for (const auto& k : f2) {
        int inf = 0;
        for (int v : k) inf = std::max(inf, std::abs(v));
        REQUIRE(inf >= 1);
        REQUIRE(inf <= 3);
    }
    for (const auto& k : representative_frequencies(2))
        REQUIRE(std::find(f2.begin(), f2.end(), k) != f2.end());

    REQUIRE(weyl_frequencies(1, 3).size() == 6);
    REQUIRE(weyl_frequencies(2, 1).size() == 8);
    REQUIRE_THROWS_AS(weyl_frequencies(0, 3), ConfigError);
    REQUIRE_THROWS_AS(representative_frequencies(3), ConfigError);
}

TEST_CASE("weyl sums match the direct formula") {
    auto g = oracle::rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec> pts;
    for (int i = 0; i < 500; ++i) pts.push_back(Vec{u(g), u(g)});

    WeylSumReport r = weyl_sums(pts, 3);
    REQUIRE(r.n == 500);
    for (size_t i = 0; i < r.frequencies.size(); ++i) {
        REQUIRE(r.magnitudes[i] >= 0.0);
        REQUIRE(r.magnitudes[i] <= 1.0 + 1e-12);
        REQUIRE(r.magnitudes[i] == Catch::Approx(naive_weyl(pts, r.frequencies[i])).margin(1e-12));
    }

    // permutation invariance
    std::vector<Vec> shuffled = pts;
    std::shuffle(shuffled.begin(), shuffled.end(), g);
    WeylSumReport r2 = weyl_sums(shuffled, 3);
    for (size_t i = 0; i < r.magnitudes.size(); ++i)
        REQUIRE(r.magnitudes[i] == Catch::Approx(r2.magnitudes[i]).margin(1e-12));

    // chunked accumulation merges to the same result
    WeylAccumulator a(2, 3), b(2, 3), c(2, 3);
    for (size_t i = 0; i < pts.size(); ++i)
        (i % 3 == 0 ? a : (i % 3 == 1 ? b : c)).add(pts[i]);
    WeylAccumulator whole;
    whole.merge(a);
    whole.merge(b);
    whole.merge(c);
    WeylSumReport rm = whole.report();
    REQUIRE(rm.n == 500);
    for (size_t i = 0; i < r.magnitudes.size(); ++i)
        REQUIRE(rm.magnitudes[i] == Catch::Approx(r.magnitudes[i]).margin(1e-12));

    REQUIRE_THROWS_AS(weyl_sums({}, 3), ConfigError);
    REQUIRE_THROWS_AS(WeylAccumulator(2, 3).report(), ConfigError);
}

TEST_CASE("weyl sums on degenerate and lattice samples") {
    // one repeated point: every |S_k| is 1
    std::vector<Vec> rep(100, Vec{0.3721, 0.9114});
    WeylSumReport r = weyl_sums(rep, 3);
    for (double m : r.magnitudes) REQUIRE(m == Catch::Approx(1.0).margin(1e-12));

    // regular m x m grid: |S_k| = 1 when m divides every coordinate of k, else 0
    for (int m : {2, 4}) {
        std::vector<Vec> grid;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) grid.push_back(Vec{double(i) / m, double(j) / m});
        WeylSumReport rg = weyl_sums(grid, 3);
        for (size_t i = 0; i < rg.frequencies.size(); ++i) {
            bool divisible = rg.frequencies[i][0] % m == 0 && rg.frequencies[i][1] % m == 0;
            REQUIRE(rg.magnitudes[i] == Catch::Approx(divisible ? 1.0 : 0.0).margin(1e-12));
        }
    }

    // uniform sample at scale: all frequencies small
    auto g = oracle::rng(1234);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    WeylAccumulator acc(2, 3);
    for (int i = 0; i < 1000000; ++i) acc.add(Vec{u(g), u(g)});
    REQUIRE(acc.report().max_magnitude() < 0.005);
}

TEST_CASE("chi-square tail matches closed forms") {
    for (double x : {0.5, 1.0, 2.0, 3.7, 5.0, 9.0, 15.0, 25.0}) {
        REQUIRE(chi2_upper_tail(x, 1) == Catch::Approx(chi2_tail_dof1(x)).epsilon(1e-10));
        REQUIRE(chi2_upper_tail(x, 2) == Catch::Approx(chi2_tail_dof2(x)).epsilon(1e-10));
        REQUIRE(chi2_upper_tail(x, 4) == Catch::Approx(chi2_tail_dof4(x)).epsilon(1e-10));
    }
    REQUIRE(chi2_upper_tail(0.0, 3) == 1.0);
    double prev = 1.0;
    for (double x = 0.5; x < 40.0; x += 0.5) {
        double p = chi2_upper_tail(x, 7);
        REQUIRE(p < prev);
        prev = p;
    }
    REQUIRE(chi2_upper_tail(7.0, 7) > 0.3);
    REQUIRE(chi2_upper_tail(7.0, 7) < 0.6);
    REQUIRE_THROWS_AS(chi2_upper_tail(1.0, 0), ConfigError);
}

TEST_CASE("shape cell masses agree with numeric integration") {
    auto g = oracle::rng(99);
    std::uniform_real_distribution<double> ux(0.0, 0.5), uy(std::sqrt(3.0) / 2, 2.5);
    for (int trial = 0; trial < 30; ++trial) {
        double x1 = ux(g), x2 = ux(g);
        if (x1 > x2) std::swap(x1, x2);
        double y1 = uy(g), y2 = uy(g);
        if (y1 > y2) std::swap(y1, y2);
        if (x2 - x1 < 1e-3 || y2 - y1 < 1e-3) continue;
        double exact = detail::clipped_cell_mass(x1, x2, y1, y2);
        double numeric = numeric_cell_mass(x1, x2, y1, y2);
        REQUIRE(exact == Catch::Approx(numeric).margin(1e-9 * (1.0 + exact)));
    }

    // the grid masses total the capped domain measure: pi/6 - (1/2)/y_cap
    for (double y_cap : {10.0, 25.0}) {
        auto bins = make_shape_bins(24, 6, y_cap);
        double total = 0.0;
        for (const auto& b : bins) total += b.mass;
        REQUIRE(total == Catch::Approx(kPi / 6.0 - 0.5 / y_cap).margin(1e-12));
    }

    // refining a cell into quarters preserves its mass exactly
    auto bins = make_shape_bins(8, 4, 10.0);
    for (const auto& b : bins) {
        double xm = 0.5 * (b.x_lo + b.x_hi), ym = 0.5 * (b.y_lo + b.y_hi);
        double parts = detail::clipped_cell_mass(b.x_lo, xm, b.y_lo, ym) +
                       detail::clipped_cell_mass(xm, b.x_hi, b.y_lo, ym) +
                       detail::clipped_cell_mass(b.x_lo, xm, ym, b.y_hi) +
                       detail::clipped_cell_mass(xm, b.x_hi, ym, b.y_hi);
        REQUIRE(parts == Catch::Approx(b.mass).margin(1e-14));
    }
}

TEST_CASE("shape histogram and goodness of fit") {
    auto g = oracle::rng(2024);
    auto sample = hyperbolic_sample(100000, 10.0, g);
    ShapeHistogram h = shape_histogram(sample, 24, 6, 10.0);
    REQUIRE(h.total == 100000);
    REQUIRE(h.cusp_observed == 0); // sampler is capped
    double mass_sum = 0.0;
    i64 obs_sum = 0;
    for (const auto& b : h.bins) {
        mass_sum += b.mass;
        obs_sum += b.observed;
    }
    REQUIRE(mass_sum == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(obs_sum == h.in_cap);
    REQUIRE(h.in_cap == h.total - h.cusp_observed);

    Chi2Result r = shape_chi2(h, 50.0);
    REQUIRE(r.tv < 0.02);
    REQUIRE(r.dof >= 19);
    REQUIRE(r.p_value > 1e-8); // sampler matches its own density

    // a point mass concentrates in one bin
    std::vector<ShapePoint> atom(2000);
    for (auto& s : atom) {
        s.x = 0.0;
        s.y = 1.0;
    }
    Chi2Result ra = shape_chi2(shape_histogram(atom, 24, 6, 10.0), 50.0);
    REQUIRE(ra.tv > 0.9);
    REQUIRE(ra.p_value < 1e-12);

    // cusp points are kept out of the binned mass
    std::vector<ShapePoint> cusp(10);
    for (auto& s : cusp) {
        s.x = 0.1;
        s.y = 50.0;
    }
    ShapeHistogram hc = shape_histogram(cusp, 24, 6, 10.0);
    REQUIRE(hc.cusp_observed == 10);
    REQUIRE(hc.in_cap == 0);
    REQUIRE(hc.cusp_expected == Catch::Approx((0.05) / (kPi / 6.0)).margin(1e-12));

    // undersized samples are rejected rather than silently pooled to nothing
    auto tiny = hyperbolic_sample(40, 10.0, g);
    REQUIRE_THROWS_AS(shape_chi2(shape_histogram(tiny, 24, 6, 10.0), 50.0), ConfigError);
}

TEST_CASE("torsion census partitions the sample") {
    std::vector<int> orders = {1, 1, 3, 3, 3, 2, 0, 12, 13, 1};
    TorsionHistogram h = torsion_census(orders, 12);
    REQUIRE(h.total == 10);
    REQUIRE(h.counts[0] == 3);
    REQUIRE(h.counts[1] == 1);
    REQUIRE(h.counts[2] == 3);
    REQUIRE(h.counts[11] == 1);
    REQUIRE(h.unclassified == 2); // the 0 and the 13
    i64 sum = h.unclassified;
    for (i64 c : h.counts) sum += c;
    REQUIRE(sum == h.total);
    REQUIRE(h.fraction(3) == Catch::Approx(0.3));

    // recompute from grid points: torsion of (1/2, 0) is 2, of (1/3, 1/3) is 3
    GridPoint a;
    a.lat_basis = RealMatrix::identity(2);
    a.translation = {0.5, 0.0};
    GridPoint b;
    b.lat_basis = RealMatrix::identity(2);
    b.translation = {1.0 / 3.0, 1.0 / 3.0};
    GridPoint c;
    c.lat_basis = RealMatrix::identity(2);
    c.translation = {0.1371, 0.7319};
    TorsionHistogram hg = torsion_census(std::vector<GridPoint>{a, b, c}, 5);
    REQUIRE(hg.counts[1] == 1);
    REQUIRE(hg.counts[2] == 1);
    REQUIRE(hg.unclassified == 1);

    REQUIRE_THROWS_AS(torsion_census(orders, 0), ConfigError);
}

TEST_CASE("two atom fit") {
    std::vector<double> all_half(50, 0.5);
    TwoAtomFit f = two_atom_fit(all_half);
    REQUIRE(f.mass0 == 0.0);
    REQUIRE(f.mass1 == 1.0);
    REQUIRE(f.outliers == 0);

    // 30% at 0 (some wrapped just below 1), 70% at 1/2, within tolerance
    std::vector<double> mixed;
    for (int i = 0; i < 30; ++i) mixed.push_back(i % 2 ? 1e-8 : 1.0 - 1e-8);
    for (int i = 0; i < 70; ++i) mixed.push_back(0.5 + (i % 2 ? 1e-8 : -1e-8));
    TwoAtomFit fm = two_atom_fit(mixed, 0.0, 0.5, 1e-6);
    REQUIRE(fm.mass0 == Catch::Approx(0.3));
    REQUIRE(fm.mass1 == Catch::Approx(0.7));
    REQUIRE(fm.outliers == 0);

    // shrinking the tolerance can only move mass to outliers
    std::vector<double> spread;
    auto g = oracle::rng(5);
    std::uniform_real_distribution<double> u(-1e-3, 1e-3);
    for (int i = 0; i < 500; ++i) spread.push_back(mod1((i % 2 ? 0.0 : 0.5) + u(g)));
    double prev0 = 2.0, prev1 = 2.0;
    for (double tol : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
        TwoAtomFit ft = two_atom_fit(spread, 0.0, 0.5, tol);
        REQUIRE(ft.mass0 <= prev0);
        REQUIRE(ft.mass1 <= prev1);
        prev0 = ft.mass0;
        prev1 = ft.mass1;
        REQUIRE(ft.mass0 + ft.mass1 + double(ft.outliers) / double(ft.total) ==
                Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("joint independence chi-square") {
    // exact product table: statistic is identically zero
    std::vector<std::vector<i64>> prod = {{100, 300}, {200, 600}};
    Chi2Result r0 = joint_independence_chi2(prod);
    REQUIRE(r0.stat == Catch::Approx(0.0).margin(1e-9));
    REQUIRE(r0.dof == 1);
    REQUIRE(r0.p_value == Catch::Approx(1.0).margin(1e-9));

    // random independent multinomial lands near its degrees of freedom
    auto g = oracle::rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double pr[3] = {0.2, 0.3, 0.5}, pc[4] = {0.1, 0.2, 0.3, 0.4};
    std::vector<std::vector<i64>> table(3, std::vector<i64>(4, 0));
    for (int i = 0; i < 50000; ++i) {
        double a = u(g), b = u(g);
        int ri = a < pr[0] ? 0 : (a < pr[0] + pr[1] ? 1 : 2);
        int ci = b < pc[0] ? 0 : (b < pc[0] + pc[1] ? 1 : (b < pc[0] + pc[1] + pc[2] ? 2 : 3));
        ++table[size_t(ri)][size_t(ci)];
    }
    Chi2Result ri = joint_independence_chi2(table);
    REQUIRE(ri.dof == 6);
    REQUIRE(ri.stat < 30.0);
    REQUIRE(ri.p_value > 1e-4);

    // perfectly correlated sample blows up
    std::vector<std::vector<i64>> diag = {{500, 0}, {0, 500}};
    Chi2Result rd = joint_independence_chi2(diag);
    REQUIRE(rd.stat > 100.0);
    REQUIRE(rd.p_value < 1e-12);

    REQUIRE_THROWS_AS(joint_independence_chi2({{5, 5}, {5, 5}}), ConfigError); // expected < 20
    REQUIRE_THROWS_AS(joint_independence_chi2({{100, 100}}), ConfigError);    // single row
}

TEST_CASE("convergence report") {
    std::vector<double> cps = {1e4, 1e5, 1e6};
    auto falling = [](double t) { return 1.0 / t; };
    ConvergenceReport r = convergence_report(cps, falling);
    REQUIRE(r.rows.size() == 3);
    REQUIRE(r.decreasing_steps == 2);
    REQUIRE(r.increasing_steps == 0);
    REQUIRE(r.rows[1].checkpoint == 1e5);
    REQUIRE(r.rows[1].value == Catch::Approx(1e-5));

    ConvergenceReport rc = convergence_report(cps, [](double) { return 42.0; });
    REQUIRE(rc.decreasing_steps == 0);
    REQUIRE(rc.increasing_steps == 0);

    REQUIRE_THROWS_AS(convergence_report({1e4}, falling), ConfigError);
    REQUIRE_THROWS_AS(convergence_report({1e5, 1e4}, falling), ConfigError);
}

TEST_CASE("report stamping propagates the run id") {
    EquidistReport rep;
    rep.weyl.push_back(WeylSumReport{});
    rep.weyl.push_back(WeylSumReport{});
    rep.stamp("run-17");
    REQUIRE(rep.run_id == "run-17");
    for (const auto& w : rep.weyl) REQUIRE(w.run_id == "run-17");
    REQUIRE(rep.shape.run_id == "run-17");
    REQUIRE(rep.torsion.run_id == "run-17");
    REQUIRE(rep.two_atom.run_id == "run-17");
    REQUIRE(rep.joint.run_id == "run-17");
}

TEST_CASE("quantile joint table") {
    // two rationally independent Kronecker sequences: jointly equidistributed,
    // so an independence test must accept at a comfortable p-value
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0), rt2 = std::sqrt(2.0) - 1.0;
    std::vector<double> a, t;
    for (int i = 1; i <= 400; ++i) {
        a.push_back(std::fmod(i * phi, 1.0));
        t.push_back(std::fmod(i * rt2, 1.0));
    }
    auto table = quantile_joint_table(a, t, 4, 4);
    REQUIRE(table.size() == 4);
    for (const auto& row : table) {
        REQUIRE(row.size() == 4);
        i64 sum = 0;
        for (i64 c : row) sum += c;
        REQUIRE(sum >= 98); // quantile strips stay balanced up to edge ties
        REQUIRE(sum <= 102);
    }
    Chi2Result ind = joint_independence_chi2(table, 5.0);
    REQUIRE(ind.dof == 9);
    REQUIRE(ind.p_value > 0.05);

    // a deterministic monotone coupling concentrates on the diagonal blocks
    auto coupled = quantile_joint_table(a, a, 4, 4);
    Chi2Result dep = joint_independence_chi2(coupled, 5.0);
    REQUIRE(dep.p_value < 1e-12);

    REQUIRE_THROWS_AS(quantile_joint_table(a, t, 1, 4), ConfigError);
    REQUIRE_THROWS_AS(quantile_joint_table({1.0, 2.0}, {0.5}, 2, 2), ConfigError);
    std::vector<double> tiny = {0.1, 0.2, 0.3};
    REQUIRE_THROWS_AS(quantile_joint_table(tiny, tiny, 2, 2), ConfigError);
}
