#pragma once

// Shared error types, tolerances and small utilities used across latgrid.

#include <cstdint>
#include <cstdio>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace latgrid {

using i64 = long long;

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Ill-conditioned input, lost precision, failed refinement.  CLI maps this to exit code 1.
struct NumericalError : Error {
    explicit NumericalError(const std::string& msg) : Error("numerical: " + msg) {}
};

// Bad flags, inadmissible subspace parameters and the like.  Exit code 2.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config: " + msg) {}
};

// Filesystem / cache / ingest stream problems.  Exit code 3.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("io: " + msg) {}
};

// Defaults, pinned once.  Everything downstream takes these explicitly so tests
// can tighten or relax individual knobs without global state.
struct Tolerances {
    double geometry = 1e-9;       // residual budget for lattice/grid identities
    double root_residual = 1e-14; // Newton refinement target for polynomial roots (relative)
    double torsion = 1e-6;        // lattice-distance threshold for torsion classification
    int    torsion_mmax = 12;     // largest torsion order probed
    double lll_delta = 0.99;      // Lovasz constant
    double cond_budget = 1e12;    // refuse matrix ops beyond this condition estimate
};

inline double sqr(double x) { return x * x; }

// value mod 1 in [0, 1)
inline double mod1(double x) {
    double f = x - std::floor(x);
    if (f >= 1.0) f -= 1.0;
    return f;
}

// distance to the nearest integer
inline double int_dist(double x) {
    double f = mod1(x);
    return std::min(f, 1.0 - f);
}

// Stable shortest-roundtrip formatting for cache files: identical doubles
// always produce identical text.
inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline i64 checked_i64(double x, const char* what) {
    if (!(std::fabs(x) < 9.0e18)) throw NumericalError(std::string(what) + ": out of i64 range");
    return static_cast<i64>(std::llround(x));
}

} // namespace latgrid
