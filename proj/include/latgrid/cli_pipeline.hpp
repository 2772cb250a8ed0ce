#pragma once

// Orchestration: run configuration, field/grid caches, statistics emission
// and external-field ingestion.  Caches are append-only CSV files with a
// fixed-format header line and a JSON sidecar carrying run metadata, so
// re-runs extend them deterministically and diffs stay readable.

#include "latgrid/common.hpp"
#include "latgrid/cubic_enumerator.hpp"
#include "latgrid/equidist_stats.hpp"
#include "latgrid/lattice_grid.hpp"
#include "latgrid/number_fields.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace latgrid {

constexpr int kCacheSchema = 1;
constexpr const char* kAlphaConvention = "x1=-a*t;x2=-(a*t^2+b*t+c)";

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
    int degree = 3;                  // 2..5 (4 and 5 are external-only)
    int sign_filter = 0;             // +1, -1 or 0 for both
    i64 max_disc = 1000;             // T
    std::vector<i64> checkpoints;    // ascending; defaults to {max_disc}
    std::string e_spec = "V0";       // "V0" or "(u1,...,un)"
    bool all_orderings = true;
    FormMode form = FormMode::trace;
    int precision = 17;              // significant digits in cache files
    Tolerances tol;
    int threads = 1;
    std::string cache_dir = "cache";
    std::string out_dir = "out";
    std::string out_format = "csv"; // csv | json (stats tables; JSON summary always written)
};

inline std::string fmt_prec(double x, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

// Parse "(u1,...,un)"; the literal token V0 is handled by callers.
inline Vec parse_e_spec(const std::string& spec, int n) {
    std::string s = spec;
    if (s.size() >= 2 && s.front() == '(' && s.back() == ')') s = s.substr(1, s.size() - 2);
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    Vec u;
    double v;
    while (in >> v) u.push_back(v);
    if (int(u.size()) != n)
        throw ConfigError("E specification needs " + std::to_string(n) + " components: " + spec);
    return u;
}

inline bool is_v0_spec(const std::string& spec) { return spec == "V0" || spec == "v0"; }

// Signatures that occur for native degrees; external fields declare their own.
inline std::vector<Signature> signatures_of_degree(int degree, int sign_filter) {
    std::vector<Signature> out;
    if (degree == 2) {
        if (sign_filter >= 0) out.push_back({2, 0});
        if (sign_filter <= 0) out.push_back({0, 1});
    } else if (degree == 3) {
        if (sign_filter >= 0) out.push_back({3, 0});
        if (sign_filter <= 0) out.push_back({1, 1});
    }
    return out;
}

inline void validate_config(const RunConfig& cfg) {
    if (cfg.degree < 2 || cfg.degree > 5) throw ConfigError("degree must be 2..5");
    if (cfg.sign_filter < -1 || cfg.sign_filter > 1) throw ConfigError("signature filter must be -1, 0 or +1");
    if (cfg.max_disc < 3) throw ConfigError("max-disc too small");
    if (cfg.precision < 10 || cfg.precision > 17) throw ConfigError("precision must be 10..17");
    if (cfg.threads < 1 || cfg.threads > 256) throw ConfigError("threads must be 1..256");
    if (cfg.out_format != "csv" && cfg.out_format != "json")
        throw ConfigError("output format must be csv or json");
    i64 prev = 0;
    for (i64 c : cfg.checkpoints) {
        if (c <= prev) throw ConfigError("checkpoints must be positive and increasing");
        if (c > cfg.max_disc) throw ConfigError("checkpoints cannot exceed max-disc");
        prev = c;
    }
    if (!is_v0_spec(cfg.e_spec)) {
        Vec u = parse_e_spec(cfg.e_spec, cfg.degree);
        double nu = norm(u);
        if (!(nu > 0)) throw ConfigError("E normal vector must be nonzero");
        for (const Signature& sig : signatures_of_degree(cfg.degree, cfg.sign_filter)) {
            Vec ob = one_bar_w(sig, cfg.form);
            double d = dot(u, ob);
            if (std::fabs(d) < 1e-12 * nu * norm(ob))
                throw ConfigError("E contains the unit direction for signature (" +
                                  std::to_string(sig.r) + "," + std::to_string(sig.s) + ")");
            Vec proj = orth_project(u, ob);
            if (norm(proj) < 1e-12 * nu)
                throw ConfigError("E normal is parallel to the unit; use the V0 token");
        }
    }
}

inline std::vector<i64> effective_checkpoints(const RunConfig& cfg) {
    std::vector<i64> cps = cfg.checkpoints;
    if (cps.empty() || cps.back() != cfg.max_disc) cps.push_back(cfg.max_disc);
    return cps;
}

// filesystem-safe tag for the E choice, e.g. V0, E1_2_3, E1_m3
inline std::string e_tag(const std::string& spec) {
    if (is_v0_spec(spec)) return "V0";
    std::string t = "E";
    for (char ch : spec) {
        if (ch == '(' || ch == ')' || ch == ' ') continue;
        if (ch == ',') t += '_';
        else if (ch == '-') t += 'm';
        else if (ch == '.') t += 'p';
        else t += ch;
    }
    return t;
}

inline std::string sign_tag(int sign) { return sign > 0 ? "pos" : (sign < 0 ? "neg" : "both"); }

inline std::string run_tag(const RunConfig& cfg) {
    return "deg" + std::to_string(cfg.degree) + "_" + sign_tag(cfg.sign_filter) + "_" +
           e_tag(cfg.e_spec) + "_" + (cfg.all_orderings ? "all" : "first") + "_T" +
           std::to_string(cfg.max_disc);
}

// ---------------------------------------------------------------------------
// Field sources and cache rows

struct FieldSource {
    int degree = 0;
    Signature sig;
    i64 disc = 0;
    std::string source; // quad:<d> | cubic:<a>;<b>;<c>;<d> | ext:<index>
};

struct FieldRecord {
    FieldSource field;
    int ordering = 0;
    bool quarantined = false;
    std::string error;
    int torsion = 0;
    double shape_x = 0.0, shape_y = 1.0;
    std::vector<double> torus;       // n-1 canonical coordinates
    std::vector<double> translation; // n working coordinates
    std::vector<double> lat_basis;   // n*(n-1) row-major
    double residual = 0.0;           // max structural witness residual
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else
            cur += ch;
    }
    cells.push_back(cur);
    return cells;
}

inline std::string sanitize_cell(std::string s) {
    for (char& ch : s)
        if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
    return s;
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

inline nlohmann::json read_meta(const std::string& path) {
    std::ifstream in(path);
    if (!in) return nlohmann::json::object();
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError("corrupt metadata " + path + ": " + e.what());
    }
    if (!j.is_object()) throw IoError("corrupt metadata " + path + ": not an object");
    return j;
}

inline void write_meta(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << "\n";
}

inline std::string cache_header(const char* kind, const RunConfig& cfg) {
    std::ostringstream h;
    h << "# latgrid-cache v" << kCacheSchema << " kind=" << kind << " degree=" << cfg.degree
      << " precision=" << cfg.precision << " alpha=" << kAlphaConvention
      << " form=" << (cfg.form == FormMode::trace ? "trace" : "euclid");
    return h.str();
}

} // namespace detail

inline std::string fields_cache_path(const RunConfig& cfg, int sign) {
    return cfg.cache_dir + "/fields_deg" + std::to_string(cfg.degree) + "_" + sign_tag(sign) + ".csv";
}

inline std::string external_store_path(const RunConfig& cfg) {
    return cfg.cache_dir + "/external.jsonl";
}

inline std::string grids_cache_path(const RunConfig& cfg, int sign) {
    return cfg.cache_dir + "/grids_deg" + std::to_string(cfg.degree) + "_" + sign_tag(sign) + "_" +
           e_tag(cfg.e_spec) + "_" + (cfg.all_orderings ? "all" : "first") + ".csv";
}

// ---------------------------------------------------------------------------
// Deterministic chunked parallel map: fn(i) for i in [0, n), results in order.

template <class Out, class Fn>
std::vector<Out> parallel_map(size_t n, int threads, Fn&& fn) {
    std::vector<Out> out(n);
    if (threads <= 1 || n < 2) {
        for (size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    const size_t nt = std::min<size_t>(size_t(threads), n);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(nt);
    for (size_t w = 0; w < nt; ++w)
        pool.emplace_back([&, w] {
            try {
                for (size_t i = w; i < n; i += nt) out[i] = fn(i);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    return out;
}

// ---------------------------------------------------------------------------
// Field enumeration into the cache

struct EnumerateResult {
    i64 added = 0;
    i64 total = 0;
    std::vector<std::string> cache_files;
};

namespace detail {

inline void append_field_rows(const RunConfig& cfg, int sign, const std::vector<FieldSource>& rows,
                              i64 covered_T, EnumerateResult& res) {
    ensure_dir(cfg.cache_dir);
    const std::string path = fields_cache_path(cfg, sign);
    const std::string meta_path = path + ".meta.json";
    nlohmann::json meta = read_meta(meta_path);
    i64 prev_T = meta.value("covered_T", i64(0));
    i64 prev_rows = meta.value("rows", i64(0));
    if (!meta.empty() && meta.value("precision", cfg.precision) != cfg.precision)
        throw ConfigError("cache precision mismatch in " + path);

    if (covered_T <= prev_T) { // nothing new; cache already covers the request
        res.total += prev_rows;
        res.cache_files.push_back(path);
        return;
    }
    bool fresh = prev_rows == 0 && !std::filesystem::exists(path);
    std::ofstream out(path, fresh ? std::ios::trunc : std::ios::app);
    if (!out) throw IoError("cannot open " + path);
    if (fresh) {
        out << cache_header("fields", cfg) << "\n";
        out << "degree,r,s,disc,source\n";
    }
    i64 added = 0;
    for (const FieldSource& f : rows) {
        if (std::llabs(f.disc) <= prev_T) continue; // already cached
        out << f.degree << "," << f.sig.r << "," << f.sig.s << "," << f.disc << ","
            << sanitize_cell(f.source) << "\n";
        ++added;
    }
    out.close();
    meta = nlohmann::json{{"schema", kCacheSchema},
                          {"kind", "fields"},
                          {"degree", cfg.degree},
                          {"sign", sign},
                          {"precision", cfg.precision},
                          {"alpha", kAlphaConvention},
                          {"covered_T", covered_T},
                          {"rows", prev_rows + added}};
    write_meta(meta_path, meta);
    res.added += added;
    res.total += prev_rows + added;
    res.cache_files.push_back(path);
}

} // namespace detail

inline std::vector<FieldSource> enumerate_fields(int degree, int sign, i64 T) {
    std::vector<FieldSource> rows;
    if (degree == 2) {
        for_each_quadratic_field(T, sign, [&](const QuadraticField& q) {
            FieldSource f;
            f.degree = 2;
            f.sig = q.disc > 0 ? Signature{2, 0} : Signature{0, 1};
            f.disc = q.disc;
            f.source = "quad:" + std::to_string(q.d);
            rows.push_back(std::move(f));
        });
    } else if (degree == 3) {
        for (const Form64& g : enumerate_classes(T, sign)) {
            if (!is_irreducible_s3(g) || !is_maximal(g)) continue;
            FieldSource f;
            f.degree = 3;
            i64 disc = form_disc(g);
            f.sig = disc > 0 ? Signature{3, 0} : Signature{1, 1};
            f.disc = disc;
            f.source = "cubic:" + std::to_string(g.a) + ";" + std::to_string(g.b) + ";" +
                       std::to_string(g.c) + ";" + std::to_string(g.d);
            rows.push_back(std::move(f));
        }
    } else {
        throw ConfigError("native enumeration supports degree 2 and 3; use ingest for 4 and 5");
    }
    return rows;
}

inline EnumerateResult cmd_enumerate(const RunConfig& cfg) {
    validate_config(cfg);
    EnumerateResult res;
    std::vector<int> signs;
    if (cfg.sign_filter >= 0) signs.push_back(+1);
    if (cfg.sign_filter <= 0) signs.push_back(-1);
    for (int sign : signs) {
        auto rows = enumerate_fields(cfg.degree, sign, cfg.max_disc);
        detail::append_field_rows(cfg, sign, rows, cfg.max_disc, res);
    }
    return res;
}

inline std::vector<FieldSource> load_fields(const RunConfig& cfg, int sign, i64 max_disc) {
    const std::string path = fields_cache_path(cfg, sign);
    std::ifstream in(path);
    if (!in) throw IoError("fields cache missing: " + path + " (run enumerate first)");
    std::vector<FieldSource> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#' || line.rfind("degree,", 0) == 0) continue;
        auto cells = detail::split_csv(line);
        if (cells.size() != 5) throw IoError(path + ": malformed row at line " + std::to_string(lineno));
        FieldSource f;
        f.degree = std::stoi(cells[0]);
        f.sig = {std::stoi(cells[1]), std::stoi(cells[2])};
        f.disc = std::stoll(cells[3]);
        f.source = cells[4];
        if (std::llabs(f.disc) > max_disc) continue;
        out.push_back(std::move(f));
    }
    return out;
}

// ---------------------------------------------------------------------------
// External-field ingestion

struct IngestResult {
    i64 added = 0;
    i64 total = 0;
    std::string store_path;
};

inline std::vector<ExternalField> load_external_store(const RunConfig& cfg) {
    std::ifstream in(external_store_path(cfg));
    if (!in) return {};
    return ingest_external_fields(in);
}

inline IngestResult cmd_ingest(const RunConfig& cfg, const std::string& input_path) {
    validate_config(cfg);
    std::ifstream in(input_path);
    if (!in) throw IoError("cannot open ingest input " + input_path);
    std::stringstream buffered;
    buffered << in.rdbuf();
    std::string text = buffered.str();

    std::stringstream parse_stream(text);
    auto fields = ingest_external_fields(parse_stream); // validates; throws with line numbers
    for (const ExternalField& f : fields)
        external_lattice(f); // full geometric validation before anything is cached

    detail::ensure_dir(cfg.cache_dir);
    IngestResult res;
    res.store_path = external_store_path(cfg);
    auto existing = load_external_store(cfg);
    std::ofstream out(res.store_path, std::ios::app);
    if (!out) throw IoError("cannot open " + res.store_path);
    auto key_of = [](int degree, i64 disc, const std::vector<i64>& poly) {
        std::string k = std::to_string(degree) + "|" + std::to_string(disc);
        for (i64 c : poly) k += "|" + std::to_string(c);
        return k;
    };
    std::set<std::string> seen;
    for (const ExternalField& e : existing) seen.insert(key_of(e.degree, e.disc, e.poly));
    std::stringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        nlohmann::json a = nlohmann::json::parse(line);
        std::string key = key_of(a["degree"].get<int>(), a["disc"].get<i64>(),
                                 a["poly"].get<std::vector<i64>>());
        if (!seen.insert(key).second) continue;
        out << line << "\n";
        ++res.added;
    }
    res.total = i64(existing.size()) + res.added;
    return res;
}

// ---------------------------------------------------------------------------
// Grid computation

inline EmbeddedLattice lattice_of_source(const FieldSource& f,
                                         const std::vector<ExternalField>& ext) {
    if (f.source.rfind("quad:", 0) == 0)
        return quadratic_lattice(quadratic_field(std::stoll(f.source.substr(5))));
    if (f.source.rfind("cubic:", 0) == 0) {
        std::string s = f.source.substr(6);
        std::replace(s.begin(), s.end(), ';', ' ');
        std::istringstream in(s);
        Form64 g{};
        if (!(in >> g.a >> g.b >> g.c >> g.d)) throw IoError("bad cubic source " + f.source);
        return cubic_lattice(cubic_ring_from_form(g));
    }
    if (f.source.rfind("ext:", 0) == 0) {
        size_t idx = size_t(std::stoll(f.source.substr(4)));
        if (idx >= ext.size()) throw IoError("external index out of range: " + f.source);
        return external_lattice(ext[idx]);
    }
    throw IoError("unknown field source " + f.source);
}

inline FieldRecord compute_grid_row(const EmbeddedLattice& base, const FieldSource& fs,
                                    int ordering, const RunConfig& cfg) {
    FieldRecord r;
    r.field = fs;
    r.ordering = ordering;
    try {
        EmbeddedLattice lat = ordering == 0 ? base : reorder_embedding(base, ordering);
        DeformationParams par;
        par.form = cfg.form;
        par.u = is_v0_spec(cfg.e_spec) ? v0_normal(lat, cfg.form)
                                       : parse_e_spec(cfg.e_spec, fs.sig.n());
        ConsistencyWitness w = consistency_witness(lat, par, cfg.tol);
        PiPiReport pp = pi1_pi2_consistency(lat, par, cfg.tol);
        r.torsion = w.grid.torsion;
        r.torus = w.grid.torus_canonical;
        r.translation = w.grid.translation;
        r.lat_basis.assign(w.grid.lat_basis.a.begin(), w.grid.lat_basis.a.end());
        r.shape_x = pp.via_grid.x;
        r.shape_y = pp.via_grid.y;
        r.residual = std::max({w.pairing_residual, w.one_orth_residual, w.translation_residual,
                               w.grid_residual, w.beta_lattice_residual, pp.residual});
    } catch (const NumericalError& e) {
        r.quarantined = true;
        r.error = e.what();
    }
    return r;
}

struct GridsResult {
    i64 fields = 0;
    i64 rows = 0;
    i64 computed = 0;
    i64 quarantined = 0;
    std::vector<std::string> cache_files;
};

namespace detail {

inline void write_grid_row(std::ostream& out, const FieldRecord& r, int digits) {
    out << r.field.disc << "," << sanitize_cell(r.field.source) << "," << r.ordering << ","
        << (r.quarantined ? 1 : 0) << "," << r.torsion << "," << fmt_prec(r.shape_x, digits) << ","
        << fmt_prec(r.shape_y, digits);
    out << ",torus";
    for (double v : r.torus) out << ";" << fmt_prec(v, digits);
    out << ",tr";
    for (double v : r.translation) out << ";" << fmt_prec(v, digits);
    out << ",lat";
    for (double v : r.lat_basis) out << ";" << fmt_prec(v, digits);
    out << "," << fmt_prec(r.residual, digits) << "," << sanitize_cell(r.error) << "\n";
}

inline std::vector<double> parse_packed(const std::string& cell, const char* tag) {
    std::vector<double> out;
    size_t pos = cell.find(';');
    if (cell.rfind(tag, 0) != 0) throw IoError("bad packed cell " + cell);
    while (pos != std::string::npos) {
        size_t next = cell.find(';', pos + 1);
        out.push_back(std::strtod(cell.c_str() + pos + 1, nullptr));
        pos = next;
    }
    return out;
}

} // namespace detail

inline GridsResult cmd_grids(const RunConfig& cfg) {
    validate_config(cfg);
    GridsResult res;
    auto ext = cfg.degree >= 4 ? load_external_store(cfg) : std::vector<ExternalField>{};
    std::vector<int> signs;
    if (cfg.sign_filter >= 0) signs.push_back(+1);
    if (cfg.sign_filter <= 0) signs.push_back(-1);

    for (int sign : signs) {
        std::vector<FieldSource> fields;
        if (cfg.degree >= 4) {
            // store order, unfiltered by max_disc: the store is append-only, so this
            // list only ever grows by a suffix and cached prefixes stay valid
            for (size_t i = 0; i < ext.size(); ++i) {
                if (ext[i].degree != cfg.degree) continue;
                if (sign > 0 && ext[i].disc < 0) continue;
                if (sign < 0 && ext[i].disc > 0) continue;
                FieldSource f;
                f.degree = ext[i].degree;
                f.sig = ext[i].sig;
                f.disc = ext[i].disc;
                f.source = "ext:" + std::to_string(i);
                fields.push_back(std::move(f));
            }
        } else {
            fields = load_fields(cfg, sign, cfg.max_disc);
        }
        res.fields += i64(fields.size());

        const std::string path = grids_cache_path(cfg, sign);
        const std::string meta_path = path + ".meta.json";
        nlohmann::json meta = detail::read_meta(meta_path);
        i64 done = meta.value("fields_done", i64(0));
        i64 prev_rows = meta.value("rows", i64(0));
        i64 prev_quar = meta.value("quarantined", i64(0));
        if (!meta.empty() && meta.value("precision", cfg.precision) != cfg.precision)
            throw ConfigError("cache precision mismatch in " + path);

        if (i64(fields.size()) <= done) { // already covered
            res.rows += prev_rows;
            res.quarantined += prev_quar;
            res.cache_files.push_back(path);
            continue;
        }

        detail::ensure_dir(cfg.cache_dir);
        bool fresh = done == 0 && !std::filesystem::exists(path);
        std::ofstream out(path, fresh ? std::ios::trunc : std::ios::app);
        if (!out) throw IoError("cannot open " + path);
        if (fresh) {
            out << detail::cache_header("grids", cfg) << " E=" << e_tag(cfg.e_spec)
                << " orderings=" << (cfg.all_orderings ? "all" : "first") << "\n";
            out << "disc,source,ordering,quarantined,torsion,shape_x,shape_y,torus,translation,latbasis,residual,error\n";
        }

        std::vector<std::pair<size_t, int>> work; // field index, ordering
        for (size_t i = size_t(done); i < fields.size(); ++i) {
            int nord = cfg.all_orderings ? num_orderings(fields[i].sig) : 1;
            for (int o = 0; o < nord; ++o) work.push_back({i, o});
        }
        auto rows = parallel_map<FieldRecord>(work.size(), cfg.threads, [&](size_t w) {
            const FieldSource& f = fields[work[w].first];
            EmbeddedLattice base = lattice_of_source(f, ext);
            return compute_grid_row(base, f, work[w].second, cfg);
        });
        i64 quar = 0;
        for (const FieldRecord& r : rows) {
            detail::write_grid_row(out, r, cfg.precision);
            if (r.quarantined) ++quar;
        }
        out.close();

        meta = nlohmann::json{{"schema", kCacheSchema},
                              {"kind", "grids"},
                              {"degree", cfg.degree},
                              {"sign", sign},
                              {"precision", cfg.precision},
                              {"alpha", kAlphaConvention},
                              {"E", e_tag(cfg.e_spec)},
                              {"orderings", cfg.all_orderings ? "all" : "first"},
                              {"fields_done", i64(fields.size())},
                              {"rows", prev_rows + i64(rows.size())},
                              {"quarantined", prev_quar + quar}};
        detail::write_meta(meta_path, meta);
        res.rows += prev_rows + i64(rows.size());
        res.computed += i64(rows.size());
        res.quarantined += prev_quar + quar;
        res.cache_files.push_back(path);
    }
    return res;
}

inline std::vector<FieldRecord> load_grid_rows(const RunConfig& cfg, int sign, i64 max_disc) {
    const std::string path = grids_cache_path(cfg, sign);
    std::ifstream in(path);
    if (!in) throw IoError("grids cache missing: " + path + " (run grids first)");
    std::vector<FieldRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#' || line.rfind("disc,", 0) == 0) continue;
        auto cells = detail::split_csv(line);
        if (cells.size() != 12) throw IoError(path + ": malformed row at line " + std::to_string(lineno));
        FieldRecord r;
        r.field.disc = std::stoll(cells[0]);
        if (std::llabs(r.field.disc) > max_disc) continue;
        r.field.source = cells[1];
        r.ordering = std::stoi(cells[2]);
        r.quarantined = cells[3] == "1";
        r.torsion = std::stoi(cells[4]);
        r.shape_x = std::strtod(cells[5].c_str(), nullptr);
        r.shape_y = std::strtod(cells[6].c_str(), nullptr);
        r.torus = detail::parse_packed(cells[7], "torus");
        r.translation = detail::parse_packed(cells[8], "tr");
        r.lat_basis = detail::parse_packed(cells[9], "lat");
        r.residual = std::strtod(cells[10].c_str(), nullptr);
        r.error = cells[11];
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Statistics emission

struct StatsResult {
    EquidistReport report;
    i64 rows_used = 0;
    i64 quarantined = 0;
    std::string summary_path;
    std::vector<std::string> table_paths;
};

namespace detail {

inline nlohmann::json weyl_to_json(const WeylSumReport& w) {
    return nlohmann::json{{"run_id", w.run_id},
                          {"n", w.n},
                          {"frequencies", w.frequencies},
                          {"magnitudes", w.magnitudes},
                          {"max", w.max_magnitude()}};
}

inline nlohmann::json report_to_json(const EquidistReport& rep) {
    nlohmann::json j;
    j["run_id"] = rep.run_id;
    j["degree"] = rep.degree;
    j["signature"] = {rep.sig.r, rep.sig.s};
    j["hyperplane"] = rep.hyperplane;
    j["checkpoints"] = rep.checkpoints;
    j["weyl"] = nlohmann::json::array();
    for (const auto& w : rep.weyl) j["weyl"].push_back(weyl_to_json(w));
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& b : rep.shape.bins)
        bins.push_back({{"x_lo", b.x_lo},
                        {"x_hi", b.x_hi},
                        {"y_lo", b.y_lo},
                        {"y_hi", b.y_hi},
                        {"mass", b.mass},
                        {"observed", b.observed}});
    j["shape"] = {{"bins", bins},
                  {"y_cap", rep.shape.y_cap},
                  {"in_cap", rep.shape.in_cap},
                  {"cusp_observed", rep.shape.cusp_observed},
                  {"cusp_expected", rep.shape.cusp_expected},
                  {"total", rep.shape.total}};
    j["torsion"] = {{"counts", rep.torsion.counts},
                    {"unclassified", rep.torsion.unclassified},
                    {"total", rep.torsion.total}};
    j["two_atom"] = {{"mass0", rep.two_atom.mass0},
                     {"mass1", rep.two_atom.mass1},
                     {"outliers", rep.two_atom.outliers},
                     {"total", rep.two_atom.total}};
    j["joint"] = {{"stat", rep.joint.stat},
                  {"dof", rep.joint.dof},
                  {"p_value", rep.joint.p_value}};
    return j;
}

} // namespace detail

inline StatsResult cmd_stats(const RunConfig& cfg) {
    validate_config(cfg);
    StatsResult res;
    EquidistReport& rep = res.report;
    rep.degree = cfg.degree;
    rep.hyperplane = e_tag(cfg.e_spec);
    auto cps = effective_checkpoints(cfg);
    for (i64 c : cps) rep.checkpoints.push_back(double(c));

    std::vector<int> signs;
    if (cfg.sign_filter >= 0) signs.push_back(+1);
    if (cfg.sign_filter <= 0) signs.push_back(-1);
    std::vector<FieldRecord> rows;
    for (int sign : signs) {
        auto part = load_grid_rows(cfg, sign, cfg.max_disc);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    if (rows.empty()) throw IoError("no grid rows cached for this configuration");
    std::stable_sort(rows.begin(), rows.end(), [](const FieldRecord& a, const FieldRecord& b) {
        return std::llabs(a.field.disc) < std::llabs(b.field.disc);
    });
    if (cfg.sign_filter != 0) {
        auto sigs = signatures_of_degree(cfg.degree, cfg.sign_filter);
        if (!sigs.empty()) {
            rep.sig = sigs.front();
        } else { // external degrees declare their own signature
            for (const ExternalField& e : load_external_store(cfg))
                if (e.degree == cfg.degree && (cfg.sign_filter > 0) == (e.disc > 0)) {
                    rep.sig = e.sig;
                    break;
                }
        }
    }

    const int dim = cfg.degree - 1;
    std::vector<WeylAccumulator> acc;
    for (size_t c = 0; c < cps.size(); ++c) acc.emplace_back(dim, 3);
    std::vector<int> orders;
    std::vector<double> scalar_torus;
    std::vector<ShapePoint> shapes;
    std::vector<std::vector<i64>> joint_table;

    for (const FieldRecord& r : rows) {
        if (r.quarantined) {
            ++res.quarantined;
            continue;
        }
        ++res.rows_used;
        for (size_t c = 0; c < cps.size(); ++c)
            if (std::llabs(r.field.disc) <= cps[c]) acc[c].add(r.torus);
        orders.push_back(r.torsion);
        if (dim == 1) scalar_torus.push_back(r.torus[0]);
        if (dim == 2 && r.ordering == 0) {
            ShapePoint sp;
            sp.x = r.shape_x;
            sp.y = r.shape_y;
            shapes.push_back(sp);
        }
    }
    if (res.rows_used == 0) throw ConfigError("all cached rows are quarantined");

    std::vector<i64> used_cps; // checkpoints that actually had samples, aligned with rep.weyl
    for (size_t c = 0; c < cps.size(); ++c)
        if (acc[c].n > 0) {
            rep.weyl.push_back(acc[c].report());
            used_cps.push_back(cps[c]);
        }
    rep.torsion = torsion_census(orders, cfg.tol.torsion_mmax);
    if (dim == 1) rep.two_atom = two_atom_fit(scalar_torus, 0.0, 0.5, cfg.tol.torsion);
    bool joint_ok = false;
    if (dim == 2 && !shapes.empty()) {
        rep.shape = shape_histogram(shapes, 24, 6, 10.0);
        // joint contingency: 4 quantile strips of y x 4 torus bins
        std::vector<double> ys, ts;
        for (const FieldRecord& r : rows) {
            if (r.quarantined || r.ordering != 0) continue;
            ys.push_back(r.shape_y);
            ts.push_back(r.torus[0]);
        }
        try {
            joint_table = quantile_joint_table(ys, ts, 4, 4);
            rep.joint = joint_independence_chi2(joint_table);
            joint_ok = true;
        } catch (const ConfigError&) {
            rep.joint = Chi2Result{}; // undersized; flagged below
        }
    }
    rep.stamp(run_tag(cfg));

    detail::ensure_dir(cfg.out_dir);
    const std::string tag = run_tag(cfg);
    nlohmann::json j = detail::report_to_json(rep);
    j["rows_used"] = res.rows_used;
    j["quarantined"] = res.quarantined;
    j["joint_flagged_undersized"] = (dim == 2 && !joint_ok);
    res.summary_path = cfg.out_dir + "/" + tag + "_summary.json";
    detail::write_meta(res.summary_path, j);

    if (cfg.out_format == "csv") {
        const std::string wp = cfg.out_dir + "/" + tag + "_weyl.csv";
        std::ofstream w(wp, std::ios::trunc);
        w << "checkpoint";
        for (int d = 0; d < dim; ++d) w << ",k" << d;
        w << ",magnitude\n";
        for (size_t c = 0; c < rep.weyl.size(); ++c)
            for (size_t i = 0; i < rep.weyl[c].frequencies.size(); ++i) {
                w << used_cps[c];
                for (int v : rep.weyl[c].frequencies[i]) w << "," << v;
                w << "," << fmt_prec(rep.weyl[c].magnitudes[i], cfg.precision) << "\n";
            }
        res.table_paths.push_back(wp);

        const std::string tp = cfg.out_dir + "/" + tag + "_torsion.csv";
        std::ofstream t(tp, std::ios::trunc);
        t << "order,count\n";
        for (size_t m = 0; m < rep.torsion.counts.size(); ++m)
            t << (m + 1) << "," << rep.torsion.counts[m] << "\n";
        t << "unclassified," << rep.torsion.unclassified << "\n";
        res.table_paths.push_back(tp);

        if (dim == 2) {
            const std::string sp = cfg.out_dir + "/" + tag + "_shape.csv";
            std::ofstream s(sp, std::ios::trunc);
            s << "x_lo,x_hi,y_lo,y_hi,expected_mass,observed\n";
            for (const auto& b : rep.shape.bins)
                s << fmt_prec(b.x_lo, cfg.precision) << "," << fmt_prec(b.x_hi, cfg.precision)
                  << "," << fmt_prec(b.y_lo, cfg.precision) << "," << fmt_prec(b.y_hi, cfg.precision)
                  << "," << fmt_prec(b.mass, cfg.precision) << "," << b.observed << "\n";
            res.table_paths.push_back(sp);
        }

        if (rep.weyl.size() >= 2 && dim <= 2) {
            const std::string cp = cfg.out_dir + "/" + tag + "_convergence.csv";
            std::ofstream cv(cp, std::ios::trunc);
            cv << "frequency,checkpoint,magnitude\n";
            for (const auto& k : representative_frequencies(dim)) {
                std::string kname;
                for (int v : k) kname += (kname.empty() ? "" : ";") + std::to_string(v);
                for (size_t c = 0; c < rep.weyl.size(); ++c)
                    cv << kname << "," << used_cps[c] << ","
                       << fmt_prec(rep.weyl[c].magnitude_of(k), cfg.precision) << "\n";
            }
            res.table_paths.push_back(cp);
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Report rendering (text summary of an emitted stats run)

inline int cmd_report(const RunConfig& cfg, std::ostream& out) {
    const std::string path = cfg.out_dir + "/" + run_tag(cfg) + "_summary.json";
    std::ifstream in(path);
    if (!in) throw IoError("no stats summary at " + path + " (run stats first)");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError("corrupt summary " + path + ": " + e.what());
    }
    out << "run " << j.value("run_id", std::string("?")) << "\n";
    out << "  degree " << j.value("degree", 0) << ", hyperplane " << j.value("hyperplane", std::string("?"))
        << ", rows " << j.value("rows_used", i64(0)) << " (+" << j.value("quarantined", i64(0))
        << " quarantined)\n";
    if (j.contains("weyl") && !j["weyl"].empty()) {
        out << "  weyl max |S_k| by checkpoint:";
        for (const auto& w : j["weyl"]) out << " " << double(w.value("max", 0.0));
        out << "\n";
    }
    if (j.contains("torsion")) {
        out << "  torsion counts:";
        auto counts = j["torsion"]["counts"].get<std::vector<i64>>();
        for (size_t m = 0; m < counts.size(); ++m)
            if (counts[m] > 0) out << " " << (m + 1) << ":" << counts[m];
        out << " unclassified:" << j["torsion"].value("unclassified", i64(0)) << "\n";
    }
    if (j.contains("two_atom") && j["two_atom"].value("total", i64(0)) > 0)
        out << "  two-atom masses " << double(j["two_atom"]["mass0"]) << " / "
            << double(j["two_atom"]["mass1"]) << ", outliers " << i64(j["two_atom"]["outliers"])
            << "\n";
    if (j.contains("joint") && j["joint"].value("dof", 0) > 0)
        out << "  joint chi2 " << double(j["joint"]["stat"]) << " (dof " << int(j["joint"]["dof"])
            << ", p " << double(j["joint"]["p_value"]) << ")\n";
    return 0;
}

} // namespace latgrid
