// Command line front end: enumerate | grids | stats | verify | ingest | report.
// Exit codes: 0 success, 1 numerical failure or failed verify criterion,
// 2 configuration error, 3 I/O error.

#include "latgrid/cli_pipeline.hpp"
#include "latgrid/verify_suite.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

using namespace latgrid;

namespace {

void add_common_options(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--degree", cfg.degree, "field degree, 2-5 (4 and 5 need ingested fields)")
        ->envname("LATGRID_DEGREE");
    cmd->add_option("--signature", cfg.sign_filter, "discriminant sign: +1, -1 or 0 for both")
        ->envname("LATGRID_SIGNATURE");
    cmd->add_option("--max-disc", cfg.max_disc, "absolute discriminant bound")
        ->envname("LATGRID_MAX_DISC");
    cmd->add_option("--E", cfg.e_spec, "hyperplane normal \"(u1,...,un)\" or the token V0")
        ->envname("LATGRID_E");
    cmd->add_option_function<std::string>(
           "--orderings",
           [&cfg](const std::string& v) {
               if (v == "all") cfg.all_orderings = true;
               else if (v == "first") cfg.all_orderings = false;
               else throw CLI::ValidationError("--orderings", "expected all or first");
           },
           "embedding orderings per field: all or first")
        ->envname("LATGRID_ORDERINGS");
    cmd->add_option("--checkpoints", cfg.checkpoints, "increasing discriminant checkpoints")
        ->delimiter(',')
        ->envname("LATGRID_CHECKPOINTS");
    cmd->add_option("--precision", cfg.precision, "significant digits in cache and table files")
        ->envname("LATGRID_PRECISION");
    cmd->add_option("--threads", cfg.threads, "worker threads for per-field computation")
        ->envname("LATGRID_THREADS");
    cmd->add_option("--cache-dir", cfg.cache_dir, "cache directory")->envname("LATGRID_CACHE_DIR");
    cmd->add_option("--out", cfg.out_dir, "output directory for stats tables")
        ->envname("LATGRID_OUT");
    cmd->add_option("--format", cfg.out_format, "stats table format: csv or json")
        ->envname("LATGRID_FORMAT");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deformed number-field lattices: grids, torus statistics, verification"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string ingest_path;
    std::string scale = "quick";

    auto* c_enum = app.add_subcommand("enumerate", "tabulate fields up to --max-disc into the cache");
    add_common_options(c_enum, cfg);
    auto* c_grids = app.add_subcommand("grids", "deform cached fields and cache their grid data");
    add_common_options(c_grids, cfg);
    auto* c_stats = app.add_subcommand("stats", "equidistribution statistics from cached grids");
    add_common_options(c_stats, cfg);
    auto* c_report = app.add_subcommand("report", "print a previously computed stats summary");
    add_common_options(c_report, cfg);
    auto* c_ingest = app.add_subcommand("ingest", "validate and store external fields (JSONL)");
    c_ingest->add_option("input", ingest_path, "path to a JSONL field file")->required();
    c_ingest->add_option("--cache-dir", cfg.cache_dir, "cache directory")
        ->envname("LATGRID_CACHE_DIR");
    auto* c_verify = app.add_subcommand("verify", "run the acceptance criteria");
    c_verify->add_option("--scale", scale, "quick or desk")->envname("LATGRID_SCALE");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (c_enum->parsed()) {
            EnumerateResult r = cmd_enumerate(cfg);
            std::cout << "fields: " << r.total << " cached (" << r.added << " new)\n";
            for (const auto& f : r.cache_files) std::cout << "  " << f << "\n";
        } else if (c_grids->parsed()) {
            GridsResult r = cmd_grids(cfg);
            std::cout << "grids: " << r.rows << " rows for " << r.fields << " fields ("
                      << r.computed << " new, " << r.quarantined << " quarantined)\n";
            for (const auto& f : r.cache_files) std::cout << "  " << f << "\n";
        } else if (c_stats->parsed()) {
            StatsResult r = cmd_stats(cfg);
            std::cout << "stats: " << r.rows_used << " grid rows (" << r.quarantined
                      << " quarantined)\n  " << r.summary_path << "\n";
            for (const auto& f : r.table_paths) std::cout << "  " << f << "\n";
        } else if (c_report->parsed()) {
            cmd_report(cfg, std::cout);
        } else if (c_ingest->parsed()) {
            IngestResult r = cmd_ingest(cfg, ingest_path);
            std::cout << "ingested " << r.added << " fields (store now " << r.total << ") into "
                      << r.store_path << "\n";
        } else if (c_verify->parsed()) {
            AcceptanceScale sc;
            if (scale == "quick") sc = AcceptanceScale::quick();
            else if (scale == "desk") sc = AcceptanceScale::desk();
            else throw ConfigError("verify: scale must be quick or desk");
            auto results = run_acceptance_suite(sc, std::cout);
            for (const auto& r : results)
                if (!r.pass) return 1;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
