// Command-line front end: run experiment sweeps from a config file, or
// re-derive failure verdicts from a device trace plus flash dump.
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "voltdrop/analyzer.hpp"
#include "voltdrop/config.hpp"
#include "voltdrop/experiment.hpp"
#include "voltdrop/run.hpp"
#include "voltdrop/trace.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRun = 3;

int cmd_run(const std::string& config_path, double scale, std::uint64_t seed_override,
            bool has_seed, const std::string& out_override, bool dump) {
    voltdrop::ExperimentConfig cfg;
    try {
        cfg = voltdrop::parse_config_file(config_path);
        if (has_seed) cfg.master_seed = seed_override;
        if (!out_override.empty()) cfg.output_dir = out_override;
        if (dump) cfg.emit_dump = true;
    } catch (const voltdrop::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    }
    try {
        auto rows = voltdrop::run_experiment(cfg, scale);
        voltdrop::write_summary(std::cout, cfg.experiment, rows);
        std::printf("wrote %s/report.csv (%zu runs)\n", cfg.output_dir.c_str(), rows.size());
    } catch (const voltdrop::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "run error: %s\n", e.what());
        return kExitRun;
    }
    return kExitOk;
}

int cmd_verify(const std::string& trace_path, const std::string& dump_path,
               const std::string& out_csv) {
    try {
        voltdrop::RunRecord rec = voltdrop::read_dump_file(dump_path);
        rec.events = voltdrop::read_trace_file(trace_path);
        voltdrop::validate_event_order(rec.events);
        auto verdicts = voltdrop::analyze(rec);
        auto counts = voltdrop::tally(verdicts);
        if (!out_csv.empty()) voltdrop::write_verdicts_csv_file(out_csv, verdicts);
        std::printf("requests=%llu completed=%llu none=%llu data_failure=%llu fwa=%llu "
                    "io_error=%llu data_loss=%llu\n",
                    static_cast<unsigned long long>(counts.total()),
                    static_cast<unsigned long long>(counts.completed),
                    static_cast<unsigned long long>(counts.none),
                    static_cast<unsigned long long>(counts.data_failure),
                    static_cast<unsigned long long>(counts.fwa),
                    static_cast<unsigned long long>(counts.io_error),
                    static_cast<unsigned long long>(counts.data_loss()));
    } catch (const voltdrop::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "verify error: %s\n", e.what());
        return kExitRun;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"voltdrop: SSD power-failure simulator"};
    app.require_subcommand(1);

    std::string config_path;
    double scale = 1.0;
    std::uint64_t seed = 0;
    std::string out_dir;
    auto* run = app.add_subcommand("run", "run the experiment described by a config file");
    run->add_option("--config", config_path, "config file (key = value lines)")
        ->required();
    run->add_option("--scale", scale, "shrink request/fault counts by this factor");
    auto* seed_opt = run->add_option("--seed", seed, "override the master seed");
    run->add_option("--out", out_dir, "override the output directory");
    bool dump = false;
    run->add_flag("--dump", dump, "also write per-axis trace and flash-dump files");

    std::string trace_path, dump_path, verdict_csv;
    auto* verify =
        app.add_subcommand("verify", "recompute verdicts from a trace and a flash dump");
    verify->add_option("--trace", trace_path, "device event trace")->required();
    verify->add_option("--flash-dump", dump_path, "post-run flash dump")->required();
    verify->add_option("--out", verdict_csv, "write per-request verdicts to this CSV");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed())
        return cmd_run(config_path, scale, seed, seed_opt->count() > 0, out_dir, dump);
    return cmd_verify(trace_path, dump_path, verdict_csv);
}
