#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "voltdrop/config.hpp"
#include "voltdrop/run.hpp"
#include "voltdrop/trace.hpp"

namespace voltdrop {

struct AxisRun {
    std::string tag;  // e.g. "write_pct=80"
    RunParams params;
};

struct ExperimentRow {
    std::string tag;
    RunParams params;
    FailureCounts counts;
    RunStats stats;
    std::uint64_t target_losses = 0;  // armed-fault targets that lost data
};

namespace detail {

inline std::uint64_t scaled_count(std::uint64_t base, double scale, std::uint64_t floor_v) {
    double v = static_cast<double>(base) * scale;
    auto n = static_cast<std::uint64_t>(std::llround(v));
    return std::max(n, floor_v);
}

inline std::uint64_t scaled_wss(std::uint64_t base, double scale) {
    double v = static_cast<double>(base) * scale;
    auto b = static_cast<std::uint64_t>(std::llround(v));
    b = std::max<std::uint64_t>(b, 64ull << 20);
    return (b / 4096) * 4096;
}

inline int scaled_faults(int base, double scale, int floor_v) {
    auto f = static_cast<int>(std::llround(base * scale));
    return std::clamp(f, floor_v, base);
}

inline void seed_axis(RunParams& rp, std::uint64_t master, const std::string& tag) {
    rp.run_seed = mix_seed(master, tag);
    rp.wl.seed = mix_seed(rp.run_seed, "workload");
    rp.fault_seed = mix_seed(rp.run_seed, "fault");
}

// Uniformly placed cutoffs need room: spacing must exceed the discharge
// plus the restore delay, so stretch the request count if a scaled-down
// run would leave the fault scheduler an infeasible horizon.
inline void ensure_fault_room(RunParams& rp) {
    if (rp.armed_delay || rp.fault_count <= 0) return;
    double gap_s = rp.vm.t_zero_unloaded_ms / 1e3 +
                   static_cast<double>(rp.restore_delay) / static_cast<double>(kSecond);
    auto need = static_cast<std::uint64_t>(
        std::ceil(rp.wl.iops * 2.2 * gap_s * static_cast<double>(rp.fault_count)));
    rp.wl.n_requests = std::max<std::uint32_t>(rp.wl.n_requests,
                                               static_cast<std::uint32_t>(need));
}

inline std::string sanitize_tag(const std::string& tag) {
    std::string out;
    for (char c : tag) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            out += c;
        else
            out += '_';
    }
    return out;
}

inline std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

}  // namespace detail

// Expand a config into the list of runs it describes. `scale` shrinks
// request counts, working-set sizes and fault counts together so a sweep
// keeps its shape at a fraction of the full cost.
inline std::vector<AxisRun> plan_experiment(const ExperimentConfig& cfg, double scale) {
    if (!(scale > 0.0)) throw ConfigError("scale must be positive");
    std::vector<AxisRun> plan;
    RunParams base = to_run_params(cfg);

    if (cfg.experiment == "custom") {
        AxisRun r{"custom", base};
        detail::seed_axis(r.params, cfg.master_seed, r.tag);
        plan.push_back(std::move(r));
        return plan;
    }

    // Shared sweep baseline: random 4 KiB..1 MiB writes over a large
    // working set at a fixed arrival rate, with uniformly placed faults.
    RunParams sweep = base;
    sweep.wl = WorkloadSpec{};
    sweep.wl.wss_bytes = detail::scaled_wss(16ull << 30, scale);
    sweep.wl.size.fixed_bytes = 0;
    sweep.wl.write_pct = 100;
    sweep.wl.pattern = Pattern::Random;
    sweep.wl.sequence.reset();
    sweep.wl.iops = 40.0;
    sweep.wl.n_requests =
        static_cast<std::uint32_t>(detail::scaled_count(540000, scale, 800));
    sweep.fault_count = detail::scaled_faults(3200, scale, 3);
    sweep.armed_delay.reset();

    auto add = [&](const std::string& tag, RunParams rp) {
        detail::ensure_fault_room(rp);
        detail::seed_axis(rp, cfg.master_seed, tag);
        plan.push_back(AxisRun{tag, std::move(rp)});
    };

    if (cfg.experiment == "req_type") {
        for (int pct : {100, 80, 50, 20, 0}) {
            RunParams rp = sweep;
            rp.wl.write_pct = pct;
            add("write_pct=" + std::to_string(pct), rp);
        }
    } else if (cfg.experiment == "wss") {
        for (int gib : {1, 8, 16, 32, 64, 90}) {
            RunParams rp = sweep;
            rp.wl.wss_bytes = detail::scaled_wss(static_cast<std::uint64_t>(gib) << 30, scale);
            add("wss_gib=" + std::to_string(gib), rp);
        }
    } else if (cfg.experiment == "pattern") {
        for (Pattern p : {Pattern::Random, Pattern::Sequential}) {
            RunParams rp = sweep;
            rp.wl.pattern = p;
            add(std::string("pattern=") + to_string(p), rp);
        }
    } else if (cfg.experiment == "req_size") {
        // Byte-paced: the same byte rate at every size, for a fixed span.
        const double bytes_per_sec = 4.0 * 1048576.0;
        const double span_s = std::max(960.0 * scale, 30.0);
        for (std::uint32_t size : {4096u, 16384u, 65536u, 262144u, 1048576u}) {
            RunParams rp = sweep;
            rp.wl.size.fixed_bytes = size;
            rp.wl.iops = bytes_per_sec / static_cast<double>(size);
            rp.wl.n_requests = static_cast<std::uint32_t>(
                std::max<std::int64_t>(40, std::llround(span_s * rp.wl.iops)));
            rp.fault_count = detail::scaled_faults(160, scale, 3);
            add("req_size=" + std::to_string(size), rp);
        }
    } else if (cfg.experiment == "iops") {
        const double span_s = std::max(300.0 * scale, 4.0);
        for (int rate : {1000, 2000, 4000, 6000, 7500, 9000}) {
            RunParams rp = sweep;
            rp.wl.size.fixed_bytes = 16384;
            rp.wl.iops = static_cast<double>(rate);
            rp.wl.n_requests = static_cast<std::uint32_t>(
                std::max<std::int64_t>(400, std::llround(span_s * rp.wl.iops)));
            rp.fault_count = detail::scaled_faults(20, scale, 2);
            add("iops=" + std::to_string(rate), rp);
        }
    } else if (cfg.experiment == "sequence") {
        for (SeqKind k : {SeqKind::RAR, SeqKind::RAW, SeqKind::WAR, SeqKind::WAW}) {
            RunParams rp = sweep;
            rp.wl.sequence = k;
            rp.wl.size.fixed_bytes = 65536;
            rp.wl.n_requests =
                static_cast<std::uint32_t>(detail::scaled_count(80000, scale, 800));
            rp.fault_count = detail::scaled_faults(250, scale, 3);
            add(std::string("sequence=") + to_string(k), rp);
        }
    } else if (cfg.experiment == "time_interval") {
        for (std::int64_t delay_ms : {50, 150, 250, 400, 700, 1000}) {
            RunParams rp = sweep;
            rp.wl.size.fixed_bytes = 65536;
            rp.wl.n_requests =
                static_cast<std::uint32_t>(detail::scaled_count(12000, scale, 800));
            rp.fault_count = detail::scaled_faults(20, scale, 2);
            rp.armed_delay = from_ms(delay_ms);
            rp.armed_warmup = cfg.armed_warmup;
            add("delay_ms=" + std::to_string(delay_ms), rp);
        }
    } else {
        throw ConfigError("unknown experiment '" + cfg.experiment + "'");
    }
    return plan;
}

inline ExperimentRow summarize_run(const std::string& tag, const RunParams& rp,
                                   const RunResult& res) {
    ExperimentRow row;
    row.tag = tag;
    row.params = rp;
    row.counts = res.counts;
    row.stats = res.stats;
    for (std::uint64_t target : res.stats.armed_targets) {
        const auto& v = res.verdicts.at(target - 1);
        if (v.cls == Classification::DataFailure || v.cls == Classification::Fwa)
            ++row.target_losses;
    }
    return row;
}

inline void write_report_csv(std::ostream& os, const std::string& experiment,
                             const std::vector<ExperimentRow>& rows) {
    os << "experiment,axis,run_seed,n_requests,wss_bytes,req_size,write_pct,pattern,"
          "sequence,iops,fault_count,completed,none,data_failure,fwa,io_error,"
          "data_loss,responded_iops,target_losses\n";
    for (const auto& r : rows) {
        const auto& wl = r.params.wl;
        os << experiment << ',' << r.tag << ',' << r.params.run_seed << ','
           << wl.n_requests << ',' << wl.wss_bytes << ',';
        if (wl.size.fixed_bytes == 0)
            os << "uniform";
        else
            os << wl.size.fixed_bytes;
        os << ',' << wl.write_pct << ',' << to_string(wl.pattern) << ','
           << (wl.sequence ? to_string(*wl.sequence) : std::string("none")) << ','
           << detail::format_real(wl.iops) << ',' << r.params.fault_count << ','
           << r.counts.completed << ',' << r.counts.none << ',' << r.counts.data_failure
           << ',' << r.counts.fwa << ',' << r.counts.io_error << ',' << r.counts.data_loss()
           << ',' << detail::format_real(r.stats.responded_iops) << ',' << r.target_losses
           << '\n';
    }
}

inline void write_summary(std::ostream& os, const std::string& experiment,
                          const std::vector<ExperimentRow>& rows) {
    os << "experiment: " << experiment << "\n";
    for (const auto& r : rows) {
        os << r.tag << ": total=" << r.counts.total() << " completed=" << r.counts.completed
           << " none=" << r.counts.none << " data_failure=" << r.counts.data_failure
           << " fwa=" << r.counts.fwa << " io_error=" << r.counts.io_error
           << " data_loss=" << r.counts.data_loss()
           << " responded_iops=" << detail::format_real(r.stats.responded_iops);
        if (r.params.armed_delay) os << " target_losses=" << r.target_losses;
        os << "\n";
    }
}

// Run every axis of an experiment and write report.csv, summary.txt and
// per-axis verdict CSVs into `cfg.output_dir`. Trace and flash-dump files
// (the `verify` inputs) are opt-in: they grow with the write volume and get
// large for full-size sweeps.
inline std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg, double scale,
                                                 bool emit_files = true) {
    auto plan = plan_experiment(cfg, scale);
    namespace fs = std::filesystem;
    if (emit_files) fs::create_directories(cfg.output_dir);

    std::vector<ExperimentRow> rows;
    rows.reserve(plan.size());
    for (const auto& axis : plan) {
        RunResult res = run_single(axis.params);
        rows.push_back(summarize_run(axis.tag, axis.params, res));
        if (emit_files) {
            const std::string stem = detail::sanitize_tag(axis.tag);
            const fs::path dir(cfg.output_dir);
            if (cfg.emit_dump) {
                write_trace_file((dir / ("trace_" + stem + ".log")).string(), res.record.events);
                write_dump_file((dir / ("dump_" + stem + ".txt")).string(), res.record);
            }
            write_verdicts_csv_file((dir / ("verdicts_" + stem + ".csv")).string(),
                                    res.verdicts);
        }
    }
    if (emit_files) {
        const fs::path dir(cfg.output_dir);
        std::ofstream report(dir / "report.csv");
        if (!report) throw SimError("cannot write report.csv");
        write_report_csv(report, cfg.experiment, rows);
        std::ofstream summary(dir / "summary.txt");
        if (!summary) throw SimError("cannot write summary.txt");
        write_summary(summary, cfg.experiment, rows);
    }
    return rows;
}

}  // namespace voltdrop
