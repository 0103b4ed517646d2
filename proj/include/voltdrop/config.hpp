#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "voltdrop/core.hpp"
#include "voltdrop/run.hpp"

namespace voltdrop {

// Everything a `voltdrop run` invocation is parameterised by. Field
// defaults are the file defaults: a config file only needs the keys it
// wants to change.
struct ExperimentConfig {
    std::string experiment = "custom";
    std::uint64_t master_seed = 1;
    std::string output_dir = "out";
    bool emit_dump = false;  // also write per-axis trace/flash-dump files

    int fault_count = 3;
    std::uint64_t fault_seed = 42;
    std::int64_t restore_delay_ms = 500;
    std::optional<std::int64_t> armed_delay_ms;  // fault cutoffs armed off request acks
    int armed_warmup = 5;

    VoltageModel vm;

    FlashGeometry geo{0, 256, 4096};  // blocks 0: auto-size to the workload
    FlashTiming timing;
    double p_corrupt_on_interrupt = 1.0;

    std::uint64_t cache_bytes = 16ull << 20;
    bool cache_enabled = true;
    std::int64_t map_persist_ms = 500;
    std::int64_t map_settle_ms = 200;
    double service_rate_iops = 6900.0;
    double gc_threshold = 0.10;
    std::uint32_t range_merge_cap = 4096;
    std::int64_t read_latency_us = 100;

    WorkloadSpec wl;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Integers accept binary size suffixes: k/kib, m/mib, g/gib.
inline std::uint64_t parse_bytes(const std::string& raw) {
    std::string s = lower(trim(raw));
    std::uint64_t mult = 1;
    auto strip = [&](const char* suffix, std::uint64_t m) {
        std::size_t n = std::string(suffix).size();
        if (s.size() > n && s.compare(s.size() - n, n, suffix) == 0) {
            s = trim(s.substr(0, s.size() - n));
            mult = m;
            return true;
        }
        return false;
    };
    strip("kib", 1024ull) || strip("mib", 1048576ull) || strip("gib", 1073741824ull) ||
        strip("k", 1024ull) || strip("m", 1048576ull) || strip("g", 1073741824ull);
    std::size_t pos = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError("not an integer: '" + raw + "'");
    }
    if (pos != s.size()) throw ConfigError("not an integer: '" + raw + "'");
    return v * mult;
}

inline std::int64_t parse_int(const std::string& raw) {
    return static_cast<std::int64_t>(parse_bytes(raw));
}

inline double parse_real(const std::string& raw) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(trim(raw), &pos);
    } catch (const std::exception&) {
        throw ConfigError("not a number: '" + raw + "'");
    }
    if (pos != trim(raw).size()) throw ConfigError("not a number: '" + raw + "'");
    return v;
}

inline bool parse_bool(const std::string& raw) {
    std::string s = lower(trim(raw));
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw ConfigError("not a boolean: '" + raw + "'");
}

inline bool apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& val) {
    const std::string v = trim(val);
    if (key == "experiment") {
        static const char* names[] = {"custom",   "req_type", "wss",      "pattern",
                                      "req_size", "iops",     "sequence", "time_interval"};
        std::string name = lower(v);
        if (std::find_if(std::begin(names), std::end(names),
                         [&](const char* n) { return name == n; }) == std::end(names))
            throw ConfigError("unknown experiment '" + v + "'");
        cfg.experiment = name;
    } else if (key == "seed" || key == "master_seed") {
        cfg.master_seed = parse_bytes(v);
    } else if (key == "output_dir") {
        cfg.output_dir = v;
    } else if (key == "output.dump") {
        cfg.emit_dump = parse_bool(v);
    } else if (key == "faults.count") {
        cfg.fault_count = static_cast<int>(parse_int(v));
    } else if (key == "faults.seed") {
        cfg.fault_seed = parse_bytes(v);
    } else if (key == "faults.restore_delay_ms") {
        cfg.restore_delay_ms = parse_int(v);
    } else if (key == "faults.armed_delay_ms") {
        if (lower(v) == "none")
            cfg.armed_delay_ms.reset();
        else
            cfg.armed_delay_ms = parse_int(v);
    } else if (key == "faults.armed_warmup") {
        cfg.armed_warmup = static_cast<int>(parse_int(v));
    } else if (key == "power.v_nominal") {
        cfg.vm.v_nominal = parse_real(v);
    } else if (key == "power.v_unavailable") {
        cfg.vm.v_unavailable = parse_real(v);
    } else if (key == "power.t_unavailable_ms") {
        cfg.vm.t_unavailable_ms = parse_real(v);
    } else if (key == "power.t_zero_loaded_ms") {
        cfg.vm.t_zero_loaded_ms = parse_real(v);
    } else if (key == "power.t_zero_unloaded_ms") {
        cfg.vm.t_zero_unloaded_ms = parse_real(v);
    } else if (key == "flash.blocks") {
        cfg.geo.blocks = static_cast<std::uint32_t>(parse_bytes(v));
    } else if (key == "flash.pages_per_block") {
        cfg.geo.pages_per_block = static_cast<std::uint32_t>(parse_bytes(v));
    } else if (key == "flash.page_size") {
        cfg.geo.page_size = static_cast<std::uint32_t>(parse_bytes(v));
    } else if (key == "flash.program_steps") {
        cfg.timing.program_steps = static_cast<int>(parse_int(v));
    } else if (key == "flash.t_program_step_us") {
        cfg.timing.t_program_step_us = parse_int(v);
    } else if (key == "flash.t_erase_us") {
        cfg.timing.t_erase_us = parse_int(v);
    } else if (key == "flash.p_corrupt_on_interrupt") {
        cfg.p_corrupt_on_interrupt = parse_real(v);
    } else if (key == "ftl.cache_bytes") {
        cfg.cache_bytes = parse_bytes(v);
    } else if (key == "ftl.cache_enabled") {
        cfg.cache_enabled = parse_bool(v);
    } else if (key == "ftl.map_persist_ms") {
        cfg.map_persist_ms = parse_int(v);
    } else if (key == "ftl.map_settle_ms") {
        cfg.map_settle_ms = parse_int(v);
    } else if (key == "ftl.service_rate_iops") {
        cfg.service_rate_iops = parse_real(v);
    } else if (key == "ftl.gc_threshold") {
        cfg.gc_threshold = parse_real(v);
    } else if (key == "ftl.range_merge_cap") {
        cfg.range_merge_cap = static_cast<std::uint32_t>(parse_bytes(v));
    } else if (key == "ftl.read_latency_us") {
        cfg.read_latency_us = parse_int(v);
    } else if (key == "wl.wss_bytes") {
        cfg.wl.wss_bytes = parse_bytes(v);
    } else if (key == "wl.req_size") {
        if (lower(v) == "uniform")
            cfg.wl.size.fixed_bytes = 0;
        else
            cfg.wl.size.fixed_bytes = static_cast<std::uint32_t>(parse_bytes(v));
    } else if (key == "wl.write_pct") {
        cfg.wl.write_pct = static_cast<int>(parse_int(v));
    } else if (key == "wl.pattern") {
        std::string p = lower(v);
        if (p == "random")
            cfg.wl.pattern = Pattern::Random;
        else if (p == "sequential")
            cfg.wl.pattern = Pattern::Sequential;
        else
            throw ConfigError("unknown pattern '" + v + "'");
    } else if (key == "wl.sequence") {
        std::string s = lower(v);
        if (s == "none")
            cfg.wl.sequence.reset();
        else if (s == "rar")
            cfg.wl.sequence = SeqKind::RAR;
        else if (s == "raw")
            cfg.wl.sequence = SeqKind::RAW;
        else if (s == "war")
            cfg.wl.sequence = SeqKind::WAR;
        else if (s == "waw")
            cfg.wl.sequence = SeqKind::WAW;
        else
            throw ConfigError("unknown sequence kind '" + v + "'");
    } else if (key == "wl.iops") {
        cfg.wl.iops = parse_real(v);
    } else if (key == "wl.n_requests") {
        cfg.wl.n_requests = static_cast<std::uint32_t>(parse_bytes(v));
    } else if (key == "wl.seed") {
        cfg.wl.seed = parse_bytes(v);
    } else {
        return false;
    }
    return true;
}

}  // namespace detail

// Line-oriented `key = value` format; '#' starts a comment; blank lines
// are ignored; unknown keys are rejected.
inline ExperimentConfig parse_config(std::istream& is) {
    ExperimentConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string s = line;
        if (auto hash = s.find('#'); hash != std::string::npos) s = s.substr(0, hash);
        s = detail::trim(s);
        if (s.empty()) continue;
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = detail::trim(s.substr(0, eq));
        std::string val = detail::trim(s.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        try {
            if (!detail::apply_key(cfg, key, val))
                throw ConfigError("unknown key '" + key + "'");
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    return parse_config(is);
}

// Assemble simulator parameters from a parsed config.
inline RunParams to_run_params(const ExperimentConfig& cfg) {
    RunParams rp;
    rp.wl = cfg.wl;
    rp.vm = cfg.vm;
    rp.fault_count = cfg.fault_count;
    rp.fault_seed = cfg.fault_seed;
    rp.restore_delay = from_ms(cfg.restore_delay_ms);
    if (cfg.armed_delay_ms) rp.armed_delay = from_ms(*cfg.armed_delay_ms);
    rp.armed_warmup = cfg.armed_warmup;
    rp.geo = cfg.geo;
    rp.timing = cfg.timing;
    rp.ftl.cache_bytes = cfg.cache_bytes;
    rp.ftl.cache_enabled = cfg.cache_enabled;
    rp.ftl.map_persist_interval = from_ms(cfg.map_persist_ms);
    rp.ftl.map_persist_settle = from_ms(cfg.map_settle_ms);
    rp.ftl.service_rate_iops = cfg.service_rate_iops;
    rp.ftl.gc_free_threshold = cfg.gc_threshold;
    rp.ftl.range_merge_cap = cfg.range_merge_cap;
    rp.ftl.read_latency = from_us(cfg.read_latency_us);
    rp.ftl.p_corrupt_on_interrupt = cfg.p_corrupt_on_interrupt;
    rp.run_seed = mix_seed(cfg.master_seed, "run");
    return rp;
}

}  // namespace voltdrop
