#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "voltdrop/checksum.hpp"
#include "voltdrop/core.hpp"
#include "voltdrop/ftl.hpp"

namespace voltdrop {

enum class Pattern : std::uint8_t { Random, Sequential };

// Dependent-request chains: each request reuses the address of the
// previously completed one, giving classic hazard pairs (the second letter
// is the earlier operation: WAR = write after read, and so on).
enum class SeqKind : std::uint8_t { RAR, RAW, WAR, WAW };

inline Op chain_first_op(SeqKind k) {
    // The chain starts with the "earlier" operation of the pair.
    switch (k) {
        case SeqKind::RAR:
        case SeqKind::WAR: return Op::Read;
        case SeqKind::RAW:
        case SeqKind::WAW: return Op::Write;
    }
    return Op::Write;
}

inline Op chain_next_op(SeqKind k, Op prev) {
    switch (k) {
        case SeqKind::RAR: return Op::Read;
        case SeqKind::WAW: return Op::Write;
        case SeqKind::RAW:  // alternating W,R,W,R,...
        case SeqKind::WAR:  // alternating R,W,R,W,...
            return prev == Op::Read ? Op::Write : Op::Read;
    }
    return Op::Write;
}

// One host request, before and after its trip through the device.
struct DataPacket {
    std::uint64_t id = 0;  // 1-based issue order
    Op op = Op::Write;
    Lba lba = 0;
    std::uint32_t length = 0;  // bytes
    SimTime issue_time = 0;
    std::uint64_t payload_seed = 0;   // writes: defines the payload bytes
    std::uint32_t checksum_data = 0;  // writes: crc32 of the payload
};

struct SizeSpec {
    // fixed_bytes == 0 draws uniformly from 4 KiB..1 MiB in 4 KiB steps.
    std::uint32_t fixed_bytes = 0;

    static constexpr std::uint32_t kMin = 4096;
    static constexpr std::uint32_t kMax = 1024 * 1024;

    bool uniform() const { return fixed_bytes == 0; }
    std::uint32_t max_bytes() const { return uniform() ? kMax : fixed_bytes; }

    void validate() const {
        if (fixed_bytes == 0) return;
        if (fixed_bytes < kMin || fixed_bytes > kMax || fixed_bytes % kMin != 0)
            throw ConfigError("req_size must be a multiple of 4096 in [4096, 1048576]");
    }
};

struct WorkloadSpec {
    std::uint64_t wss_bytes = 1ull << 30;
    SizeSpec size;
    int write_pct = 100;
    Pattern pattern = Pattern::Random;
    std::optional<SeqKind> sequence;
    double iops = 4.0;
    std::uint32_t n_requests = 240;
    std::uint64_t seed = 1;

    void validate() const {
        size.validate();
        if (wss_bytes < size.max_bytes())
            throw ConfigError("wss_bytes smaller than the largest request");
        if (wss_bytes % SizeSpec::kMin != 0)
            throw ConfigError("wss_bytes must be a multiple of 4096");
        if (write_pct < 0 || write_pct > 100)
            throw ConfigError("write_pct must be in [0, 100]");
        if (iops <= 0.0) throw ConfigError("iops must be positive");
        if (n_requests == 0) throw ConfigError("n_requests must be positive");
        if (sequence == SeqKind::WAW && write_pct == 0)
            throw ConfigError("sequence=waw contradicts write_pct=0");
    }
};

// Open-loop issue instant of request index i (0-based): exact pacing with
// no accumulated rounding drift.
inline SimTime issue_slot(double iops, std::uint64_t index) {
    return static_cast<SimTime>(static_cast<double>(index) * 1e9 / iops);
}

inline std::uint64_t payload_seed_for(std::uint64_t wl_seed, std::uint64_t id) {
    return mix_seed(wl_seed, id ^ 0x77C0FFEEull);
}

namespace detail {

// Independent draw channels per request id keep the generated stream
// stable under parameter changes: request i has the same size, address and
// op-threshold draw no matter what write_pct is set to, so the write set
// at a lower percentage is a subset of the write set at a higher one.
enum class Draw : std::uint64_t { OpThreshold = 0, Size = 1, Addr = 2 };

inline std::uint64_t draw_word(std::uint64_t seed, std::uint64_t id, Draw ch) {
    return stream_word(seed, id * 8 + static_cast<std::uint64_t>(ch));
}

inline std::uint32_t draw_size(const WorkloadSpec& spec, std::uint64_t id) {
    if (!spec.size.uniform()) return spec.size.fixed_bytes;
    std::uint64_t steps = SizeSpec::kMax / SizeSpec::kMin;  // 256
    return static_cast<std::uint32_t>(
        SizeSpec::kMin * (1 + bounded(draw_word(spec.seed, id, Draw::Size), steps)));
}

inline Lba draw_aligned_lba(const WorkloadSpec& spec, std::uint64_t id, std::uint32_t len_bytes) {
    const Lba align = SizeSpec::kMin / kLbaBytes;  // 4 KiB alignment
    Lba wss_lbas = spec.wss_bytes / kLbaBytes;
    Lba slots = (wss_lbas - len_bytes / kLbaBytes) / align + 1;
    return align * bounded(draw_word(spec.seed, id, Draw::Addr), slots);
}

inline Op draw_op(const WorkloadSpec& spec, std::uint64_t id) {
    double u = unit_real(draw_word(spec.seed, id, Draw::OpThreshold));
    return u < spec.write_pct / 100.0 ? Op::Write : Op::Read;
}

}  // namespace detail

inline DataPacket finish_packet(const WorkloadSpec& spec, DataPacket p) {
    if (p.op == Op::Write) {
        p.payload_seed = payload_seed_for(spec.seed, p.id);
        p.checksum_data = payload_crc(p.payload_seed, p.length);
    }
    return p;
}

// Full request stream for open-loop (non-chained) workloads.
inline std::vector<DataPacket> generate(const WorkloadSpec& spec) {
    spec.validate();
    if (spec.sequence)
        throw ConfigError("chained workloads are issued one request at a time");
    std::vector<DataPacket> out;
    out.reserve(spec.n_requests);
    Lba cursor = 0;
    const Lba wss_lbas = spec.wss_bytes / kLbaBytes;
    for (std::uint32_t i = 0; i < spec.n_requests; ++i) {
        DataPacket p;
        p.id = i + 1;
        p.op = detail::draw_op(spec, p.id);
        p.length = detail::draw_size(spec, p.id);
        const Lba len_lbas = p.length / kLbaBytes;
        if (spec.pattern == Pattern::Random) {
            p.lba = detail::draw_aligned_lba(spec, p.id, p.length);
        } else {
            if (i == 0) cursor = detail::draw_aligned_lba(spec, p.id, p.length);
            if (cursor + len_lbas > wss_lbas) cursor = 0;
            p.lba = cursor;
            cursor += len_lbas;
        }
        p.issue_time = issue_slot(spec.iops, i);
        out.push_back(finish_packet(spec, p));
    }
    return out;
}

// First request of a dependent chain.
inline DataPacket first_in_sequence(const WorkloadSpec& spec) {
    spec.validate();
    if (!spec.sequence) throw ConfigError("workload has no sequence kind");
    DataPacket p;
    p.id = 1;
    p.op = chain_first_op(*spec.sequence);
    p.length = detail::draw_size(spec, p.id);
    p.lba = detail::draw_aligned_lba(spec, p.id, p.length);
    p.issue_time = issue_slot(spec.iops, 0);
    return finish_packet(spec, p);
}

// Next request of the chain: same address and length as the completed
// predecessor. Chaining off an incomplete request is a protocol error.
inline DataPacket next_in_sequence(const WorkloadSpec& spec, const DataPacket& prev,
                                   bool prev_completed, std::uint64_t id) {
    if (!spec.sequence) throw ConfigError("workload has no sequence kind");
    if (!prev_completed)
        throw SimError("next_in_sequence: predecessor request did not complete");
    DataPacket p;
    p.id = id;
    p.op = chain_next_op(*spec.sequence, prev.op);
    p.lba = prev.lba;
    p.length = prev.length;
    return finish_packet(spec, p);
}

inline const char* to_string(Pattern p) {
    return p == Pattern::Random ? "random" : "sequential";
}

inline const char* to_string(SeqKind k) {
    switch (k) {
        case SeqKind::RAR: return "rar";
        case SeqKind::RAW: return "raw";
        case SeqKind::WAR: return "war";
        case SeqKind::WAW: return "waw";
    }
    return "?";
}

}  // namespace voltdrop
