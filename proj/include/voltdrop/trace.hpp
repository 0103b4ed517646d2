#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "voltdrop/analyzer.hpp"
#include "voltdrop/core.hpp"
#include "voltdrop/ftl.hpp"

namespace voltdrop {

// --- host event trace --------------------------------------------------------
//
// One line per event:  <t_ns> <req_id> <sub_idx> <Q|D|C|E> <lba> <len_bytes>

inline void write_trace(std::ostream& os, const std::vector<DeviceEvent>& events) {
    for (const DeviceEvent& e : events)
        os << e.t << ' ' << e.req << ' ' << e.sub << ' ' << static_cast<char>(e.kind) << ' '
           << e.lba << ' ' << e.len_bytes << '\n';
}

inline void write_trace_file(const std::string& path, const std::vector<DeviceEvent>& events) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw SimError("cannot open trace file for writing: " + path);
    write_trace(os, events);
    if (!os.good()) throw SimError("short write on trace file: " + path);
}

inline std::vector<DeviceEvent> read_trace(std::istream& is) {
    std::vector<DeviceEvent> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        DeviceEvent e;
        char kind = 0;
        if (!(ls >> e.t >> e.req >> e.sub >> kind >> e.lba >> e.len_bytes))
            throw SimError("trace line " + std::to_string(lineno) + ": malformed event");
        switch (kind) {
            case 'Q': e.kind = EventKind::Queued; break;
            case 'D': e.kind = EventKind::Dispatched; break;
            case 'C': e.kind = EventKind::Completed; break;
            case 'E': e.kind = EventKind::Errored; break;
            default:
                throw SimError("trace line " + std::to_string(lineno) + ": unknown event kind");
        }
        out.push_back(e);
    }
    return out;
}

inline std::vector<DeviceEvent> read_trace_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw SimError("cannot open trace file: " + path);
    return read_trace(is);
}

// --- device dump ---------------------------------------------------------------
//
// Self-contained post-run snapshot: fault episodes, issued requests, and
// the content of every touched lba. Together with the trace it is enough
// to re-derive every verdict offline.

namespace detail {

inline std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}
inline std::string hex32(std::uint32_t v) {
    char buf[11];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

}  // namespace detail

inline void write_dump(std::ostream& os, const RunRecord& rec) {
    os << "voltdrop-dump v1\n";
    os << "timeout_ns " << rec.ack_timeout << '\n';
    os << "faults " << rec.faults.size() << '\n';
    for (const FaultInfo& f : rec.faults)
        os << "fault " << f.cutoff << ' ' << f.device_loss << ' ' << f.restore << '\n';
    os << "probes " << rec.probes.size() << '\n';
    for (const NeighborProbe& p : rec.probes)
        os << "probe " << p.fault << ' ' << p.req << ' ' << p.ack_to_cutoff << ' '
           << static_cast<int>(p.outcome) << '\n';
    os << "packets " << rec.packets.size() << '\n';
    for (const PacketInfo& p : rec.packets)
        os << "packet " << p.id << ' ' << to_char(p.op) << ' ' << p.lba << ' ' << p.len_bytes
           << ' ' << p.issue << ' ' << detail::hex64(p.payload_seed) << ' '
           << detail::hex32(p.checksum_data) << ' ' << detail::hex64(p.before_digest) << '\n';
    std::vector<Lba> lbas;
    lbas.reserve(rec.disk.size());
    for (const auto& [l, c] : rec.disk) lbas.push_back(l);
    std::sort(lbas.begin(), lbas.end());
    os << "disk " << lbas.size() << '\n';
    for (Lba l : lbas) {
        const DiskCell& c = rec.disk.at(l);
        switch (c.tag) {
            case DiskCell::Tag::Erased:
                os << "cell " << l << " E\n";
                break;
            case DiskCell::Tag::Data:
                os << "cell " << l << " D " << detail::hex32(c.crc) << ' '
                   << detail::hex64(c.seed) << ' ' << c.offset << '\n';
                break;
            case DiskCell::Tag::Corrupt:
                os << "cell " << l << " X " << detail::hex32(c.crc) << '\n';
                break;
        }
    }
}

inline void write_dump_file(const std::string& path, const RunRecord& rec) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw SimError("cannot open dump file for writing: " + path);
    write_dump(os, rec);
    if (!os.good()) throw SimError("short write on dump file: " + path);
}

// Parses a dump into a RunRecord with an empty event list (events come
// from the trace file).
inline RunRecord read_dump(std::istream& is) {
    RunRecord rec;
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&](const char* what) {
        if (!std::getline(is, line)) throw SimError(std::string("dump truncated, expected ") + what);
        ++lineno;
        return std::istringstream(line);
    };
    auto fail = [&](const std::string& msg) -> SimError {
        return SimError("dump line " + std::to_string(lineno) + ": " + msg);
    };

    {
        auto ls = next_line("header");
        std::string magic, version;
        if (!(ls >> magic >> version) || magic != "voltdrop-dump" || version != "v1")
            throw fail("bad header");
    }
    {
        auto ls = next_line("timeout");
        std::string key;
        if (!(ls >> key >> rec.ack_timeout) || key != "timeout_ns") throw fail("bad timeout line");
    }
    std::size_t n = 0;
    {
        auto ls = next_line("fault count");
        std::string key;
        if (!(ls >> key >> n) || key != "faults") throw fail("bad fault count");
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto ls = next_line("fault");
        std::string key;
        FaultInfo f;
        if (!(ls >> key >> f.cutoff >> f.device_loss >> f.restore) || key != "fault")
            throw fail("bad fault line");
        rec.faults.push_back(f);
    }
    {
        auto ls = next_line("probe count");
        std::string key;
        if (!(ls >> key >> n) || key != "probes") throw fail("bad probe count");
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto ls = next_line("probe");
        std::string key;
        NeighborProbe p;
        int outcome = 0;
        if (!(ls >> key >> p.fault >> p.req >> p.ack_to_cutoff >> outcome) || key != "probe" ||
            outcome < 0 || outcome > 2)
            throw fail("bad probe line");
        p.outcome = static_cast<ProbeOutcome>(outcome);
        rec.probes.push_back(p);
    }
    {
        auto ls = next_line("packet count");
        std::string key;
        if (!(ls >> key >> n) || key != "packets") throw fail("bad packet count");
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto ls = next_line("packet");
        std::string key, seed, crc, before;
        char op = 0;
        PacketInfo p;
        if (!(ls >> key >> p.id >> op >> p.lba >> p.len_bytes >> p.issue >> seed >> crc >>
              before) ||
            key != "packet" || (op != 'R' && op != 'W'))
            throw fail("bad packet line");
        p.op = op == 'R' ? Op::Read : Op::Write;
        p.payload_seed = std::stoull(seed, nullptr, 16);
        p.checksum_data = static_cast<std::uint32_t>(std::stoul(crc, nullptr, 16));
        p.before_digest = std::stoull(before, nullptr, 16);
        rec.packets.push_back(p);
    }
    {
        auto ls = next_line("disk count");
        std::string key;
        if (!(ls >> key >> n) || key != "disk") throw fail("bad disk count");
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto ls = next_line("cell");
        std::string key;
        Lba lba = 0;
        char tag = 0;
        if (!(ls >> key >> lba >> tag) || key != "cell") throw fail("bad cell line");
        DiskCell c;
        if (tag == 'E') {
            c = {DiskCell::Tag::Erased, erased_chunk_crc(), 0, 0};
        } else if (tag == 'D') {
            std::string crc, seed;
            if (!(ls >> crc >> seed >> c.offset)) throw fail("bad data cell");
            c.tag = DiskCell::Tag::Data;
            c.crc = static_cast<std::uint32_t>(std::stoul(crc, nullptr, 16));
            c.seed = std::stoull(seed, nullptr, 16);
        } else if (tag == 'X') {
            std::string crc;
            if (!(ls >> crc)) throw fail("bad corrupt cell");
            c.tag = DiskCell::Tag::Corrupt;
            c.crc = static_cast<std::uint32_t>(std::stoul(crc, nullptr, 16));
        } else {
            throw fail("unknown cell tag");
        }
        rec.disk.emplace(lba, c);
    }
    return rec;
}

inline RunRecord read_dump_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw SimError("cannot open dump file: " + path);
    return read_dump(is);
}

// --- verdict table ----------------------------------------------------------------

inline void write_verdicts_csv(std::ostream& os, const std::vector<Verdict>& vs) {
    os << "req_id,op,lba,len_bytes,completed,notApplied,class\n";
    for (const Verdict& v : vs)
        os << v.req << ',' << to_char(v.op) << ',' << v.lba << ',' << v.len_bytes << ','
           << (v.flags.completed ? 1 : 0) << ',' << (v.flags.not_applied ? 1 : 0) << ','
           << to_string(v.cls) << '\n';
}

inline void write_verdicts_csv_file(const std::string& path, const std::vector<Verdict>& vs) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw SimError("cannot open verdict file for writing: " + path);
    write_verdicts_csv(os, vs);
    if (!os.good()) throw SimError("short write on verdict file: " + path);
}

}  // namespace voltdrop
