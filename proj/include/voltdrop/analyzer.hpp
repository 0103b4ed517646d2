#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "voltdrop/checksum.hpp"
#include "voltdrop/core.hpp"
#include "voltdrop/ftl.hpp"
#include "voltdrop/workload.hpp"

namespace voltdrop {

enum class Classification : std::uint8_t { None, DataFailure, Fwa, IoError };

inline const char* to_string(Classification c) {
    switch (c) {
        case Classification::None: return "none";
        case Classification::DataFailure: return "data_failure";
        case Classification::Fwa: return "fwa";
        case Classification::IoError: return "io_error";
    }
    return "?";
}

// Post-mortem view of one request.
struct PacketInfo {
    std::uint64_t id = 0;
    Op op = Op::Write;
    Lba lba = 0;
    std::uint32_t len_bytes = 0;
    SimTime issue = 0;
    std::uint64_t payload_seed = 0;
    std::uint32_t checksum_data = 0;   // crc32 of the write payload
    std::uint64_t before_digest = 0;   // region digest when the request was issued

    std::uint32_t len_lbas() const { return len_bytes / kLbaBytes; }
};

struct FaultInfo {
    SimTime cutoff = 0;       // wall power lost
    SimTime device_loss = 0;  // rail crossed the availability threshold
    SimTime restore = 0;      // back at nominal
};

// Post-restore re-checksum of one write that was acknowledged shortly
// before a cutoff: the window between acknowledgement and wall-power loss
// is the exposure this tool quantifies. Captured right after the restore,
// before later traffic can repair the region.
//   Clean      — the payload survived (or was wholly superseded by later
//                acknowledged writes whose payload survived)
//   RolledBack — every lost lba reads as its pre-request content
//   Mangled    — partially persisted, corrupt, or mixed content
enum class ProbeOutcome : std::uint8_t { Clean, RolledBack, Mangled };

inline const char* to_string(ProbeOutcome o) {
    switch (o) {
        case ProbeOutcome::Clean: return "clean";
        case ProbeOutcome::RolledBack: return "rolled_back";
        case ProbeOutcome::Mangled: return "mangled";
    }
    return "?";
}

struct NeighborProbe {
    int fault = -1;
    std::uint64_t req = 0;
    SimTime ack_to_cutoff = 0;
    ProbeOutcome outcome = ProbeOutcome::Clean;
};

// Everything the analyzer needs: the issued requests, the host-visible
// event trace, the fault episodes, the post-restore probes, and the
// post-run content of every touched lba.
struct RunRecord {
    std::vector<PacketInfo> packets;
    std::vector<DeviceEvent> events;
    std::vector<FaultInfo> faults;
    std::vector<NeighborProbe> probes;
    std::unordered_map<Lba, DiskCell> disk;
    SimTime ack_timeout = 30 * kSecond;
};

struct Flags {
    bool completed = false;
    bool not_applied = false;
};

// completed: every sub-request acknowledged within the timeout.
// notApplied: the medium holds the pre-request content, not the payload.
inline Flags compute_flags(bool all_subs_acked_in_time, std::uint64_t data_digest,
                           std::uint64_t before_digest, std::uint64_t readback_digest) {
    Flags f;
    f.completed = all_subs_acked_in_time;
    f.not_applied = readback_digest != data_digest && readback_digest == before_digest;
    return f;
}

// Verdict table. `superseded_ok` short-circuits writes whose every lba
// either holds this request's payload or was legitimately overwritten by a
// later acknowledged write: such a request lost nothing.
inline Classification classify(Op op, const Flags& f, std::uint64_t data_digest,
                               std::uint64_t readback_digest, bool superseded_ok) {
    if (!f.completed) return Classification::IoError;
    if (op == Op::Read) return Classification::None;
    if (superseded_ok || readback_digest == data_digest) return Classification::None;
    return f.not_applied ? Classification::Fwa : Classification::DataFailure;
}

struct Verdict {
    std::uint64_t req = 0;
    Op op = Op::Write;
    Lba lba = 0;
    std::uint32_t len_bytes = 0;
    Flags flags;
    Classification cls = Classification::None;
    std::uint64_t data_digest = 0;
    std::uint64_t before_digest = 0;
    std::uint64_t readback_digest = 0;
    SimTime completion = -1;  // last acknowledgement, when completed
};

struct FailureCounts {
    std::uint64_t none = 0;
    std::uint64_t data_failure = 0;
    std::uint64_t fwa = 0;
    std::uint64_t io_error = 0;
    std::uint64_t completed = 0;

    void add(const Verdict& v) {
        completed += v.flags.completed ? 1 : 0;
        switch (v.cls) {
            case Classification::None: ++none; break;
            case Classification::DataFailure: ++data_failure; break;
            case Classification::Fwa: ++fwa; break;
            case Classification::IoError: ++io_error; break;
        }
    }
    std::uint64_t data_loss() const { return data_failure + fwa; }
    std::uint64_t total() const { return none + data_failure + fwa + io_error; }
};

inline FailureCounts tally(const std::vector<Verdict>& vs) {
    FailureCounts c;
    for (const Verdict& v : vs) c.add(v);
    return c;
}

namespace detail {

struct AckView {
    std::vector<SimTime> sub_ack;  // -1 where missing
    std::uint32_t acked = 0;
    SimTime last = -1;
};

inline std::unordered_map<std::uint64_t, AckView> collect_acks(const RunRecord& rec) {
    std::unordered_map<std::uint64_t, AckView> acks;
    std::unordered_map<std::uint64_t, std::uint32_t> n_subs;
    for (const PacketInfo& p : rec.packets) n_subs[p.id] = sub_count(p.len_bytes);
    for (const DeviceEvent& e : rec.events) {
        if (e.kind != EventKind::Completed) continue;
        auto it = n_subs.find(e.req);
        if (it == n_subs.end()) throw SimError("trace names an unknown request id");
        AckView& a = acks[e.req];
        if (a.sub_ack.empty()) a.sub_ack.assign(it->second, -1);
        if (e.sub >= a.sub_ack.size()) throw SimError("trace sub index out of range");
        if (a.sub_ack[e.sub] < 0) {
            a.sub_ack[e.sub] = e.t;
            ++a.acked;
            a.last = a.last > e.t ? a.last : e.t;
        }
    }
    return acks;
}

}  // namespace detail

// Derive a verdict for every request from the physical evidence.
inline std::vector<Verdict> analyze(const RunRecord& rec) {
    auto acks = detail::collect_acks(rec);

    // Sub-granular acknowledged writers of each lba, ascending id. A write
    // is off the hook for an lba only while the medium holds its own payload
    // there or the payload of a later acknowledged writer; whether that later
    // writer kept its own promises is charged to it, never to its ancestors.
    std::unordered_map<Lba, std::vector<const PacketInfo*>> writers;
    for (const PacketInfo& p : rec.packets) {
        if (p.op != Op::Write) continue;
        auto a = acks.find(p.id);
        if (a == acks.end()) continue;
        const std::uint32_t span = kSubSplitBytes / kLbaBytes;
        for (std::uint32_t s = 0; s < a->second.sub_ack.size(); ++s) {
            if (a->second.sub_ack[s] < 0) continue;
            Lba lo = p.lba + static_cast<Lba>(s) * span;
            Lba hi = std::min<Lba>(lo + span, p.lba + p.len_lbas());
            for (Lba l = lo; l < hi; ++l) writers[l].push_back(&p);
        }
    }

    auto disk_cell = [&](Lba l) -> DiskCell {
        auto it = rec.disk.find(l);
        if (it == rec.disk.end()) return DiskCell{DiskCell::Tag::Erased, erased_chunk_crc(), 0, 0};
        return it->second;
    };

    auto lba_absolved = [&](Lba l, const PacketInfo& p) {
        DiskCell c = disk_cell(l);
        if (c.tag != DiskCell::Tag::Data) return false;
        std::uint32_t off = static_cast<std::uint32_t>(l - p.lba) * kLbaBytes;
        if (c.crc == chunk_crc(p.payload_seed, off)) return true;
        auto it = writers.find(l);
        if (it == writers.end()) return false;
        for (auto w = it->second.rbegin(); w != it->second.rend(); ++w) {
            if ((*w)->id <= p.id) break;
            std::uint32_t o2 = static_cast<std::uint32_t>(l - (*w)->lba) * kLbaBytes;
            if (c.crc == chunk_crc((*w)->payload_seed, o2)) return true;
        }
        return false;
    };

    std::vector<Verdict> out;
    out.reserve(rec.packets.size());
    for (const PacketInfo& p : rec.packets) {
        Verdict v;
        v.req = p.id;
        v.op = p.op;
        v.lba = p.lba;
        v.len_bytes = p.len_bytes;
        v.before_digest = p.before_digest;
        v.data_digest = p.op == Op::Write ? p.checksum_data : 0;

        RegionDigest rb;
        bool absolved = true;
        for (Lba l = p.lba; l < p.lba + p.len_lbas(); ++l) {
            DiskCell c = disk_cell(l);
            rb.add_chunk(c.readable(), c.crc);
            if (absolved && p.op == Op::Write) absolved = lba_absolved(l, p);
        }
        v.readback_digest = rb.value();

        bool in_time = false;
        if (auto a = acks.find(p.id); a != acks.end()) {
            const detail::AckView& av = a->second;
            in_time = av.acked == av.sub_ack.size() && av.last - p.issue <= rec.ack_timeout;
            if (in_time) v.completion = av.last;
        }
        v.flags = compute_flags(in_time, v.data_digest, v.before_digest, v.readback_digest);
        bool superseded_ok = p.op == Op::Write && absolved;
        v.cls = classify(p.op, v.flags, v.data_digest, v.readback_digest, superseded_ok);
        out.push_back(v);
    }

    // Probe evidence is authoritative for the probed requests: it was taken
    // right after the restore, before later traffic could repair the region.
    // Pure rollback means the acknowledged write never applied (old data
    // intact); anything else lost the payload outright.
    std::unordered_map<std::uint64_t, std::size_t> slot;
    for (std::size_t i = 0; i < out.size(); ++i) slot[out[i].req] = i;
    for (const NeighborProbe& pr : rec.probes) {
        auto it = slot.find(pr.req);
        if (it == slot.end()) throw SimError("probe names an unknown request id");
        if (pr.outcome == ProbeOutcome::Clean) continue;
        Verdict& v = out[it->second];
        if (v.op != Op::Write || !v.flags.completed) continue;
        if (pr.outcome == ProbeOutcome::RolledBack) {
            v.cls = Classification::Fwa;
            v.flags.not_applied = true;
        } else {
            v.cls = Classification::DataFailure;
            v.flags.not_applied = false;
        }
    }
    return out;
}

// Per-fault attribution: each failed request is charged to the most
// recent cutoff preceding its issue.
struct FaultBreakdown {
    SimTime cutoff = 0;
    std::uint64_t data_failure = 0;
    std::uint64_t fwa = 0;
    std::uint64_t io_error = 0;
};

inline std::vector<FaultBreakdown> per_fault_breakdown(const RunRecord& rec,
                                                       const std::vector<Verdict>& verdicts) {
    std::vector<FaultBreakdown> out;
    out.reserve(rec.faults.size());
    for (const FaultInfo& f : rec.faults) out.push_back({f.cutoff, 0, 0, 0});
    if (out.empty()) return out;
    std::unordered_map<std::uint64_t, SimTime> issue_of;
    for (const PacketInfo& p : rec.packets) issue_of[p.id] = p.issue;
    // Reclassified neighbours are charged to their probing fault instead.
    std::unordered_map<std::uint64_t, int> probe_fault;
    for (const NeighborProbe& pr : rec.probes)
        if (pr.outcome != ProbeOutcome::Clean) probe_fault.emplace(pr.req, pr.fault);
    for (const Verdict& v : verdicts) {
        if (v.cls == Classification::None) continue;
        int idx = -1;
        if (auto pf = probe_fault.find(v.req); pf != probe_fault.end()) {
            idx = pf->second;
        } else {
            SimTime t = issue_of.at(v.req);
            for (std::size_t i = 0; i < out.size(); ++i)
                if (out[i].cutoff <= t) idx = static_cast<int>(i);
        }
        if (idx < 0) idx = 0;
        FaultBreakdown& b = out[static_cast<std::size_t>(idx)];
        switch (v.cls) {
            case Classification::DataFailure: ++b.data_failure; break;
            case Classification::Fwa: ++b.fwa; break;
            case Classification::IoError: ++b.io_error; break;
            case Classification::None: break;
        }
    }
    return out;
}

// Independent re-derivation of every verdict with deliberately naive code:
// byte-level hashing instead of checksum folding, flat per-lba replay
// instead of incremental state. Disagreement with analyze() means one of
// the two is wrong.
inline std::vector<Verdict> oracle_replay(const RunRecord& rec) {
    // Flat table of every sub-acknowledgement, collected in one pass so the
    // per-lba scans below stay affordable on larger instances.
    std::unordered_map<std::uint64_t, SimTime> sub_acked;  // (req<<8)|sub -> first ack
    for (const DeviceEvent& e : rec.events) {
        if (e.kind != EventKind::Completed) continue;
        sub_acked.emplace((e.req << 8) | e.sub, e.t);
    }

    auto completed_of = [&](const PacketInfo& p, SimTime* when) {
        std::uint32_t n = sub_count(p.len_bytes);
        SimTime last = -1;
        for (std::uint32_t s = 0; s < n; ++s) {
            auto it = sub_acked.find((p.id << 8) | s);
            if (it == sub_acked.end()) return false;
            last = std::max(last, it->second);
        }
        *when = last;
        return last - p.issue <= rec.ack_timeout;
    };

    // Does the cell at one lba hold the payload of the given write or of any
    // acknowledged write issued after it?
    auto cell_accounted_for = [&](Lba l, const DiskCell& c, const PacketInfo& self) {
        if (c.tag != DiskCell::Tag::Data) return false;
        for (const PacketInfo& p : rec.packets) {
            if (p.op != Op::Write || p.id < self.id) continue;
            if (l < p.lba || l >= p.lba + p.len_lbas()) continue;
            std::uint32_t sub = static_cast<std::uint32_t>((l - p.lba) * kLbaBytes / kSubSplitBytes);
            if (!sub_acked.count((p.id << 8) | sub)) continue;
            unsigned char chunk[kLbaBytes];
            fill_payload(p.payload_seed, static_cast<std::uint32_t>(l - p.lba) * kLbaBytes, chunk,
                         sizeof chunk);
            if (crc32(chunk, sizeof chunk) == c.crc) return true;
        }
        return false;
    };

    auto region_digest_of = [&](const PacketInfo& p) -> std::uint64_t {
        std::vector<unsigned char> bytes;
        bytes.reserve(p.len_bytes);
        bool corrupt = false;
        std::uint64_t mixed = 0xCBF29CE484222325ull;
        for (Lba l = p.lba; l < p.lba + p.len_lbas(); ++l) {
            auto it = rec.disk.find(l);
            DiskCell c = it == rec.disk.end()
                             ? DiskCell{DiskCell::Tag::Erased, erased_chunk_crc(), 0, 0}
                             : it->second;
            unsigned char chunk[kLbaBytes] = {};
            if (c.tag == DiskCell::Tag::Data) {
                fill_payload(c.seed, c.offset, chunk, sizeof chunk);
                if (crc32(chunk, sizeof chunk) != c.crc)
                    throw SimError("disk cell checksum does not match its provenance");
            } else if (c.tag == DiskCell::Tag::Corrupt) {
                corrupt = true;
            }
            bytes.insert(bytes.end(), chunk, chunk + sizeof chunk);
            mixed = (mixed ^ (c.crc | (c.readable() ? 0u : 0x80000000u))) * 0x100000001B3ull +
                    0xCBF29CE484222325ull;
        }
        if (corrupt) return kCorruptBit | mixed;
        return crc32(bytes.data(), bytes.size());
    };

    std::vector<Verdict> out;
    for (const PacketInfo& p : rec.packets) {
        Verdict v;
        v.req = p.id;
        v.op = p.op;
        v.lba = p.lba;
        v.len_bytes = p.len_bytes;
        v.before_digest = p.before_digest;
        v.data_digest = p.op == Op::Write ? p.checksum_data : 0;
        v.readback_digest = region_digest_of(p);

        SimTime when = -1;
        v.flags.completed = completed_of(p, &when);
        if (v.flags.completed) v.completion = when;
        v.flags.not_applied =
            v.readback_digest != v.data_digest && v.readback_digest == v.before_digest;

        if (!v.flags.completed) {
            v.cls = Classification::IoError;
        } else if (p.op == Op::Read) {
            v.cls = Classification::None;
        } else {
            bool all_ok = true;
            for (Lba l = p.lba; l < p.lba + p.len_lbas() && all_ok; ++l) {
                auto it = rec.disk.find(l);
                DiskCell c = it == rec.disk.end()
                                 ? DiskCell{DiskCell::Tag::Erased, erased_chunk_crc(), 0, 0}
                                 : it->second;
                all_ok = cell_accounted_for(l, c, p);
            }
            if (all_ok || v.readback_digest == v.data_digest)
                v.cls = Classification::None;
            else if (v.flags.not_applied)
                v.cls = Classification::Fwa;
            else
                v.cls = Classification::DataFailure;
        }
        out.push_back(v);
    }

    for (const NeighborProbe& pr : rec.probes) {
        if (pr.outcome == ProbeOutcome::Clean) continue;
        for (Verdict& v : out) {
            if (v.req != pr.req || v.op != Op::Write || !v.flags.completed) continue;
            if (pr.outcome == ProbeOutcome::RolledBack) {
                v.cls = Classification::Fwa;
                v.flags.not_applied = true;
            } else {
                v.cls = Classification::DataFailure;
                v.flags.not_applied = false;
            }
        }
    }
    return out;
}

// Trace sanity: per sub-request, Queued comes first and precedes any
// Dispatched, which precedes any Completed; Errored is terminal.
inline void validate_event_order(const std::vector<DeviceEvent>& events) {
    struct SubTrace {
        SimTime q = -1, d = -1, c = -1, e = -1;
    };
    std::unordered_map<std::uint64_t, SubTrace> subs;
    SimTime prev = 0;
    for (const DeviceEvent& ev : events) {
        if (ev.t < prev) throw SimError("trace is not time-ordered");
        prev = ev.t;
        SubTrace& s = subs[(ev.req << 8) | ev.sub];
        switch (ev.kind) {
            case EventKind::Queued:
                if (s.q >= 0) throw SimError("duplicate Queued event");
                s.q = ev.t;
                break;
            case EventKind::Dispatched:
                if (s.q < 0 || s.d >= 0 || s.e >= 0) throw SimError("Dispatched out of order");
                s.d = ev.t;
                break;
            case EventKind::Completed:
                if (s.d < 0 || s.c >= 0 || s.e >= 0) throw SimError("Completed out of order");
                if (s.d > ev.t) throw SimError("Completed before Dispatched");
                s.c = ev.t;
                break;
            case EventKind::Errored:
                if (s.q < 0 || s.c >= 0 || s.e >= 0) throw SimError("Errored out of order");
                s.e = ev.t;
                break;
        }
    }
}

}  // namespace voltdrop
