#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "voltdrop/analyzer.hpp"
#include "voltdrop/core.hpp"
#include "voltdrop/flash.hpp"
#include "voltdrop/ftl.hpp"
#include "voltdrop/power.hpp"
#include "voltdrop/workload.hpp"

namespace voltdrop {

struct RunParams {
    WorkloadSpec wl;
    VoltageModel vm;

    int fault_count = 0;
    std::uint64_t fault_seed = 42;
    SimTime restore_delay = from_ms(500);

    // Armed-fault mode: instead of uniformly scheduled cutoffs, cut wall
    // power `armed_delay` after a request acknowledgement once the device
    // has served `armed_warmup` requests since power-on.
    std::optional<SimTime> armed_delay;
    int armed_warmup = 5;

    // Writes acknowledged this close to a cutoff get re-checksummed right
    // after the restore. Negative: use map settle + persist interval.
    SimTime neighbor_window = -1;

    FlashGeometry geo{0, 256, 4096};  // blocks == 0: size to fit the workload
    FlashTiming timing;
    FtlParams ftl;

    std::uint64_t run_seed = 1;
};

struct RunStats {
    std::uint64_t faults_injected = 0;
    double responded_iops = 0.0;
    SimTime last_completion = 0;
    SimTime powered_span = 0;
    std::uint64_t gc_relocated_pages = 0;
    std::uint64_t gc_erased_blocks = 0;
    std::vector<std::uint64_t> armed_targets;  // requests whose ack armed a cutoff
};

struct RunResult {
    RunRecord record;
    std::vector<Verdict> verdicts;
    FailureCounts counts;
    RunStats stats;
    std::vector<std::optional<SimTime>> durable_at;  // by packet index
};

namespace detail {

enum class EvKind : std::uint8_t { BatchDone, Brownout, Restore, Persist, Submit, Wake };

struct Ev {
    SimTime t = 0;
    int prio = 0;
    std::uint64_t seq = 0;
    EvKind kind = EvKind::Wake;
    std::uint64_t arg = 0;
};

struct EvAfter {
    bool operator()(const Ev& a, const Ev& b) const {
        if (a.t != b.t) return a.t > b.t;
        if (a.prio != b.prio) return a.prio > b.prio;
        return a.seq > b.seq;
    }
};

// Single-run simulation driver.
class Engine {
public:
    explicit Engine(const RunParams& params) : p_(params) {
        p_.wl.validate();
        p_.vm.validate();
        p_.timing.validate();
        if (p_.ftl.map_persist_interval == 0) p_.ftl.map_persist_settle = 0;
        p_.ftl.validate();
        window_ = p_.neighbor_window >= 0
                      ? p_.neighbor_window
                      : p_.ftl.map_persist_settle + p_.ftl.map_persist_interval;

        if (p_.wl.sequence) {
            plan_.push_back(first_in_sequence(p_.wl));
        } else {
            plan_ = generate(p_.wl);
        }

        FlashGeometry geo = p_.geo;
        if (geo.blocks == 0) geo.blocks = auto_blocks(geo);
        flash_.emplace(geo, p_.timing);
        device_.emplace(*flash_, p_.ftl, p_.run_seed);

        const SimTime issue_span = issue_slot(p_.wl.iops, p_.wl.n_requests - 1);
        if (!p_.armed_delay && p_.fault_count > 0) {
            SimTime horizon = std::max<SimTime>(issue_span, kSecond);
            FaultSchedule sched =
                schedule_faults(p_.fault_seed, p_.fault_count, horizon, p_.restore_delay, p_.vm);
            for (SimTime c : sched.cutoffs) add_fault(c);
        }

        if (p_.ftl.map_persist_interval > 0)
            push(p_.ftl.map_persist_interval, 2, EvKind::Persist, persist_epoch_);

        if (p_.wl.sequence) {
            issued_ = 1;
            push(plan_[0].issue_time, 3, EvKind::Submit, 0);
        } else {
            issued_ = plan_.size();
            for (std::size_t i = 0; i < plan_.size(); ++i)
                push(plan_[i].issue_time, 3, EvKind::Submit, i);
        }
    }

    RunResult run() {
        while (!q_.empty()) {
            Ev ev = q_.top();
            q_.pop();
            now_ = ev.t;
            if (ev.kind != EvKind::Persist) --work_events_;
            switch (ev.kind) {
                case EvKind::BatchDone:
                    device_->complete_batch(ev.arg, now_);
                    break;
                case EvKind::Brownout:
                    device_->on_power_loss(now_);
                    completions_since_power_ = 0;
                    // In-flight requests died unacknowledged; they can never
                    // be probed.
                    for (std::uint64_t id : unacked_captured_) before_cells_.erase(id);
                    unacked_captured_.clear();
                    // An outstanding chain request died with the power; the
                    // closed loop moves on from the last completed one.
                    if (chain_outstanding_ != 0) {
                        chain_outstanding_ = 0;
                        chain_next();
                    }
                    break;
                case EvKind::Restore:
                    device_->on_power_restore(now_);
                    probe_episode(static_cast<int>(ev.arg));
                    completions_since_power_ = 0;
                    ++persist_epoch_;
                    if (p_.ftl.map_persist_interval > 0)
                        push(now_ + p_.ftl.map_persist_interval, 2, EvKind::Persist, persist_epoch_);
                    break;
                case EvKind::Persist:
                    if (ev.arg != persist_epoch_ || !device_->powered()) break;
                    device_->persist_tick(now_);
                    // The chain stops once no other work is on the calendar.
                    if (work_events_ > 0)
                        push(now_ + p_.ftl.map_persist_interval, 2, EvKind::Persist, persist_epoch_);
                    break;
                case EvKind::Submit:
                    handle_submit(ev.arg);
                    break;
                case EvKind::Wake:
                    device_->advance(now_);
                    break;
            }
            pump();
            if (p_.ftl.map_persist_interval == 0 && device_->powered()) {
                device_->persist_tick(now_);
                pump();
            }
        }
        return finalize();
    }

private:
    std::uint32_t auto_blocks(const FlashGeometry& geo) const {
        std::uint64_t write_lbas = 0;
        if (p_.wl.sequence) {
            write_lbas = static_cast<std::uint64_t>(p_.wl.n_requests) * plan_[0].length / kLbaBytes;
        } else {
            for (const DataPacket& p : plan_)
                if (p.op == Op::Write) write_lbas += p.length / kLbaBytes;
        }
        // One page per lba: the page is the program/corruption unit and the
        // chunk is its payload; page_size only caps the chunk size.
        const std::uint64_t write_pages = write_lbas;
        std::uint64_t pages = static_cast<std::uint64_t>(static_cast<double>(write_pages) * 1.35) +
                              static_cast<std::uint64_t>(p_.fault_count + 4) * 2 * geo.pages_per_block +
                              8ull * geo.pages_per_block;
        std::uint64_t blocks = (pages + geo.pages_per_block - 1) / geo.pages_per_block;
        return static_cast<std::uint32_t>(std::max<std::uint64_t>(blocks, 4));
    }

    void push(SimTime t, int prio, EvKind k, std::uint64_t arg) {
        if (k != EvKind::Persist) ++work_events_;
        q_.push({t, prio, next_seq_++, k, arg});
    }

    void add_fault(SimTime cutoff) {
        FaultInfo f;
        f.cutoff = cutoff;
        f.device_loss = cutoff + static_cast<SimTime>(p_.vm.t_unavailable_ms * kMillisecond);
        f.restore = cutoff + static_cast<SimTime>(p_.vm.t_zero_loaded_ms * kMillisecond) +
                    p_.restore_delay;
        faults_.push_back(f);
        push(f.device_loss, 1, EvKind::Brownout, faults_.size() - 1);
        push(f.restore, 1, EvKind::Restore, faults_.size() - 1);
    }

    // The rail keeps the device alive until `device_loss`, so requests
    // arriving between the cutoff and that instant still go through.
    bool available(SimTime t) const {
        for (auto it = faults_.rbegin(); it != faults_.rend(); ++it) {
            if (t >= it->restore) break;
            if (t >= it->device_loss) return false;
            if (t >= it->cutoff) return true;
        }
        return true;
    }

    void handle_submit(std::uint64_t idx) {
        const DataPacket& p = plan_[idx];
        bool avail = available(now_);
        if (before_.size() < plan_.size()) before_.resize(plan_.size(), 0);
        const std::uint32_t len = p.length / kLbaBytes;
        scratch_cells_.resize(len);
        device_->region_cells(p.lba, len, scratch_cells_.data());
        RegionDigest d;
        for (const DiskCell& c : scratch_cells_) d.add_chunk(c.readable(), c.crc);
        before_[idx] = d.value();
        // Keep per-lba pre-request content for restore-time probes; pruned
        // once the acknowledgement can no longer fall in a fault window.
        // Unavailable submissions error out instead of acknowledging, so
        // they are never probed.
        if (p.op == Op::Write && p_.fault_count > 0 && avail) {
            std::vector<std::uint32_t>& crcs = before_cells_[p.id];
            crcs.resize(len);
            for (std::uint32_t i = 0; i < len; ++i)
                crcs[i] = scratch_cells_[i].readable() ? scratch_cells_[i].crc
                                                       : ~scratch_cells_[i].crc;
            unacked_captured_.insert(p.id);
        }
        device_->submit({p.id, p.op, p.lba, p.length, p.payload_seed}, now_, avail);
        if (p_.wl.sequence) {
            if (avail)
                chain_outstanding_ = p.id;
            else
                chain_next();  // errored immediately; keep the loop going
        }
    }

    // Closed-loop chains: one request outstanding; the next one goes out at
    // the first pacing slot after the previous one resolves.
    void chain_next() {
        if (!p_.wl.sequence || issued_ >= p_.wl.n_requests) return;
        std::uint64_t id = ++issued_;
        DataPacket next;
        if (last_completed_ > 0) {
            next = next_in_sequence(p_.wl, plan_[last_completed_ - 1], true, id);
        } else {
            next = first_in_sequence(p_.wl);
            next.id = id;
            next = finish_packet(p_.wl, next);
        }
        std::uint64_t slot_idx =
            static_cast<std::uint64_t>(static_cast<double>(now_) * p_.wl.iops / 1e9) + 1;
        next.issue_time = std::max(issue_slot(p_.wl.iops, slot_idx), now_ + 1);
        plan_.push_back(next);
        push(next.issue_time, 3, EvKind::Submit, plan_.size() - 1);
    }

    // Re-checksum writes acknowledged within the vulnerability window before
    // this episode's cutoff against the just-restored state. Per lba the
    // restored cell settles which acknowledgements still hold: scanning
    // newest-first, a write whose payload matches closes the lba (it and all
    // older writers were legitimately superseded), while every newer write
    // above the match point had its acknowledged payload rolled back. A
    // violated write whose lost lbas all read as their pre-request content
    // rolled back cleanly (the classic false write-acknowledge); anything
    // partial or corrupt lost the payload outright.
    void probe_episode(int fault_idx) {
        const FaultInfo& f = faults_[static_cast<std::size_t>(fault_idx)];
        const SimTime lo = f.cutoff > window_ ? f.cutoff - window_ : 0;
        auto it = std::lower_bound(completion_log_.begin(), completion_log_.end(), lo,
                                   [](const auto& e, SimTime t) { return e.first < t; });
        struct Cand {
            std::uint64_t req;
            SimTime ack;
        };
        std::vector<Cand> cands;
        for (; it != completion_log_.end() && it->first < f.cutoff; ++it) {
            if (plan_[it->second - 1].op != Op::Write) continue;
            cands.push_back({it->second, it->first});
        }
        std::unordered_set<Lba> closed;
        std::vector<DiskCell> cells;
        const std::size_t first_probe = probes_.size();
        for (auto c = cands.rbegin(); c != cands.rend(); ++c) {
            const DataPacket& p = plan_[c->req - 1];
            const std::uint32_t len = p.length / kLbaBytes;
            cells.resize(len);
            device_->region_cells(p.lba, len, cells.data());
            const std::vector<std::uint32_t>& before = before_cells_.at(c->req);
            bool violated = false, self_match = false, pure_rollback = true;
            for (std::uint32_t i = 0; i < len; ++i) {
                if (closed.count(p.lba + i)) continue;
                const bool own =
                    cells[i].readable() &&
                    cells[i].crc ==
                        chunk_crc(p.payload_seed, static_cast<std::uint64_t>(i) * kLbaBytes);
                if (own) {
                    closed.insert(p.lba + i);
                    self_match = true;
                    continue;
                }
                violated = true;
                if (!cells[i].readable() || cells[i].crc != before[i]) pure_rollback = false;
            }
            ProbeOutcome oc = !violated ? ProbeOutcome::Clean
                              : (pure_rollback && !self_match) ? ProbeOutcome::RolledBack
                                                               : ProbeOutcome::Mangled;
            probes_.push_back({fault_idx, p.id, f.cutoff - c->ack, oc});
        }
        std::reverse(probes_.begin() + first_probe, probes_.end());
        probed_through_ = static_cast<std::size_t>(fault_idx) + 1;
        prune_before_cells();
    }

    // Drop pre-request content for acknowledgements that can no longer fall
    // inside any future fault window.
    void prune_before_cells() {
        constexpr SimTime kNever = std::numeric_limits<SimTime>::max();
        SimTime limit;
        if (probed_through_ < faults_.size())
            limit = faults_[probed_through_].cutoff;
        else if (p_.armed_delay && faults_.size() < static_cast<std::size_t>(p_.fault_count))
            limit = now_;  // a future armed cutoff is never earlier than now
        else
            limit = kNever;
        while (prune_idx_ < completion_log_.size() &&
               (limit == kNever || completion_log_[prune_idx_].first + window_ < limit)) {
            before_cells_.erase(completion_log_[prune_idx_].second);
            ++prune_idx_;
        }
    }

    void on_completion(std::uint64_t req, SimTime t) {
        completion_log_.emplace_back(t, req);
        unacked_captured_.erase(req);
        prune_before_cells();
        ++completions_since_power_;
        if (p_.wl.sequence) {
            last_completed_ = req;
            if (req == chain_outstanding_) chain_outstanding_ = 0;
            if (req == plan_.back().id) chain_next();
        }
        if (p_.armed_delay && faults_.size() < static_cast<std::size_t>(p_.fault_count) &&
            completions_since_power_ >= p_.armed_warmup && available(t) && episode_over(t)) {
            add_fault(t + *p_.armed_delay);
            armed_targets_.push_back(req);
        }
    }

    bool episode_over(SimTime t) const {
        return faults_.empty() || t >= faults_.back().restore;
    }

    void pump() {
        for (const BatchHandle& b : device_->take_new_batches())
            push(b.done_at, 0, EvKind::BatchDone, b.id);
        for (const auto& [req, t] : device_->take_completions()) on_completion(req, t);
        if (auto w = device_->next_wake()) {
            SimTime t = std::max(*w, now_);
            if (t != last_wake_) {
                last_wake_ = t;
                push(t, 4, EvKind::Wake, 0);
            }
        }
    }

    RunResult finalize() {
        RunResult res;
        RunRecord& rec = res.record;
        rec.faults = faults_;
        rec.probes = std::move(probes_);

        rec.packets.reserve(plan_.size());
        for (std::size_t i = 0; i < plan_.size(); ++i) {
            const DataPacket& p = plan_[i];
            PacketInfo info;
            info.id = p.id;
            info.op = p.op;
            info.lba = p.lba;
            info.len_bytes = p.length;
            info.issue = p.issue_time;
            info.payload_seed = p.payload_seed;
            info.checksum_data = p.checksum_data;
            info.before_digest = i < before_.size() ? before_[i] : 0;
            rec.packets.push_back(info);
        }

        std::vector<DiskCell> cells;
        for (const PacketInfo& p : rec.packets) {
            const std::uint32_t len = p.len_lbas();
            cells.resize(len);
            bool all_known = true;
            for (std::uint32_t i = 0; i < len && all_known; ++i)
                all_known = rec.disk.count(p.lba + i) > 0;
            if (all_known) continue;
            device_->region_cells(p.lba, len, cells.data());
            for (std::uint32_t i = 0; i < len; ++i) rec.disk.emplace(p.lba + i, cells[i]);
        }

        rec.events = std::move(device_->events());
        res.verdicts = analyze(rec);
        res.counts = tally(res.verdicts);

        res.durable_at.reserve(plan_.size());
        for (const DataPacket& p : plan_) res.durable_at.push_back(device_->durable_at(p.id));

        RunStats& st = res.stats;
        st.faults_injected = faults_.size();
        st.armed_targets = armed_targets_;
        st.gc_relocated_pages = device_->gc_relocated_pages();
        st.gc_erased_blocks = device_->gc_erased_blocks();
        for (const DeviceEvent& e : rec.events)
            if (e.kind == EventKind::Completed) st.last_completion = std::max(st.last_completion, e.t);
        SimTime span = st.last_completion;
        for (const FaultInfo& f : faults_) {
            SimTime off_lo = std::min(f.device_loss, span);
            SimTime off_hi = std::min(f.restore, span);
            if (off_hi > off_lo) span -= off_hi - off_lo;
        }
        st.powered_span = span;
        if (span > 0)
            st.responded_iops = static_cast<double>(res.counts.completed) /
                                (static_cast<double>(span) / kSecond);
        return res;
    }

    RunParams p_;
    std::optional<FlashArray> flash_;
    std::optional<Device> device_;

    std::vector<DataPacket> plan_;
    std::vector<std::uint64_t> before_;
    std::vector<FaultInfo> faults_;
    std::vector<std::uint64_t> armed_targets_;
    std::vector<std::pair<SimTime, std::uint64_t>> completion_log_;
    std::vector<NeighborProbe> probes_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> before_cells_;
    std::unordered_set<std::uint64_t> unacked_captured_;
    std::vector<DiskCell> scratch_cells_;
    std::size_t prune_idx_ = 0;
    std::size_t probed_through_ = 0;
    SimTime window_ = 0;

    std::priority_queue<Ev, std::vector<Ev>, EvAfter> q_;
    std::uint64_t next_seq_ = 0;
    SimTime now_ = 0;
    SimTime last_wake_ = -1;
    std::uint64_t persist_epoch_ = 0;
    std::uint64_t issued_ = 0;
    std::uint64_t last_completed_ = 0;
    std::uint64_t chain_outstanding_ = 0;
    std::int64_t work_events_ = 0;
    int completions_since_power_ = 0;
};

}  // namespace detail

inline RunResult run_single(const RunParams& params) {
    detail::Engine engine(params);
    return engine.run();
}

}  // namespace voltdrop
