#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <utility>
#include <vector>

#include "voltdrop/checksum.hpp"
#include "voltdrop/core.hpp"
#include "voltdrop/flash.hpp"
#include "voltdrop/mapping.hpp"

namespace voltdrop {

enum class Op : std::uint8_t { Read, Write };

inline char to_char(Op op) { return op == Op::Read ? 'R' : 'W'; }

struct FtlParams {
    std::uint64_t cache_bytes = 16ull << 20;
    bool cache_enabled = true;
    SimTime map_persist_interval = from_ms(500);
    SimTime map_persist_settle = from_ms(200);  // leave-alone time before an entry persists
    double service_rate_iops = 6900.0;
    double gc_free_threshold = 0.10;   // collect when free space drops below this fraction
    std::uint32_t range_merge_cap = 4096;  // lbas; bounds mapping-range growth
    SimTime read_latency = from_us(100);
    double p_corrupt_on_interrupt = 1.0;

    void validate() const {
        if (service_rate_iops <= 0.0) throw ConfigError("ftl: service_rate_iops must be positive");
        if (gc_free_threshold < 0.0 || gc_free_threshold >= 1.0)
            throw ConfigError("ftl: gc_threshold must be in [0, 1)");
        if (p_corrupt_on_interrupt < 0.0 || p_corrupt_on_interrupt > 1.0)
            throw ConfigError("ftl: p_corrupt_on_interrupt must be in [0, 1]");
        if (map_persist_interval < 0 || map_persist_settle < 0)
            throw ConfigError("ftl: persist timings must be non-negative");
    }
};

// Host-visible request lifecycle events. Writes on the write-back path are
// Dispatched and Completed the moment the cache accepts them; the flash
// program happens afterwards, invisibly to the host.
enum class EventKind : char {
    Queued = 'Q',
    Dispatched = 'D',
    Completed = 'C',
    Errored = 'E',
};

struct DeviceEvent {
    SimTime t = 0;
    std::uint64_t req = 0;
    std::uint32_t sub = 0;
    EventKind kind = EventKind::Queued;
    Lba lba = 0;
    std::uint32_t len_bytes = 0;
};

// What one lba reads back as. Data cells carry the payload-stream
// provenance of their chunk so the content bytes can be regenerated.
struct DiskCell {
    enum class Tag : std::uint8_t { Erased, Data, Corrupt };
    Tag tag = Tag::Erased;
    std::uint32_t crc = 0;  // chunk crc32 (erased-fill crc32 for Erased)
    std::uint64_t seed = 0;
    std::uint32_t offset = 0;

    bool readable() const { return tag != Tag::Corrupt; }
};

// Write request as the device sees it.
struct HostRequest {
    std::uint64_t id = 0;
    Op op = Op::Write;
    Lba lba = 0;
    std::uint32_t len_bytes = 0;
    std::uint64_t payload_seed = 0;
};

inline constexpr std::uint32_t kSubSplitBytes = 128u << 10;  // sub-request size

inline std::uint32_t sub_count(std::uint32_t len_bytes) {
    return (len_bytes + kSubSplitBytes - 1) / kSubSplitBytes;
}

// Flash work the engine must schedule a completion for.
struct BatchHandle {
    std::uint64_t id = 0;
    SimTime done_at = 0;
};

// SSD model: host interface, volatile write-back cache, dispatch pacing,
// logical-to-physical map with periodic persistence, garbage collection,
// and power-loss semantics. The surrounding event loop owns the clock and
// calls in at the instants this class asks for.
class Device {
public:
    Device(FlashArray& flash, FtlParams params, std::uint64_t seed)
        : flash_(flash),
          params_(params),
          volatile_map_(params.range_merge_cap),
          durable_map_(params.range_merge_cap),
          corrupt_seed_(mix_seed(seed, "interrupt-corruption")) {
        params_.validate();
        dispatch_interval_ = static_cast<SimTime>(1e9 / params_.service_rate_iops + 0.5);
        if (dispatch_interval_ < 1) dispatch_interval_ = 1;
        valid_count_.assign(flash_.geometry().blocks, 0);
        page_lba_.assign(flash_.geometry().total_pages(), 0);
        write_back_ = params_.cache_enabled && params_.cache_bytes > 0;
    }

    bool write_back() const { return write_back_; }
    bool powered() const { return powered_; }

    // --- host side ---------------------------------------------------------

    // Queue a request. `available` reflects the supply rail: an
    // unavailable device fails the request immediately.
    void submit(const HostRequest& r, SimTime now, bool available) {
        ReqState& st = requests_[r.id];
        st.req = r;
        st.n_subs = sub_count(r.len_bytes);
        st.issue = now;
        for (std::uint32_t s = 0; s < st.n_subs; ++s)
            emit(now, r.id, s, EventKind::Queued, sub_lba(r, s), sub_bytes(r, s));
        if (!available || !powered_) {
            for (std::uint32_t s = 0; s < st.n_subs; ++s)
                emit(now, r.id, s, EventKind::Errored, sub_lba(r, s), sub_bytes(r, s));
            st.errored = true;
            return;
        }
        if (r.op == Op::Write && write_back_) {
            for (std::uint32_t s = 0; s < st.n_subs; ++s) pending_.push_back({r.id, s});
            accept_pending(now);
        } else {
            // Write-through writes and all reads go straight to dispatch.
            ready_.push_back(r.id);
            st.subs_accepted = st.n_subs;
        }
        run_dispatch(now);
    }

    // Earliest instant at which this device wants another advance() call,
    // if any work is waiting on the dispatch pacer.
    std::optional<SimTime> next_wake() const {
        if (!powered_ || ready_.empty()) return std::nullopt;
        return earliest_dispatch_;
    }

    void advance(SimTime now) {
        if (!powered_) return;
        accept_pending(now);
        run_dispatch(now);
    }

    // Periodic map persistence pass.
    void persist_tick(SimTime now) {
        if (!powered_) return;
        volatile_map_.persist_settled(durable_map_, now, params_.map_persist_settle);
        refresh_durability(now);
    }

    // --- flash completions --------------------------------------------------

    void complete_batch(std::uint64_t batch_id, SimTime now) {
        auto it = inflight_.find(batch_id);
        if (it == inflight_.end()) return;  // batch died with a power episode
        Batch b = std::move(it->second);
        inflight_.erase(it);
        switch (b.kind) {
            case Batch::Kind::HostWrite: finish_host_write(b, now); break;
            case Batch::Kind::HostRead: finish_host_read(b, now); break;
            case Batch::Kind::GcProgram: finish_gc_program(b, now); break;
            case Batch::Kind::GcErase: finish_gc_erase(b, now); break;
        }
        maybe_start_gc(now);
        accept_pending(now);
        run_dispatch(now);
    }

    // --- power --------------------------------------------------------------

    // The rail just dropped below the operating threshold. In-flight flash
    // work aborts (possibly corrupting cells) and all volatile state is
    // gone: cache, queues, and the working copy of the map.
    void on_power_loss(SimTime now) {
        for (auto& [id, b] : inflight_) {
            for (const FlashJob& j : b.jobs)
                flash_.interrupt(j, now - j.start, corrupt_draw(j, now));
        }
        inflight_.clear();
        pending_.clear();
        ready_.clear();
        cache_.clear();
        cache_index_.clear();
        cache_used_ = 0;
        volatile_map_.clear();
        gc_.reset();
        powered_ = false;
    }

    void on_power_restore(SimTime now) {
        powered_ = true;
        volatile_map_.restore_from(durable_map_, now);
        rebuild_valid_counts();
        allocator_round_up();
        earliest_dispatch_ = now;
        awaiting_durable_.clear();  // interrupted writes can no longer become durable
        maybe_start_gc(now);
    }

    // --- introspection -------------------------------------------------------

    // Content an immediate read of `lba` would observe.
    DiskCell cell_at(Lba lba) const {
        DiskCell c;
        region_cells(lba, 1, &c);
        return c;
    }

    // Content ignoring the volatile cache (what survives on flash via the
    // current volatile map). After a restore this equals cell_at.
    DiskCell mapped_cell(Lba lba) const {
        auto phys = volatile_map_.lookup(lba);
        if (!phys) return {DiskCell::Tag::Erased, erased_chunk_crc(), 0, 0};
        switch (flash_.status(*phys)) {
            case PageStatus::Programmed: {
                const Chunk& c = flash_.chunk(*phys);
                return {DiskCell::Tag::Data, c.crc, c.payload_seed, c.offset};
            }
            case PageStatus::Erased:
                return {DiskCell::Tag::Erased, erased_chunk_crc(), 0, 0};
            case PageStatus::Programming:
            case PageStatus::Corrupted:
                return {DiskCell::Tag::Corrupt,
                        static_cast<std::uint32_t>(*phys * 0x9E3779B9u + 0x7F4A7C15u), 0, 0};
        }
        return {DiskCell::Tag::Erased, erased_chunk_crc(), 0, 0};
    }

    // Fill `out[0..len)` with what reads of [first, first+len) observe:
    // newest cache content where present, mapped flash content elsewhere.
    void region_cells(Lba first, std::uint32_t len_lbas, DiskCell* out) const {
        struct Owner {
            std::uint64_t req = 0;
            const CachedSub* sub = nullptr;
        };
        std::vector<Owner> overlay;
        if (!cache_index_.empty()) {
            overlay.assign(len_lbas, {});
            const Lba span = kSubSplitBytes / kLbaBytes;
            const Lba probe_lo = first > span - 1 ? first - (span - 1) : 0;
            for (Lba base = probe_lo; base < first + len_lbas; ++base) {
                auto it = cache_index_.find(base);
                if (it == cache_index_.end()) continue;
                for (const SubRef& ref : it->second) {
                    auto c = cache_.find(key_of(ref));
                    if (c == cache_.end()) continue;
                    const CachedSub& cs = c->second;
                    Lba lo = cs.lba > first ? cs.lba : first;
                    Lba hi = std::min<Lba>(cs.lba + cs.len_lbas, first + len_lbas);
                    for (Lba l = lo; l < hi; ++l) {
                        Owner& slot = overlay[l - first];
                        if (!slot.sub || ref.req > slot.req) slot = {ref.req, &cs};
                    }
                }
            }
        }
        for (std::uint32_t i = 0; i < len_lbas; ++i) {
            if (!overlay.empty() && overlay[i].sub) {
                const CachedSub& cs = *overlay[i].sub;
                std::uint32_t off =
                    cs.payload_offset + static_cast<std::uint32_t>(first + i - cs.lba) * kLbaBytes;
                out[i] = {DiskCell::Tag::Data, chunk_crc(cs.seed, off), cs.seed, off};
            } else {
                out[i] = mapped_cell(first + i);
            }
        }
    }

    std::uint64_t region_digest(Lba first, std::uint32_t len_lbas) const {
        std::vector<DiskCell> cells(len_lbas);
        region_cells(first, len_lbas, cells.data());
        RegionDigest d;
        for (const DiskCell& c : cells) d.add_chunk(c.readable(), c.crc);
        return d.value();
    }

    const LbaMap& volatile_map() const { return volatile_map_; }
    const LbaMap& durable_map() const { return durable_map_; }
    std::uint64_t cache_used_bytes() const { return cache_used_; }
    std::size_t pending_subs() const { return pending_.size(); }
    std::uint64_t gc_relocated_pages() const { return gc_relocated_; }
    std::uint64_t gc_erased_blocks() const { return gc_erased_; }

    bool request_completed(std::uint64_t id) const {
        auto it = requests_.find(id);
        return it != requests_.end() && it->second.completed;
    }

    // Instant the request became power-safe (data programmed and mapping
    // persisted), if it ever did.
    std::optional<SimTime> durable_at(std::uint64_t id) const {
        auto it = requests_.find(id);
        if (it == requests_.end() || !it->second.durable) return std::nullopt;
        return it->second.durable_at;
    }

    // --- engine notification channels ---------------------------------------

    std::vector<BatchHandle> take_new_batches() { return std::exchange(new_batches_, {}); }
    std::vector<std::pair<std::uint64_t, SimTime>> take_completions() {
        return std::exchange(completions_, {});
    }
    std::vector<DeviceEvent>& events() { return events_; }

private:
    struct SubRef {
        std::uint64_t req = 0;
        std::uint32_t idx = 0;
    };

    struct CachedSub {
        Lba lba = 0;
        std::uint32_t len_lbas = 0;
        std::uint64_t seed = 0;
        std::uint32_t payload_offset = 0;  // byte offset of this sub within the request
    };

    struct ReqState {
        HostRequest req;
        std::uint32_t n_subs = 0;
        std::uint32_t subs_accepted = 0;
        std::uint32_t subs_finished = 0;  // programs (write) or read service done
        SimTime issue = 0;
        bool dispatched = false;
        bool completed = false;
        bool errored = false;
        SimTime completion = -1;
        bool durable = false;
        SimTime durable_at = -1;
        std::vector<PageIndex> sub_phys;  // physical base page per sub, set at dispatch
    };

    struct Batch {
        enum class Kind : std::uint8_t { HostWrite, HostRead, GcProgram, GcErase };
        Kind kind = Kind::HostWrite;
        std::uint64_t req = 0;  // host request id, or gc victim block
        std::vector<FlashJob> jobs;
        // GC relocation pieces: lba extent moving from old to new pages.
        struct Move {
            Lba lba;
            std::uint32_t len;
            PageIndex from;
            PageIndex to;
        };
        std::vector<Move> moves;
    };

    struct GcState {
        std::uint32_t victim = 0;
        bool erasing = false;
    };

    // --- events / bookkeeping ----------------------------------------------

    void emit(SimTime t, std::uint64_t req, std::uint32_t sub, EventKind k, Lba lba,
              std::uint32_t len) {
        events_.push_back({t, req, sub, k, lba, len});
    }

    static Lba sub_lba(const HostRequest& r, std::uint32_t s) {
        return r.lba + static_cast<Lba>(s) * (kSubSplitBytes / kLbaBytes);
    }
    static std::uint32_t sub_bytes(const HostRequest& r, std::uint32_t s) {
        std::uint64_t start = static_cast<std::uint64_t>(s) * kSubSplitBytes;
        std::uint64_t left = r.len_bytes - start;
        return static_cast<std::uint32_t>(left < kSubSplitBytes ? left : kSubSplitBytes);
    }

    // --- cache path ----------------------------------------------------------

    void accept_pending(SimTime now) {
        while (!pending_.empty()) {
            SubRef ref = pending_.front();
            ReqState& st = requests_[ref.req];
            std::uint32_t bytes = sub_bytes(st.req, ref.idx);
            if (cache_used_ + bytes > params_.cache_bytes && cache_used_ > 0) break;
            pending_.pop_front();
            cache_used_ += bytes;
            CachedSub cs{sub_lba(st.req, ref.idx), bytes / kLbaBytes, st.req.payload_seed,
                         ref.idx * kSubSplitBytes};
            cache_.emplace(key_of(ref), cs);
            cache_index_[cs.lba].push_back(ref);
            // Accepting into the cache is the acknowledgement point.
            emit(now, ref.req, ref.idx, EventKind::Dispatched, cs.lba, bytes);
            emit(now, ref.req, ref.idx, EventKind::Completed, cs.lba, bytes);
            if (++st.subs_accepted == st.n_subs) {
                st.completed = true;
                st.completion = now;
                completions_.push_back({ref.req, now});
                ready_.push_back(ref.req);
            }
        }
    }

    static std::uint64_t key_of(SubRef r) { return (r.req << 8) | r.idx; }

    // --- dispatch -------------------------------------------------------------

    void run_dispatch(SimTime now) {
        while (!ready_.empty() && earliest_dispatch_ <= now) {
            std::uint64_t id = ready_.front();
            ready_.pop_front();
            ReqState& st = requests_[id];
            st.dispatched = true;
            if (st.req.op == Op::Write)
                dispatch_write(st, now);
            else
                dispatch_read(st, now);
            earliest_dispatch_ = (earliest_dispatch_ > now ? earliest_dispatch_ : now) +
                                 dispatch_interval_;
        }
    }

    void dispatch_write(ReqState& st, SimTime now) {
        Batch b;
        b.kind = Batch::Kind::HostWrite;
        b.req = st.req.id;
        st.sub_phys.assign(st.n_subs, 0);
        for (std::uint32_t s = 0; s < st.n_subs; ++s) {
            Lba lba = sub_lba(st.req, s);
            std::uint32_t len = sub_bytes(st.req, s) / kLbaBytes;
            PageIndex base = alloc_pages(len);
            st.sub_phys[s] = base;
            for (std::uint32_t i = 0; i < len; ++i) {
                std::uint32_t off = s * kSubSplitBytes + i * kLbaBytes;
                Chunk c{st.req.payload_seed, off, chunk_crc(st.req.payload_seed, off)};
                PageAddr a = flash_.addr_of(base + i);
                page_lba_[base + i] = lba + i;
                b.jobs.push_back(flash_.begin_program(a.block, a.page, c, now));
            }
            // Out-of-place update: the map repoints only once the program
            // completes, so an interrupted write leaves the old data mapped.
            if (!write_back_)
                emit(now, st.req.id, s, EventKind::Dispatched, lba, sub_bytes(st.req, s));
        }
        push_batch(std::move(b), now + flash_.timing().program_duration());
    }

    void dispatch_read(ReqState& st, SimTime now) {
        for (std::uint32_t s = 0; s < st.n_subs; ++s)
            emit(now, st.req.id, s, EventKind::Dispatched, sub_lba(st.req, s), sub_bytes(st.req, s));
        Batch b;
        b.kind = Batch::Kind::HostRead;
        b.req = st.req.id;
        push_batch(std::move(b), now + params_.read_latency);
    }

    void push_batch(Batch&& b, SimTime done_at) {
        std::uint64_t id = next_batch_++;
        inflight_.emplace(id, std::move(b));
        new_batches_.push_back({id, done_at});
    }

    void finish_host_write(Batch& b, SimTime now) {
        for (const FlashJob& j : b.jobs) flash_.complete(j);
        ReqState& st = requests_[b.req];
        st.subs_finished = st.n_subs;
        for (std::uint32_t s = 0; s < st.n_subs; ++s)
            map_apply(sub_lba(st.req, s), sub_bytes(st.req, s) / kLbaBytes, st.sub_phys[s], now);
        if (write_back_) {
            // Pop the request's subs from the cache.
            for (std::uint32_t s = 0; s < st.n_subs; ++s) {
                SubRef ref{b.req, s};
                auto it = cache_.find(key_of(ref));
                if (it == cache_.end()) continue;
                cache_used_ -= it->second.len_lbas * kLbaBytes;
                auto& vec = cache_index_[it->second.lba];
                vec.erase(std::remove_if(vec.begin(), vec.end(),
                                         [&](SubRef x) { return x.req == ref.req && x.idx == ref.idx; }),
                          vec.end());
                if (vec.empty()) cache_index_.erase(it->second.lba);
                cache_.erase(it);
            }
        } else {
            for (std::uint32_t s = 0; s < st.n_subs; ++s)
                emit(now, b.req, s, EventKind::Completed, sub_lba(st.req, s), sub_bytes(st.req, s));
            st.completed = true;
            st.completion = now;
            completions_.push_back({b.req, now});
        }
        awaiting_durable_.insert(b.req);
        // Covers immediate-persist configurations where the mapping was
        // already durable before the program finished.
        check_durability_one(b.req, now);
    }

    void finish_host_read(Batch& b, SimTime now) {
        ReqState& st = requests_[b.req];
        st.subs_finished = st.n_subs;
        for (std::uint32_t s = 0; s < st.n_subs; ++s)
            emit(now, b.req, s, EventKind::Completed, sub_lba(st.req, s), sub_bytes(st.req, s));
        st.completed = true;
        st.completion = now;
        completions_.push_back({b.req, now});
    }

    // --- map / allocation ------------------------------------------------------

    void map_apply(Lba lba, std::uint32_t len, PageIndex phys, SimTime now) {
        released_.clear();
        volatile_map_.apply(lba, len, phys, now, &released_);
        for (const PhysExtent& e : released_) adjust_valid(e, -1);
        adjust_valid({phys, len}, +1);
    }

    void adjust_valid(const PhysExtent& e, int delta) {
        const std::uint32_t ppb = flash_.geometry().pages_per_block;
        PageIndex p = e.first;
        std::uint32_t left = e.len;
        while (left > 0) {
            std::uint32_t block = static_cast<std::uint32_t>(p / ppb);
            std::uint32_t in_block = static_cast<std::uint32_t>(p % ppb);
            std::uint32_t take = std::min(left, ppb - in_block);
            valid_count_[block] += delta * static_cast<int>(take);
            p += take;
            left -= take;
        }
    }

    PageIndex alloc_pages(std::uint32_t n) {
        const std::uint64_t total = flash_.geometry().total_pages();
        const std::uint32_t ppb = flash_.geometry().pages_per_block;
        if (n > ppb) throw SimError("allocation larger than one block");
        if (fresh_cursor_ + n <= total) {
            PageIndex base = fresh_cursor_;
            fresh_cursor_ += n;
            std::uint32_t first_blk = static_cast<std::uint32_t>(base / ppb);
            std::uint32_t last_blk = static_cast<std::uint32_t>((fresh_cursor_ - 1) / ppb);
            for (std::uint32_t bk = first_blk; bk <= last_blk; ++bk)
                if ((static_cast<PageIndex>(bk) + 1) * ppb <= fresh_cursor_) closed_.insert(bk);
            return base;
        }
        // Fresh space exhausted: allocate out of recycled blocks.
        for (;;) {
            if (open_block_ != kNoBlock) {
                if (open_page_ + n <= ppb) {
                    PageIndex base = static_cast<PageIndex>(open_block_) * ppb + open_page_;
                    open_page_ += n;
                    if (open_page_ == ppb) {
                        closed_.insert(open_block_);
                        open_block_ = kNoBlock;
                    }
                    return base;
                }
                closed_.insert(open_block_);  // waste the tail
                open_block_ = kNoBlock;
            }
            if (recycled_.empty())
                throw SimError("flash out of space: no erased blocks left (total_pages=" +
                               std::to_string(total) + " fresh_cursor=" + std::to_string(fresh_cursor_) +
                               " closed=" + std::to_string(closed_.size()) +
                               " gc_relocated=" + std::to_string(gc_relocated_) +
                               " gc_erased=" + std::to_string(gc_erased_) +
                               " gc=" + (gc_ ? std::string("active") : std::string("idle")) + ")");
            open_block_ = recycled_.front();
            recycled_.pop_front();
            open_page_ = 0;
        }
    }

    std::uint64_t free_pages() const {
        const std::uint64_t total = flash_.geometry().total_pages();
        const std::uint32_t ppb = flash_.geometry().pages_per_block;
        std::uint64_t free = total - fresh_cursor_;
        free += static_cast<std::uint64_t>(recycled_.size()) * ppb;
        if (open_block_ != kNoBlock) free += ppb - open_page_;
        return free;
    }

    void allocator_round_up() {
        const std::uint32_t ppb = flash_.geometry().pages_per_block;
        if (fresh_cursor_ % ppb != 0) {
            closed_.insert(static_cast<std::uint32_t>(fresh_cursor_ / ppb));
            fresh_cursor_ = (fresh_cursor_ / ppb + 1) * ppb;
        }
        if (open_block_ != kNoBlock) {
            closed_.insert(open_block_);
            open_block_ = kNoBlock;
        }
    }

    void rebuild_valid_counts() {
        std::fill(valid_count_.begin(), valid_count_.end(), 0);
        for (const auto& [key, e] : volatile_map_.entries()) adjust_valid({e.phys, e.len}, +1);
    }

    // --- durability tracking -----------------------------------------------------

    void refresh_durability(SimTime now) {
        for (auto it = awaiting_durable_.begin(); it != awaiting_durable_.end();) {
            ReqState& st = requests_[*it];
            switch (durability_of(st)) {
                case Durability::Reached:
                    st.durable = true;
                    st.durable_at = now;
                    it = awaiting_durable_.erase(it);
                    break;
                case Durability::Lost:
                    it = awaiting_durable_.erase(it);
                    break;
                case Durability::Pending:
                    ++it;
                    break;
            }
        }
    }

    void check_durability_one(std::uint64_t id, SimTime now) {
        auto it = awaiting_durable_.find(id);
        if (it == awaiting_durable_.end()) return;
        ReqState& st = requests_[id];
        switch (durability_of(st)) {
            case Durability::Reached:
                st.durable = true;
                st.durable_at = now;
                awaiting_durable_.erase(it);
                break;
            case Durability::Lost:
                awaiting_durable_.erase(it);
                break;
            case Durability::Pending:
                break;
        }
    }

    enum class Durability { Pending, Reached, Lost };

    Durability durability_of(const ReqState& st) const {
        bool all_clean = true;
        for (std::uint32_t s = 0; s < st.n_subs; ++s) {
            Lba lba = sub_lba(st.req, s);
            std::uint32_t len = sub_bytes(st.req, s) / kLbaBytes;
            for (std::uint32_t i = 0; i < len;) {
                const MapEntry* e = volatile_map_.find_entry(lba + i);
                if (!e || e->phys + (lba + i - e->first) != st.sub_phys[s] + i)
                    return Durability::Lost;  // overwritten or relocated before persisting
                if (e->dirty) all_clean = false;
                std::uint32_t covered = static_cast<std::uint32_t>(e->first + e->len - (lba + i));
                i += covered < len - i ? covered : len - i;
            }
        }
        return all_clean ? Durability::Reached : Durability::Pending;
    }

    // --- garbage collection --------------------------------------------------------

    void maybe_start_gc(SimTime now) {
        if (gc_ || !powered_) return;
        const std::uint64_t total = flash_.geometry().total_pages();
        if (static_cast<double>(free_pages()) >= params_.gc_free_threshold * total) return;
        // Victim: closed block with the fewest valid pages. Blocks with a
        // program still in flight are not (yet) erasable.
        const std::uint32_t ppb = flash_.geometry().pages_per_block;
        std::uint32_t victim = kNoBlock;
        std::uint32_t best = ppb;  // must be strictly fewer than a full block
        for (std::uint32_t b : closed_) {
            std::uint32_t v = static_cast<std::uint32_t>(valid_count_[b]);
            if (v >= best) continue;
            bool busy = false;
            for (std::uint32_t p = 0; p < ppb && !busy; ++p)
                busy = flash_.status(static_cast<PageIndex>(b) * ppb + p) == PageStatus::Programming;
            if (busy) continue;
            best = v;
            victim = b;
        }
        if (victim == kNoBlock) return;  // nothing reclaimable
        gc_ = GcState{victim, false};
        start_gc_relocation(now);
    }

    void start_gc_relocation(SimTime now) {
        const std::uint32_t ppb = flash_.geometry().pages_per_block;
        const PageIndex lo = static_cast<PageIndex>(gc_->victim) * ppb;
        const PageIndex hi = lo + ppb;
        Batch b;
        b.kind = Batch::Kind::GcProgram;
        b.req = gc_->victim;
        for (const auto& [key, e] : volatile_map_.entries()) {
            PageIndex e_lo = e.phys, e_hi = e.phys + e.len;
            if (e_hi <= lo || e_lo >= hi) continue;
            PageIndex o_lo = e_lo > lo ? e_lo : lo;
            PageIndex o_hi = e_hi < hi ? e_hi : hi;
            Batch::Move m;
            m.from = o_lo;
            m.len = static_cast<std::uint32_t>(o_hi - o_lo);
            m.lba = e.first + (o_lo - e.phys);
            m.to = alloc_pages(m.len);
            b.moves.push_back(m);
        }
        if (b.moves.empty()) {
            begin_victim_erase(now);
            return;
        }
        for (const Batch::Move& m : b.moves) {
            for (std::uint32_t i = 0; i < m.len; ++i) {
                if (flash_.status(m.from + i) != PageStatus::Programmed)
                    throw SimError("gc: relocating a page that is not programmed");
                PageAddr a = flash_.addr_of(m.to + i);
                page_lba_[m.to + i] = m.lba + i;
                b.jobs.push_back(flash_.begin_program(a.block, a.page, flash_.chunk(m.from + i), now));
            }
        }
        push_batch(std::move(b), now + flash_.timing().program_duration());
    }

    void finish_gc_program(Batch& b, SimTime now) {
        for (const FlashJob& j : b.jobs) flash_.complete(j);
        for (const Batch::Move& m : b.moves) {
            // Apply only where the mapping still points at the victim;
            // lbas overwritten mid-relocation keep their newer mapping.
            std::uint32_t run = 0;
            for (std::uint32_t i = 0; i <= m.len; ++i) {
                bool still = i < m.len && volatile_map_.lookup(m.lba + i) == std::optional<PageIndex>(m.from + i);
                if (still) {
                    ++run;
                    continue;
                }
                if (run > 0) {
                    Lba lba = m.lba + i - run;
                    map_apply(lba, run, m.to + (i - run), now);
                    volatile_map_.persist_overlapping(durable_map_, lba, run, now);
                    gc_relocated_ += run;
                }
                run = 0;
            }
        }
        refresh_durability(now);
        begin_victim_erase(now);
    }

    void begin_victim_erase(SimTime now) {
        purge_stale_durable_refs(gc_->victim, now);
        Batch b;
        b.kind = Batch::Kind::GcErase;
        b.req = gc_->victim;
        b.jobs.push_back(flash_.begin_erase(gc_->victim, now));
        gc_->erasing = true;
        push_batch(std::move(b), now + flash_.timing().erase_duration());
    }

    // The durable table may still reference victim pages whose lbas were
    // overwritten but whose newer mapping has not persisted yet. Erasing
    // under such a reference would make those lbas read back as erased
    // after a power loss, so the newer mapping is persisted first. The
    // per-page reverse map says which lba each victim page last held.
    void purge_stale_durable_refs(std::uint32_t victim, SimTime now) {
        const std::uint32_t ppb = flash_.geometry().pages_per_block;
        const PageIndex lo = static_cast<PageIndex>(victim) * ppb;
        std::size_t persisted = 0;
        for (std::uint32_t p = 0; p < ppb; ++p) {
            Lba lba = page_lba_[lo + p];
            if (durable_map_.lookup(lba) != std::optional<PageIndex>(lo + p)) continue;
            persisted += volatile_map_.persist_overlapping(durable_map_, lba, 1, now);
        }
        if (persisted > 0) refresh_durability(now);
    }

    void finish_gc_erase(Batch& b, SimTime /*now*/) {
        for (const FlashJob& j : b.jobs) flash_.complete(j);
        std::uint32_t block = static_cast<std::uint32_t>(b.req);
        valid_count_[block] = 0;
        closed_.erase(block);
        recycled_.push_back(block);
        ++gc_erased_;
        gc_.reset();
    }

    bool corrupt_draw(const FlashJob& j, SimTime now) const {
        if (params_.p_corrupt_on_interrupt >= 1.0) return true;
        if (params_.p_corrupt_on_interrupt <= 0.0) return false;
        std::uint64_t cell = static_cast<std::uint64_t>(j.block) * flash_.geometry().pages_per_block + j.page;
        std::uint64_t w = stream_word(corrupt_seed_, cell ^ static_cast<std::uint64_t>(now));
        return unit_real(w) < params_.p_corrupt_on_interrupt;
    }

    static constexpr std::uint32_t kNoBlock = 0xFFFFFFFFu;

    FlashArray& flash_;
    FtlParams params_;
    bool write_back_ = true;
    bool powered_ = true;

    LbaMap volatile_map_;
    LbaMap durable_map_;
    std::uint64_t corrupt_seed_;

    // host request state
    std::unordered_map<std::uint64_t, ReqState> requests_;
    std::deque<SubRef> pending_;            // accepted by the host interface, waiting for cache space
    std::unordered_map<std::uint64_t, CachedSub> cache_;
    std::unordered_map<Lba, std::vector<SubRef>> cache_index_;
    std::uint64_t cache_used_ = 0;
    std::deque<std::uint64_t> ready_;       // fully cached/queued requests awaiting dispatch
    SimTime dispatch_interval_ = 0;
    SimTime earliest_dispatch_ = 0;

    // flash work
    std::unordered_map<std::uint64_t, Batch> inflight_;
    std::uint64_t next_batch_ = 1;
    std::vector<BatchHandle> new_batches_;
    std::vector<std::pair<std::uint64_t, SimTime>> completions_;
    std::vector<DeviceEvent> events_;
    std::vector<PhysExtent> released_;

    // allocation / gc
    std::vector<Lba> page_lba_;  // last lba programmed into each page
    PageIndex fresh_cursor_ = 0;
    std::deque<std::uint32_t> recycled_;
    std::uint32_t open_block_ = kNoBlock;
    std::uint32_t open_page_ = 0;
    std::set<std::uint32_t> closed_;
    std::vector<std::int64_t> valid_count_;
    std::optional<GcState> gc_;
    std::uint64_t gc_relocated_ = 0;
    std::uint64_t gc_erased_ = 0;

    std::set<std::uint64_t> awaiting_durable_;
};

}  // namespace voltdrop
