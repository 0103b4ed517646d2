#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "voltdrop/core.hpp"
#include "voltdrop/flash.hpp"

namespace voltdrop {

// One mapping-table entry: `len` consecutive lbas starting at `first`,
// backed by `len` physically consecutive pages starting at `phys`
// (one 512-byte lba per page). Range compression keeps a sequential
// stream of writes as a single growing entry.
struct MapEntry {
    Lba first = 0;
    std::uint32_t len = 0;
    PageIndex phys = 0;
    SimTime modified = 0;  // last time this entry was created, split or extended
    bool dirty = true;     // not yet copied to the durable table
};

struct PhysExtent {
    PageIndex first = 0;
    std::uint32_t len = 0;
};

// Logical-to-physical table with range compression. Two instances exist per
// device: the volatile working copy (lost on power loss) and the durable
// copy (updated only by the periodic persist pass, survives power loss).
class LbaMap {
public:
    static constexpr std::uint32_t kNoMergeCap = 0;

    explicit LbaMap(std::uint32_t merge_cap_lbas = kNoMergeCap) : cap_(merge_cap_lbas) {}

    // Point [first, first+len) at the pages [phys, phys+len). Overlapped
    // parts of existing entries are split away; the freed physical pages
    // are appended to `released` when provided. The new extent then merges
    // with physically adjacent neighbours as long as the combined entry
    // stays within the merge cap.
    void apply(Lba first, std::uint32_t len, PageIndex phys, SimTime now,
               std::vector<PhysExtent>* released = nullptr) {
        if (len == 0) return;
        const Lba end = first + len;

        // Predecessor spilling into the new extent: keep its head, re-key
        // any surviving tail past our end.
        auto it = entries_.lower_bound(first);
        if (it != entries_.begin()) {
            auto p = std::prev(it);
            const MapEntry prior = p->second;
            const Lba prior_end = prior.first + prior.len;
            if (prior_end > first) {
                const Lba cut_end = prior_end < end ? prior_end : end;
                if (released)
                    released->push_back({prior.phys + (first - prior.first),
                                         static_cast<std::uint32_t>(cut_end - first)});
                p->second.len = static_cast<std::uint32_t>(first - prior.first);
                if (prior_end > end) {
                    MapEntry tail = prior;
                    tail.first = end;
                    tail.len = static_cast<std::uint32_t>(prior_end - end);
                    tail.phys = prior.phys + (end - prior.first);
                    entries_.emplace(tail.first, tail);
                }
            }
        }

        // Entries starting inside the new extent: fully covered ones go
        // away, a tail crossing our end is re-keyed.
        it = entries_.lower_bound(first);
        while (it != entries_.end() && it->second.first < end) {
            const MapEntry cur = it->second;
            const Lba cur_end = cur.first + cur.len;
            const Lba cut_end = cur_end < end ? cur_end : end;
            if (released)
                released->push_back({cur.phys, static_cast<std::uint32_t>(cut_end - cur.first)});
            it = entries_.erase(it);
            if (cur_end > end) {
                MapEntry tail = cur;
                tail.first = end;
                tail.len = static_cast<std::uint32_t>(cur_end - end);
                tail.phys = cur.phys + (end - cur.first);
                entries_.emplace(tail.first, tail);
                break;
            }
        }

        auto pos = entries_.emplace(first, MapEntry{first, len, phys, now, true}).first;

        // Merge backwards, then forwards.
        if (pos != entries_.begin()) {
            auto p = std::prev(pos);
            if (contiguous(p->second, pos->second) && fits(p->second, pos->second)) {
                p->second.len += pos->second.len;
                p->second.modified = now;
                p->second.dirty = true;
                entries_.erase(pos);
                pos = p;
            }
        }
        if (auto s = std::next(pos); s != entries_.end()) {
            if (contiguous(pos->second, s->second) && fits(pos->second, s->second)) {
                pos->second.len += s->second.len;
                pos->second.modified = now;
                pos->second.dirty = true;
                entries_.erase(s);
            }
        }
    }

    std::optional<PageIndex> lookup(Lba lba) const {
        const MapEntry* e = find_entry(lba);
        if (!e) return std::nullopt;
        return e->phys + (lba - e->first);
    }

    const MapEntry* find_entry(Lba lba) const {
        auto it = entries_.upper_bound(lba);
        if (it == entries_.begin()) return nullptr;
        --it;
        const MapEntry& e = it->second;
        return lba < e.first + e.len ? &e : nullptr;
    }

    // Copy every dirty entry that has been left alone for at least
    // `settle` into `durable` and mark it clean. Entries still being
    // extended keep their durable coverage stale: that asymmetry is what
    // makes freshly grown sequential ranges vulnerable to power loss.
    std::size_t persist_settled(LbaMap& durable, SimTime now, SimTime settle) {
        std::size_t n = 0;
        for (auto& [key, e] : entries_) {
            if (!e.dirty || now - e.modified < settle) continue;
            durable.apply(e.first, e.len, e.phys, now);
            e.dirty = false;
            ++n;
        }
        return n;
    }

    // Immediate persist of every entry overlapping [first, first+len),
    // settle time notwithstanding. Used before erasing relocated blocks so
    // the durable table never references erased pages for live data.
    std::size_t persist_overlapping(LbaMap& durable, Lba first, std::uint32_t len, SimTime now) {
        std::size_t n = 0;
        const Lba end = first + len;
        auto it = entries_.upper_bound(first);
        if (it != entries_.begin()) --it;
        for (; it != entries_.end() && it->second.first < end; ++it) {
            MapEntry& e = it->second;
            if (e.first + e.len <= first) continue;
            durable.apply(e.first, e.len, e.phys, now);
            e.dirty = false;
            ++n;
        }
        return n;
    }

    // Reload after power restore: the durable table is the whole truth.
    void restore_from(const LbaMap& durable, SimTime now) {
        entries_ = durable.entries_;
        for (auto& [key, e] : entries_) {
            e.dirty = false;
            e.modified = now;
        }
    }

    void clear() { entries_.clear(); }
    std::size_t entry_count() const { return entries_.size(); }
    const std::map<Lba, MapEntry>& entries() const { return entries_; }

    std::uint64_t mapped_lbas() const {
        std::uint64_t n = 0;
        for (const auto& [key, e] : entries_) n += e.len;
        return n;
    }

private:
    bool contiguous(const MapEntry& a, const MapEntry& b) const {
        return a.first + a.len == b.first && a.phys + a.len == b.phys;
    }
    bool fits(const MapEntry& a, const MapEntry& b) const {
        return cap_ == kNoMergeCap ||
               static_cast<std::uint64_t>(a.len) + b.len <= cap_;
    }

    std::uint32_t cap_;
    std::map<Lba, MapEntry> entries_;
};

}  // namespace voltdrop
