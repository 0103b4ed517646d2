#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voltdrop/core.hpp"

namespace voltdrop {

// One 512-byte chunk of stored content, recorded by provenance rather than
// by value: the payload stream seed, the byte offset of this chunk within
// that stream, and its crc32. The actual bytes are regenerable on demand.
struct Chunk {
    std::uint64_t payload_seed = 0;
    std::uint32_t offset = 0;  // byte offset within the payload stream
    std::uint32_t crc = 0;
};

enum class PageStatus : std::uint8_t { Erased, Programming, Programmed, Corrupted };

inline const char* to_string(PageStatus s) {
    switch (s) {
        case PageStatus::Erased: return "Erased";
        case PageStatus::Programming: return "Programming";
        case PageStatus::Programmed: return "Programmed";
        case PageStatus::Corrupted: return "Corrupted";
    }
    return "?";
}

struct FlashGeometry {
    std::uint32_t blocks = 1024;
    std::uint32_t pages_per_block = 256;
    std::uint32_t page_size = 4096;

    void validate() const {
        if (blocks == 0 || pages_per_block == 0)
            throw ConfigError("flash geometry: blocks and pages_per_block must be positive");
        if (page_size < kLbaBytes || page_size % kLbaBytes != 0)
            throw ConfigError("flash geometry: page_size must be a positive multiple of 512");
    }
    std::uint64_t total_pages() const {
        return static_cast<std::uint64_t>(blocks) * pages_per_block;
    }
};

struct FlashTiming {
    int program_steps = 8;
    std::int64_t t_program_step_us = 200;
    std::int64_t t_erase_us = 2000;

    void validate() const {
        if (program_steps <= 0 || t_program_step_us <= 0 || t_erase_us <= 0)
            throw ConfigError("flash timing: steps and step/erase durations must be positive");
    }
    SimTime program_duration() const { return from_us(program_steps * t_program_step_us); }
    SimTime erase_duration() const { return from_us(t_erase_us); }
};

// Linear page coordinate: block * pages_per_block + page.
using PageIndex = std::uint64_t;

struct PageAddr {
    std::uint32_t block = 0;
    std::uint32_t page = 0;
};

// An in-flight program or erase operation. Jobs are issued by the FTL and
// either completed after `duration` or interrupted by power loss.
struct FlashJob {
    enum class Kind : std::uint8_t { Program, Erase };
    Kind kind = Kind::Program;
    std::uint32_t block = 0;
    std::uint32_t page = 0;  // unused for erase
    SimTime start = 0;
    SimTime duration = 0;
};

enum class InterruptOutcome : std::uint8_t { AlreadyComplete, Aborted };

class FlashArray {
public:
    FlashArray(FlashGeometry g, FlashTiming t) : geo_(g), timing_(t) {
        geo_.validate();
        timing_.validate();
        pages_.resize(geo_.total_pages());
    }

    const FlashGeometry& geometry() const { return geo_; }
    const FlashTiming& timing() const { return timing_; }

    PageIndex index_of(std::uint32_t block, std::uint32_t page) const {
        check_addr(block, page);
        return static_cast<PageIndex>(block) * geo_.pages_per_block + page;
    }
    PageAddr addr_of(PageIndex idx) const {
        if (idx >= pages_.size()) throw SimError("page index out of range");
        return {static_cast<std::uint32_t>(idx / geo_.pages_per_block),
                static_cast<std::uint32_t>(idx % geo_.pages_per_block)};
    }

    PageStatus status(PageIndex idx) const { return at(idx).status; }
    const Chunk& chunk(PageIndex idx) const { return at(idx).chunk; }

    // Begin programming an erased page with one chunk of content. The page
    // sits in Programming until the returned job completes or aborts.
    FlashJob begin_program(std::uint32_t block, std::uint32_t page, const Chunk& c, SimTime now) {
        Cell& cell = at(index_of(block, page));
        if (cell.status != PageStatus::Erased)
            throw SimError("program on non-erased page (" + std::string(to_string(cell.status)) +
                           "): no in-place update");
        cell.status = PageStatus::Programming;
        cell.chunk = c;
        return {FlashJob::Kind::Program, block, page, now, timing_.program_duration()};
    }

    // Begin erasing a whole block. Every page must be quiescent (no page of
    // the block may be mid-program).
    FlashJob begin_erase(std::uint32_t block, SimTime now) {
        check_addr(block, 0);
        for (std::uint32_t p = 0; p < geo_.pages_per_block; ++p)
            if (at(index_of(block, p)).status == PageStatus::Programming)
                throw SimError("erase overlaps in-flight program");
        return {FlashJob::Kind::Erase, block, 0, now, timing_.erase_duration()};
    }

    // Which program step (1-based) is in progress after `elapsed`.
    int program_step_at(const FlashJob& job, SimTime elapsed) const {
        if (job.kind != FlashJob::Kind::Program) throw SimError("not a program job");
        if (elapsed < 0) elapsed = 0;
        std::int64_t step = elapsed / from_us(timing_.t_program_step_us) + 1;
        return static_cast<int>(step > timing_.program_steps ? timing_.program_steps : step);
    }

    // Ran to completion: commit the state transition.
    void complete(const FlashJob& job) {
        if (job.kind == FlashJob::Kind::Program) {
            Cell& cell = at(index_of(job.block, job.page));
            if (cell.status != PageStatus::Programming)
                throw SimError("completing program on page not in Programming");
            cell.status = PageStatus::Programmed;
        } else {
            for (std::uint32_t p = 0; p < geo_.pages_per_block; ++p) {
                Cell& cell = at(index_of(job.block, p));
                cell.status = PageStatus::Erased;
                cell.chunk = Chunk{};
            }
        }
    }

    // Power was lost `elapsed` into the job. Jobs that already ran their
    // full duration are unaffected; anything mid-flight aborts. An aborted
    // program corrupts its page; an aborted erase corrupts every page of
    // the block. `corrupt` = false models the (configurable) chance that
    // the cells survive the abort with their prior contents: an aborted
    // program page reverts to Erased, an aborted erase leaves the block as
    // it was.
    InterruptOutcome interrupt(const FlashJob& job, SimTime elapsed, bool corrupt = true) {
        if (elapsed >= job.duration) {
            complete(job);
            return InterruptOutcome::AlreadyComplete;
        }
        if (job.kind == FlashJob::Kind::Program) {
            Cell& cell = at(index_of(job.block, job.page));
            if (cell.status != PageStatus::Programming)
                throw SimError("interrupting program on page not in Programming");
            cell.status = corrupt ? PageStatus::Corrupted : PageStatus::Erased;
            if (!corrupt) cell.chunk = Chunk{};
        } else if (corrupt) {
            for (std::uint32_t p = 0; p < geo_.pages_per_block; ++p)
                at(index_of(job.block, p)).status = PageStatus::Corrupted;
        }
        return InterruptOutcome::Aborted;
    }

private:
    struct Cell {
        PageStatus status = PageStatus::Erased;
        Chunk chunk;
    };

    void check_addr(std::uint32_t block, std::uint32_t page) const {
        if (block >= geo_.blocks || page >= geo_.pages_per_block)
            throw SimError("flash address out of range");
    }
    Cell& at(PageIndex idx) {
        if (idx >= pages_.size()) throw SimError("page index out of range");
        return pages_[idx];
    }
    const Cell& at(PageIndex idx) const {
        if (idx >= pages_.size()) throw SimError("page index out of range");
        return pages_[idx];
    }

    FlashGeometry geo_;
    FlashTiming timing_;
    std::vector<Cell> pages_;
};

}  // namespace voltdrop
