#include <gtest/gtest.h>

#include <map>
#include <optional>
#include <vector>

#include "voltdrop/mapping.hpp"

using namespace voltdrop;

namespace {

// Per-lba dictionary oracle for the range map.
struct DictMap {
    std::map<Lba, PageIndex> m;
    void apply(Lba first, std::uint32_t len, PageIndex phys) {
        for (std::uint32_t i = 0; i < len; ++i) m[first + i] = phys + i;
    }
    std::optional<PageIndex> lookup(Lba lba) const {
        auto it = m.find(lba);
        if (it == m.end()) return std::nullopt;
        return it->second;
    }
};

}  // namespace

TEST(LbaMapTest, ApplyAndLookup) {
    LbaMap map;
    EXPECT_EQ(map.lookup(5), std::nullopt);
    map.apply(10, 4, 100, 0);
    EXPECT_EQ(map.entry_count(), 1u);
    EXPECT_EQ(map.mapped_lbas(), 4u);
    for (Lba l = 10; l < 14; ++l) EXPECT_EQ(map.lookup(l), PageIndex{100 + (l - 10)});
    EXPECT_EQ(map.lookup(9), std::nullopt);
    EXPECT_EQ(map.lookup(14), std::nullopt);
    map.apply(20, 0, 999, 0);  // zero length is a no-op
    EXPECT_EQ(map.entry_count(), 1u);
}

TEST(LbaMapTest, OverwriteSplitsHeadAndTail) {
    LbaMap map;
    map.apply(0, 100, 1000, 0);
    std::vector<PhysExtent> released;
    map.apply(30, 10, 5000, 1, &released);

    ASSERT_EQ(released.size(), 1u);
    EXPECT_EQ(released[0].first, PageIndex{1030});
    EXPECT_EQ(released[0].len, 10u);

    EXPECT_EQ(map.entry_count(), 3u);
    EXPECT_EQ(map.lookup(29), PageIndex{1029});
    EXPECT_EQ(map.lookup(30), PageIndex{5000});
    EXPECT_EQ(map.lookup(39), PageIndex{5009});
    EXPECT_EQ(map.lookup(40), PageIndex{1040});
    EXPECT_EQ(map.lookup(99), PageIndex{1099});
    EXPECT_EQ(map.mapped_lbas(), 100u);
}

TEST(LbaMapTest, OverwriteSwallowsAndTruncatesNeighbours) {
    LbaMap map;
    map.apply(0, 10, 100, 0);    // [0,10)
    map.apply(20, 10, 200, 0);   // [20,30)
    map.apply(40, 10, 300, 0);   // [40,50)
    std::vector<PhysExtent> released;
    map.apply(5, 40, 9000, 1, &released);  // clips head of first, swallows second, clips third

    // released: tail of [0,10), all of [20,30), head of [40,50)
    ASSERT_EQ(released.size(), 3u);
    EXPECT_EQ(released[0].first, PageIndex{105});
    EXPECT_EQ(released[0].len, 5u);
    EXPECT_EQ(released[1].first, PageIndex{200});
    EXPECT_EQ(released[1].len, 10u);
    EXPECT_EQ(released[2].first, PageIndex{300});
    EXPECT_EQ(released[2].len, 5u);

    EXPECT_EQ(map.lookup(4), PageIndex{104});
    EXPECT_EQ(map.lookup(5), PageIndex{9000});
    EXPECT_EQ(map.lookup(44), PageIndex{9039});
    EXPECT_EQ(map.lookup(45), PageIndex{305});
    EXPECT_EQ(map.mapped_lbas(), 50u);
}

TEST(LbaMapTest, MergesOnlyWhenLogicallyAndPhysicallyContiguous) {
    LbaMap map;
    map.apply(0, 8, 100, 0);
    map.apply(8, 8, 108, 0);  // contiguous both ways: merges
    EXPECT_EQ(map.entry_count(), 1u);
    EXPECT_EQ(map.find_entry(0)->len, 16u);

    map.apply(16, 8, 500, 0);  // logically adjacent, physically not
    EXPECT_EQ(map.entry_count(), 2u);

    map.apply(32, 8, 508, 0);  // physically adjacent, logically not
    EXPECT_EQ(map.entry_count(), 3u);

    // Bridging write merges backwards and forwards in one apply.
    LbaMap m2;
    m2.apply(0, 4, 100, 0);
    m2.apply(8, 4, 108, 0);
    m2.apply(4, 4, 104, 0);
    EXPECT_EQ(m2.entry_count(), 1u);
    EXPECT_EQ(m2.find_entry(0)->len, 12u);
    EXPECT_EQ(m2.lookup(11), PageIndex{111});
}

TEST(LbaMapTest, MergeCapBoundsEntryGrowth) {
    LbaMap map(8);
    map.apply(0, 5, 100, 0);
    map.apply(5, 5, 105, 0);  // 10 > cap: stays split
    EXPECT_EQ(map.entry_count(), 2u);

    map.apply(10, 3, 110, 0);  // 5+3 = 8 == cap: merges with [5,10)
    EXPECT_EQ(map.entry_count(), 2u);
    EXPECT_EQ(map.find_entry(5)->len, 8u);

    LbaMap unbounded(LbaMap::kNoMergeCap);
    for (int i = 0; i < 64; ++i) unbounded.apply(i * 4, 4, 1000 + i * 4, 0);
    EXPECT_EQ(unbounded.entry_count(), 1u);
    EXPECT_EQ(unbounded.find_entry(0)->len, 256u);
}

TEST(LbaMapTest, PersistSettledHonoursSettleAndDirty) {
    LbaMap map, durable;
    const SimTime settle = from_ms(100);
    map.apply(0, 10, 100, from_ms(0));
    map.apply(50, 10, 200, from_ms(80));

    // Neither entry has settled yet.
    EXPECT_EQ(map.persist_settled(durable, from_ms(90), settle), 0u);
    EXPECT_EQ(durable.entry_count(), 0u);

    // First entry settles at 100ms, the second only at 180ms.
    EXPECT_EQ(map.persist_settled(durable, from_ms(120), settle), 1u);
    EXPECT_EQ(durable.lookup(0), PageIndex{100});
    EXPECT_EQ(durable.lookup(50), std::nullopt);

    EXPECT_EQ(map.persist_settled(durable, from_ms(200), settle), 1u);
    EXPECT_EQ(durable.lookup(50), PageIndex{200});

    // Everything clean: nothing left to persist.
    EXPECT_EQ(map.persist_settled(durable, from_ms(400), settle), 0u);
}

TEST(LbaMapTest, MergeRestartsTheSettleClock) {
    LbaMap map, durable;
    const SimTime settle = from_ms(100);
    map.apply(0, 4, 100, from_ms(0));
    map.apply(4, 4, 104, from_ms(90));  // merges; entry now modified at 90ms
    EXPECT_EQ(map.entry_count(), 1u);

    EXPECT_EQ(map.persist_settled(durable, from_ms(120), settle), 0u);  // 0ms stamp gone
    EXPECT_EQ(map.persist_settled(durable, from_ms(190), settle), 1u);
    EXPECT_EQ(durable.lookup(7), PageIndex{107});
}

TEST(LbaMapTest, SplitFragmentsKeepTheirPersistSchedule) {
    LbaMap map, durable;
    const SimTime settle = from_ms(100);
    map.apply(0, 100, 1000, from_ms(0));
    map.apply(30, 10, 5000, from_ms(150));  // splits the settled entry

    // Head and tail fragments inherit the 0ms stamp and persist right away;
    // the fresh middle write has not settled.
    EXPECT_EQ(map.persist_settled(durable, from_ms(150), settle), 2u);
    EXPECT_EQ(durable.lookup(0), PageIndex{1000});
    EXPECT_EQ(durable.lookup(99), PageIndex{1099});
    EXPECT_EQ(durable.lookup(35), std::nullopt);

    EXPECT_EQ(map.persist_settled(durable, from_ms(250), settle), 1u);
    EXPECT_EQ(durable.lookup(35), PageIndex{5005});
}

TEST(LbaMapTest, CleanFragmentsStayClean) {
    LbaMap map, durable;
    map.apply(0, 100, 1000, 0);
    map.persist_settled(durable, from_ms(200), from_ms(100));
    EXPECT_EQ(durable.entry_count(), 1u);

    // Splitting a clean entry leaves the fragments clean: only the new
    // middle range needs persisting later.
    map.apply(30, 10, 5000, from_ms(300));
    EXPECT_EQ(map.persist_settled(durable, from_ms(1000), from_ms(100)), 1u);
    EXPECT_EQ(durable.lookup(30), PageIndex{5000});
    EXPECT_EQ(durable.lookup(29), PageIndex{1029});
}

TEST(LbaMapTest, PersistOverlappingIgnoresSettle) {
    LbaMap map, durable;
    map.apply(0, 10, 100, from_ms(500));
    map.apply(20, 10, 200, from_ms(500));
    EXPECT_EQ(map.persist_overlapping(durable, 5, 3, from_ms(500)), 1u);
    EXPECT_EQ(durable.lookup(9), PageIndex{109});
    EXPECT_EQ(durable.lookup(20), std::nullopt);

    // The persisted entry is clean now; a later settled pass skips it.
    EXPECT_EQ(map.persist_settled(durable, from_ms(5000), from_ms(100)), 1u);
    EXPECT_EQ(durable.lookup(20), PageIndex{200});
}

TEST(LbaMapTest, RestoreFromDurableIsWholeTruth) {
    LbaMap map, durable;
    map.apply(0, 10, 100, 0);
    map.persist_settled(durable, from_ms(200), from_ms(100));
    map.apply(50, 10, 500, from_ms(300));  // never persisted

    map.restore_from(durable, from_ms(1000));
    EXPECT_EQ(map.lookup(5), PageIndex{105});
    EXPECT_EQ(map.lookup(55), std::nullopt);
    EXPECT_EQ(map.entry_count(), 1u);

    // Restored entries are clean: nothing persists until a new write.
    LbaMap d2;
    EXPECT_EQ(map.persist_settled(d2, from_ms(9999), 0), 0u);
}

TEST(LbaMapTest, RandomizedAppliesMatchDictOracle) {
    const Lba space = 2000;
    LbaMap map(64);
    DictMap dict;
    std::vector<PhysExtent> released;
    std::uint64_t phys_cursor = 0;

    for (int step = 0; step < 4000; ++step) {
        std::uint64_t w = stream_word(0xD1C7, step);
        Lba first = bounded(w, space - 32);
        std::uint32_t len = 1 + static_cast<std::uint32_t>(bounded(w >> 32, 32));
        released.clear();
        map.apply(first, len, phys_cursor, step, &released);
        // Released pages account one-for-one for the lbas this apply
        // overwrote.
        std::uint64_t released_pages = 0;
        for (const PhysExtent& e : released) released_pages += e.len;
        std::uint64_t overlap = 0;
        for (std::uint32_t i = 0; i < len; ++i)
            if (dict.lookup(first + i)) ++overlap;
        EXPECT_EQ(released_pages, overlap) << "step " << step;

        dict.apply(first, len, phys_cursor);
        phys_cursor += len;
    }

    for (Lba l = 0; l < space; ++l) EXPECT_EQ(map.lookup(l), dict.lookup(l)) << "lba " << l;
    EXPECT_EQ(map.mapped_lbas(), dict.m.size());
    EXPECT_LE(map.entry_count(), dict.m.size());
}
