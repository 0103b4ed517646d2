#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "voltdrop/workload.hpp"

using namespace voltdrop;

namespace {

WorkloadSpec base_spec() {
    WorkloadSpec s;
    s.wss_bytes = 256ull << 20;
    s.iops = 100.0;
    s.n_requests = 400;
    s.seed = 42;
    return s;
}

}  // namespace

TEST(WorkloadTest, DeterministicStream) {
    auto a = generate(base_spec());
    auto b = generate(base_spec());
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].id, b[i].id);
        EXPECT_EQ(a[i].op, b[i].op);
        EXPECT_EQ(a[i].lba, b[i].lba);
        EXPECT_EQ(a[i].length, b[i].length);
        EXPECT_EQ(a[i].payload_seed, b[i].payload_seed);
        EXPECT_EQ(a[i].checksum_data, b[i].checksum_data);
    }
    WorkloadSpec other = base_spec();
    other.seed = 43;
    auto c = generate(other);
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].lba == c[i].lba) ++same;
    EXPECT_LT(same, a.size() / 4);  // different seed, different stream
}

TEST(WorkloadTest, SizesAddressesAndPacing) {
    WorkloadSpec s = base_spec();
    s.n_requests = 2000;
    const Lba wss_lbas = s.wss_bytes / kLbaBytes;
    std::set<std::uint32_t> sizes;
    auto pkts = generate(s);
    for (std::size_t i = 0; i < pkts.size(); ++i) {
        const auto& p = pkts[i];
        EXPECT_EQ(p.id, i + 1);
        EXPECT_GE(p.length, SizeSpec::kMin);
        EXPECT_LE(p.length, SizeSpec::kMax);
        EXPECT_EQ(p.length % SizeSpec::kMin, 0u);
        EXPECT_EQ(p.lba % (SizeSpec::kMin / kLbaBytes), 0u);  // 4 KiB aligned
        EXPECT_LE(p.lba + p.length / kLbaBytes, wss_lbas);    // inside the working set
        EXPECT_EQ(p.issue_time, issue_slot(s.iops, i));
        sizes.insert(p.length);
    }
    EXPECT_GT(sizes.size(), 100u);  // uniform size draw actually varies

    s.size.fixed_bytes = 65536;
    for (const auto& p : generate(s)) EXPECT_EQ(p.length, 65536u);
}

TEST(WorkloadTest, IssuePacingIsDriftFree) {
    EXPECT_EQ(issue_slot(40.0, 0), 0);
    EXPECT_EQ(issue_slot(40.0, 1), 25 * kMillisecond);
    EXPECT_EQ(issue_slot(40.0, 4000), 100 * kSecond);
    // three slots per microsecond-scale rate stay exact over long spans
    EXPECT_EQ(issue_slot(1000.0, 3600000), 3600 * kSecond);
}

TEST(WorkloadTest, WriteSetsNestAcrossWritePct) {
    WorkloadSpec hi = base_spec();
    hi.write_pct = 80;
    WorkloadSpec lo = base_spec();
    lo.write_pct = 30;

    auto a = generate(hi);
    auto b = generate(lo);
    std::size_t writes_hi = 0, writes_lo = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].op == Op::Write) ++writes_hi;
        if (b[i].op == Op::Write) {
            ++writes_lo;
            EXPECT_EQ(a[i].op, Op::Write);  // lower pct write set nests in higher
        }
        // id, size and address draws are independent of the op threshold
        EXPECT_EQ(a[i].lba, b[i].lba);
        EXPECT_EQ(a[i].length, b[i].length);
    }
    EXPECT_GT(writes_hi, writes_lo);
    double frac = static_cast<double>(writes_lo) / a.size();
    EXPECT_NEAR(frac, 0.30, 0.08);

    WorkloadSpec none = base_spec();
    none.write_pct = 0;
    for (const auto& p : generate(none)) EXPECT_EQ(p.op, Op::Read);
    WorkloadSpec all = base_spec();
    all.write_pct = 100;
    for (const auto& p : generate(all)) EXPECT_EQ(p.op, Op::Write);
}

TEST(WorkloadTest, SequentialChainsAddressesAndWraps) {
    WorkloadSpec s = base_spec();
    s.pattern = Pattern::Sequential;
    s.wss_bytes = 8ull << 20;  // small so the cursor wraps
    s.size.fixed_bytes = 1 << 20;
    s.n_requests = 20;
    auto pkts = generate(s);
    const Lba wss_lbas = s.wss_bytes / kLbaBytes;
    for (std::size_t i = 1; i < pkts.size(); ++i) {
        Lba prev_end = pkts[i - 1].lba + pkts[i - 1].length / kLbaBytes;
        if (prev_end + pkts[i].length / kLbaBytes <= wss_lbas)
            EXPECT_EQ(pkts[i].lba, prev_end) << "i " << i;
        else
            EXPECT_EQ(pkts[i].lba, 0u) << "i " << i;
    }
}

TEST(WorkloadTest, WritePayloadChecksums) {
    auto pkts = generate(base_spec());
    std::vector<unsigned char> buf;
    for (const auto& p : pkts) {
        ASSERT_EQ(p.op, Op::Write);
        EXPECT_NE(p.payload_seed, 0u);
        buf.resize(p.length);
        fill_payload(p.payload_seed, 0, buf.data(), buf.size());
        EXPECT_EQ(p.checksum_data, crc32(buf.data(), buf.size()));
    }
    // distinct requests carry distinct payload seeds
    EXPECT_NE(pkts[0].payload_seed, pkts[1].payload_seed);
}

TEST(WorkloadTest, ChainProtocolPerKind) {
    WorkloadSpec s = base_spec();
    s.size.fixed_bytes = 16384;

    struct Case {
        SeqKind kind;
        Op first;
        Op second;
        Op third;
    };
    const Case cases[] = {
        {SeqKind::RAR, Op::Read, Op::Read, Op::Read},
        {SeqKind::RAW, Op::Write, Op::Read, Op::Write},
        {SeqKind::WAR, Op::Read, Op::Write, Op::Read},
        {SeqKind::WAW, Op::Write, Op::Write, Op::Write},
    };
    for (const Case& c : cases) {
        s.sequence = c.kind;
        DataPacket p1 = first_in_sequence(s);
        EXPECT_EQ(p1.op, c.first) << to_string(c.kind);
        DataPacket p2 = next_in_sequence(s, p1, true, 2);
        EXPECT_EQ(p2.op, c.second) << to_string(c.kind);
        EXPECT_EQ(p2.lba, p1.lba);
        EXPECT_EQ(p2.length, p1.length);
        DataPacket p3 = next_in_sequence(s, p2, true, 3);
        EXPECT_EQ(p3.op, c.third) << to_string(c.kind);

        // each write in the chain is fresh content
        if (p1.op == Op::Write && p2.op == Op::Write)
            EXPECT_NE(p1.payload_seed, p2.payload_seed);
        // chaining off an incomplete predecessor is a protocol error
        EXPECT_THROW(next_in_sequence(s, p1, false, 2), SimError);
    }

    s.sequence.reset();
    EXPECT_THROW(first_in_sequence(s), ConfigError);
    s.sequence = SeqKind::WAW;
    EXPECT_THROW(generate(s), ConfigError);  // chained streams are not batch-generated
}

TEST(WorkloadTest, ValidationErrors) {
    WorkloadSpec s = base_spec();
    s.size.fixed_bytes = 1000;  // not a 4 KiB multiple
    EXPECT_THROW(s.validate(), ConfigError);
    s = base_spec();
    s.size.fixed_bytes = 2 << 20;
    EXPECT_THROW(s.validate(), ConfigError);
    s = base_spec();
    s.wss_bytes = 512 * 1024;  // smaller than the largest uniform request
    EXPECT_THROW(s.validate(), ConfigError);
    s = base_spec();
    s.write_pct = 101;
    EXPECT_THROW(s.validate(), ConfigError);
    s = base_spec();
    s.iops = 0.0;
    EXPECT_THROW(s.validate(), ConfigError);
    s = base_spec();
    s.n_requests = 0;
    EXPECT_THROW(s.validate(), ConfigError);
    s = base_spec();
    s.sequence = SeqKind::WAW;
    s.write_pct = 0;
    EXPECT_THROW(s.validate(), ConfigError);
}
