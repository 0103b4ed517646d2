#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>

#include "voltdrop/core.hpp"

namespace voltdrop {

// CRC-32 (reflected 0x04C11DB7, init and final xor 0xFFFFFFFF), the same
// checksum produced by zlib's crc32(). Self-check: crc32 of "123456789"
// is 0xCBF43926 and the empty string hashes to 0.
namespace detail {

constexpr std::array<std::uint32_t, 256> make_crc32_table() {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k)
            c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        t[i] = c;
    }
    return t;
}

inline constexpr std::array<std::uint32_t, 256> kCrc32Table = make_crc32_table();

// Slice-by-8 companion tables: table k advances a byte through k+1
// positions of zero padding, letting the update loop eat 8 bytes per step.
constexpr std::array<std::array<std::uint32_t, 256>, 8> make_crc32_slices() {
    std::array<std::array<std::uint32_t, 256>, 8> t{};
    t[0] = make_crc32_table();
    for (int k = 1; k < 8; ++k)
        for (int j = 0; j < 256; ++j) t[k][j] = (t[k - 1][j] >> 8) ^ t[0][t[k - 1][j] & 0xFF];
    return t;
}

inline constexpr std::array<std::array<std::uint32_t, 256>, 8> kCrc32Slices =
    make_crc32_slices();

// GF(2) linear algebra for composing CRCs of concatenated buffers.
using Gf2Matrix = std::array<std::uint32_t, 32>;

constexpr std::uint32_t gf2_times(const Gf2Matrix& m, std::uint32_t v) {
    std::uint32_t sum = 0;
    for (int i = 0; v != 0; v >>= 1, ++i)
        if (v & 1) sum ^= m[i];
    return sum;
}

constexpr Gf2Matrix gf2_square(const Gf2Matrix& m) {
    Gf2Matrix sq{};
    for (int i = 0; i < 32; ++i) sq[i] = gf2_times(m, m[i]);
    return sq;
}

// Operator advancing a CRC register past one zero byte.
constexpr Gf2Matrix byte_shift_operator() {
    Gf2Matrix odd{};
    odd[0] = 0xEDB88320u;  // shift by one bit
    std::uint32_t row = 1;
    for (int i = 1; i < 32; ++i) {
        odd[i] = row;
        row <<= 1;
    }
    Gf2Matrix even = gf2_square(odd);  // two bits
    even = gf2_square(even);           // four bits
    return gf2_square(even);           // eight bits
}

// byte_shift^512: advances a CRC past one 512-byte chunk of zeros.
constexpr Gf2Matrix chunk_shift_operator() {
    Gf2Matrix m = byte_shift_operator();
    for (int i = 0; i < 9; ++i) m = gf2_square(m);  // 2^9 = 512
    return m;
}

inline constexpr Gf2Matrix kChunkShift = chunk_shift_operator();

}  // namespace detail

inline std::uint32_t crc32_update(std::uint32_t crc, const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    crc = ~crc;
    if constexpr (std::endian::native == std::endian::little) {
        const auto& t = detail::kCrc32Slices;
        while (len >= 8) {
            std::uint32_t lo, hi;
            std::memcpy(&lo, p, 4);
            std::memcpy(&hi, p + 4, 4);
            lo ^= crc;
            crc = t[7][lo & 0xFF] ^ t[6][(lo >> 8) & 0xFF] ^ t[5][(lo >> 16) & 0xFF] ^
                  t[4][lo >> 24] ^ t[3][hi & 0xFF] ^ t[2][(hi >> 8) & 0xFF] ^
                  t[1][(hi >> 16) & 0xFF] ^ t[0][hi >> 24];
            p += 8;
            len -= 8;
        }
    }
    while (len--) crc = detail::kCrc32Table[(crc ^ *p++) & 0xFF] ^ (crc >> 8);
    return ~crc;
}

inline std::uint32_t crc32(const void* data, std::size_t len) {
    return crc32_update(0, data, len);
}

// crc32 of A||B given crc32(A), crc32(B) and len(B).
inline std::uint32_t crc32_combine(std::uint32_t crc1, std::uint32_t crc2, std::uint64_t len2) {
    if (len2 == 0) return crc1;
    // Square-and-multiply ladder: bit k of len2 applies the 2^k-byte
    // zero-shift operator to crc1.
    detail::Gf2Matrix op = detail::byte_shift_operator();
    for (; len2 != 0; len2 >>= 1) {
        if (len2 & 1) crc1 = detail::gf2_times(op, crc1);
        if (len2 >> 1) op = detail::gf2_square(op);
    }
    return crc1 ^ crc2;
}

// Fast path of crc32_combine for len2 == kLbaBytes, used when folding
// per-chunk checksums into a whole-region checksum.
inline std::uint32_t crc32_append_chunk(std::uint32_t region_crc, std::uint32_t chunk_crc) {
    return detail::gf2_times(detail::kChunkShift, region_crc) ^ chunk_crc;
}

// --- Regenerable payloads -------------------------------------------------
//
// Write payloads are never stored. A packet's bytes are a pure function of
// its payload seed, so any byte range can be rebuilt on demand and hashed.

inline void fill_payload(std::uint64_t seed, std::uint64_t offset, void* out, std::size_t len) {
    auto* dst = static_cast<unsigned char*>(out);
    if constexpr (std::endian::native == std::endian::little) {
        // Whole aligned words copy directly; the stream's byte order within
        // a word matches little-endian layout.
        while (len >= 8 && offset % 8 == 0) {
            std::uint64_t word = stream_word(seed, offset / 8);
            std::memcpy(dst, &word, 8);
            dst += 8;
            offset += 8;
            len -= 8;
        }
    }
    while (len > 0) {
        std::uint64_t word = stream_word(seed, offset / 8);
        std::size_t in_word = static_cast<std::size_t>(offset % 8);
        std::size_t take = 8 - in_word < len ? 8 - in_word : len;
        for (std::size_t i = 0; i < take; ++i)
            dst[i] = static_cast<unsigned char>(word >> (8 * (in_word + i)));
        dst += take;
        offset += take;
        len -= take;
    }
}

// crc32 of bytes [offset, offset+kLbaBytes) of the payload stream.
inline std::uint32_t chunk_crc(std::uint64_t seed, std::uint64_t offset) {
    unsigned char buf[kLbaBytes];
    fill_payload(seed, offset, buf, sizeof buf);
    return crc32(buf, sizeof buf);
}

inline std::uint32_t payload_crc(std::uint64_t seed, std::uint32_t len) {
    std::uint32_t crc = 0;
    unsigned char buf[kLbaBytes];
    for (std::uint32_t off = 0; off < len; off += kLbaBytes) {
        std::uint32_t take = len - off < kLbaBytes ? len - off : kLbaBytes;
        fill_payload(seed, off, buf, take);
        crc = crc32_update(crc, buf, take);
    }
    return crc;
}

// crc32 of one 512-byte chunk of erased-fill (all zero bytes).
inline std::uint32_t erased_chunk_crc() {
    static const std::uint32_t crc = [] {
        unsigned char zeros[kLbaBytes] = {};
        return crc32(zeros, sizeof zeros);
    }();
    return crc;
}

// --- Region digests -------------------------------------------------------
//
// Requests are checked at region granularity. A digest is 64 bits wide:
// when every chunk in the region carries readable content the digest is the
// plain 32-bit crc32 of the region bytes (zero-extended); if any chunk is
// unreadable the digest is tagged with kCorruptBit, which no 32-bit
// checksum can collide with.

inline constexpr std::uint64_t kCorruptBit = 1ull << 32;

class RegionDigest {
public:
    // `readable`: chunk content exists and `crc` is its checksum.
    // Unreadable chunks still contribute `crc` so that distinct corrupted
    // regions yield distinct digests.
    void add_chunk(bool readable, std::uint32_t crc) {
        crc_ = crc32_append_chunk(crc_, crc);
        mixed_ = (mixed_ ^ (crc | (readable ? 0u : 0x80000000u))) * 0x100000001B3ull + 0xCBF29CE484222325ull;
        corrupt_ = corrupt_ || !readable;
    }

    std::uint64_t value() const { return corrupt_ ? (kCorruptBit | mixed_) : crc_; }

private:
    std::uint32_t crc_ = 0;
    std::uint64_t mixed_ = 0xCBF29CE484222325ull;
    bool corrupt_ = false;
};

}  // namespace voltdrop
