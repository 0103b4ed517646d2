#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace voltdrop {

// Simulation clock: nanoseconds since run start.
using SimTime = std::int64_t;

inline constexpr SimTime kMicrosecond = 1'000;
inline constexpr SimTime kMillisecond = 1'000'000;
inline constexpr SimTime kSecond = 1'000'000'000;

constexpr SimTime from_us(std::int64_t v) { return v * kMicrosecond; }
constexpr SimTime from_ms(std::int64_t v) { return v * kMillisecond; }
constexpr double to_ms(SimTime t) { return static_cast<double>(t) / static_cast<double>(kMillisecond); }

// Logical block address, in 512-byte units.
using Lba = std::uint64_t;
inline constexpr std::uint32_t kLbaBytes = 512;

// Bad user input: config files, CLI values, infeasible run parameters.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Contract violations between simulator components (illegal state
// transitions, out-of-range coordinates, malformed traces).
class SimError : public std::runtime_error {
public:
    explicit SimError(const std::string& msg) : std::runtime_error(msg) {}
};

// splitmix64: the output sequence is fully specified, so seeded state is
// reproducible across platforms and standard libraries.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Random-access stream: word k of the stream identified by `seed`.
constexpr std::uint64_t stream_word(std::uint64_t seed, std::uint64_t k) {
    return splitmix64(seed + k * 0x9E3779B97F4A7C15ull);
}

// Order-sensitive seed combiner for deriving per-run and per-axis seeds.
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2)));
}

inline std::uint64_t mix_seed(std::uint64_t a, const std::string& tag) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return mix_seed(a, h);
}

// Deterministic uniform draw in [0, n) from a stream word. Modulo bias is
// negligible for the ranges used here (n << 2^64).
constexpr std::uint64_t bounded(std::uint64_t word, std::uint64_t n) {
    return n == 0 ? 0 : word % n;
}

// u in [0, 1) from a stream word.
constexpr double unit_real(std::uint64_t word) {
    return static_cast<double>(word >> 11) * 0x1.0p-53;
}

}  // namespace voltdrop
