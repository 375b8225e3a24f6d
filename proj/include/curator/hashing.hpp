#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>

namespace curator {

/// 64-bit FNV-1a. Stable across platforms and runs; used for content ids and
/// seed derivation, never for security.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::span<const unsigned char> data);

/// splitmix64 finalizer; turns structured inputs into well-mixed words.
std::uint64_t mix64(std::uint64_t x);

/// Stable hash of an ordered list of string parts (length-prefixed so that
/// ("ab","c") and ("a","bc") differ).
std::uint64_t stable_hash(std::initializer_list<std::string_view> parts);

std::string to_hex(std::uint64_t v);

/// Uniform double in [0, 1) from the top 53 bits of a word.
inline double unit_interval(std::uint64_t word) {
    return static_cast<double>(word >> 11) * 0x1.0p-53;
}

/// Counter-based generator: deterministic stream of words from a key.
class HashStream {
public:
    explicit HashStream(std::uint64_t key) : key_(key) {}

    std::uint64_t next() { return mix64(key_ ^ mix64(++counter_)); }
    double uniform() { return unit_interval(next()); }
    /// Approximately standard normal (Box-Muller on two uniforms).
    double normal();

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace curator
