#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hskip {

using NodeId = std::uint64_t;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A bit index at or beyond the stream cap was requested, or two streams
/// agree on every queryable bit. Either way the run cannot continue.
struct LevelOverflow : Error {
    using Error::Error;
};

struct UnknownNode : Error {
    using Error::Error;
};

struct InvalidBandwidth : Error {
    using Error::Error;
};

struct BadDistribution : Error {
    using Error::Error;
};

struct BadFraction : Error {
    using Error::Error;
};

struct NoRouteError : Error {
    using Error::Error;
};

/// 64-bit finalizer of the splitmix64 generator. All pseudo-random material
/// in the library (bit streams, seeds, scheduler draws) derives from it.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

/// Canonical derivation of a stream seed from a node id. World generators and
/// dump loaders both use it, so a dump only needs to store ids.
constexpr std::uint64_t seed_from_id(NodeId id) noexcept {
    return mix64(id + 0x6a09e667f3bcc909ULL);
}

/// Immutable pseudo-random bit string of a node, capped at `cap` bits.
///
/// Bit j is bit (j mod 64) of word (j div 64), where
///   word(k) = mix64(seed + kGolden * (k + 1)).
/// The words are materialized eagerly so prefix comparison is a handful of
/// XORs. Queries past the cap throw LevelOverflow.
class BitStream {
public:
    static constexpr int kMaxCap = 256;
    static constexpr int kDefaultCap = 256;

    explicit BitStream(std::uint64_t seed, int cap = kDefaultCap)
        : seed_(seed), cap_(check_cap(cap)) {
        for (int k = 0; k < kWords; ++k)
            words_[k] = mix64(seed + kGolden * static_cast<std::uint64_t>(k + 1));
    }

    /// Test helper: a stream whose leading bits are exactly `bits` ('0'/'1');
    /// the tail is filled deterministically from a hash of the pattern.
    static BitStream from_bits(std::string_view bits, int cap = kDefaultCap) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : bits) {
            if (c != '0' && c != '1') throw Error("from_bits: pattern must be '0'/'1'");
            h = (h ^ static_cast<std::uint64_t>(c)) * 0x100000001b3ULL;
        }
        BitStream s(mix64(h), cap);
        if (static_cast<int>(bits.size()) > s.cap_)
            throw LevelOverflow("from_bits: pattern longer than cap");
        for (std::size_t j = 0; j < bits.size(); ++j) {
            const std::uint64_t mask = 1ULL << (j & 63);
            if (bits[j] == '1')
                s.words_[j >> 6] |= mask;
            else
                s.words_[j >> 6] &= ~mask;
        }
        return s;
    }

    std::uint64_t seed() const noexcept { return seed_; }
    int cap() const noexcept { return cap_; }

    int bit(int j) const {
        if (j < 0 || j >= cap_)
            throw LevelOverflow("bit index " + std::to_string(j) + " >= cap " +
                                std::to_string(cap_));
        return static_cast<int>((words_[j >> 6] >> (j & 63)) & 1u);
    }

    /// First `i` bits as 0/1 values; prefix(0) is empty.
    std::vector<std::uint8_t> prefix(int i) const {
        if (i < 0 || i > cap_) throw LevelOverflow("prefix length exceeds cap");
        std::vector<std::uint8_t> out(static_cast<std::size_t>(i));
        for (int j = 0; j < i; ++j) out[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(bit(j));
        return out;
    }

    /// Index of the first disagreeing bit. Streams that agree on every bit up
    /// to the shared cap indicate corrupted identities: LevelOverflow.
    friend int common_prefix(const BitStream& a, const BitStream& b) {
        const int cap = a.cap_ < b.cap_ ? a.cap_ : b.cap_;
        for (int k = 0; k * 64 < cap; ++k) {
            const std::uint64_t x = a.words_[k] ^ b.words_[k];
            if (x != 0) {
                const int j = k * 64 + std::countr_zero(x);
                if (j >= cap) break;
                return j;
            }
        }
        throw LevelOverflow("streams agree up to cap");
    }

    bool operator==(const BitStream& o) const noexcept {
        return words_ == o.words_ && cap_ == o.cap_;
    }

private:
    static constexpr int kWords = kMaxCap / 64;

    static int check_cap(int cap) {
        if (cap < 1 || cap > kMaxCap) throw Error("cap out of range");
        return cap;
    }

    std::uint64_t seed_;
    int cap_;
    std::array<std::uint64_t, kWords> words_{};
};

inline bool prefix_equal(const BitStream& a, const BitStream& b, int i) {
    if (i == 0) return true;
    return common_prefix(a, b) >= i;
}

/// Strict total order on nodes: by bandwidth, ties broken by id. This makes
/// the "all bandwidths are unique" assumption constructive.
struct BandwidthKey {
    double bw = 0.0;
    NodeId id = 0;

    friend constexpr bool operator==(const BandwidthKey& a, const BandwidthKey& b) {
        return a.bw == b.bw && a.id == b.id;
    }
    friend constexpr bool operator!=(const BandwidthKey& a, const BandwidthKey& b) {
        return !(a == b);
    }
    friend constexpr bool operator<(const BandwidthKey& a, const BandwidthKey& b) {
        if (a.bw != b.bw) return a.bw < b.bw;
        return a.id < b.id;
    }
    friend constexpr bool operator>(const BandwidthKey& a, const BandwidthKey& b) { return b < a; }
    friend constexpr bool operator<=(const BandwidthKey& a, const BandwidthKey& b) { return !(b < a); }
    friend constexpr bool operator>=(const BandwidthKey& a, const BandwidthKey& b) { return !(a < b); }
};

}  // namespace hskip
