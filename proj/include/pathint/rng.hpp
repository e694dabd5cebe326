#pragma once

#include <cmath>
#include <cstdint>

namespace pathint {

namespace detail {
// splitmix64 finalizer; used both as a generator and as a hash for stream derivation.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct SplitMix64 {
    std::uint64_t x;
    explicit SplitMix64(std::uint64_t s) : x(s) {}
    std::uint64_t next() {
        x += 0x9E3779B97F4A7C15ULL;
        return mix64(x);
    }
};

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace detail

/// xoshiro256++ with Box-Muller Gaussians. Streams are derived from
/// (seed, tag, index) by a hash chain, so every Monte Carlo sample owns an
/// independent generator regardless of which worker runs it.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
        std::uint64_t h = detail::mix64(seed + 0x9E3779B97F4A7C15ULL);
        h = detail::mix64(h ^ (tag + 0xD1342543DE82EF95ULL));
        h = detail::mix64(h ^ (index + 0x2545F4914F6CDD1DULL));
        detail::SplitMix64 sm(h);
        for (auto& w : s_) w = sm.next();
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // all-zero state is invalid
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1]; safe as a log argument.
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (pairs cached).
    double gauss() {
        if (have_cache_) {
            have_cache_ = false;
            return cache_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        const double th = 6.283185307179586476925286766559 * uniform();
        cache_ = r * std::sin(th);
        have_cache_ = true;
        return r * std::cos(th);
    }

private:
    std::uint64_t s_[4];
    bool have_cache_ = false;
    double cache_ = 0.0;
};

// Stream tags; one per sampler so draws never alias across operations.
namespace stream_tag {
inline constexpr std::uint64_t kMeasureProposal = 0x01;
inline constexpr std::uint64_t kBrownian = 0x02;
inline constexpr std::uint64_t kInitialPoint = 0x03;
inline constexpr std::uint64_t kTest = 0xFF;
}  // namespace stream_tag

}  // namespace pathint
