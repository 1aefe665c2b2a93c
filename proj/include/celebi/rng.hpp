#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "celebi/errors.hpp"

namespace celebi {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic per-purpose random stream. Streams are derived from a run
// seed plus a label (and optional index), so world construction, parameter
// init, channel noise and data splits never share draws. A stream is a plain
// value: copying it snapshots the state, which the finite-difference tests
// rely on to replay identical noise.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : state_(seed ^ 0xd1b54a32d192ed03ULL) {
        // warm up so trivially related seeds decorrelate
        for (int i = 0; i < 4; ++i) splitmix64(state_);
    }

    static RngStream derive(std::uint64_t root_seed, std::string_view label, std::uint64_t index = 0) {
        std::uint64_t s = root_seed;
        s = s * 0x9e3779b97f4a7c15ULL + fnv1a64(label);
        s ^= 0x5851f42d4c957f2dULL * (index + 1);
        return RngStream(s);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0,1), 53-bit resolution
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller (cosine branch only; deterministic draw count of 2)
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Gumbel(0,1) via -ln(-ln(u)), u clamped away from {0,1} to avoid infinities
    double gumbel() {
        double u = uniform01();
        if (u < 1e-12) u = 1e-12;
        if (u > 1.0 - 1e-12) u = 1.0 - 1e-12;
        return -std::log(-std::log(u));
    }

    // unbiased integer in [0, n) by rejection
    std::uint64_t below(std::uint64_t n) {
        check(n > 0, "RngStream::below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // partial Fisher-Yates: places a uniform random k-subset in v[0..k)
    template <typename T>
    void partial_shuffle(std::vector<T>& v, std::size_t k) {
        const std::size_t n = v.size();
        for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
            std::size_t j = i + static_cast<std::size_t>(below(n - i));
            std::swap(v[i], v[j]);
        }
    }

  private:
    std::uint64_t state_;
};

}  // namespace celebi
