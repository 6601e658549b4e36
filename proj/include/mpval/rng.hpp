#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace mpval {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Philox4x32-10 block cipher (Salmon et al.); counter-based, no state carried
/// between blocks beyond the caller's counter.
inline std::array<std::uint32_t, 4> philox4x32(std::uint64_t key,
                                               std::uint64_t ctr_hi,
                                               std::uint64_t ctr_lo) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    std::array<std::uint32_t, 4> c = {
        static_cast<std::uint32_t>(ctr_lo), static_cast<std::uint32_t>(ctr_lo >> 32),
        static_cast<std::uint32_t>(ctr_hi), static_cast<std::uint32_t>(ctr_hi >> 32)};
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t(M0) * c[0];
        const std::uint64_t p1 = std::uint64_t(M1) * c[2];
        c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k0,
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k1,
             static_cast<std::uint32_t>(p0)};
        k0 += W0;
        k1 += W1;
    }
    return c;
}

}  // namespace detail

/// Derives a child stream id; used to key per-node / per-replication streams.
inline std::uint64_t substream(std::uint64_t stream, std::uint64_t ordinal) {
    return detail::splitmix64(stream ^ (0x9e3779b97f4a7c15ULL * (ordinal + 1)));
}

/// Counter-based random stream: output depends only on (seed, stream, draw
/// index), never on scheduling or on other streams.
class KeyedRng {
  public:
    KeyedRng(std::uint64_t seed, std::uint64_t stream)
        : key_(detail::splitmix64(seed) ^ 0x6a09e667f3bcc909ULL), stream_(stream) {}

    std::uint64_t next_u64() {
        if (buffered_) {
            buffered_ = false;
            return spare_;
        }
        const auto b = detail::philox4x32(key_, stream_, counter_++);
        spare_ = (std::uint64_t(b[2]) << 32) | b[3];
        buffered_ = true;
        return (std::uint64_t(b[0]) << 32) | b[1];
    }

    /// Uniform on the open interval (0,1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (rejection-free).
    double normal() {
        if (have_normal_) {
            have_normal_ = false;
            return spare_normal_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_normal_ = r * std::sin(a);
        have_normal_ = true;
        return r * std::cos(a);
    }

    /// Poisson count by chunked sequential search; exact for any mean >= 0.
    std::int64_t poisson(double mean) {
        std::int64_t total = 0;
        while (mean > 32.0) {
            total += poisson_small(32.0);
            mean -= 32.0;
        }
        if (mean > 0.0) total += poisson_small(mean);
        return total;
    }

    /// Gamma(shape, scale) via Marsaglia-Tsang squeeze. scale == 0 degenerates
    /// to the point mass at zero.
    double gamma(double shape, double scale) {
        if (scale == 0.0) return 0.0;
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
        }
    }

  private:
    std::int64_t poisson_small(double mean) {
        const double limit = std::exp(-mean);
        std::int64_t k = 0;
        double prod = uniform();
        while (prod > limit) {
            ++k;
            prod *= uniform();
        }
        return k;
    }

    std::uint64_t key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::uint64_t spare_ = 0;
    double spare_normal_ = 0.0;
    bool buffered_ = false;
    bool have_normal_ = false;
};

}  // namespace mpval
