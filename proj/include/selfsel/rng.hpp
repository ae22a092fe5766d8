#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace selfsel {

/// Deterministic random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Uniform and normal variates are derived here rather than through
/// the <random> distributions, whose algorithms are implementation-defined, so
/// a (seed, stream) pair yields the same numbers on every toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), engine_(mix(seed, stream)) {}

    /// Independent stream derived from this generator's seed.
    [[nodiscard]] Rng split(std::uint64_t stream) const {
        return Rng(seed_, mix(stream_ + 0x632be59bd9b4e019ULL, stream));
    }

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t stream() const noexcept { return stream_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire's multiply-shift with rejection; exact for every n > 0.
        __extension__ using u128 = unsigned __int128;
        std::uint64_t x = engine_();
        u128 m = static_cast<u128>(x) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                x = engine_();
                m = static_cast<u128>(x) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal variate (Marsaglia polar method).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        double v = 0.0;
        double s = 0.0;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        return splitmix(splitmix(a) ^ (b * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Indices 0..n-1 in a fresh random order per pass, so every datum is used
/// once per epoch.
class EpochOrder {
public:
    EpochOrder(std::size_t n, Rng& rng) : order_(n), rng_(rng) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        shuffle();
    }

    std::size_t next() {
        if (pos_ == order_.size()) {
            shuffle();
        }
        return order_[pos_++];
    }

private:
    void shuffle() {
        for (std::size_t i = order_.size(); i > 1; --i) {
            std::swap(order_[i - 1], order_[rng_.below(i)]);
        }
        pos_ = 0;
    }

    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
    Rng& rng_;
};

}  // namespace selfsel
