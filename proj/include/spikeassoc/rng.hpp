#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace spikeassoc {

// splitmix64 finalizer; full avalanche, used both as generator step and key mixer
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Domain tags keep independently derived streams from colliding.
enum class StreamTag : std::uint64_t {
    init_pos = 0x01,
    move = 0x02,
    link = 0x03,
    split = 0x04,
    shuffle = 0x05,
    weights = 0x06,
    dropout = 0x07,
};

// Counter-based key derivation: the stream for (seed, tag, indices...) is a pure
// function of its arguments, so work can be farmed out in any order.
inline std::uint64_t derive_key(std::uint64_t seed, StreamTag tag,
                                std::initializer_list<std::uint64_t> parts = {}) {
    std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc908ULL);
    h = mix64(h ^ (static_cast<std::uint64_t>(tag) * 0x9e3779b97f4a7c15ULL));
    for (std::uint64_t p : parts)
        h = mix64(h ^ (p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
    return h;
}

// Deterministic stream; not cryptographic, just well mixed and portable.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    // uniform in [0, 1), 53-bit resolution
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1]; safe as a log() argument
    double next_unit_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // standard normal via Box-Muller; second deviate cached
    double next_normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = next_unit_pos();
        double u2 = next_unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    // unbiased integer in [0, n) by rejection
    std::uint64_t next_below(std::uint64_t n) {
        if (n < 2) return 0;
        std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

private:
    std::uint64_t state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

// Fisher-Yates in place
template <typename Vec>
void shuffle(Vec& v, RngStream& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace spikeassoc
