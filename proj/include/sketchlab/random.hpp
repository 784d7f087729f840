#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace sketchlab::core {

/// Identifies one reproducible random stream. Streams are addressed by value:
/// the same (master_seed, stream_index) pair always yields the same sample
/// sequence, independent of thread placement or call order, and distinct
/// stream indices yield statistically independent streams (split-based
/// derivation through an avalanche mix).
struct RandomSource {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_index = 0;
};

inline RandomSource derive_stream(std::uint64_t master_seed, std::uint64_t index) {
    return RandomSource{master_seed, index};
}

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
    // Stafford mix13 finalizer.
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    return mix64(state);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Derives a child stream from `src`. `salt` namespaces independent uses
/// inside one component (sketch draws vs. noise draws vs. trial fan-out) so
/// that adding a consumer never perturbs another consumer's sequence.
inline RandomSource substream(const RandomSource& src, std::uint64_t salt,
                              std::uint64_t index = 0) {
    std::uint64_t s = src.stream_index;
    s = detail::mix64(s + 0x9e3779b97f4a7c15ULL * (salt + 1));
    s = detail::mix64(s + 0x9e3779b97f4a7c15ULL * (index + 1));
    return RandomSource{src.master_seed, s};
}

/// Mean-zero, unit-variance sub-Gaussian coordinate distributions
/// (L <= 1 for rademacher; L is a fixed absolute constant for gaussian_unit).
enum class DistributionKind { gaussian_unit, rademacher };

namespace detail {
struct ZigguratTables;
const ZigguratTables& ziggurat();
}  // namespace detail

/// xoshiro256++ seeded from a RandomSource. Construction is pure: two
/// generators built from equal sources produce identical output.
class Xoshiro256 {
public:
    explicit Xoshiro256(const RandomSource& src) : zig_(&detail::ziggurat()) {
        std::uint64_t key =
            detail::mix64(src.master_seed ^
                          detail::mix64(src.stream_index + 0x9e3779b97f4a7c15ULL));
        for (auto& word : state_) word = detail::splitmix64(key);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double next_unit_open() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    double next_rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

    double next_gaussian();

    void fill(DistributionKind kind, std::span<double> out) {
        if (kind == DistributionKind::rademacher) {
            for (double& x : out) x = next_rademacher();
        } else {
            for (double& x : out) x = next_gaussian();
        }
    }

private:
    std::array<std::uint64_t, 4> state_{};
    const detail::ZigguratTables* zig_;
};

namespace detail {

// 256-layer ziggurat for the standard normal (Marsaglia-Tsang layout).
// Tables are computed once at startup from the canonical tail constants.
struct ZigguratTables {
    static constexpr int kLayers = 256;
    static constexpr double kR = 3.6541528853610088;
    static constexpr double kV = 4.92867323399e-3;

    std::array<double, kLayers + 1> x{};
    std::array<double, kLayers> y{};
    std::array<std::uint64_t, kLayers> threshold{};

    ZigguratTables() {
        auto density = [](double t) { return std::exp(-0.5 * t * t); };
        x[0] = kV / density(kR);  // virtual base width; layer 0 owns the tail
        x[1] = kR;
        for (int i = 2; i < kLayers; ++i) {
            const double arg = std::min(1.0, kV / x[i - 1] + density(x[i - 1]));
            x[i] = std::sqrt(-2.0 * std::log(arg));
        }
        x[kLayers] = 0.0;
        // y[i] is the upper density edge of layer i, i.e. density(x[i+1]).
        for (int i = 0; i < kLayers; ++i) y[i] = density(x[i + 1]);
        for (int i = 0; i < kLayers; ++i) {
            const double ratio = x[i + 1] / x[i];
            threshold[i] = static_cast<std::uint64_t>(ratio * 0x1.0p63) * 2;
        }
    }
};

inline const ZigguratTables& ziggurat() {
    static const ZigguratTables tables;
    return tables;
}

}  // namespace detail

inline double Xoshiro256::next_gaussian() {
    const auto& zig = *zig_;
    for (;;) {
        const std::uint64_t bits = next_u64();
        const int layer = static_cast<int>(bits & 0xff);
        const bool negative = (bits >> 8) & 1;
        const std::uint64_t u = bits >> 11 << 11;  // 53 significant bits
        if (u < zig.threshold[layer]) {
            const double value = static_cast<double>(u >> 11) * 0x1.0p-53 * zig.x[layer];
            return negative ? -value : value;
        }
        if (layer == 0) {
            // Tail sample beyond kR via Marsaglia's exponential wedge.
            double t, e;
            do {
                t = -std::log(next_unit_open()) / detail::ZigguratTables::kR;
                e = -std::log(next_unit_open());
            } while (e + e < t * t);
            const double value = detail::ZigguratTables::kR + t;
            return negative ? -value : value;
        }
        const double candidate =
            static_cast<double>(u >> 11) * 0x1.0p-53 * zig.x[layer];
        const double gap = zig.y[layer] - zig.y[layer - 1];
        if (zig.y[layer - 1] + next_unit() * gap <
            std::exp(-0.5 * candidate * candidate)) {
            return negative ? -candidate : candidate;
        }
    }
}

/// `len` i.i.d. draws (mean 0, variance 1) sampled from the start of `src`.
/// Pure in `src`: repeated calls return the same vector.
inline std::vector<double> sample_subgaussian(const RandomSource& src,
                                              DistributionKind kind,
                                              std::size_t len) {
    if (len == 0) throw std::invalid_argument("sample_subgaussian: len must be >= 1");
    std::vector<double> out(len);
    Xoshiro256 gen(src);
    gen.fill(kind, out);
    return out;
}

// Stream salts used across the library. One enum so collisions are visible.
namespace salt {
constexpr std::uint64_t trial = 0x7472696cULL;        // per-trial fan-out
constexpr std::uint64_t width_draw = 0x77647277ULL;   // width MC draws
constexpr std::uint64_t xi_draw = 0x78692e64ULL;      // chaos xi batches
constexpr std::uint64_t sketch = 0x736b6d74ULL;       // sketch matrices
constexpr std::uint64_t env_theta = 0x74686574ULL;    // bandit theta*
constexpr std::uint64_t env_action = 0x61637432ULL;   // bandit action sets
constexpr std::uint64_t env_noise = 0x6e6f6973ULL;    // reward noise
constexpr std::uint64_t ts_draw = 0x74736472ULL;      // Thompson posterior draws
constexpr std::uint64_t design = 0x64736e67ULL;       // regression design
constexpr std::uint64_t reg_noise = 0x72656e73ULL;    // regression noise
constexpr std::uint64_t fed_init = 0x66646930ULL;     // fedsim extras
constexpr std::uint64_t misc = 0x6d697363ULL;
}  // namespace salt

}  // namespace sketchlab::core
