#pragma once

#include <cstdint>
#include <random>

namespace anchorquad {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for the `index`-th independent stream derived from `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return master ^ splitmix64(index + 0x632be59bd9b4e019ULL);
}

/// 64-bit Mersenne twister with a platform-independent conversion to (0,1).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on the open interval (0,1); never returns 0 exactly.
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace anchorquad
