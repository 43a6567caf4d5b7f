#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

#include "guidelab/common.hpp"

namespace guidelab {

// splitmix64 finalizer; used for seed derivation so that streams built from
// (master, index) pairs are decorrelated.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return mix_seed(mix_seed(master) ^ mix_seed(stream * 0x9e3779b97f4a7c15ULL + 0x165667b19e3779f9ULL));
}

// Deterministic random stream. mt19937_64 output is pinned by the standard and
// the uniform/normal conversions are done by hand, so sequences are identical
// across platforms and library versions.
class Rng {
   public:
    explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

    static Rng child(std::uint64_t master, std::uint64_t stream) { return Rng(derive_seed(master, stream)); }

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1]
    double uniform_open() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

    // standard normal via Box-Muller (one value per call; no cached spare so
    // the stream position is a simple function of the call count)
    double normal() {
        const double u1 = uniform_open();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    Vec normal_vec(int n) {
        Vec v(static_cast<size_t>(n));
        for (auto& x : v) x = normal();
        return v;
    }

    void fill_normal(std::span<double> out) {
        for (auto& x : out) x = normal();
    }

    // index in [0, n)
    int uniform_index(int n) {
        const int k = static_cast<int>(uniform() * n);
        return k < n ? k : n - 1;
    }

    // categorical draw by inverse CDF; probs need not be exactly normalized
    int categorical(std::span<const double> probs) {
        if (probs.empty()) throw std::invalid_argument("categorical: empty probability vector");
        double total = 0.0;
        for (double p : probs) total += p;
        double u = uniform() * total;
        for (size_t k = 0; k + 1 < probs.size(); ++k) {
            u -= probs[k];
            if (u < 0.0) return static_cast<int>(k);
        }
        return static_cast<int>(probs.size() - 1);
    }

   private:
    std::mt19937_64 engine_;
};

}  // namespace guidelab
