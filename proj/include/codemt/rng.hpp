#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "codemt/util.hpp"

namespace codemt {

// Deterministic PRNG (splitmix64). All sampling helpers are implemented here
// rather than via <random> distributions, whose outputs differ across
// standard libraries. Every stream is reproducible from (root seed, name).
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : state_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

    static Rng substream(std::uint64_t root_seed, std::string_view name) {
        return Rng(root_seed ^ fnv1a64(name));
    }
    Rng fork(std::string_view name) const {
        return Rng(state_ ^ fnv1a64(name));
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

    // Uniform in [lo, hi], inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(next_u64());  // full 64-bit range
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    float uniform_float() { return static_cast<float>(uniform()); }

    bool bernoulli(double p) { return uniform() < p; }

    template <class T>
    const T& choice(const std::vector<T>& items) {
        return items[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(items.size()) - 1))];
    }

    template <class T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(items[i - 1], items[j]);
        }
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace codemt
