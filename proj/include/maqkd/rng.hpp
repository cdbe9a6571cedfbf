#pragma once

#include <cstdint>

namespace maqkd {

// Counter-based generator: output i of stream s is a pure function of (s, i),
// so parallel workers can be handed disjoint counter ranges or derived
// streams and still reproduce a single-threaded run bit for bit.
namespace rng_detail {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace rng_detail

class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0)
        : seed_(seed), counter_(counter) {}

    std::uint64_t next_u64() {
        return rng_detail::mix64(seed_ ^ rng_detail::mix64(counter_++));
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Independent derived stream, e.g. one per distance point or per seed.
    CounterRng fork(std::uint64_t stream_id) const {
        return CounterRng(rng_detail::mix64(seed_ ^ rng_detail::mix64(~stream_id)));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

  private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

} // namespace maqkd
