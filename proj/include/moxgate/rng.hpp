#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace moxgate {

// Deterministic random source. The engine is std::mt19937_64 (a fully
// specified generator) and every transform below is hand-rolled from raw
// 64-bit draws, so a given (seed, algorithm) pair yields the same stream on
// any platform. All randomness in the project flows through this class.
class Rng {
  public:
    static constexpr const char* kAlgorithm = "mt19937_64";

    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    // Derives an independent deterministic substream, e.g. rng.fork("dropout").
    Rng fork(const std::string& label) const;

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform();
    double uniform_range(double lo, double hi);

    // Standard normal via Box-Muller (no cached spare, one draw per call).
    double normal();

    bool bernoulli(double p);

    // Uniform integer in [0, n). n must be > 0.
    std::size_t index(std::size_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::swap(v[i], v[index(i + 1)]);
        }
    }

    // Engine-state round trip for checkpointing.
    std::string serialize_state() const;
    void restore_state(const std::string& text);

  private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace moxgate
