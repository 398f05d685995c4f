#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace hyqal {

// 64-bit FNV-1a, used for config hashes and seed derivation.
std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Derive a child seed from a parent seed and a sequence of tags, e.g.
// derive_seed(global, {epoch, sample_index}). Stable across platforms.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

// Deterministic random stream. All floating-point draws are built from raw
// mt19937_64 output with explicit arithmetic so that results do not depend
// on the standard library's distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n);

    // Standard normal via Box-Muller (stateless: no cached spare, so the
    // stream is fully captured by the engine state).
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Engine state as a whitespace-separated decimal string (checkpointable).
    std::string state() const;
    void set_state(const std::string& s);

  private:
    std::mt19937_64 engine_;
};

} // namespace hyqal
