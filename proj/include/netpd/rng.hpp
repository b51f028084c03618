#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace netpd {

// Independent stream tags for seed derivation. Every random draw in a
// repetition comes from a stream keyed by (repetition seed, tag, index).
enum class Stream : std::uint64_t {
  Agent = 1,
  Topology = 2,
  Labels = 3,
  Stimulus = 4,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept;
std::uint64_t derive_seed(std::uint64_t base, Stream stream,
                          std::uint64_t index) noexcept;

// FNV-1a; stable across platforms, used for content hashes and cell seeds.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// mt19937_64 with distribution helpers written out explicitly, so draws are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform01();
  // Uniform in [0, n); n > 0.
  std::size_t index(std::size_t n);
  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace netpd
