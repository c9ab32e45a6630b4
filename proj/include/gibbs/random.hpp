#pragma once

#include <array>
#include <cstdint>

#include "gibbs/configuration.hpp"
#include "gibbs/window.hpp"

namespace gibbs {

/// (value, stream) pair fully determining a random sequence.
struct Seed {
  std::uint64_t value = 0;
  std::uint64_t stream = 0;

  /// Deterministic child seed for sub-job `index` (chain, theta node, ...).
  /// Children of distinct indices, and of distinct parents, get distinct
  /// streams with overwhelming probability.
  Seed child(std::uint64_t index) const;

  bool operator==(const Seed&) const = default;
};

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Counter-based generator: key = seed.value, counter = (block, stream).
/// Jumping ahead is O(1) via `discard_blocks`.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(Seed seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1]; safe to take the logarithm of.
  double uniform_pos();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  std::uint64_t poisson(double mean);

  void discard_blocks(std::uint64_t n);
  std::uint64_t block() const { return block_; }

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;  // 64-bit halves consumed from buffer_, in units of u32
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Unit-intensity-scaled Poisson point process on a window.
Configuration sample_poisson(const Window& window, double intensity, Seed seed);
Configuration sample_poisson(const Window& window, double intensity, Rng& rng);

}  // namespace gibbs
