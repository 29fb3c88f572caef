#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "permideal/numeric.hpp"

#include <nlohmann/json.hpp>

namespace permideal {

// Strictly increasing sequence of block boundaries n_0 < n_1 < ...; block i
// is the interval [n_i, n_{i+1}). Boundaries are arbitrary-precision since
// the cubic rule overflows 64 bits after a handful of blocks.
class BlockSequence {
 public:
  enum class Rule { Explicit, FactorialGaps, CubicGaps, Arithmetic };

  static BlockSequence explicit_seq(std::vector<Int> boundaries);
  // n_{i+1} = n_i + i!
  static BlockSequence factorial_gaps(Int n0 = 0);
  // n_{i+1} = n_i + n_i^3; requires n0 >= 2 so blocks strictly grow.
  static BlockSequence cubic_gaps(Int n0 = 2);
  // n_i = n0 + i*step. step = 1 gives unit blocks (every natural a block).
  static BlockSequence arithmetic(Int n0, Int step);

  Rule rule() const { return rule_; }
  const Int& n0() const { return n0_; }
  const Int& step() const { return step_; }

  // i-th boundary, extending the cached prefix as needed. Explicit sequences
  // throw past their last boundary.
  const Int& boundary(std::size_t i) const;
  Int block_size(std::size_t i) const;
  bool has_boundary(std::size_t i) const;
  // Explicit sequences stop at their last boundary.
  bool is_finite() const { return finite_; }

  // Index i with n_i <= x < n_{i+1}; throws if x < n_0 or past an explicit end.
  std::size_t block_of(const Int& x) const;
  std::size_t block_of_u64(std::uint64_t x) const;

  // Arithmetic-rule fast path when everything fits in 64 bits.
  bool arithmetic_u64(std::uint64_t* n0, std::uint64_t* step) const;

  // Number of complete blocks [n_i, n_{i+1}) with n_{i+1} <= bound.
  std::size_t complete_blocks_below(const Int& bound) const;

  // (n_{i+1} - n_i) / (n_{i+2} - n_{i+1}), the diagnostic whose limit the
  // block-density ideal requires to be 0.
  Rat gap_ratio(std::size_t i) const;
  std::vector<Rat> gap_ratio_profile(std::size_t count) const;

  bool operator==(const BlockSequence& other) const;

  nlohmann::ordered_json to_json() const;
  static BlockSequence from_json(const nlohmann::json& j);

 private:
  BlockSequence() = default;
  void extend_to(std::size_t i) const;

  Rule rule_ = Rule::Explicit;
  Int n0_ = 0;
  Int step_ = 0;  // Arithmetic only
  mutable std::vector<Int> prefix_;
  bool finite_ = false;  // Explicit sequences end
};

}  // namespace permideal
