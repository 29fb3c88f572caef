#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "permideal/blockseq.hpp"
#include "permideal/error.hpp"
#include "permideal/numeric.hpp"
#include "permideal/setexpr.hpp"
#include "permideal/window.hpp"

#include <nlohmann/json.hpp>

namespace permideal {

// Ideal of "small" subsets of the naturals. The summable reciprocal ideal
// collects sets whose reciprocal series converges; the block-cubic variant
// weighs block i of its sequence by boundary(i)^-3; the block-density ideal
// collects sets of vanishing per-block density.
class IdealDescriptor {
 public:
  enum class Kind { Finite, SummableReciprocal, SummableBlockCubic, BlockDensity };

  static IdealDescriptor finite();
  static IdealDescriptor summable_reciprocal();
  static IdealDescriptor summable_block_cubic(BlockSequence blocks);
  static IdealDescriptor block_density(BlockSequence blocks);

  Kind kind() const { return kind_; }
  const BlockSequence& blocks() const { return *blocks_; }
  bool is_summable() const {
    return kind_ == Kind::SummableReciprocal || kind_ == Kind::SummableBlockCubic;
  }

  // Weight of a single point under a summable ideal. weight(0) under the
  // reciprocal ideal and weights below the first block boundary are set to 1;
  // membership is insensitive to finitely many points.
  Rat weight(std::uint64_t x) const;

  nlohmann::ordered_json to_json() const;
  static IdealDescriptor from_json(const nlohmann::json& j);

 private:
  Kind kind_ = Kind::Finite;
  std::shared_ptr<const BlockSequence> blocks_;
};

struct MembershipVerdict {
  enum class Kind { In, NotIn, Diagnostic };
  Kind kind = Kind::Diagnostic;
  // Diagnostic payloads (exact rationals).
  std::vector<Rat> density_profile;
  std::optional<Rat> partial_sum;
  Window window{1};
  std::string note;

  bool is_in() const { return kind == Kind::In; }
  bool is_not_in() const { return kind == Kind::NotIn; }
  nlohmann::ordered_json to_json() const;
};

// Exact on the closed class (finite sets; block unions over decidable index
// sets; boolean combinations that propagate); Diagnostic otherwise.
MembershipVerdict contains(const IdealDescriptor& ideal, const SetExpr& s,
                           const Window& w = Window(1 << 16));

// Per-block ratios |s ∩ [n_i, n_{i+1})| / (n_{i+1} - n_i) for i < upToBlock.
std::vector<Rat> density_profile(const BlockSequence& blocks, const SetExpr& s,
                                 std::size_t upToBlock);

struct WeightSum {
  Rat sum;                        // exact sum over s ∩ [0, upTo)
  bool tail_infinite = false;     // tail known divergent
  std::optional<Rat> tail_lower;  // bounds on the tail when derivable
  std::optional<Rat> tail_upper;
};

WeightSum partial_weight_sum(const IdealDescriptor& ideal, const SetExpr& s,
                             std::uint64_t upTo);

// Exact upper bound for sums of one weight per block from `fromBlock` on,
// under the block-cubic weights of a cubic-gap sequence.
Rat cubic_single_point_tail_bound(const BlockSequence& blocks, std::size_t fromBlock);

struct NotAlmostDisjoint : Error {
  std::size_t first, second;
  NotAlmostDisjoint(std::size_t i, std::size_t j)
      : Error("index sets " + std::to_string(i) + " and " + std::to_string(j) +
              " have infinite intersection"),
        first(i),
        second(j) {}
};

// Lift an almost disjoint family of index sets to block unions; pairwise
// intersections of the lifts land in the block-density ideal.
std::vector<SetExpr::Ptr> lift_ad_family(const BlockSequence& blocks,
                                         const std::vector<IndexSet>& family);

}  // namespace permideal
