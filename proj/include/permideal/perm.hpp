#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "permideal/blockseq.hpp"
#include "permideal/error.hpp"
#include "permideal/setexpr.hpp"
#include "permideal/window.hpp"

#include <nlohmann/json.hpp>

namespace permideal {

// Outcome of evaluating a symbolic permutation at one point.
//   Value:     exact image.
//   Undefined: the point is genuinely outside a partial injection's domain.
//   Unknown:   the information ran out (window-limited set data); the true
//              value exists but cannot be computed from what we hold.
struct EvalOutcome {
  enum class Status { Value, Undefined, Unknown };
  Status status = Status::Unknown;
  std::uint64_t value = 0;

  static EvalOutcome of(std::uint64_t v) { return {Status::Value, v}; }
  static EvalOutcome undefined() { return {Status::Undefined, 0}; }
  static EvalOutcome unknown() { return {Status::Unknown, 0}; }
  bool is_value() const { return status == Status::Value; }
};

// Window table of a permutation: t[n] is the image of n, kUndefined for
// points outside a partial domain, kUnknown where the window ran out.
struct PermTable {
  static constexpr std::int64_t kUndefined = -1;
  static constexpr std::int64_t kUnknown = -2;
  std::vector<std::int64_t> t;

  EvalOutcome at(std::uint64_t n) const {
    if (n >= t.size()) return EvalOutcome::unknown();
    std::int64_t v = t[n];
    if (v == kUndefined) return EvalOutcome::undefined();
    if (v == kUnknown) return EvalOutcome::unknown();
    return EvalOutcome::of(static_cast<std::uint64_t>(v));
  }
};

// Finitely-describable permutation (or partial injection) of the naturals.
// Immutable expression tree; evaluation is exact everywhere the description
// decides the value, windowed tabulation is the bulk path.
class PermExpr {
 public:
  enum class Kind {
    Identity,
    FiniteSupport,
    BlockLocal,
    SuccessorShift,
    Swap,
    Compose,
    Inverse,
    Piecewise
  };
  using Ptr = std::shared_ptr<const PermExpr>;

  struct SwapRule {
    std::uint64_t modulus = 0, lo = 0, hi = 0, delta = 0;
    bool operator==(const SwapRule&) const = default;
  };

  static Ptr identity();
  // map must be a bijection of its domain onto its range.
  static Ptr finite_support(std::vector<std::pair<std::uint64_t, std::uint64_t>> map);
  // tables[i] is a permutation of [0, size_i) acting inside block i; blocks
  // without a table are fixed pointwise, as is everything below/above.
  static Ptr block_local(BlockSequence blocks,
                         std::map<std::size_t, std::vector<std::uint32_t>> tables);
  // j-fold successor map along the carrier's increasing enumeration.
  static Ptr successor_shift(SetExpr::Ptr carrier, std::int64_t exponent);
  static Ptr swap_pairs(std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs);
  // Swaps n <-> n+delta whenever n mod modulus lies in [lo, hi).
  // Requires delta >= hi-lo and hi+delta <= modulus so pairs are disjoint.
  static Ptr swap_periodic(std::uint64_t modulus, std::uint64_t lo, std::uint64_t hi,
                           std::uint64_t delta);
  // Swaps n_i - 1 <-> n_i at every boundary whose adjacent gaps are both >= 2.
  static Ptr boundary_swap(BlockSequence blocks);
  // compose(p, q)(n) = p(q(n)).
  static Ptr compose(Ptr p, Ptr q);
  static Ptr inverse_of(Ptr p);
  // First matching case wins; case sets must be pairwise disjoint.
  static Ptr piecewise(std::vector<std::pair<SetExpr::Ptr, Ptr>> cases, Ptr otherwise);

  Kind kind() const { return kind_; }
  bool total() const;

  const std::vector<std::pair<std::uint64_t, std::uint64_t>>& fs_map() const {
    return fs_map_;
  }
  const BlockSequence& blocks() const { return *blocks_; }
  const std::map<std::size_t, std::vector<std::uint32_t>>& bl_tables() const {
    return bl_tables_;
  }
  const SetExpr::Ptr& carrier() const { return carrier_; }
  std::int64_t exponent() const { return exponent_; }
  const SwapRule& swap_rule() const { return rule_; }
  bool swap_is_rule() const { return swap_form_ == SwapForm::Periodic; }
  bool swap_is_boundary() const { return swap_form_ == SwapForm::Boundary; }
  const Ptr& left() const { return left_; }
  const Ptr& right() const { return right_; }
  const std::vector<std::pair<SetExpr::Ptr, Ptr>>& cases() const { return cases_; }
  const Ptr& otherwise() const { return otherwise_; }

  nlohmann::ordered_json to_json() const;
  static Ptr from_json(const nlohmann::json& j);

 private:
  PermExpr() = default;
  enum class SwapForm { Pairs, Periodic, Boundary };
  friend Ptr invert(const Ptr& p);

  Kind kind_ = Kind::Identity;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> fs_map_;  // sorted by source
  std::shared_ptr<const BlockSequence> blocks_;
  std::map<std::size_t, std::vector<std::uint32_t>> bl_tables_;
  SetExpr::Ptr carrier_;
  std::int64_t exponent_ = 0;
  SwapForm swap_form_ = SwapForm::Pairs;
  SwapRule rule_;
  Ptr left_, right_, otherwise_;
  std::vector<std::pair<SetExpr::Ptr, Ptr>> cases_;
};

// Window-free pointwise evaluation; exact wherever the description decides.
EvalOutcome raw_eval(const PermExpr& p, std::uint64_t n);

// Windowed evaluation per the module contract: requires n < w.bound, returns
// nullopt for genuinely undefined points, and throws BoundaryEscape when the
// image escapes the window or the description runs out of data.
std::optional<std::uint64_t> eval(const PermExpr& p, std::uint64_t n, const Window& w);

// Bulk evaluation of the whole window [0, w.bound).
PermTable tabulate(const PermExpr& p, const Window& w);

// Structural inverse. Piecewise trees that cannot be rewritten get a symbolic
// Inverse node whose pointwise value is recovered by windowed inversion.
PermExpr::Ptr invert(const PermExpr::Ptr& p);

struct SupportResult {
  SetExpr::Ptr set;
  bool certified = false;  // true when the set is symbolic, not window-clipped
};
SupportResult support(const PermExpr& p, const Window& w);

// Moved points within [0, bound), or nullopt if only dense tabulation can
// answer. May overapproximate for composite expressions; never misses a
// moved point.
std::optional<std::vector<std::uint64_t>> sparse_support_candidates(const PermExpr& p,
                                                                    std::uint64_t bound);

struct NCReport {
  std::vector<std::uint64_t> points;
  bool certified = true;
  std::uint64_t skipped = 0;  // interior points where a composite was undefined
  Window window{1};

  nlohmann::ordered_json to_json() const;
};

// NC(p,q) = {n : p(q(n)) != q(p(n))} on [0, w.bound - w.margin).
NCReport nc_set(const PermExpr& p, const PermExpr& q, const Window& w);

enum class OrbitStatus { Closed, CapHit, BoundaryHit };

struct OrbitResult {
  std::vector<std::uint64_t> points;  // in orbit order, backward end first
  OrbitStatus status = OrbitStatus::Closed;
};

OrbitResult orbit(const PermExpr& p, std::uint64_t x, std::uint64_t cap, const Window& w);

// True when table is injective over its defined values below bound.
bool table_injective(const PermTable& table, std::uint64_t bound);

}  // namespace permideal
