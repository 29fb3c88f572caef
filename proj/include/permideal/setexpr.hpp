#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "permideal/blockseq.hpp"
#include "permideal/numeric.hpp"
#include "permideal/window.hpp"

#include <nlohmann/json.hpp>

namespace permideal {

// Index sets select which blocks of a BlockSequence participate in a union.
// Finite, Cofinite and Periodic admit exact density/summability reasoning;
// Explicit is only known up to its cap.
class IndexSet {
 public:
  enum class Kind { Finite, Cofinite, Periodic, Explicit };

  static IndexSet finite(std::vector<std::uint64_t> items);
  static IndexSet cofinite(std::vector<std::uint64_t> excluded);
  static IndexSet periodic(std::uint64_t modulus, std::vector<std::uint64_t> residues);
  static IndexSet explicit_list(std::vector<std::uint64_t> items, std::uint64_t cap);

  Kind kind() const { return kind_; }
  const std::vector<std::uint64_t>& items() const { return items_; }
  std::uint64_t modulus() const { return modulus_; }
  std::uint64_t cap() const { return cap_; }

  // Membership; `exact` is cleared when the query falls past an Explicit cap.
  bool contains(std::uint64_t i, bool* exact = nullptr) const;

  // True/false when decidable; nullopt for Explicit.
  std::optional<bool> is_infinite() const;

  // Exact intersection when representable in this calculus.
  static std::optional<IndexSet> intersect(const IndexSet& a, const IndexSet& b);
  // Whether |a ∩ b| is finite; nullopt when not decidable here.
  static std::optional<bool> intersection_finite(const IndexSet& a, const IndexSet& b);

  bool operator==(const IndexSet&) const = default;

  nlohmann::ordered_json to_json() const;
  static IndexSet from_json(const nlohmann::json& j);

 private:
  Kind kind_ = Kind::Finite;
  std::vector<std::uint64_t> items_;  // finite items / cofinite exclusions / residues
  std::uint64_t modulus_ = 0;
  std::uint64_t cap_ = 0;
};

enum class Membership { In, Out, Unknown };

struct SetTable {
  std::vector<std::uint8_t> bits;
  bool exact = true;  // false when an Unknown region was consulted

  bool test(std::uint64_t x) const { return x < bits.size() && bits[x]; }
  std::uint64_t count() const;
};

// Definable subset of the naturals. Immutable tree; share freely.
class SetExpr {
 public:
  enum class Kind { Finite, BlockUnion, Union, Intersection, Difference, Sample };
  using Ptr = std::shared_ptr<const SetExpr>;

  static Ptr finite(std::vector<std::uint64_t> points);
  static Ptr block_union(BlockSequence blocks, IndexSet index);
  static Ptr set_union(Ptr a, Ptr b);
  static Ptr set_intersection(Ptr a, Ptr b);
  static Ptr set_difference(Ptr a, Ptr b);
  static Ptr sample(std::vector<std::uint8_t> bits);

  // Residue class {x : x = r (mod m)} as a block union over unit blocks.
  static Ptr residue(std::uint64_t modulus, std::uint64_t r);
  static Ptr empty() { return finite({}); }

  Kind kind() const { return kind_; }
  const std::vector<std::uint64_t>& points() const { return points_; }
  const BlockSequence& blocks() const { return *blocks_; }
  const IndexSet& index() const { return *index_; }
  const Ptr& left() const { return left_; }
  const Ptr& right() const { return right_; }
  const std::vector<std::uint8_t>& sample_bits() const { return sample_; }

  Membership contains(std::uint64_t x) const;
  SetTable tabulate(std::uint64_t bound) const;
  // Sorted members below bound (exactness tracked as in tabulate).
  std::vector<std::uint64_t> enumerate(std::uint64_t bound, bool* exact = nullptr) const;

  nlohmann::ordered_json to_json() const;
  static Ptr from_json(const nlohmann::json& j);

 private:
  SetExpr() = default;

  Kind kind_ = Kind::Finite;
  std::vector<std::uint64_t> points_;
  std::shared_ptr<const BlockSequence> blocks_;
  std::shared_ptr<const IndexSet> index_;
  Ptr left_, right_;
  std::vector<std::uint8_t> sample_;
};

}  // namespace permideal
