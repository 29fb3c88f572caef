#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "permideal/perm.hpp"
#include "permideal/setexpr.hpp"
#include "permideal/window.hpp"

namespace permideal {

// A family of permutations tabulated (with inverses) over one window; the
// working representation for everything orbit-shaped.
struct FamilyView {
  Window window{1};
  std::vector<PermExpr::Ptr> members;
  std::vector<PermTable> tables;
  std::vector<PermTable> inv_tables;

  static FamilyView make(std::vector<PermExpr::Ptr> members, const Window& w);
  std::size_t size() const { return members.size(); }
  EvalOutcome fwd(std::size_t i, std::uint64_t n) const { return tables[i].at(n); }
  EvalOutcome bwd(std::size_t i, std::uint64_t n) const { return inv_tables[i].at(n); }
};

// Partition of [0, bound) into orbit-equivalence classes of a family.
// Classes are enumerated by increasing minimum; a class is complete when it
// is closed under every member and inverse without leaving the window.
struct OrbitPartition {
  Window window{1};
  std::vector<std::vector<std::uint64_t>> classes;  // each sorted; ordered by min
  std::vector<std::uint8_t> complete;
  std::vector<std::uint32_t> point_class;

  std::size_t class_of(std::uint64_t n) const { return point_class.at(n); }
  bool is_complete(std::size_t c) const { return complete[c] != 0; }
  std::size_t size() const { return classes.size(); }
  // Histogram of class sizes (complete classes only).
  std::map<std::uint64_t, std::uint64_t> size_histogram() const;
};

OrbitPartition omega_partition(const FamilyView& fam);

struct ClosureResult {
  std::vector<std::uint64_t> points;
  bool complete = true;
};

// Smallest superset of X (within the window) closed under the family.
ClosureResult omega_closure(const FamilyView& fam, const SetExpr& X);
ClosureResult omega_closure(const FamilyView& fam, std::vector<std::uint64_t> seeds);

struct SizeMismatch : Error {
  explicit SizeMismatch(const std::string& what) : Error(what) {}
};

// Unique order-preserving bijection between equal-size finite sets.
std::vector<std::pair<std::uint64_t, std::uint64_t>> delta_map(
    const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b);

// Size plus the members' actions relabeled through the order isomorphism
// onto [0, size); equal types make the order isomorphism equivariant.
struct ClassType {
  std::uint64_t size = 0;
  std::vector<std::vector<std::uint32_t>> actions;
  bool operator==(const ClassType&) const = default;
  nlohmann::ordered_json to_json() const;
};

ClassType class_type(const FamilyView& fam, const std::vector<std::uint64_t>& cls);

// Equivariant bijection between two complete classes found by canonical type
// matching (the order isomorphism); nullopt when types differ.
std::optional<std::vector<std::pair<std::uint64_t, std::uint64_t>>> s_isomorphic(
    const FamilyView& fam, const std::vector<std::uint64_t>& a,
    const std::vector<std::uint64_t>& b);

// Brute-force search over all bijections; test oracle for small classes.
std::optional<std::vector<std::pair<std::uint64_t, std::uint64_t>>>
exhaustive_isomorphism(const FamilyView& fam, const std::vector<std::uint64_t>& a,
                       const std::vector<std::uint64_t>& b, std::size_t max_size = 12);

struct OrbitBoundReport {
  std::uint64_t product = 1;
  std::vector<std::size_t> violations;        // complete classes past the bound
  std::vector<std::size_t> exceptional;       // classes meeting the NC closure
  std::uint64_t nc_union_size = 0;
  bool ok() const { return violations.empty(); }
};

// With pairwise almost-commuting members whose orbits are bounded by m[i],
// every complete class away from the closure of the non-commutation region
// has size at most the product of the m[i].
OrbitBoundReport verify_orbit_bound(const FamilyView& fam,
                                    const std::vector<std::uint64_t>& m,
                                    const OrbitPartition& part);

struct AgreementReport {
  bool commuting_exactly = false;      // both candidates commute with the family
  std::vector<std::uint64_t> y_set;    // empty in the exactly-commuting case
  bool hypothesis_holds = false;       // agreement on X ∪ Y
  bool propagation_holds = false;      // agreement on the closure
  std::optional<std::uint64_t> witness;
  std::uint64_t closure_size = 0;
};

AgreementReport propagate_agreement(const PermExpr::Ptr& pi, const PermExpr::Ptr& theta,
                                    const FamilyView& fam,
                                    const std::vector<std::uint64_t>& X);

// Family with designated finite exceptional sets F(h) containing all
// pairwise non-commutation.
struct AnnotatedFamily {
  std::vector<PermExpr::Ptr> members;
  std::vector<std::vector<std::uint64_t>> exceptional;  // sorted F(h) per member

  // Checks NC(h_i, h_j) ⊆ F(h_i) ∪ F(h_j) on the window's certified interior.
  bool strongly_almost_abelian(const Window& w, std::string* why = nullptr) const;
};

// Fixpoint of one-step images avoiding W and the exceptional sets:
// z is generated from x when z = h(x), x outside F(h), z outside F(h^-1), z
// outside W. Members are used in both directions with the same F.
std::vector<std::uint64_t> cl_closure(const AnnotatedFamily& H,
                                      const std::vector<std::uint64_t>& W,
                                      const std::vector<std::uint64_t>& X,
                                      const Window& w);

struct BlockNotInvariant : Error {
  explicit BlockNotInvariant(const std::string& what) : Error(what) {}
};

// Piecewise permutation acting as g on the blocks with t = 0 and as the
// identity elsewhere; each block must be g-invariant.
PermExpr::Ptr g_t_family(const PermExpr::Ptr& g,
                         const std::vector<std::vector<std::uint64_t>>& blocks,
                         const std::vector<std::uint8_t>& t, const Window& w);

struct NoDesignatedGenerator : Error {
  explicit NoDesignatedGenerator(const std::string& what) : Error(what) {}
};

struct ThetaResult {
  PermExpr::Ptr perm;
  std::vector<NCReport> nc_certificates;  // against each family member
  std::map<std::uint64_t, std::uint64_t> size_region_sizes;  // |A_j| per size j
};

// Size-selector family: acts as the designated member on the union A_j of
// complete size-j classes when selector(j) = 1, identity otherwise.
ThetaResult theta_F_family(const FamilyView& fam, const OrbitPartition& part,
                           const std::map<std::uint64_t, std::size_t>& designated,
                           const std::set<std::uint64_t>& selected_sizes);

enum class InfiniteConfidence { Symbolic, CapHeuristic };

struct InfinitePartResult {
  std::vector<std::uint64_t> points;
  InfiniteConfidence confidence = InfiniteConfidence::Symbolic;
};

// Union of provably-infinite orbits of the members, closed under the family.
// Orbits that merely left the window or exceeded the cap are included but
// downgrade the confidence.
InfinitePartResult infinite_part(const FamilyView& fam, std::uint64_t cap);

// CSV rows "size,count" of the complete-class size histogram.
std::string class_size_histogram_csv(const OrbitPartition& part);

}  // namespace permideal
