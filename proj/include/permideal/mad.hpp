#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "permideal/perm.hpp"
#include "permideal/setexpr.hpp"
#include "permideal/window.hpp"

namespace permideal {

// Family of infinite sets with pairwise finite intersections (testable at
// window scale only; the family rules used here make it true outright).
struct ADFamily {
  std::vector<SetExpr::Ptr> members;

  std::size_t size() const { return members.size(); }
  // Pairwise intersection counts on the window; diagnostics for the
  // almost-disjointness invariant.
  std::vector<std::vector<std::uint64_t>> intersection_counts(const Window& w) const;
};

// Interleaved residue classes: m pairwise disjoint infinite members.
ADFamily residue_family(std::uint64_t m);
// Branch sets of binary-tree codes: member i holds the codes of all prefixes
// of the branch 1^i 0^infinity; pairwise intersections have size min(i,j).
ADFamily tree_branch_family(std::size_t count, const Window& w);

// Finitely-supported integer vector over the family, index -> coefficient.
using ZeroSumVector = std::map<std::size_t, std::int64_t>;

std::int64_t vector_sum(const ZeroSumVector& f);
ZeroSumVector vector_add(const ZeroSumVector& f, const ZeroSumVector& g);

struct NonZeroSum : Error {
  std::int64_t sum;
  explicit NonZeroSum(std::int64_t s)
      : Error("coefficients sum to " + std::to_string(s) + ", not zero"), sum(s) {}
};

// j-fold successor map along member a.
PermExpr::Ptr pi_shift(const SetExpr::Ptr& a, std::int64_t j);

// Everything the four-case assembly produced, for verification and patch-set
// bookkeeping.
struct PhiResult {
  PermExpr::Ptr perm;
  std::vector<std::uint64_t> hull;  // F: pairwise intersections grown to initial segments
  std::map<std::size_t, std::vector<std::uint64_t>> entry_segments;  // b* per member
  std::vector<std::pair<std::uint64_t, std::uint64_t>> theta;        // patch bijection
  std::vector<std::size_t> support;                                  // indices with f != 0

  // Patch region: hull, entry segments and both theta sides.
  std::vector<std::uint64_t> patch_points() const;
};

// Canonical representative of the embedded coset: shifts by f(b) along each
// support member off a minimal finite hull, glued by the order-preserving
// patch bijection. Throws NonZeroSum and InsufficientWindow.
PhiResult phi_detail(const ADFamily& family, const ZeroSumVector& f, const Window& w);
PermExpr::Ptr phi(const ADFamily& family, const ZeroSumVector& f, const Window& w);

// The two-member gadget with coefficients +1 at a and -1 at b.
PermExpr::Ptr phi_pair(const ADFamily& family, std::size_t a, std::size_t b,
                       const Window& w);

struct DefectReport {
  std::vector<std::uint64_t> points;  // where phi(f)∘phi(g) differs from phi(f+g)
  std::vector<std::uint64_t> patch;   // declared patch region
  bool contained = false;             // points ⊆ patch
  bool certified = true;
};

DefectReport homomorphism_defect(const ADFamily& family, const ZeroSumVector& f,
                                 const ZeroSumVector& g, const Window& w);

struct WitnessOptions {
  std::uint64_t infinite_threshold = 0;  // 0: derived from the window
  std::uint64_t finite_slack = 0;        // 0: derived from the window
  std::size_t max_points = 32;
};

// Classification of a permutation against the family.
struct MaximalityWitness {
  enum class Kind {
    NoneExponents,      // behaves as a shift vector: exponents recovered
    CofinitenessFails,  // a member splits into two infinite halves of supp
    EscapesMember,      // infinitely many member points leave the member
    NonUniformExponent, // shift distance along a member keeps changing
    SupportSpills       // support not covered by finitely many members
  };
  Kind kind = Kind::NoneExponents;
  std::size_t member = 0;   // the member a that produced the witness
  std::size_t partner = 0;  // the second member a' of the gadget, if any
  std::vector<std::uint64_t> points;  // verified non-commutation points
  std::map<std::size_t, std::int64_t> exponents;  // on success

  bool found() const { return kind != Kind::NoneExponents; }
};

MaximalityWitness maximality_witness(const ADFamily& family, const PermExpr::Ptr& pi,
                                     const Window& w, WitnessOptions opts = {});

// Injectivity plus hit-coverage of [0, check_bound) for a window table.
struct BijectivityReport {
  bool injective = false;
  std::optional<std::uint64_t> first_uncovered;
  std::uint64_t undefined_points = 0;
  bool ok() const { return injective && !first_uncovered; }
};
BijectivityReport verify_bijective_on(const PermTable& t, std::uint64_t check_bound,
                                      std::uint64_t bound);

}  // namespace permideal
