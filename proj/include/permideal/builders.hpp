#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "permideal/numeric.hpp"
#include "permideal/orbits.hpp"
#include "permideal/perm.hpp"
#include "permideal/window.hpp"

#include <nlohmann/json.hpp>

namespace permideal {

struct IncompleteClass : Error {
  explicit IncompleteClass(const std::string& what) : Error(what) {}
};
struct NoSuitableClassPair : Error {
  explicit NoSuitableClassPair(const std::string& what) : Error(what) {}
};
struct A4Violated : Error {
  explicit A4Violated(const std::string& what) : Error(what) {}
};
struct WindowExhausted : Error {
  explicit WindowExhausted(const std::string& what) : Error(what) {}
};
struct HypothesisFails : Error {
  explicit HypothesisFails(const std::string& what) : Error(what) {}
};
struct ClassesNotIsomorphic : Error {
  explicit ClassesNotIsomorphic(const std::string& what) : Error(what) {}
};
struct BlockViolation : Error {
  explicit BlockViolation(const std::string& what) : Error(what) {}
};
struct IdentityInput : Error {
  explicit IdentityInput(const std::string& what) : Error(what) {}
};
struct GrowthViolated : Error {
  std::size_t index;
  GrowthViolated(std::size_t n, const std::string& what) : Error(what), index(n) {}
};

// ---------------------------------------------------------------------------
// Involution tower: finite conditions (h, S) with h a finite involution whose
// growth avoids the infinite part of S and stays S-equivariant.

struct AuditRecord {
  std::size_t step = 0;
  std::string rule;  // join-member | point-absorb | diagonal | noop-domain | noop-infinite
  std::optional<std::uint64_t> point;
  std::optional<std::size_t> member;
  std::optional<std::uint64_t> witness;
  std::vector<std::uint64_t> added;  // new domain points
  std::string note;

  nlohmann::ordered_json to_json() const;
};

class TowerBuilder {
 public:
  explicit TowerBuilder(const Window& w);

  std::size_t join_member(const PermExpr::Ptr& pi);
  // Absorbs the class of n as fixed points; no-ops (recorded) when n is
  // already covered or sits in the infinite part.
  void extend_point(std::uint64_t n);
  // Forces a disagreement with the member at or above k; returns the witness.
  std::uint64_t extend_diagonal(std::size_t member_idx, std::uint64_t k);

  PermExpr::Ptr realize() const;  // h extended by the identity
  const std::vector<AuditRecord>& audit() const { return audit_; }
  const std::map<std::uint64_t, std::uint64_t>& involution() const { return h_; }
  // Domain at join time with its member images: the declared exception set
  // for the almost-commutation of the realization with that member.
  std::vector<std::uint64_t> audited_set(std::size_t member_idx) const;
  const Window& window() const { return window_; }
  std::size_t members() const { return fam_.size(); }
  const InfinitePartResult& infinite() const { return istar_; }

 private:
  void refresh();
  void add_pairs(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& pairs,
                 AuditRecord rec);
  bool in_dom(std::uint64_t n) const { return h_.count(n) > 0; }

  Window window_;
  FamilyView fam_;
  OrbitPartition part_;
  InfinitePartResult istar_;
  std::vector<std::uint8_t> istar_mask_;
  std::map<std::uint64_t, std::uint64_t> h_;
  std::vector<std::vector<std::uint64_t>> dom_at_join_;
  std::vector<AuditRecord> audit_;
  std::size_t steps_ = 0;
};

struct TowerRunResult {
  PermExpr::Ptr realization;
  std::vector<AuditRecord> audit;
  std::vector<std::vector<std::uint64_t>> audited_sets;        // per member
  std::vector<std::pair<std::size_t, std::uint64_t>> witnesses;  // per diagonal step
};

// Round-robin realization: join every member, absorb every scheduled point,
// then run the scheduled diagonalizations.
TowerRunResult tower_run(const std::vector<PermExpr::Ptr>& members,
                         const std::vector<std::uint64_t>& point_schedule,
                         const std::vector<std::pair<std::size_t, std::uint64_t>>& diag_schedule,
                         const Window& w);

// ---------------------------------------------------------------------------
// Nice families and their (f, m, epsilon) conditions.

struct NiceFamily {
  std::vector<PermExpr::Ptr> members;
  Window window{1};
  std::vector<Rat> ratio_sup;            // exact sup of |1 - pi(n)/n| on [1, interior)
  std::vector<std::uint64_t> genesis_end;  // member k is rule-regular past this point
  std::map<std::size_t, std::size_t> km_table;  // m -> least stable class index

  // Everything level-m computations reuse, built once per level.
  struct LevelData {
    FamilyView view;
    OrbitPartition part;
    std::vector<std::uint64_t> nc_union;     // pairwise NC points of the level
    std::vector<std::uint64_t> displacement; // |pi(n) - n| maximized over members
    std::vector<std::uint32_t> ratio_suffix_argmax;  // argmax of disp/n on [n, end)
    std::size_t stable_from = 0;  // complete classes from here share one type
  };
  const LevelData& level(std::size_t m) const;

 private:
  mutable std::shared_ptr<std::map<std::size_t, LevelData>> cache_ =
      std::make_shared<std::map<std::size_t, LevelData>>();
};

struct NiceCondition {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> f;  // sorted involution map
  std::size_t m = 0;
  Rat epsilon{1};
  std::size_t iP = 0;  // classes of the level-m partition absorbed so far

  bool dom_contains(std::uint64_t x) const;
};

struct ConditionReport {
  bool involution_ok = false;
  bool domain_ok = false;
  bool classes_isomorphic = false;  // (A0) past iP
  bool commute_outside = false;     // (A0+)
  bool eps_ok = false;              // (A2.1)
  Rat delta{0};
  std::string detail;
  bool ok() const {
    return involution_ok && domain_ok && classes_isomorphic && commute_outside && eps_ok;
  }
};

struct ExtensionReport {
  bool pairing_ok = false;  // (A3)
  bool ratio_ok = false;    // (A4)
  Rat worst_margin{0};      // min over new points of the slack in (A4)
  std::string detail;
  bool ok() const { return pairing_ok && ratio_ok; }
};

// Level-m partition of the family members on the window.
OrbitPartition nice_partition(const NiceFamily& fam, std::size_t m);
FamilyView nice_view(const NiceFamily& fam, std::size_t m);

ConditionReport nice_validate(const NiceCondition& c, const NiceFamily& fam);
ExtensionReport nice_validate_extension(const NiceCondition& older,
                                        const NiceCondition& newer,
                                        const NiceFamily& fam);

NiceCondition nice_genesis(const NiceFamily& fam, std::size_t m, const Rat& epsilon,
                           std::size_t iP);

// Absorbs class pairs until u lies in the domain.
NiceCondition nice_extend_point(const NiceCondition& c, const NiceFamily& fam,
                                std::uint64_t u);
// Tightens epsilon and/or raises m, absorbing points first as needed.
NiceCondition nice_extend_params(const NiceCondition& c, const NiceFamily& fam,
                                 const Rat& newEpsilon, std::size_t newM);

struct NiceCheckReport {
  bool ratio_tends_to_one = false;
  bool involutions = false;
  bool pairwise_nc_finite = false;
  bool class_types_stabilize = false;
  std::vector<Rat> tail_ratio_sup;  // defect sup on the far half, per member
  std::map<std::size_t, std::size_t> km;
  std::uint64_t nc_pair_count = 0;
  std::optional<std::string> witness;
  bool ok() const {
    return ratio_tends_to_one && involutions && pairwise_nc_finite && class_types_stabilize;
  }
};

NiceCheckReport nice_check(const NiceFamily& fam, const Rat& ratio_threshold = Rat(1, 50));

// Seeded pseudo-generic construction: each member is built over the previous
// ones as a union of validated conditions (a seeded irregular prefix plus the
// regular pairing rule).
NiceFamily build_nice_family(std::uint64_t seed, std::size_t count, const Window& w);

// ---------------------------------------------------------------------------
// Scaling inequalities for nice families.

struct Cm1Row {
  std::size_t class_index = 0;
  Rat spread;        // max/min of the class
  Rat spread_cap;    // (1+eps)^m
  Rat step_ratio;    // min(next)/min(this)
  Rat step_cap;      // 1 + 2^m (1 - (1+eps)^-m)
  Rat jump_ratio;    // min(this+k)/min(this)
  Rat jump_cap;      // step_cap^k
  Rat iso_lo, iso_hi;         // extremes of Phi(n)/n for the order iso to class+k
  Rat iso_cap_lo, iso_cap_hi; // (1-eps)^m and jump_cap*(1+eps)^m
  bool ok = false;
};

struct Cm1Report {
  std::vector<Cm1Row> rows;
  bool all_hold = true;
};

// Exact verification of the four scaling bounds on [iLo, iHi] with jump k,
// after checking the ratio hypothesis on every class that can interfere.
Cm1Report cm1_verify(const NiceFamily& fam, std::size_t m, std::size_t iLo,
                     std::size_t iHi, std::size_t k, const Rat& epsilon);

// ---------------------------------------------------------------------------
// Six-point gadgets.

using Sym6 = std::array<std::uint8_t, 6>;

// Lexicographically least fixed-point-free involution of six points that
// fails to commute with pi; exhaustively guaranteed for non-identity pi.
Sym6 sym6_witness(const Sym6& pi);
const std::vector<Sym6>& sym6_fpf_involutions();

// The involution joining the six-class groups at i and j through sigma:
// class (J+6i+w) is carried onto class (J+6j+sigma(w)) by order isomorphisms.
PermExpr::Ptr six_block_swap(const FamilyView& fam, const OrbitPartition& part,
                             std::size_t m, std::size_t J, std::size_t i, std::size_t j,
                             const Sym6& sigma);

struct DiagMassResult {
  NiceCondition condition;
  Rat mass{0};
  std::vector<std::string> gadget_log;
  std::vector<std::uint64_t> witnesses;
};

// Greedy gadget search extending the condition until the reciprocal mass of
// the disagreement set with pi passes the target (or the window ends).
DiagMassResult diagonalize_summable(const NiceCondition& c, const NiceFamily& fam,
                                    const PermExpr::Ptr& pi, std::uint64_t k,
                                    const Rat& targetMass);

// ---------------------------------------------------------------------------
// Diagonalization support shared with the tower argument.

struct RepresentativeTable {
  std::vector<std::uint64_t> reps;  // one minimal representative per realized type
  bool closure_disjoint = false;    // closure avoids [0, j)
  bool types_covered = false;
  bool minimal = false;
};

RepresentativeTable representative_table(const NiceFamily& fam, std::size_t j);

struct DiagonalChallenge {
  std::uint64_t lo = 0, hi = 0;            // block interval [lo, hi)
  std::vector<std::uint64_t> source;       // closed source set
  std::vector<std::uint64_t> target;       // closed target set
};

// Union of per-block order-isomorphism swaps; verified involutive and
// equivariant for the first m members.
PermExpr::Ptr assemble_diagonal_blocks(const NiceFamily& fam, std::size_t m,
                                       const std::vector<DiagonalChallenge>& challenges);

struct RSequenceReport {
  bool growth_ok = false;
  std::uint64_t hit_count = 0;
  std::optional<std::size_t> violation_index;
};

// entries[n] = R(n); growth requires f(max of the union of earlier entries)
// to stay below min(R(n)), and hits count the n with H ∩ (n × R(n)) nonempty.
RSequenceReport validate_r_sequence(const std::vector<std::vector<std::uint64_t>>& entries,
                                    const std::function<std::uint64_t(std::uint64_t)>& f,
                                    const std::vector<std::pair<std::uint64_t, std::uint64_t>>& h_samples,
                                    bool throw_on_violation = false);

}  // namespace permideal
