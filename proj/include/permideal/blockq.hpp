#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "permideal/blockseq.hpp"
#include "permideal/ideal.hpp"
#include "permideal/perm.hpp"
#include "permideal/window.hpp"

namespace permideal {

// B+ holds points whose image jumps past their block's top, B- those sent
// below its bottom; both exact on the window.
struct LeakageReport {
  std::vector<std::uint64_t> b_plus;
  std::vector<std::uint64_t> b_minus;
  std::vector<Rat> per_block_density;  // of B+ ∪ B- over complete blocks
  MembershipVerdict ideal_verdict;
  std::size_t complete_blocks = 0;
  bool certified = true;

  std::vector<std::uint64_t> b_union() const;
};

LeakageReport block_leakage(const PermExpr::Ptr& g, const BlockSequence& blocks,
                            const Window& w);

struct NotInjectiveOffB : Error {
  explicit NotInjectiveOffB(const std::string& what) : Error(what) {}
};

struct RepairResult {
  PermExpr::Ptr g_prime;             // block-preserving, equals g off B
  std::vector<std::uint64_t> b_set;  // the repaired region B = B+ ∪ B-
  std::vector<std::size_t> skipped_blocks;  // blocks straddling the window edge
};

// Completes g within each block: off B it copies g, and the points of B are
// matched order-preservingly to the block's unused targets.
RepairResult repair(const PermExpr::Ptr& g, const BlockSequence& blocks,
                    const Window& w);

struct NotBlockPreserving : Error {
  explicit NotBlockPreserving(const std::string& what) : Error(what) {}
};

// Acts as gPrime on the blocks selected by Z and as the identity elsewhere.
PermExpr::Ptr g_z(const PermExpr::Ptr& gPrime, const IndexSet& Z,
                  const BlockSequence& blocks, const Window& w);

// Construction context for the g_Z family of one original permutation.
struct GZContext {
  PermExpr::Ptr g;
  PermExpr::Ptr g_prime;
  std::vector<std::uint64_t> b_set;
  BlockSequence blocks;
  Window window{1};
};

GZContext make_gz_context(const PermExpr::Ptr& g, const BlockSequence& blocks,
                          const Window& w);

struct ContainmentReport {
  NCReport nc;                          // NC(g_Z, h)
  std::vector<std::uint64_t> e_set;     // C ∪ h(B) ∪ h^{-1}(B) ∪ D on the window
  bool contained = false;               // nc.points ⊆ e_set
  std::uint64_t margin = 0;             // |E| - |NC|
  std::vector<Rat> e_density;           // per-block density of E
};

// Verifies NC(g_Z, h) ⊆ C ∪ h(B) ∪ h^(-1)(B) ∪ D with C the leakage set of
// h, B from the context, and D = NC(g, h) (supplied or computed).
ContainmentReport commutation_containment(
    const GZContext& ctx, const PermExpr::Ptr& gZ, const PermExpr::Ptr& h,
    const std::optional<std::vector<std::uint64_t>>& d_override = std::nullopt);

// Exact per-block chain for cubic-gap weights: the weight of the escaped
// image set of each block is at most |B+ ∩ block| * n_i^-3 <= n_i^-2.
struct SummableLeakRow {
  std::size_t block = 0;
  std::uint64_t bplus_count = 0;
  Rat escaped_weight;  // sum of h(g(j)) over B+ in the block
  Rat mid;             // count * n_i^-3
  Rat cap;             // n_i^-2
  Rat prefix_weight;   // cumulative escaped weight through this block
  bool chain_holds = false;
  bool block_complete = false;
};

std::vector<SummableLeakRow> summable_leakage_bound(const PermExpr::Ptr& g,
                                                    const BlockSequence& blocks,
                                                    const Window& w);

}  // namespace permideal
