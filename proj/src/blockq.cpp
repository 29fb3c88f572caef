#include "permideal/blockq.hpp"

#include <algorithm>
#include <map>

namespace permideal {

std::vector<std::uint64_t> LeakageReport::b_union() const {
  std::vector<std::uint64_t> u;
  u.reserve(b_plus.size() + b_minus.size());
  std::merge(b_plus.begin(), b_plus.end(), b_minus.begin(), b_minus.end(),
             std::back_inserter(u));
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}

namespace {

// Block bounds of the block containing x, when they fit in 64 bits.
struct BlockBounds {
  std::size_t index;
  std::uint64_t lo;
  Int hi;  // may exceed 64 bits
};

std::optional<BlockBounds> bounds_of(const BlockSequence& blocks, std::uint64_t x) {
  if (int_from_u64(x) < blocks.n0()) return std::nullopt;
  std::size_t i;
  try {
    i = blocks.block_of_u64(x);
  } catch (const std::out_of_range&) {
    return std::nullopt;
  }
  return BlockBounds{i, to_u64(blocks.boundary(i)), blocks.boundary(i + 1)};
}

}  // namespace

LeakageReport block_leakage(const PermExpr::Ptr& g, const BlockSequence& blocks,
                            const Window& w) {
  LeakageReport rep;
  const std::uint64_t interior = w.interior();

  auto classify = [&](std::uint64_t n, std::uint64_t img) {
    auto bb = bounds_of(blocks, n);
    if (!bb) return;  // below the first boundary or past an explicit end
    if (int_from_u64(img) >= bb->hi)
      rep.b_plus.push_back(n);
    else if (img < bb->lo)
      rep.b_minus.push_back(n);
  };

  auto cands = sparse_support_candidates(*g, interior);
  if (cands) {
    for (auto n : *cands) {
      EvalOutcome o = raw_eval(*g, n);
      if (o.status == EvalOutcome::Status::Unknown) {
        rep.certified = false;
        continue;
      }
      if (!o.is_value()) continue;
      if (o.value >= w.bound) rep.certified = false;
      classify(n, o.value);
    }
  } else {
    PermTable t = tabulate(*g, w);
    for (std::uint64_t n = 0; n < interior; ++n) {
      EvalOutcome o = t.at(n);
      if (o.status == EvalOutcome::Status::Unknown) {
        rep.certified = false;
        continue;
      }
      if (!o.is_value()) continue;
      if (o.value >= w.bound) rep.certified = false;
      classify(n, o.value);
    }
  }
  std::sort(rep.b_plus.begin(), rep.b_plus.end());
  std::sort(rep.b_minus.begin(), rep.b_minus.end());

  rep.complete_blocks = blocks.complete_blocks_below(int_from_u64(w.bound));
  if (rep.complete_blocks > 0)
    rep.per_block_density =
        density_profile(blocks, *SetExpr::finite(rep.b_union()), rep.complete_blocks);

  rep.ideal_verdict.kind = MembershipVerdict::Kind::Diagnostic;
  rep.ideal_verdict.density_profile = rep.per_block_density;
  rep.ideal_verdict.window = w;
  rep.ideal_verdict.note = "window-clipped leak set; per-block densities reported";
  return rep;
}

RepairResult repair(const PermExpr::Ptr& g, const BlockSequence& blocks,
                    const Window& w) {
  LeakageReport leak = block_leakage(g, blocks, w);
  RepairResult res;
  res.b_set = leak.b_union();

  auto cands = sparse_support_candidates(*g, w.bound);
  if (!cands) {
    // Dense route: enumerate moved points from the window table.
    PermTable t = tabulate(*g, w);
    std::vector<std::uint64_t> moved;
    for (std::uint64_t n = 0; n < w.bound; ++n)
      if (t.t[n] >= 0 && t.t[n] != static_cast<std::int64_t>(n)) moved.push_back(n);
    cands = std::move(moved);
  }

  // Group disturbed points by block.
  std::map<std::size_t, std::vector<std::uint64_t>> by_block;
  for (auto n : *cands) {
    EvalOutcome o = raw_eval(*g, n);
    if (!o.is_value() || o.value == n) continue;
    auto bb = bounds_of(blocks, n);
    if (!bb) continue;
    by_block[bb->index].push_back(n);
  }

  std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
  for (auto& [bi, pts] : by_block) {
    const Int& hi_big = blocks.boundary(bi + 1);
    if (hi_big > int_from_u64(w.bound)) {
      res.skipped_blocks.push_back(bi);
      continue;  // block straddles the window edge; leave it to a larger window
    }
    std::sort(pts.begin(), pts.end());
    std::vector<std::uint64_t> sources;           // B points needing new images
    std::vector<std::uint64_t> taken;             // in-block images of kept points
    for (auto n : pts) {
      if (std::binary_search(res.b_set.begin(), res.b_set.end(), n)) {
        sources.push_back(n);
        continue;
      }
      EvalOutcome o = raw_eval(*g, n);
      taken.push_back(o.value);
      pairs.emplace_back(n, o.value);
    }
    std::sort(taken.begin(), taken.end());
    if (std::adjacent_find(taken.begin(), taken.end()) != taken.end())
      throw NotInjectiveOffB("repair: duplicate in-block images in block " +
                             std::to_string(bi));
    // Unused targets among the disturbed points of this block.
    std::vector<std::uint64_t> missing;
    for (auto n : pts)
      if (!std::binary_search(taken.begin(), taken.end(), n)) missing.push_back(n);
    if (missing.size() != sources.size())
      throw NotInjectiveOffB("repair: block " + std::to_string(bi) +
                             " cannot be completed (" + std::to_string(sources.size()) +
                             " sources vs " + std::to_string(missing.size()) +
                             " free targets)");
    for (std::size_t k = 0; k < sources.size(); ++k)
      pairs.emplace_back(sources[k], missing[k]);
  }
  res.g_prime = PermExpr::finite_support(std::move(pairs));
  return res;
}

PermExpr::Ptr g_z(const PermExpr::Ptr& gPrime, const IndexSet& Z,
                  const BlockSequence& blocks, const Window& w) {
  LeakageReport leak = block_leakage(gPrime, blocks, w);
  if (!leak.b_plus.empty() || !leak.b_minus.empty())
    throw NotBlockPreserving("g_z: base permutation leaks across blocks");

  if (gPrime->kind() == PermExpr::Kind::FiniteSupport) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> kept;
    for (const auto& [a, b] : gPrime->fs_map()) {
      auto bb = bounds_of(blocks, a);
      if (bb && Z.contains(bb->index)) kept.emplace_back(a, b);
    }
    return PermExpr::finite_support(std::move(kept));
  }
  if (gPrime->kind() == PermExpr::Kind::BlockLocal && gPrime->blocks() == blocks) {
    std::map<std::size_t, std::vector<std::uint32_t>> kept;
    for (const auto& [i, t] : gPrime->bl_tables())
      if (Z.contains(i)) kept[i] = t;
    return PermExpr::block_local(blocks, std::move(kept));
  }
  return PermExpr::piecewise({{SetExpr::block_union(blocks, Z), gPrime}},
                             PermExpr::identity());
}

GZContext make_gz_context(const PermExpr::Ptr& g, const BlockSequence& blocks,
                          const Window& w) {
  GZContext ctx;
  ctx.g = g;
  ctx.blocks = blocks;
  ctx.window = w;
  RepairResult r = repair(g, blocks, w);
  ctx.g_prime = r.g_prime;
  ctx.b_set = std::move(r.b_set);
  return ctx;
}

ContainmentReport commutation_containment(
    const GZContext& ctx, const PermExpr::Ptr& gZ, const PermExpr::Ptr& h,
    const std::optional<std::vector<std::uint64_t>>& d_override) {
  const Window& w = ctx.window;
  ContainmentReport rep;
  rep.nc = nc_set(*gZ, *h, w);

  LeakageReport hleak = block_leakage(h, ctx.blocks, w);
  std::vector<std::uint64_t> e = hleak.b_union();  // C

  for (auto b : ctx.b_set) {
    e.push_back(b);  // harmless enlargement: B itself is off the certified part anyway
    EvalOutcome f = raw_eval(*h, b);
    if (f.is_value() && f.value < w.bound) e.push_back(f.value);  // h(B)
  }
  PermExpr::Ptr hinv = invert(h);
  PermTable thi = tabulate(*hinv, w);
  for (auto b : ctx.b_set) {
    EvalOutcome pre = thi.at(b);
    if (pre.is_value() && pre.value < w.bound) e.push_back(pre.value);  // h^{-1}(B)
  }

  std::vector<std::uint64_t> d =
      d_override ? *d_override : nc_set(*ctx.g, *h, w).points;  // D
  e.insert(e.end(), d.begin(), d.end());

  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end()), e.end());
  rep.e_set = std::move(e);
  rep.contained = std::includes(rep.e_set.begin(), rep.e_set.end(),
                                rep.nc.points.begin(), rep.nc.points.end());
  rep.margin = rep.e_set.size() - std::min<std::uint64_t>(rep.e_set.size(),
                                                          rep.nc.points.size());
  std::size_t nblocks = ctx.blocks.complete_blocks_below(int_from_u64(w.bound));
  if (nblocks > 0)
    rep.e_density = density_profile(ctx.blocks, *SetExpr::finite(rep.e_set), nblocks);
  return rep;
}

std::vector<SummableLeakRow> summable_leakage_bound(const PermExpr::Ptr& g,
                                                    const BlockSequence& blocks,
                                                    const Window& w) {
  if (blocks.rule() != BlockSequence::Rule::CubicGaps)
    throw Error("summable_leakage_bound: cubic-gap weights expected");
  IdealDescriptor ideal = IdealDescriptor::summable_block_cubic(blocks);
  LeakageReport leak = block_leakage(g, blocks, w);

  std::map<std::size_t, std::vector<std::uint64_t>> plus_by_block;
  for (auto n : leak.b_plus) plus_by_block[blocks.block_of_u64(n)].push_back(n);

  std::size_t complete = blocks.complete_blocks_below(int_from_u64(w.bound));
  std::size_t last_block =
      plus_by_block.empty() ? complete
                            : std::max(complete, plus_by_block.rbegin()->first + 1);

  std::vector<SummableLeakRow> rows;
  Rat prefix(0);
  for (std::size_t i = 0; i < last_block; ++i) {
    SummableLeakRow row;
    row.block = i;
    row.block_complete = i < complete;
    const Int& ni = blocks.boundary(i);
    row.mid = Rat(0);
    row.cap = rat(Int(1), ni * ni);
    row.escaped_weight = Rat(0);
    auto it = plus_by_block.find(i);
    if (it != plus_by_block.end()) {
      row.bplus_count = it->second.size();
      for (auto j : it->second) {
        EvalOutcome o = raw_eval(*g, j);
        if (!o.is_value())
          throw Error("summable_leakage_bound: image of a leak point is undecided");
        row.escaped_weight += ideal.weight(o.value);
      }
      row.mid = rat(int_from_u64(row.bplus_count), ni * ni * ni);
    }
    prefix += row.escaped_weight;
    row.prefix_weight = prefix;
    row.chain_holds = row.escaped_weight <= row.mid && row.mid <= row.cap;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace permideal
