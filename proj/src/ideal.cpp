#include "permideal/ideal.hpp"

#include <algorithm>

namespace permideal {

IdealDescriptor IdealDescriptor::finite() {
  IdealDescriptor d;
  d.kind_ = Kind::Finite;
  return d;
}

IdealDescriptor IdealDescriptor::summable_reciprocal() {
  IdealDescriptor d;
  d.kind_ = Kind::SummableReciprocal;
  return d;
}

IdealDescriptor IdealDescriptor::summable_block_cubic(BlockSequence blocks) {
  IdealDescriptor d;
  d.kind_ = Kind::SummableBlockCubic;
  d.blocks_ = std::make_shared<const BlockSequence>(std::move(blocks));
  return d;
}

IdealDescriptor IdealDescriptor::block_density(BlockSequence blocks) {
  IdealDescriptor d;
  d.kind_ = Kind::BlockDensity;
  d.blocks_ = std::make_shared<const BlockSequence>(std::move(blocks));
  return d;
}

Rat IdealDescriptor::weight(std::uint64_t x) const {
  switch (kind_) {
    case Kind::SummableReciprocal:
      return x == 0 ? Rat(1) : rat(Int(1), int_from_u64(x));
    case Kind::SummableBlockCubic: {
      const Int big = int_from_u64(x);
      if (big < blocks_->n0()) return Rat(1);
      const Int& nb = blocks_->boundary(blocks_->block_of(big));
      return rat(Int(1), nb * nb * nb);
    }
    default:
      throw Error("weight: ideal is not summable");
  }
}

nlohmann::ordered_json IdealDescriptor::to_json() const {
  nlohmann::ordered_json j;
  switch (kind_) {
    case Kind::Finite:
      j["kind"] = "finite";
      break;
    case Kind::SummableReciprocal:
      j["kind"] = "summable";
      j["weights"] = "reciprocal";
      break;
    case Kind::SummableBlockCubic:
      j["kind"] = "summable";
      j["weights"] = "blockcubic";
      j["blocks"] = blocks_->to_json();
      break;
    case Kind::BlockDensity:
      j["kind"] = "blockdensity";
      j["blocks"] = blocks_->to_json();
      break;
  }
  return j;
}

IdealDescriptor IdealDescriptor::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "finite") return finite();
  if (kind == "summable") {
    const std::string w = j.at("weights").get<std::string>();
    if (w == "reciprocal") return summable_reciprocal();
    if (w == "blockcubic")
      return summable_block_cubic(BlockSequence::from_json(j.at("blocks")));
    throw SchemaError("IdealDescriptor: unknown weights '" + w + "'");
  }
  if (kind == "blockdensity")
    return block_density(BlockSequence::from_json(j.at("blocks")));
  throw SchemaError("IdealDescriptor: unknown kind '" + kind + "'");
}

nlohmann::ordered_json MembershipVerdict::to_json() const {
  nlohmann::ordered_json j;
  j["verdict"] = kind == Kind::In ? "in" : kind == Kind::NotIn ? "not-in" : "diagnostic";
  if (!density_profile.empty()) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : density_profile) arr.push_back(dec_string(r));
    j["density_profile"] = std::move(arr);
  }
  if (partial_sum) j["partial_sum"] = dec_string(*partial_sum);
  if (!note.empty()) j["note"] = note;
  j["window"] = window.bound;
  return j;
}

namespace {

enum class Tri { Yes, No, Unknown };

Tri tri_from(std::optional<bool> v) {
  if (!v) return Tri::Unknown;
  return *v ? Tri::Yes : Tri::No;
}

// Is the set expression finite? (exact reasoning only)
Tri expr_finite(const SetExpr& s) {
  switch (s.kind()) {
    case SetExpr::Kind::Finite:
      return Tri::Yes;
    case SetExpr::Kind::BlockUnion: {
      if (s.blocks().is_finite()) return Tri::Yes;  // bounded union
      auto inf = s.index().is_infinite();
      if (!inf) return Tri::Unknown;
      return *inf ? Tri::No : Tri::Yes;
    }
    case SetExpr::Kind::Union: {
      Tri a = expr_finite(*s.left()), b = expr_finite(*s.right());
      if (a == Tri::Yes && b == Tri::Yes) return Tri::Yes;
      if (a == Tri::No || b == Tri::No) return Tri::No;
      return Tri::Unknown;
    }
    case SetExpr::Kind::Intersection: {
      Tri a = expr_finite(*s.left()), b = expr_finite(*s.right());
      if (a == Tri::Yes || b == Tri::Yes) return Tri::Yes;
      return Tri::Unknown;
    }
    case SetExpr::Kind::Difference: {
      Tri a = expr_finite(*s.left());
      if (a == Tri::Yes) return Tri::Yes;
      if (a == Tri::No && expr_finite(*s.right()) == Tri::Yes) return Tri::No;
      return Tri::Unknown;
    }
    case SetExpr::Kind::Sample:
      return Tri::Unknown;  // only a window's worth of information
  }
  return Tri::Unknown;
}

bool growing_blocks(const BlockSequence& b) {
  return b.rule() == BlockSequence::Rule::FactorialGaps ||
         b.rule() == BlockSequence::Rule::CubicGaps;
}

// Exact membership for a block union; Unknown when outside the closed class.
Tri block_union_in(const IdealDescriptor& ideal, const SetExpr& s) {
  const BlockSequence& sb = s.blocks();
  Tri finite = tri_from(s.index().is_infinite());
  // tri_from maps is_infinite; flip to "is finite".
  if (finite == Tri::Yes) finite = Tri::No;
  else if (finite == Tri::No) finite = Tri::Yes;

  switch (ideal.kind()) {
    case IdealDescriptor::Kind::Finite:
      return finite;
    case IdealDescriptor::Kind::SummableReciprocal:
      // Full blocks of every supported rule carry non-summable harmonic mass:
      // growing rules have per-block mass >= 1 - n_i/n_{i+1} -> 1, and
      // arithmetic rules select a divergent harmonic subseries.
      return finite;
    case IdealDescriptor::Kind::SummableBlockCubic:
      if (sb == ideal.blocks() && sb.rule() == BlockSequence::Rule::CubicGaps)
        return finite;  // each full block has weight exactly 1
      return Tri::Unknown;
    case IdealDescriptor::Kind::BlockDensity: {
      if (sb == ideal.blocks()) return finite;  // density 1 on selected blocks
      // Residue class vs a growing-block density ideal: density tends to
      // |residues|/modulus, nonzero unless the class is empty.
      std::uint64_t n0 = 0, step = 0;
      if (sb.arithmetic_u64(&n0, &step) &&
          s.index().kind() == IndexSet::Kind::Periodic && growing_blocks(ideal.blocks()))
        return s.index().items().empty() ? Tri::Yes : Tri::No;
      return Tri::Unknown;
    }
  }
  return Tri::Unknown;
}

Tri exact_contains(const IdealDescriptor& ideal, const SetExpr& s) {
  // Every ideal contains every finite set, and no infinite set belongs to the
  // finite ideal.
  Tri fin = expr_finite(s);
  if (fin == Tri::Yes) return Tri::Yes;
  if (ideal.kind() == IdealDescriptor::Kind::Finite) return fin == Tri::No ? Tri::No : Tri::Unknown;

  switch (s.kind()) {
    case SetExpr::Kind::Finite:
      return Tri::Yes;
    case SetExpr::Kind::BlockUnion:
      return block_union_in(ideal, s);
    case SetExpr::Kind::Union: {
      Tri a = exact_contains(ideal, *s.left());
      Tri b = exact_contains(ideal, *s.right());
      if (a == Tri::Yes && b == Tri::Yes) return Tri::Yes;  // closure under unions
      if (a == Tri::No || b == Tri::No) return Tri::No;     // supersets of non-members
      return Tri::Unknown;
    }
    case SetExpr::Kind::Intersection: {
      if (exact_contains(ideal, *s.left()) == Tri::Yes) return Tri::Yes;
      if (exact_contains(ideal, *s.right()) == Tri::Yes) return Tri::Yes;
      return Tri::Unknown;
    }
    case SetExpr::Kind::Difference: {
      Tri a = exact_contains(ideal, *s.left());
      if (a == Tri::Yes) return Tri::Yes;
      if (a == Tri::No && exact_contains(ideal, *s.right()) == Tri::Yes) return Tri::No;
      return Tri::Unknown;
    }
    case SetExpr::Kind::Sample:
      return Tri::Unknown;
  }
  return Tri::Unknown;
}

}  // namespace

MembershipVerdict contains(const IdealDescriptor& ideal, const SetExpr& s,
                           const Window& w) {
  MembershipVerdict v;
  v.window = w;
  Tri t = exact_contains(ideal, s);
  if (t == Tri::Yes) {
    v.kind = MembershipVerdict::Kind::In;
    return v;
  }
  if (t == Tri::No) {
    v.kind = MembershipVerdict::Kind::NotIn;
    return v;
  }
  v.kind = MembershipVerdict::Kind::Diagnostic;
  switch (ideal.kind()) {
    case IdealDescriptor::Kind::BlockDensity: {
      std::size_t nblocks = ideal.blocks().complete_blocks_below(int_from_u64(w.bound));
      if (nblocks > 0) v.density_profile = density_profile(ideal.blocks(), s, nblocks);
      v.note = "outside the exact closed class; per-block densities on the window";
      break;
    }
    case IdealDescriptor::Kind::SummableReciprocal:
    case IdealDescriptor::Kind::SummableBlockCubic: {
      v.partial_sum = partial_weight_sum(ideal, s, w.bound).sum;
      v.note = "outside the exact closed class; partial weight sum on the window";
      break;
    }
    case IdealDescriptor::Kind::Finite:
      v.note = "finiteness not decidable from the expression";
      break;
  }
  return v;
}

std::vector<Rat> density_profile(const BlockSequence& blocks, const SetExpr& s,
                                 std::size_t upToBlock) {
  std::vector<Rat> out;
  out.reserve(upToBlock);

  // Same-block unions have ratio exactly 1 or 0, regardless of block size.
  if (s.kind() == SetExpr::Kind::BlockUnion && s.blocks() == blocks) {
    for (std::size_t i = 0; i < upToBlock; ++i) {
      bool exact = true;
      bool in = s.index().contains(i, &exact);
      if (!exact)
        throw InsufficientWindow("density_profile: index set undecided at block " +
                                 std::to_string(i));
      out.emplace_back(in ? 1 : 0);
    }
    return out;
  }

  // Finite point sets: count per block by binary search; blocks may be huge.
  if (s.kind() == SetExpr::Kind::Finite) {
    const auto& pts = s.points();
    for (std::size_t i = 0; i < upToBlock; ++i) {
      const Int& lo = blocks.boundary(i);
      const Int& hi = blocks.boundary(i + 1);
      std::uint64_t c = 0;
      if (fits_u64(hi)) {
        auto a = std::lower_bound(pts.begin(), pts.end(), to_u64(lo));
        auto b = std::lower_bound(pts.begin(), pts.end(), to_u64(hi));
        c = static_cast<std::uint64_t>(b - a);
      } else if (fits_u64(lo)) {
        auto a = std::lower_bound(pts.begin(), pts.end(), to_u64(lo));
        c = static_cast<std::uint64_t>(pts.end() - a);
      }
      out.push_back(rat(int_from_u64(c), hi - lo));
    }
    return out;
  }

  const Int& end = blocks.boundary(upToBlock);
  if (!fits_u64(end) || to_u64(end) > (std::uint64_t{1} << 26))
    throw InsufficientWindow("density_profile: window too large to tabulate");
  SetTable t = s.tabulate(to_u64(end));
  if (!t.exact)
    throw InsufficientWindow("density_profile: set not decidable on the window");
  for (std::size_t i = 0; i < upToBlock; ++i) {
    std::uint64_t lo = to_u64(blocks.boundary(i)), hi = to_u64(blocks.boundary(i + 1));
    std::uint64_t c = 0;
    for (std::uint64_t x = lo; x < hi; ++x) c += t.bits[x];
    out.push_back(rat(int_from_u64(c), blocks.block_size(i)));
  }
  return out;
}

WeightSum partial_weight_sum(const IdealDescriptor& ideal, const SetExpr& s,
                             std::uint64_t upTo) {
  if (!ideal.is_summable()) throw Error("partial_weight_sum: ideal is not summable");
  WeightSum ws;
  ws.sum = Rat(0);

  bool exact = true;
  std::vector<std::uint64_t> pts =
      s.kind() == SetExpr::Kind::Finite ? s.points() : s.enumerate(upTo, &exact);
  if (!exact) throw InsufficientWindow("partial_weight_sum: set not decidable below upTo");
  for (auto x : pts) {
    if (x >= upTo) break;
    ws.sum += ideal.weight(x);
  }

  // Tail bounds for block unions with finite index sets: remaining full blocks
  // bracketed by rational integral comparison; infinite index sets diverge.
  if (s.kind() == SetExpr::Kind::BlockUnion) {
    auto inf = s.index().is_infinite();
    if (inf && *inf) {
      ws.tail_infinite = true;
      return ws;
    }
    if (inf && !*inf && s.index().kind() == IndexSet::Kind::Finite) {
      Rat lo(0), hi(0);
      const Int cut = int_from_u64(upTo);
      for (auto i : s.index().items()) {
        const Int& b = s.blocks().boundary(i + 1);
        if (b <= cut) continue;  // fully summed already
        const Int a = std::max(s.blocks().boundary(i), cut);
        const Int len = b - a;
        if (ideal.kind() == IdealDescriptor::Kind::SummableReciprocal) {
          if (sgn(a) > 0) {
            lo += rat(len, b);  // len/b <= sum of 1/x over [a, b) <= len/a
            hi += rat(len, a);
          }
        } else {
          const Int& nb = s.blocks().boundary(i);
          Rat mass = rat(len, nb * nb * nb);  // constant weight within the block
          lo += mass;
          hi += mass;
        }
      }
      ws.tail_lower = lo;
      ws.tail_upper = hi;
    }
  }
  if (s.kind() == SetExpr::Kind::Finite) {
    Rat tail(0);
    for (auto x : s.points())
      if (x >= upTo) tail += ideal.weight(x);
    ws.tail_lower = tail;
    ws.tail_upper = tail;
  }
  return ws;
}

Rat cubic_single_point_tail_bound(const BlockSequence& blocks, std::size_t fromBlock) {
  if (blocks.rule() != BlockSequence::Rule::CubicGaps)
    throw Error("cubic_single_point_tail_bound: needs a cubic-gap sequence");
  // n_{i+1} >= 2 n_i, so weights drop by at least 8x per block.
  const Int& nk = blocks.boundary(fromBlock);
  return rat(Int(8), Int(7) * nk * nk * nk);
}

std::vector<SetExpr::Ptr> lift_ad_family(const BlockSequence& blocks,
                                         const std::vector<IndexSet>& family) {
  for (std::size_t i = 0; i < family.size(); ++i)
    for (std::size_t j = i + 1; j < family.size(); ++j) {
      auto fin = IndexSet::intersection_finite(family[i], family[j]);
      if (!fin)
        throw Error("lift_ad_family: almost-disjointness undecidable for pair " +
                    std::to_string(i) + "," + std::to_string(j));
      if (!*fin) throw NotAlmostDisjoint(i, j);
    }
  std::vector<SetExpr::Ptr> out;
  out.reserve(family.size());
  for (const auto& ix : family) out.push_back(SetExpr::block_union(blocks, ix));
  return out;
}

}  // namespace permideal
