#include "permideal/perm.hpp"

#include <algorithm>
#include <unordered_set>

namespace permideal {

namespace {

constexpr std::uint64_t kScanLimit = 1u << 20;

std::vector<std::pair<std::uint64_t, std::uint64_t>> sort_by_source(
    std::vector<std::pair<std::uint64_t, std::uint64_t>> map) {
  std::sort(map.begin(), map.end());
  for (std::size_t i = 0; i + 1 < map.size(); ++i)
    if (map[i].first == map[i + 1].first)
      throw std::invalid_argument("finite map: duplicate source");
  std::vector<std::uint64_t> targets;
  targets.reserve(map.size());
  for (const auto& [a, b] : map) targets.push_back(b);
  std::sort(targets.begin(), targets.end());
  for (std::size_t i = 0; i + 1 < targets.size(); ++i)
    if (targets[i] == targets[i + 1])
      throw std::invalid_argument("finite map: duplicate target");
  return map;
}

}  // namespace

PermExpr::Ptr PermExpr::identity() {
  static Ptr id = std::shared_ptr<PermExpr>(new PermExpr);
  return id;
}

PermExpr::Ptr PermExpr::finite_support(
    std::vector<std::pair<std::uint64_t, std::uint64_t>> map) {
  auto e = std::shared_ptr<PermExpr>(new PermExpr);
  e->kind_ = Kind::FiniteSupport;
  e->fs_map_ = sort_by_source(std::move(map));
  return e;
}

PermExpr::Ptr PermExpr::block_local(
    BlockSequence blocks, std::map<std::size_t, std::vector<std::uint32_t>> tables) {
  for (const auto& [i, t] : tables) {
    Int size = blocks.block_size(i);
    if (int_from_u64(t.size()) != size)
      throw std::invalid_argument("block_local: table size mismatch at block " +
                                  std::to_string(i));
    std::vector<bool> seen(t.size(), false);
    for (auto v : t) {
      if (v >= t.size() || seen[v])
        throw std::invalid_argument("block_local: table is not a permutation");
      seen[v] = true;
    }
  }
  auto e = std::shared_ptr<PermExpr>(new PermExpr);
  e->kind_ = Kind::BlockLocal;
  e->blocks_ = std::make_shared<const BlockSequence>(std::move(blocks));
  e->bl_tables_ = std::move(tables);
  return e;
}

PermExpr::Ptr PermExpr::successor_shift(SetExpr::Ptr carrier, std::int64_t exponent) {
  auto e = std::shared_ptr<PermExpr>(new PermExpr);
  e->kind_ = Kind::SuccessorShift;
  e->carrier_ = std::move(carrier);
  e->exponent_ = exponent;
  return e;
}

PermExpr::Ptr PermExpr::swap_pairs(
    std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> map;
  map.reserve(pairs.size() * 2);
  for (auto [a, b] : pairs) {
    if (a == b) throw std::invalid_argument("swap_pairs: degenerate pair");
    map.emplace_back(a, b);
    map.emplace_back(b, a);
  }
  auto e = std::shared_ptr<PermExpr>(new PermExpr);
  e->kind_ = Kind::Swap;
  e->swap_form_ = SwapForm::Pairs;
  e->fs_map_ = sort_by_source(std::move(map));
  return e;
}

PermExpr::Ptr PermExpr::swap_periodic(std::uint64_t modulus, std::uint64_t lo,
                                      std::uint64_t hi, std::uint64_t delta) {
  if (!(lo < hi && hi <= modulus)) throw std::invalid_argument("swap_periodic: bad range");
  if (delta < hi - lo || hi + delta > modulus)
    throw std::invalid_argument("swap_periodic: pairs would overlap or wrap");
  auto e = std::shared_ptr<PermExpr>(new PermExpr);
  e->kind_ = Kind::Swap;
  e->swap_form_ = SwapForm::Periodic;
  e->rule_ = {modulus, lo, hi, delta};
  return e;
}

PermExpr::Ptr PermExpr::boundary_swap(BlockSequence blocks) {
  auto e = std::shared_ptr<PermExpr>(new PermExpr);
  e->kind_ = Kind::Swap;
  e->swap_form_ = SwapForm::Boundary;
  e->blocks_ = std::make_shared<const BlockSequence>(std::move(blocks));
  return e;
}

PermExpr::Ptr PermExpr::compose(Ptr p, Ptr q) {
  auto e = std::shared_ptr<PermExpr>(new PermExpr);
  e->kind_ = Kind::Compose;
  e->left_ = std::move(p);
  e->right_ = std::move(q);
  return e;
}

PermExpr::Ptr PermExpr::inverse_of(Ptr p) { return invert(p); }

PermExpr::Ptr PermExpr::piecewise(std::vector<std::pair<SetExpr::Ptr, Ptr>> cases,
                                  Ptr otherwise) {
  auto e = std::shared_ptr<PermExpr>(new PermExpr);
  e->kind_ = Kind::Piecewise;
  e->cases_ = std::move(cases);
  e->otherwise_ = otherwise ? std::move(otherwise) : identity();
  return e;
}

bool PermExpr::total() const {
  switch (kind_) {
    case Kind::Identity:
    case Kind::FiniteSupport:
    case Kind::BlockLocal:
    case Kind::Swap:
      return true;
    case Kind::SuccessorShift:
      return exponent_ == 0;
    case Kind::Compose:
      return left_->total() && right_->total();
    case Kind::Inverse:
      return left_->total();
    case Kind::Piecewise: {
      for (const auto& [s, p] : cases_)
        if (!p->total()) return false;
      return otherwise_->total();
    }
  }
  return false;
}

namespace {

// Is block boundary i an eligible swap site: i >= 1 with both adjacent gaps >= 2.
bool eligible_boundary(const BlockSequence& b, std::size_t i) {
  if (i == 0) return false;
  if (!b.has_boundary(i + 1)) return false;
  return b.boundary(i) - b.boundary(i - 1) >= 2 && b.boundary(i + 1) - b.boundary(i) >= 2;
}

EvalOutcome eval_boundary_swap(const BlockSequence& b, std::uint64_t n) {
  const Int x = int_from_u64(n);
  if (x < b.n0()) return EvalOutcome::of(n);
  std::size_t i;
  try {
    i = b.block_of(x);
  } catch (const std::out_of_range&) {
    return EvalOutcome::of(n);  // past an explicit end: fixed
  }
  if (x == b.boundary(i) && eligible_boundary(b, i)) return EvalOutcome::of(n - 1);
  if (x + 1 == b.boundary(i + 1) && eligible_boundary(b, i + 1))
    return EvalOutcome::of(n + 1);
  return EvalOutcome::of(n);
}

// k-th carrier member strictly above/below n by linear scan with membership
// queries; block unions get an arithmetic path in tabulate().
EvalOutcome shift_by_scan(const SetExpr& carrier, std::uint64_t n, std::int64_t e) {
  if (e > 0) {
    std::uint64_t x = n;
    std::int64_t found = 0;
    for (std::uint64_t steps = 0; steps < kScanLimit; ++steps) {
      ++x;
      Membership m = carrier.contains(x);
      if (m == Membership::Unknown) return EvalOutcome::unknown();
      if (m == Membership::In && ++found == e) return EvalOutcome::of(x);
    }
    return EvalOutcome::unknown();
  }
  std::uint64_t x = n;
  std::int64_t found = 0;
  while (x > 0) {
    --x;
    Membership m = carrier.contains(x);
    if (m == Membership::Unknown) return EvalOutcome::unknown();
    if (m == Membership::In && ++found == -e) return EvalOutcome::of(x);
    if (n - x > kScanLimit) return EvalOutcome::unknown();
  }
  return EvalOutcome::undefined();  // ran off the bottom of the carrier
}

EvalOutcome eval_shift(const SetExpr& carrier, std::uint64_t n, std::int64_t e) {
  Membership m = carrier.contains(n);
  if (m == Membership::Unknown) return EvalOutcome::unknown();
  if (m == Membership::Out) return EvalOutcome::undefined();
  if (e == 0) return EvalOutcome::of(n);
  if (carrier.kind() == SetExpr::Kind::Finite) {
    const auto& pts = carrier.points();
    auto it = std::lower_bound(pts.begin(), pts.end(), n);
    std::int64_t idx = static_cast<std::int64_t>(it - pts.begin()) + e;
    if (idx < 0) return EvalOutcome::undefined();
    if (idx >= static_cast<std::int64_t>(pts.size()))
      return EvalOutcome::unknown();  // a finite listing never certifies its top
    return EvalOutcome::of(pts[static_cast<std::size_t>(idx)]);
  }
  return shift_by_scan(carrier, n, e);
}

}  // namespace

EvalOutcome raw_eval(const PermExpr& p, std::uint64_t n) {
  switch (p.kind()) {
    case PermExpr::Kind::Identity:
      return EvalOutcome::of(n);
    case PermExpr::Kind::FiniteSupport: {
      const auto& m = p.fs_map();
      auto it = std::lower_bound(m.begin(), m.end(), std::make_pair(n, std::uint64_t{0}));
      if (it != m.end() && it->first == n) return EvalOutcome::of(it->second);
      return EvalOutcome::of(n);
    }
    case PermExpr::Kind::BlockLocal: {
      const Int x = int_from_u64(n);
      if (x < p.blocks().n0()) return EvalOutcome::of(n);
      std::size_t i;
      try {
        i = p.blocks().block_of(x);
      } catch (const std::out_of_range&) {
        return EvalOutcome::of(n);
      }
      auto it = p.bl_tables().find(i);
      if (it == p.bl_tables().end()) return EvalOutcome::of(n);
      const Int off = x - p.blocks().boundary(i);
      const Int img = p.blocks().boundary(i) + it->second[to_u64(off)];
      return EvalOutcome::of(to_u64(img));
    }
    case PermExpr::Kind::SuccessorShift:
      return eval_shift(*p.carrier(), n, p.exponent());
    case PermExpr::Kind::Swap: {
      if (p.swap_is_boundary()) return eval_boundary_swap(p.blocks(), n);
      if (p.swap_is_rule()) {
        const auto& r = p.swap_rule();
        std::uint64_t res = n % r.modulus;
        if (res >= r.lo && res < r.hi) return EvalOutcome::of(n + r.delta);
        if (res >= r.lo + r.delta && res < r.hi + r.delta)
          return EvalOutcome::of(n - r.delta);
        return EvalOutcome::of(n);
      }
      const auto& m = p.fs_map();
      auto it = std::lower_bound(m.begin(), m.end(), std::make_pair(n, std::uint64_t{0}));
      if (it != m.end() && it->first == n) return EvalOutcome::of(it->second);
      return EvalOutcome::of(n);
    }
    case PermExpr::Kind::Compose: {
      EvalOutcome inner = raw_eval(*p.right(), n);
      if (!inner.is_value()) return inner;
      return raw_eval(*p.left(), inner.value);
    }
    case PermExpr::Kind::Inverse:
      return EvalOutcome::unknown();  // recovered by windowed inversion only
    case PermExpr::Kind::Piecewise: {
      for (const auto& [set, branch] : p.cases()) {
        Membership m = set->contains(n);
        if (m == Membership::Unknown) return EvalOutcome::unknown();
        if (m == Membership::In) return raw_eval(*branch, n);
      }
      return raw_eval(*p.otherwise(), n);
    }
  }
  return EvalOutcome::unknown();
}

std::optional<std::uint64_t> eval(const PermExpr& p, std::uint64_t n, const Window& w) {
  if (n >= w.bound) throw std::invalid_argument("eval: point outside window");
  EvalOutcome r = raw_eval(p, n);
  switch (r.status) {
    case EvalOutcome::Status::Undefined:
      return std::nullopt;
    case EvalOutcome::Status::Unknown:
      throw BoundaryEscape("eval: window too small to decide image of " +
                           std::to_string(n));
    case EvalOutcome::Status::Value:
      if (r.value >= w.bound)
        throw BoundaryEscape("eval: image " + std::to_string(r.value) +
                             " escapes window bound " + std::to_string(w.bound));
      return r.value;
  }
  return std::nullopt;
}

namespace {

std::int64_t encode(const EvalOutcome& o) {
  switch (o.status) {
    case EvalOutcome::Status::Value:
      return static_cast<std::int64_t>(o.value);
    case EvalOutcome::Status::Undefined:
      return PermTable::kUndefined;
    case EvalOutcome::Status::Unknown:
      return PermTable::kUnknown;
  }
  return PermTable::kUnknown;
}

}  // namespace

PermTable tabulate(const PermExpr& p, const Window& w) {
  const std::uint64_t bound = w.bound;
  PermTable out;
  switch (p.kind()) {
    case PermExpr::Kind::Identity: {
      out.t.resize(bound);
      for (std::uint64_t n = 0; n < bound; ++n) out.t[n] = static_cast<std::int64_t>(n);
      break;
    }
    case PermExpr::Kind::FiniteSupport: {
      out.t.resize(bound);
      for (std::uint64_t n = 0; n < bound; ++n) out.t[n] = static_cast<std::int64_t>(n);
      for (const auto& [a, b] : p.fs_map())
        if (a < bound) out.t[a] = static_cast<std::int64_t>(b);
      break;
    }
    case PermExpr::Kind::BlockLocal: {
      out.t.resize(bound);
      for (std::uint64_t n = 0; n < bound; ++n) out.t[n] = static_cast<std::int64_t>(n);
      for (const auto& [i, table] : p.bl_tables()) {
        if (!p.blocks().has_boundary(i + 1)) continue;
        const Int& lo = p.blocks().boundary(i);
        if (lo >= int_from_u64(bound)) continue;
        const std::uint64_t lo64 = to_u64(lo);
        for (std::uint64_t off = 0; off < table.size() && lo64 + off < bound; ++off)
          out.t[lo64 + off] = static_cast<std::int64_t>(lo64 + table[off]);
      }
      break;
    }
    case PermExpr::Kind::SuccessorShift: {
      out.t.assign(bound, PermTable::kUndefined);
      SetTable ct = p.carrier()->tabulate(bound);
      if (!ct.exact) {
        out.t.assign(bound, PermTable::kUnknown);
        break;
      }
      std::vector<std::uint64_t> members;
      for (std::uint64_t x = 0; x < bound; ++x)
        if (ct.bits[x]) members.push_back(x);
      const std::int64_t e = p.exponent();
      for (std::size_t i = 0; i < members.size(); ++i) {
        std::int64_t j = static_cast<std::int64_t>(i) + e;
        if (j < 0)
          out.t[members[i]] = PermTable::kUndefined;
        else if (j >= static_cast<std::int64_t>(members.size()))
          out.t[members[i]] = PermTable::kUnknown;  // successor beyond the window
        else
          out.t[members[i]] = static_cast<std::int64_t>(members[static_cast<std::size_t>(j)]);
      }
      break;
    }
    case PermExpr::Kind::Swap: {
      out.t.resize(bound);
      for (std::uint64_t n = 0; n < bound; ++n) out.t[n] = static_cast<std::int64_t>(n);
      if (p.swap_is_boundary()) {
        const BlockSequence& b = p.blocks();
        for (std::size_t i = 1; b.has_boundary(i) && b.boundary(i) <= int_from_u64(bound);
             ++i) {
          if (!eligible_boundary(b, i)) continue;
          std::uint64_t ni = to_u64(b.boundary(i));
          if (ni - 1 < bound) out.t[ni - 1] = static_cast<std::int64_t>(ni);
          if (ni < bound) out.t[ni] = static_cast<std::int64_t>(ni - 1);
        }
      } else if (p.swap_is_rule()) {
        for (std::uint64_t n = 0; n < bound; ++n)
          out.t[n] = encode(raw_eval(p, n));
      } else {
        for (const auto& [a, b] : p.fs_map())
          if (a < bound) out.t[a] = static_cast<std::int64_t>(b);
      }
      break;
    }
    case PermExpr::Kind::Compose: {
      PermTable tq = tabulate(*p.right(), w);
      PermTable tp = tabulate(*p.left(), w);
      out.t.assign(bound, PermTable::kUnknown);
      for (std::uint64_t n = 0; n < bound; ++n) {
        std::int64_t v = tq.t[n];
        if (v == PermTable::kUndefined || v == PermTable::kUnknown) {
          out.t[n] = v;
          continue;
        }
        if (static_cast<std::uint64_t>(v) < bound)
          out.t[n] = tp.t[static_cast<std::uint64_t>(v)];
        else
          out.t[n] = encode(raw_eval(*p.left(), static_cast<std::uint64_t>(v)));
      }
      break;
    }
    case PermExpr::Kind::Inverse: {
      PermTable ti = tabulate(*p.left(), w);
      out.t.assign(bound, PermTable::kUnknown);
      for (std::uint64_t n = 0; n < bound; ++n) {
        std::int64_t v = ti.t[n];
        if (v >= 0 && static_cast<std::uint64_t>(v) < bound)
          out.t[static_cast<std::uint64_t>(v)] = static_cast<std::int64_t>(n);
      }
      break;
    }
    case PermExpr::Kind::Piecewise: {
      out.t.assign(bound, 0);
      std::vector<std::uint8_t> covered(bound, 0);
      PermTable td = tabulate(*p.otherwise(), w);
      for (std::uint64_t n = 0; n < bound; ++n) out.t[n] = td.t[n];
      for (const auto& [set, branch] : p.cases()) {
        SetTable st = set->tabulate(bound);
        PermTable tb = tabulate(*branch, w);
        for (std::uint64_t n = 0; n < bound; ++n) {
          if (!st.bits[n]) continue;
          if (covered[n]) throw Error("piecewise: case sets overlap at " + std::to_string(n));
          covered[n] = 1;
          out.t[n] = tb.t[n];
        }
        if (!st.exact)
          for (std::uint64_t n = 0; n < bound; ++n)
            if (!st.bits[n] && !covered[n]) out.t[n] = PermTable::kUnknown;
      }
      break;
    }
  }
  return out;
}

PermExpr::Ptr invert(const PermExpr::Ptr& p) {
  switch (p->kind()) {
    case PermExpr::Kind::Identity:
      return p;
    case PermExpr::Kind::FiniteSupport: {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> rev;
      rev.reserve(p->fs_map().size());
      for (const auto& [a, b] : p->fs_map()) rev.emplace_back(b, a);
      return PermExpr::finite_support(std::move(rev));
    }
    case PermExpr::Kind::BlockLocal: {
      std::map<std::size_t, std::vector<std::uint32_t>> inv;
      for (const auto& [i, t] : p->bl_tables()) {
        std::vector<std::uint32_t> r(t.size());
        for (std::uint32_t off = 0; off < t.size(); ++off) r[t[off]] = off;
        inv[i] = std::move(r);
      }
      return PermExpr::block_local(p->blocks(), std::move(inv));
    }
    case PermExpr::Kind::SuccessorShift:
      return PermExpr::successor_shift(p->carrier(), -p->exponent());
    case PermExpr::Kind::Swap:
      return p;  // involutions
    case PermExpr::Kind::Compose:
      return PermExpr::compose(invert(p->right()), invert(p->left()));
    case PermExpr::Kind::Inverse:
      return p->left();
    case PermExpr::Kind::Piecewise: {
      // No structural rewrite; keep a symbolic inverse node whose values are
      // recovered by windowed inversion.
      auto node = std::shared_ptr<PermExpr>(new PermExpr);
      node->kind_ = PermExpr::Kind::Inverse;
      node->left_ = p;
      return node;
    }
  }
  return PermExpr::Ptr();
}

SupportResult support(const PermExpr& p, const Window& w) {
  switch (p.kind()) {
    case PermExpr::Kind::Identity:
      return {SetExpr::empty(), true};
    case PermExpr::Kind::FiniteSupport: {
      std::vector<std::uint64_t> moved;
      for (const auto& [a, b] : p.fs_map())
        if (a != b) moved.push_back(a);
      return {SetExpr::finite(std::move(moved)), true};
    }
    case PermExpr::Kind::Swap: {
      if (p.swap_is_rule()) {
        const auto& r = p.swap_rule();
        std::vector<std::uint64_t> residues;
        for (std::uint64_t x = r.lo; x < r.hi; ++x) {
          residues.push_back(x);
          residues.push_back(x + r.delta);
        }
        return {SetExpr::block_union(BlockSequence::arithmetic(0, 1),
                                     IndexSet::periodic(r.modulus, std::move(residues))),
                true};
      }
      if (!p.swap_is_boundary()) {
        std::vector<std::uint64_t> moved;
        for (const auto& [a, b] : p.fs_map()) moved.push_back(a);
        return {SetExpr::finite(std::move(moved)), true};
      }
      break;  // boundary form: window-clipped below
    }
    case PermExpr::Kind::SuccessorShift: {
      if (p.exponent() == 0) return {SetExpr::empty(), true};
      if (p.exponent() > 0) return {p.carrier(), true};
      // Negative shifts lose the first |e| carrier members.
      std::vector<std::uint64_t> head;
      std::uint64_t need = static_cast<std::uint64_t>(-p.exponent());
      for (std::uint64_t x = 0; x < w.bound && head.size() < need; ++x)
        if (p.carrier()->contains(x) == Membership::In) head.push_back(x);
      if (head.size() == need)
        return {SetExpr::set_difference(p.carrier(), SetExpr::finite(std::move(head))),
                true};
      break;  // carrier too thin in this window
    }
    case PermExpr::Kind::BlockLocal: {
      std::vector<std::uint64_t> moved;
      for (const auto& [i, t] : p.bl_tables()) {
        if (!fits_u64(p.blocks().boundary(i))) continue;
        std::uint64_t lo = to_u64(p.blocks().boundary(i));
        for (std::uint32_t off = 0; off < t.size(); ++off)
          if (t[off] != off) moved.push_back(lo + off);
      }
      return {SetExpr::finite(std::move(moved)), true};
    }
    default:
      break;
  }
  // Window-clipped fallback: tabulate and list moved points.
  PermTable t = tabulate(p, w);
  std::vector<std::uint64_t> moved;
  for (std::uint64_t n = 0; n < w.bound; ++n)
    if (t.t[n] >= 0 && t.t[n] != static_cast<std::int64_t>(n)) moved.push_back(n);
  return {SetExpr::finite(std::move(moved)), false};
}

std::optional<std::vector<std::uint64_t>> sparse_support_candidates(const PermExpr& p,
                                                                    std::uint64_t bound) {
  constexpr std::size_t kCap = 1u << 22;
  std::vector<std::uint64_t> out;
  bool ok = true;
  auto add = [&](std::uint64_t x) {
    if (x < bound) out.push_back(x);
  };
  std::function<void(const PermExpr&)> walk = [&](const PermExpr& e) {
    if (!ok || out.size() > kCap) {
      ok = false;
      return;
    }
    switch (e.kind()) {
      case PermExpr::Kind::Identity:
        return;
      case PermExpr::Kind::FiniteSupport:
        for (const auto& [a, b] : e.fs_map()) {
          add(a);
          add(b);
        }
        return;
      case PermExpr::Kind::Swap:
        if (e.swap_is_rule()) {
          ok = false;  // dense
          return;
        }
        if (e.swap_is_boundary()) {
          const BlockSequence& bs = e.blocks();
          for (std::size_t i = 1;
               bs.has_boundary(i) && bs.boundary(i) <= int_from_u64(bound); ++i) {
            if (!eligible_boundary(bs, i)) continue;
            std::uint64_t ni = to_u64(bs.boundary(i));
            add(ni - 1);
            add(ni);
            if (out.size() > kCap) {
              ok = false;
              return;
            }
          }
          return;
        }
        for (const auto& [a, b] : e.fs_map()) add(a);
        return;
      case PermExpr::Kind::SuccessorShift:
        if (e.exponent() == 0) return;
        if (e.carrier()->kind() == SetExpr::Kind::Finite) {
          for (auto x : e.carrier()->points()) add(x);
          return;
        }
        ok = false;
        return;
      case PermExpr::Kind::BlockLocal:
        for (const auto& [i, t] : e.bl_tables()) {
          if (!fits_u64(e.blocks().boundary(i))) continue;
          std::uint64_t lo = to_u64(e.blocks().boundary(i));
          for (std::uint32_t off = 0; off < t.size(); ++off)
            if (t[off] != off) add(lo + off);
        }
        return;
      case PermExpr::Kind::Compose:
        walk(*e.left());
        walk(*e.right());
        return;
      case PermExpr::Kind::Inverse:
        walk(*e.left());
        return;
      case PermExpr::Kind::Piecewise:
        for (const auto& [set, branch] : e.cases()) {
          if (set->kind() == SetExpr::Kind::Finite)
            for (auto x : set->points()) add(x);
          else
            walk(*branch);
          if (!ok) return;
        }
        walk(*e.otherwise());
        return;
    }
  };
  walk(p);
  if (!ok) return std::nullopt;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

nlohmann::ordered_json NCReport::to_json() const {
  nlohmann::ordered_json j;
  j["points"] = points;
  j["certified"] = certified;
  j["skipped"] = skipped;
  j["window"] = window.bound;
  j["margin"] = window.margin;
  return j;
}

namespace {

// Evaluate p(q(n)) exactly, tracking whether anything >= bound was consulted.
EvalOutcome composite_at(const PermExpr& p, const PermExpr& q, std::uint64_t n,
                         std::uint64_t bound, bool* stayed_inside) {
  EvalOutcome qi = raw_eval(q, n);
  if (!qi.is_value()) return qi;
  if (qi.value >= bound && stayed_inside) *stayed_inside = false;
  EvalOutcome r = raw_eval(p, qi.value);
  if (r.is_value() && r.value >= bound && stayed_inside) *stayed_inside = false;
  return r;
}

}  // namespace

NCReport nc_set(const PermExpr& p, const PermExpr& q, const Window& w) {
  NCReport rep;
  rep.window = w;
  const std::uint64_t interior = w.interior();

  auto cp = sparse_support_candidates(p, interior);
  auto cq = sparse_support_candidates(q, interior);
  if (cp && cq && cp->size() + cq->size() < w.bound / 4) {
    // NC(p,q) is contained in supp(p) ∪ supp(q): off both supports the two
    // composites agree pointwise.
    std::vector<std::uint64_t> cand;
    cand.reserve(cp->size() + cq->size());
    std::merge(cp->begin(), cp->end(), cq->begin(), cq->end(), std::back_inserter(cand));
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    for (auto n : cand) {
      if (n >= interior) continue;
      bool inside = true;
      EvalOutcome a = composite_at(p, q, n, w.bound, &inside);
      EvalOutcome b = composite_at(q, p, n, w.bound, &inside);
      if (!inside) rep.certified = false;
      if (a.status == EvalOutcome::Status::Unknown ||
          b.status == EvalOutcome::Status::Unknown) {
        rep.certified = false;
        continue;
      }
      if (!a.is_value() || !b.is_value()) {
        ++rep.skipped;
        continue;
      }
      if (a.value != b.value) rep.points.push_back(n);
    }
    return rep;
  }

  PermTable tp = tabulate(p, w);
  PermTable tq = tabulate(q, w);
  auto chase = [&](const PermTable& outer_t, const PermExpr& outer, std::int64_t v,
                   bool* inside) -> EvalOutcome {
    if (v == PermTable::kUndefined) return EvalOutcome::undefined();
    if (v == PermTable::kUnknown) return EvalOutcome::unknown();
    std::uint64_t u = static_cast<std::uint64_t>(v);
    if (u < w.bound) return outer_t.at(u);
    if (inside) *inside = false;
    return raw_eval(outer, u);
  };
  for (std::uint64_t n = 0; n < interior; ++n) {
    bool inside = true;
    EvalOutcome a = chase(tp, p, tq.t[n], &inside);
    EvalOutcome b = chase(tq, q, tp.t[n], &inside);
    if (a.is_value() && a.value >= w.bound) inside = false;
    if (b.is_value() && b.value >= w.bound) inside = false;
    if (!inside) rep.certified = false;
    if (a.status == EvalOutcome::Status::Unknown ||
        b.status == EvalOutcome::Status::Unknown) {
      rep.certified = false;
      continue;
    }
    if (!a.is_value() || !b.is_value()) {
      ++rep.skipped;
      continue;
    }
    if (a.value != b.value) rep.points.push_back(n);
  }
  return rep;
}

OrbitResult orbit(const PermExpr& p, std::uint64_t x, std::uint64_t cap,
                  const Window& w) {
  OrbitResult res;
  if (x >= w.bound) throw std::invalid_argument("orbit: start outside window");
  std::vector<std::uint64_t> forward{x};
  std::unordered_set<std::uint64_t> seen{x};
  OrbitStatus status = OrbitStatus::Closed;
  bool cycled = false;

  std::uint64_t cur = x;
  while (true) {
    if (forward.size() > cap) {
      status = OrbitStatus::CapHit;
      break;
    }
    EvalOutcome nx = raw_eval(p, cur);
    if (nx.status == EvalOutcome::Status::Undefined) break;  // genuine forward end
    if (nx.status == EvalOutcome::Status::Unknown || nx.value >= w.bound) {
      status = OrbitStatus::BoundaryHit;
      break;
    }
    if (nx.value == x) {
      cycled = true;  // genuine finite cycle
      break;
    }
    if (seen.count(nx.value)) break;  // defensive: non-injective input
    seen.insert(nx.value);
    forward.push_back(nx.value);
    cur = nx.value;
  }

  std::vector<std::uint64_t> backward;
  if (!cycled && status == OrbitStatus::Closed) {
    PermExpr::Ptr inv = invert(std::make_shared<const PermExpr>(p));
    cur = x;
    while (true) {
      if (forward.size() + backward.size() > cap) {
        status = OrbitStatus::CapHit;
        break;
      }
      EvalOutcome pv = raw_eval(*inv, cur);
      if (pv.status == EvalOutcome::Status::Undefined) break;
      if (pv.status == EvalOutcome::Status::Unknown || pv.value >= w.bound) {
        status = OrbitStatus::BoundaryHit;
        break;
      }
      if (seen.count(pv.value)) break;
      seen.insert(pv.value);
      backward.push_back(pv.value);
      cur = pv.value;
    }
  } else if (status == OrbitStatus::CapHit) {
    // fall through: cap already hit going forward
  }

  res.points.assign(backward.rbegin(), backward.rend());
  res.points.insert(res.points.end(), forward.begin(), forward.end());
  res.status = status;
  return res;
}

bool table_injective(const PermTable& table, std::uint64_t bound) {
  std::vector<std::uint8_t> seen(bound, 0);
  std::vector<std::uint64_t> big;
  for (std::uint64_t n = 0; n < bound && n < table.t.size(); ++n) {
    std::int64_t v = table.t[n];
    if (v < 0) continue;
    std::uint64_t u = static_cast<std::uint64_t>(v);
    if (u < bound) {
      if (seen[u]) return false;
      seen[u] = 1;
    } else {
      big.push_back(u);
    }
  }
  std::sort(big.begin(), big.end());
  return std::adjacent_find(big.begin(), big.end()) == big.end();
}

nlohmann::ordered_json PermExpr::to_json() const {
  nlohmann::ordered_json j;
  switch (kind_) {
    case Kind::Identity:
      j["kind"] = "identity";
      break;
    case Kind::FiniteSupport: {
      j["kind"] = "finite";
      auto arr = nlohmann::ordered_json::array();
      for (const auto& [a, b] : fs_map_) arr.push_back({a, b});
      j["map"] = std::move(arr);
      break;
    }
    case Kind::BlockLocal: {
      j["kind"] = "blocklocal";
      j["blocks"] = blocks_->to_json();
      auto tabs = nlohmann::ordered_json::object();
      for (const auto& [i, t] : bl_tables_) tabs[std::to_string(i)] = t;
      j["tables"] = std::move(tabs);
      break;
    }
    case Kind::SuccessorShift:
      j["kind"] = "succshift";
      j["carrier"] = carrier_->to_json();
      j["exp"] = exponent_;
      break;
    case Kind::Swap:
      j["kind"] = "swap";
      if (swap_form_ == SwapForm::Periodic) {
        j["rule"] = {{"modulus", rule_.modulus},
                     {"lo", rule_.lo},
                     {"hi", rule_.hi},
                     {"delta", rule_.delta}};
      } else if (swap_form_ == SwapForm::Boundary) {
        j["boundaries"] = blocks_->to_json();
      } else {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& [a, b] : fs_map_)
          if (a < b) arr.push_back({a, b});
        j["pairs"] = std::move(arr);
      }
      break;
    case Kind::Compose:
      j["kind"] = "compose";
      j["left"] = left_->to_json();
      j["right"] = right_->to_json();
      break;
    case Kind::Inverse:
      j["kind"] = "inverse";
      j["inner"] = left_->to_json();
      break;
    case Kind::Piecewise: {
      j["kind"] = "piecewise";
      auto arr = nlohmann::ordered_json::array();
      for (const auto& [set, perm] : cases_)
        arr.push_back({{"set", set->to_json()}, {"perm", perm->to_json()}});
      j["cases"] = std::move(arr);
      j["default"] = otherwise_->to_json();
      break;
    }
  }
  return j;
}

PermExpr::Ptr PermExpr::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  auto pair_list = [](const nlohmann::json& arr) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> v;
    for (const auto& e : arr)
      v.emplace_back(e.at(0).get<std::uint64_t>(), e.at(1).get<std::uint64_t>());
    return v;
  };
  if (kind == "identity") return identity();
  if (kind == "finite") return finite_support(pair_list(j.at("map")));
  if (kind == "blocklocal") {
    std::map<std::size_t, std::vector<std::uint32_t>> tabs;
    for (const auto& [k, v] : j.at("tables").items())
      tabs[std::stoull(k)] = v.get<std::vector<std::uint32_t>>();
    return block_local(BlockSequence::from_json(j.at("blocks")), std::move(tabs));
  }
  if (kind == "succshift")
    return successor_shift(SetExpr::from_json(j.at("carrier")),
                           j.at("exp").get<std::int64_t>());
  if (kind == "swap") {
    if (j.contains("rule")) {
      const auto& r = j.at("rule");
      return swap_periodic(r.at("modulus").get<std::uint64_t>(),
                           r.at("lo").get<std::uint64_t>(),
                           r.at("hi").get<std::uint64_t>(),
                           r.at("delta").get<std::uint64_t>());
    }
    if (j.contains("boundaries"))
      return boundary_swap(BlockSequence::from_json(j.at("boundaries")));
    return swap_pairs(pair_list(j.at("pairs")));
  }
  if (kind == "compose")
    return compose(from_json(j.at("left")), from_json(j.at("right")));
  if (kind == "inverse") return inverse_of(from_json(j.at("inner")));
  if (kind == "piecewise") {
    std::vector<std::pair<SetExpr::Ptr, Ptr>> cases;
    for (const auto& c : j.at("cases"))
      cases.emplace_back(SetExpr::from_json(c.at("set")), from_json(c.at("perm")));
    return piecewise(std::move(cases), from_json(j.at("default")));
  }
  throw SchemaError("PermExpr: unknown kind '" + kind + "'");
}

}  // namespace permideal
