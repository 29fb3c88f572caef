#include "permideal/orbits.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <sstream>

namespace permideal {

namespace {

// Union-find with path halving.
struct DSU {
  std::vector<std::uint32_t> parent;
  explicit DSU(std::uint64_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

FamilyView FamilyView::make(std::vector<PermExpr::Ptr> members, const Window& w) {
  FamilyView fv;
  fv.window = w;
  fv.members = std::move(members);
  fv.tables.reserve(fv.members.size());
  fv.inv_tables.reserve(fv.members.size());
  for (const auto& m : fv.members) {
    fv.tables.push_back(tabulate(*m, w));
    fv.inv_tables.push_back(tabulate(*invert(m), w));
  }
  return fv;
}

std::map<std::uint64_t, std::uint64_t> OrbitPartition::size_histogram() const {
  std::map<std::uint64_t, std::uint64_t> h;
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (complete[c]) ++h[classes[c].size()];
  return h;
}

OrbitPartition omega_partition(const FamilyView& fam) {
  const std::uint64_t bound = fam.window.bound;
  DSU dsu(bound);
  std::vector<std::uint8_t> bad(bound, 0);  // point sees the window edge

  for (std::size_t i = 0; i < fam.size(); ++i) {
    const auto& t = fam.tables[i].t;
    const auto& r = fam.inv_tables[i].t;
    for (std::uint64_t n = 0; n < bound; ++n) {
      std::int64_t v = t[n];
      if (v == PermTable::kUnknown)
        bad[n] = 1;
      else if (v >= 0) {
        if (static_cast<std::uint64_t>(v) < bound)
          dsu.unite(static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(v));
        else
          bad[n] = 1;
      }
      std::int64_t u = r[n];
      if (u == PermTable::kUnknown)
        bad[n] = 1;
      else if (u >= 0 && static_cast<std::uint64_t>(u) >= bound)
        bad[n] = 1;
    }
  }

  std::vector<std::uint32_t> root(bound);
  for (std::uint64_t n = 0; n < bound; ++n) root[n] = dsu.find(static_cast<std::uint32_t>(n));

  OrbitPartition part;
  part.window = fam.window;
  part.point_class.assign(bound, 0);
  // Roots are minima (unite keeps the smaller index), and scanning upward
  // meets classes in order of minimum.
  std::vector<std::uint32_t> class_of_root(bound, UINT32_MAX);
  for (std::uint64_t n = 0; n < bound; ++n) {
    std::uint32_t rt = root[n];
    if (class_of_root[rt] == UINT32_MAX) {
      class_of_root[rt] = static_cast<std::uint32_t>(part.classes.size());
      part.classes.emplace_back();
      part.complete.push_back(1);
    }
    std::uint32_t c = class_of_root[rt];
    part.classes[c].push_back(n);
    part.point_class[n] = c;
    if (bad[n]) part.complete[c] = 0;
  }
  return part;
}

ClosureResult omega_closure(const FamilyView& fam, const SetExpr& X) {
  std::vector<std::uint64_t> seeds;
  ClosureResult pre;
  SetTable t = X.tabulate(fam.window.bound);
  for (std::uint64_t n = 0; n < fam.window.bound; ++n)
    if (t.bits[n]) seeds.push_back(n);
  ClosureResult res = omega_closure(fam, std::move(seeds));
  if (!t.exact) res.complete = false;
  return res;
}

ClosureResult omega_closure(const FamilyView& fam, std::vector<std::uint64_t> seeds) {
  const std::uint64_t bound = fam.window.bound;
  ClosureResult res;
  std::vector<std::uint8_t> in(bound, 0);
  std::deque<std::uint64_t> queue;
  for (auto s : seeds) {
    if (s >= bound) {
      res.complete = false;
      continue;
    }
    if (!in[s]) {
      in[s] = 1;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    std::uint64_t n = queue.front();
    queue.pop_front();
    for (std::size_t i = 0; i < fam.size(); ++i) {
      for (const EvalOutcome& o : {fam.fwd(i, n), fam.bwd(i, n)}) {
        if (o.status == EvalOutcome::Status::Undefined) continue;
        if (o.status == EvalOutcome::Status::Unknown || o.value >= bound) {
          res.complete = false;
          continue;
        }
        if (!in[o.value]) {
          in[o.value] = 1;
          queue.push_back(o.value);
        }
      }
    }
  }
  for (std::uint64_t n = 0; n < bound; ++n)
    if (in[n]) res.points.push_back(n);
  return res;
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> delta_map(
    const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  if (a.size() != b.size())
    throw SizeMismatch("delta_map: |A| = " + std::to_string(a.size()) +
                       " but |B| = " + std::to_string(b.size()));
  std::vector<std::uint64_t> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  out.reserve(sa.size());
  for (std::size_t i = 0; i < sa.size(); ++i) out.emplace_back(sa[i], sb[i]);
  return out;
}

nlohmann::ordered_json ClassType::to_json() const {
  nlohmann::ordered_json j;
  j["size"] = size;
  j["actions"] = actions;
  return j;
}

ClassType class_type(const FamilyView& fam, const std::vector<std::uint64_t>& cls) {
  ClassType ty;
  ty.size = cls.size();
  std::vector<std::uint64_t> sorted = cls;
  std::sort(sorted.begin(), sorted.end());
  auto label_of = [&](std::uint64_t x) -> std::uint32_t {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), x);
    if (it == sorted.end() || *it != x)
      throw Error("class_type: member action leaves the class; class incomplete?");
    return static_cast<std::uint32_t>(it - sorted.begin());
  };
  for (std::size_t i = 0; i < fam.size(); ++i) {
    std::vector<std::uint32_t> act(sorted.size());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      EvalOutcome o = fam.fwd(i, sorted[k]);
      if (o.is_value())
        act[k] = label_of(o.value);
      else if (o.status == EvalOutcome::Status::Undefined)
        act[k] = static_cast<std::uint32_t>(k);  // partial member fixes the point
      else
        throw Error("class_type: window ran out inside a class");
    }
    ty.actions.push_back(std::move(act));
  }
  return ty;
}

std::optional<std::vector<std::pair<std::uint64_t, std::uint64_t>>> s_isomorphic(
    const FamilyView& fam, const std::vector<std::uint64_t>& a,
    const std::vector<std::uint64_t>& b) {
  if (a.size() != b.size()) return std::nullopt;
  if (class_type(fam, a) == class_type(fam, b)) return delta_map(a, b);
  return std::nullopt;
}

std::optional<std::vector<std::pair<std::uint64_t, std::uint64_t>>>
exhaustive_isomorphism(const FamilyView& fam, const std::vector<std::uint64_t>& a,
                       const std::vector<std::uint64_t>& b, std::size_t max_size) {
  if (a.size() != b.size() || a.size() > max_size) return std::nullopt;
  std::vector<std::uint64_t> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<std::size_t> perm(sa.size());
  std::iota(perm.begin(), perm.end(), 0);
  auto commutes = [&](const std::vector<std::size_t>& psi) {
    for (std::size_t i = 0; i < fam.size(); ++i) {
      for (std::size_t k = 0; k < sa.size(); ++k) {
        EvalOutcome img = fam.fwd(i, sa[k]);
        std::uint64_t lhs, rhs;
        if (img.is_value()) {
          auto it = std::lower_bound(sa.begin(), sa.end(), img.value);
          if (it == sa.end() || *it != img.value) return false;
          lhs = sb[psi[static_cast<std::size_t>(it - sa.begin())]];
        } else {
          lhs = sb[psi[k]];
        }
        EvalOutcome img2 = fam.fwd(i, sb[psi[k]]);
        rhs = img2.is_value() ? img2.value : sb[psi[k]];
        if (lhs != rhs) return false;
      }
    }
    return true;
  };
  do {
    if (commutes(perm)) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
      for (std::size_t k = 0; k < sa.size(); ++k) out.emplace_back(sa[k], sb[perm[k]]);
      return out;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::nullopt;
}

OrbitBoundReport verify_orbit_bound(const FamilyView& fam,
                                    const std::vector<std::uint64_t>& m,
                                    const OrbitPartition& part) {
  if (m.size() != fam.size())
    throw std::invalid_argument("verify_orbit_bound: one bound per member required");
  OrbitBoundReport rep;
  for (auto b : m) rep.product *= b;
  if (fam.size() == 0) rep.product = 1;

  // Union of all pairwise non-commutation points, then its family closure.
  std::vector<std::uint64_t> nc_all;
  for (std::size_t i = 0; i < fam.size(); ++i)
    for (std::size_t j = i + 1; j < fam.size(); ++j) {
      NCReport nc = nc_set(*fam.members[i], *fam.members[j], fam.window);
      nc_all.insert(nc_all.end(), nc.points.begin(), nc.points.end());
    }
  std::sort(nc_all.begin(), nc_all.end());
  nc_all.erase(std::unique(nc_all.begin(), nc_all.end()), nc_all.end());
  rep.nc_union_size = nc_all.size();

  ClosureResult closure = omega_closure(fam, nc_all);
  std::vector<std::uint8_t> exceptional_class(part.size(), 0);
  for (auto p : closure.points) exceptional_class[part.class_of(p)] = 1;
  for (std::size_t c = 0; c < part.size(); ++c)
    if (exceptional_class[c]) rep.exceptional.push_back(c);

  for (std::size_t c = 0; c < part.size(); ++c) {
    if (!part.is_complete(c) || exceptional_class[c]) continue;
    if (part.classes[c].size() > rep.product) rep.violations.push_back(c);
  }
  return rep;
}

AgreementReport propagate_agreement(const PermExpr::Ptr& pi, const PermExpr::Ptr& theta,
                                    const FamilyView& fam,
                                    const std::vector<std::uint64_t>& X) {
  AgreementReport rep;
  const Window& w = fam.window;

  std::vector<std::uint64_t> yprime;
  for (std::size_t i = 0; i < fam.size(); ++i) {
    NCReport a = nc_set(*fam.members[i], *pi, w);
    NCReport b = nc_set(*fam.members[i], *theta, w);
    yprime.insert(yprime.end(), a.points.begin(), a.points.end());
    yprime.insert(yprime.end(), b.points.begin(), b.points.end());
  }
  std::sort(yprime.begin(), yprime.end());
  yprime.erase(std::unique(yprime.begin(), yprime.end()), yprime.end());
  rep.commuting_exactly = yprime.empty();

  if (!rep.commuting_exactly) {
    for (auto n : yprime)
      for (std::size_t i = 0; i < fam.size(); ++i)
        for (const EvalOutcome& o : {fam.fwd(i, n), fam.bwd(i, n)})
          if (o.is_value() && o.value < w.bound) rep.y_set.push_back(o.value);
    std::sort(rep.y_set.begin(), rep.y_set.end());
    rep.y_set.erase(std::unique(rep.y_set.begin(), rep.y_set.end()), rep.y_set.end());
  }

  PermTable tp = tabulate(*pi, w);
  PermTable tt = tabulate(*theta, w);
  auto agree_at = [&](std::uint64_t n) {
    EvalOutcome a = tp.at(n), b = tt.at(n);
    if (a.status != b.status) return false;
    if (a.is_value()) return a.value == b.value;
    return true;
  };

  std::vector<std::uint64_t> hypothesis = X;
  hypothesis.insert(hypothesis.end(), rep.y_set.begin(), rep.y_set.end());
  std::sort(hypothesis.begin(), hypothesis.end());
  hypothesis.erase(std::unique(hypothesis.begin(), hypothesis.end()), hypothesis.end());

  rep.hypothesis_holds = true;
  for (auto n : hypothesis)
    if (n < w.bound && !agree_at(n)) {
      rep.hypothesis_holds = false;
      rep.witness = n;
      return rep;
    }

  ClosureResult closure = omega_closure(fam, hypothesis);
  rep.closure_size = closure.points.size();
  rep.propagation_holds = true;
  for (auto n : closure.points) {
    if (!agree_at(n)) {
      rep.propagation_holds = false;
      rep.witness = n;
      return rep;
    }
  }
  return rep;
}

bool AnnotatedFamily::strongly_almost_abelian(const Window& w, std::string* why) const {
  for (std::size_t i = 0; i < members.size(); ++i)
    for (std::size_t j = i + 1; j < members.size(); ++j) {
      NCReport nc = nc_set(*members[i], *members[j], w);
      for (auto n : nc.points) {
        bool covered =
            std::binary_search(exceptional[i].begin(), exceptional[i].end(), n) ||
            std::binary_search(exceptional[j].begin(), exceptional[j].end(), n);
        if (!covered) {
          if (why)
            *why = "NC(" + std::to_string(i) + "," + std::to_string(j) +
                   ") point " + std::to_string(n) + " outside both exceptional sets";
          return false;
        }
      }
    }
  return true;
}

std::vector<std::uint64_t> cl_closure(const AnnotatedFamily& H,
                                      const std::vector<std::uint64_t>& W,
                                      const std::vector<std::uint64_t>& X,
                                      const Window& w) {
  const std::uint64_t bound = w.bound;
  std::vector<PermTable> fwd, bwd;
  for (const auto& h : H.members) {
    fwd.push_back(tabulate(*h, w));
    bwd.push_back(tabulate(*invert(h), w));
  }
  auto in_sorted = [](const std::vector<std::uint64_t>& v, std::uint64_t x) {
    return std::binary_search(v.begin(), v.end(), x);
  };

  std::vector<std::uint8_t> result(bound, 0);
  std::vector<std::uint64_t> cur;
  for (auto x : X)
    if (x < bound) cur.push_back(x);

  // One-step image set: z = h(x), x ∉ F(h), z ∉ F(h^-1), z ∉ W. The same F
  // annotates a member and its inverse (involution-closed families).
  auto step = [&](const std::vector<std::uint64_t>& src) {
    std::vector<std::uint64_t> next;
    for (auto x : src) {
      for (std::size_t i = 0; i < H.members.size(); ++i) {
        for (int dir = 0; dir < 2; ++dir) {
          if (in_sorted(H.exceptional[i], x)) continue;
          EvalOutcome o = dir == 0 ? fwd[i].at(x) : bwd[i].at(x);
          if (!o.is_value() || o.value >= bound) continue;
          std::uint64_t z = o.value;
          if (in_sorted(H.exceptional[i], z)) continue;
          if (in_sorted(W, z)) continue;
          next.push_back(z);
        }
      }
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    return next;
  };

  // Union of the iterated one-step images (the seed set itself is not
  // included unless regenerated).
  std::uint64_t added = 0;
  for (std::uint64_t round = 0; round <= bound; ++round) {
    cur = step(cur);
    std::uint64_t fresh = 0;
    for (auto z : cur)
      if (!result[z]) {
        result[z] = 1;
        ++fresh;
      }
    if (fresh == 0) break;
    added += fresh;
    if (added >= bound) break;
  }
  std::vector<std::uint64_t> out;
  for (std::uint64_t n = 0; n < bound; ++n)
    if (result[n]) out.push_back(n);
  return out;
}

PermExpr::Ptr g_t_family(const PermExpr::Ptr& g,
                         const std::vector<std::vector<std::uint64_t>>& blocks,
                         const std::vector<std::uint8_t>& t, const Window& w) {
  if (blocks.size() != t.size())
    throw std::invalid_argument("g_t_family: one bit per block required");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (auto x : blocks[b]) {
      EvalOutcome o = raw_eval(*g, x);
      if (!o.is_value() || !std::binary_search(blocks[b].begin(), blocks[b].end(), o.value))
        throw BlockNotInvariant("g_t_family: block " + std::to_string(b) +
                                " not invariant at " + std::to_string(x));
    }
    (void)w;
  }
  std::vector<std::pair<SetExpr::Ptr, PermExpr::Ptr>> cases;
  for (std::size_t b = 0; b < blocks.size(); ++b)
    if (t[b] == 0) cases.emplace_back(SetExpr::finite(blocks[b]), g);
  return PermExpr::piecewise(std::move(cases), PermExpr::identity());
}

ThetaResult theta_F_family(const FamilyView& fam, const OrbitPartition& part,
                           const std::map<std::uint64_t, std::size_t>& designated,
                           const std::set<std::uint64_t>& selected_sizes) {
  ThetaResult res;
  std::map<std::uint64_t, std::vector<std::uint64_t>> regions;
  for (std::size_t c = 0; c < part.size(); ++c) {
    if (!part.is_complete(c)) continue;
    auto& r = regions[part.classes[c].size()];
    r.insert(r.end(), part.classes[c].begin(), part.classes[c].end());
  }
  for (auto& [size, pts] : regions) {
    std::sort(pts.begin(), pts.end());
    res.size_region_sizes[size] = pts.size();
  }

  std::vector<std::pair<SetExpr::Ptr, PermExpr::Ptr>> cases;
  for (auto size : selected_sizes) {
    auto rit = regions.find(size);
    if (rit == regions.end()) continue;  // no classes of that size in window
    auto dit = designated.find(size);
    if (dit == designated.end())
      throw NoDesignatedGenerator("theta_F_family: no generator for size " +
                                  std::to_string(size));
    const auto& pts = rit->second;
    bool moves = std::any_of(pts.begin(), pts.end(), [&](std::uint64_t x) {
      EvalOutcome o = fam.fwd(dit->second, x);
      return o.is_value() && o.value != x;
    });
    if (!moves)
      throw NoDesignatedGenerator("theta_F_family: designated member is the identity "
                                  "on the size-" + std::to_string(size) + " region");
    cases.emplace_back(SetExpr::finite(pts), fam.members[dit->second]);
  }
  res.perm = PermExpr::piecewise(std::move(cases), PermExpr::identity());
  for (std::size_t i = 0; i < fam.size(); ++i)
    res.nc_certificates.push_back(nc_set(*res.perm, *fam.members[i], fam.window));
  return res;
}

InfinitePartResult infinite_part(const FamilyView& fam, std::uint64_t cap) {
  InfinitePartResult res;
  const std::uint64_t bound = fam.window.bound;
  std::vector<std::uint64_t> seeds;

  for (std::size_t i = 0; i < fam.size(); ++i) {
    const PermExpr& m = *fam.members[i];
    if (m.kind() == PermExpr::Kind::SuccessorShift && m.exponent() != 0) {
      // Shift along an infinite carrier: every carrier orbit is infinite.
      SetTable ct = m.carrier()->tabulate(bound);
      for (std::uint64_t x = 0; x < bound; ++x)
        if (ct.bits[x]) seeds.push_back(x);
      continue;
    }
    // Single-member partition: complete classes are genuinely finite orbits;
    // classes touching the window edge or exceeding the cap are included at
    // reduced confidence.
    FamilyView single;
    single.window = fam.window;
    single.members = {fam.members[i]};
    single.tables = {fam.tables[i]};
    single.inv_tables = {fam.inv_tables[i]};
    OrbitPartition mine = omega_partition(single);
    for (std::size_t c = 0; c < mine.size(); ++c) {
      if (mine.is_complete(c)) {
        // Provably finite; a size past the cap still downgrades confidence.
        if (mine.classes[c].size() > cap) res.confidence = InfiniteConfidence::CapHeuristic;
        continue;
      }
      seeds.insert(seeds.end(), mine.classes[c].begin(), mine.classes[c].end());
      res.confidence = InfiniteConfidence::CapHeuristic;
    }
  }

  ClosureResult closure = omega_closure(fam, std::move(seeds));
  res.points = std::move(closure.points);
  return res;
}

std::string class_size_histogram_csv(const OrbitPartition& part) {
  std::ostringstream os;
  os << "size,count\n";
  for (const auto& [size, count] : part.size_histogram())
    os << size << "," << count << "\n";
  return os.str();
}

}  // namespace permideal
