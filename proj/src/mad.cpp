#include "permideal/mad.hpp"

#include <algorithm>

namespace permideal {

std::vector<std::vector<std::uint64_t>> ADFamily::intersection_counts(
    const Window& w) const {
  std::vector<SetTable> tabs;
  tabs.reserve(members.size());
  for (const auto& m : members) tabs.push_back(m->tabulate(w.bound));
  std::vector<std::vector<std::uint64_t>> out(members.size(),
                                              std::vector<std::uint64_t>(members.size(), 0));
  for (std::size_t i = 0; i < members.size(); ++i)
    for (std::size_t j = i + 1; j < members.size(); ++j) {
      std::uint64_t c = 0;
      for (std::uint64_t x = 0; x < w.bound; ++x)
        c += tabs[i].bits[x] & tabs[j].bits[x];
      out[i][j] = out[j][i] = c;
    }
  return out;
}

ADFamily residue_family(std::uint64_t m) {
  ADFamily fam;
  for (std::uint64_t r = 0; r < m; ++r) fam.members.push_back(SetExpr::residue(m, r));
  return fam;
}

ADFamily tree_branch_family(std::size_t count, const Window& w) {
  ADFamily fam;
  for (std::size_t i = 0; i < count; ++i) {
    // Codes of the prefixes of 1^i 0^infinity; code(s) reads "1 s" in binary.
    std::vector<std::uint64_t> pts;
    std::uint64_t v = 1;
    for (std::size_t len = 1;; ++len) {
      v = 2 * v + (len <= i ? 1 : 0);
      if (v >= w.bound) break;
      pts.push_back(v);
    }
    if (pts.size() < 2)
      throw InsufficientWindow("tree_branch_family: window too small for branch " +
                               std::to_string(i));
    fam.members.push_back(SetExpr::finite(std::move(pts)));
  }
  return fam;
}

std::int64_t vector_sum(const ZeroSumVector& f) {
  std::int64_t s = 0;
  for (const auto& [i, c] : f) s += c;
  return s;
}

ZeroSumVector vector_add(const ZeroSumVector& f, const ZeroSumVector& g) {
  ZeroSumVector h = f;
  for (const auto& [i, c] : g) {
    h[i] += c;
    if (h[i] == 0) h.erase(i);
  }
  return h;
}

PermExpr::Ptr pi_shift(const SetExpr::Ptr& a, std::int64_t j) {
  return PermExpr::successor_shift(a, j);
}

std::vector<std::uint64_t> PhiResult::patch_points() const {
  std::vector<std::uint64_t> out = hull;
  for (const auto& [i, seg] : entry_segments)
    out.insert(out.end(), seg.begin(), seg.end());
  for (const auto& [a, b] : theta) {
    out.push_back(a);
    out.push_back(b);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

PhiResult phi_detail(const ADFamily& family, const ZeroSumVector& f, const Window& w) {
  std::int64_t s = vector_sum(f);
  if (s != 0) throw NonZeroSum(s);

  PhiResult res;
  for (const auto& [i, c] : f) {
    if (c == 0) continue;
    if (i >= family.size()) throw std::invalid_argument("phi: coefficient index out of range");
    res.support.push_back(i);
  }
  if (res.support.empty()) {
    res.perm = PermExpr::identity();
    return res;
  }

  // Member enumerations on the window.
  std::map<std::size_t, std::vector<std::uint64_t>> pts;
  for (auto i : res.support) {
    bool exact = true;
    pts[i] = family.members[i]->enumerate(w.bound, &exact);
    if (!exact)
      throw InsufficientWindow("phi: member " + std::to_string(i) +
                               " not decidable on the window");
  }

  // Minimal hull: pairwise intersections of support members, grown upward so
  // the hull meets each member in an initial segment.
  std::vector<std::uint64_t> hull0;
  for (std::size_t ii = 0; ii < res.support.size(); ++ii)
    for (std::size_t jj = ii + 1; jj < res.support.size(); ++jj) {
      const auto& A = pts[res.support[ii]];
      const auto& B = pts[res.support[jj]];
      std::set_intersection(A.begin(), A.end(), B.begin(), B.end(),
                            std::back_inserter(hull0));
    }
  std::sort(hull0.begin(), hull0.end());
  hull0.erase(std::unique(hull0.begin(), hull0.end()), hull0.end());

  res.hull = hull0;
  std::map<std::size_t, std::uint64_t> cut;  // member -> number of leading points in F
  for (auto i : res.support) {
    const auto& P = pts[i];
    std::uint64_t k = 0;
    if (!hull0.empty()) {
      // Largest hull point on this member determines the initial segment.
      for (std::size_t idx = P.size(); idx-- > 0;) {
        if (std::binary_search(hull0.begin(), hull0.end(), P[idx])) {
          k = idx + 1;
          break;
        }
      }
    }
    cut[i] = k;
    for (std::uint64_t t = 0; t < k; ++t) res.hull.push_back(P[t]);
  }
  std::sort(res.hull.begin(), res.hull.end());
  res.hull.erase(std::unique(res.hull.begin(), res.hull.end()), res.hull.end());

  // Entry segments b*: the first |f(b)| members of b past the hull.
  std::vector<std::uint64_t> minus_stars, plus_stars;
  for (auto i : res.support) {
    const auto& P = pts[i];
    std::uint64_t need = static_cast<std::uint64_t>(std::llabs(f.at(i)));
    if (cut[i] + need + 1 > P.size())
      throw InsufficientWindow("phi: member " + std::to_string(i) +
                               " too thin past the hull");
    std::vector<std::uint64_t> seg(P.begin() + cut[i], P.begin() + cut[i] + need);
    if (f.at(i) > 0)
      plus_stars.insert(plus_stars.end(), seg.begin(), seg.end());
    else
      minus_stars.insert(minus_stars.end(), seg.begin(), seg.end());
    res.entry_segments[i] = std::move(seg);
  }
  std::sort(minus_stars.begin(), minus_stars.end());
  std::sort(plus_stars.begin(), plus_stars.end());
  for (std::size_t k = 0; k < minus_stars.size(); ++k)
    res.theta.emplace_back(minus_stars[k], plus_stars[k]);

  // Assemble: theta on the negative entry segments, shifts elsewhere off the
  // hull, identity outside the support members.
  SetExpr::Ptr hull_set = SetExpr::finite(res.hull);
  std::vector<std::pair<SetExpr::Ptr, PermExpr::Ptr>> cases;
  if (!res.theta.empty()) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> th = res.theta;
    cases.emplace_back(SetExpr::finite(minus_stars),
                       PermExpr::finite_support(std::move(th)));
  }
  for (auto i : res.support) {
    SetExpr::Ptr off_hull = SetExpr::set_difference(family.members[i], hull_set);
    SetExpr::Ptr region =
        f.at(i) > 0 ? off_hull
                    : SetExpr::set_difference(off_hull,
                                              SetExpr::finite(res.entry_segments[i]));
    cases.emplace_back(std::move(region), pi_shift(family.members[i], f.at(i)));
  }
  res.perm = PermExpr::piecewise(std::move(cases), PermExpr::identity());
  return res;
}

PermExpr::Ptr phi(const ADFamily& family, const ZeroSumVector& f, const Window& w) {
  return phi_detail(family, f, w).perm;
}

PermExpr::Ptr phi_pair(const ADFamily& family, std::size_t a, std::size_t b,
                       const Window& w) {
  if (a == b) throw std::invalid_argument("phi_pair: indices must be distinct");
  ZeroSumVector f;
  f[a] = 1;
  f[b] = -1;
  return phi(family, f, w);
}

DefectReport homomorphism_defect(const ADFamily& family, const ZeroSumVector& f,
                                 const ZeroSumVector& g, const Window& w) {
  if (vector_sum(f) != 0) throw NonZeroSum(vector_sum(f));
  if (vector_sum(g) != 0) throw NonZeroSum(vector_sum(g));
  PhiResult pf = phi_detail(family, f, w);
  PhiResult pg = phi_detail(family, g, w);
  PhiResult pfg = phi_detail(family, vector_add(f, g), w);

  PermTable tf = tabulate(*pf.perm, w);
  PermTable tg = tabulate(*pg.perm, w);
  PermTable tfg = tabulate(*pfg.perm, w);

  DefectReport rep;
  const std::uint64_t interior = w.interior();
  for (std::uint64_t n = 0; n < interior; ++n) {
    EvalOutcome gi = tg.at(n);
    if (gi.status == EvalOutcome::Status::Unknown) {
      rep.certified = false;
      continue;
    }
    EvalOutcome comp = gi.is_value() && gi.value < w.bound ? tf.at(gi.value)
                        : gi.is_value() ? EvalOutcome::unknown()
                                        : gi;
    EvalOutcome direct = tfg.at(n);
    if (comp.status == EvalOutcome::Status::Unknown ||
        direct.status == EvalOutcome::Status::Unknown) {
      rep.certified = false;
      continue;
    }
    bool same = comp.status == direct.status &&
                (!comp.is_value() || comp.value == direct.value);
    if (!same) rep.points.push_back(n);
  }

  // Declared patch region: the three assemblies' patch points plus the
  // g-preimage of the f-patch.
  std::vector<std::uint64_t> patch = pf.patch_points();
  auto pgp = pg.patch_points();
  auto pfgp = pfg.patch_points();
  patch.insert(patch.end(), pgp.begin(), pgp.end());
  patch.insert(patch.end(), pfgp.begin(), pfgp.end());
  std::vector<std::uint64_t> fpatch = pf.patch_points();
  std::vector<std::uint8_t> in_fpatch(w.bound, 0);
  for (auto x : fpatch)
    if (x < w.bound) in_fpatch[x] = 1;
  for (std::uint64_t n = 0; n < w.bound; ++n) {
    EvalOutcome gi = tg.at(n);
    if (gi.is_value() && gi.value < w.bound && in_fpatch[gi.value]) patch.push_back(n);
  }
  std::sort(patch.begin(), patch.end());
  patch.erase(std::unique(patch.begin(), patch.end()), patch.end());
  rep.patch = std::move(patch);
  rep.contained = std::includes(rep.patch.begin(), rep.patch.end(), rep.points.begin(),
                                rep.points.end());
  return rep;
}

BijectivityReport verify_bijective_on(const PermTable& t, std::uint64_t check_bound,
                                      std::uint64_t bound) {
  BijectivityReport rep;
  rep.injective = table_injective(t, bound);
  std::vector<std::uint8_t> hit(check_bound, 0);
  for (std::uint64_t n = 0; n < bound; ++n) {
    EvalOutcome o = t.at(n);
    if (o.status == EvalOutcome::Status::Undefined) {
      if (n < check_bound) ++rep.undefined_points;
      continue;
    }
    if (o.is_value() && o.value < check_bound) hit[o.value] = 1;
  }
  for (std::uint64_t n = 0; n < check_bound; ++n)
    if (!hit[n]) {
      rep.first_uncovered = n;
      break;
    }
  return rep;
}

namespace {

std::int64_t index_distance(const std::vector<std::uint64_t>& pts, std::uint64_t from,
                            std::uint64_t to) {
  auto a = std::lower_bound(pts.begin(), pts.end(), from);
  auto b = std::lower_bound(pts.begin(), pts.end(), to);
  return static_cast<std::int64_t>(b - pts.begin()) -
         static_cast<std::int64_t>(a - pts.begin());
}

}  // namespace

MaximalityWitness maximality_witness(const ADFamily& family, const PermExpr::Ptr& pi,
                                     const Window& w, WitnessOptions opts) {
  const std::uint64_t interior = w.interior();
  if (opts.infinite_threshold == 0)
    opts.infinite_threshold = std::max<std::uint64_t>(32, interior / 4096);
  if (opts.finite_slack == 0) opts.finite_slack = opts.infinite_threshold;

  MaximalityWitness res;
  PermTable tp = tabulate(*pi, w);

  std::vector<std::vector<std::uint64_t>> pts(family.size());
  for (std::size_t i = 0; i < family.size(); ++i)
    pts[i] = family.members[i]->enumerate(w.bound);

  auto in_member = [&](std::size_t i, std::uint64_t x) {
    return std::binary_search(pts[i].begin(), pts[i].end(), x);
  };
  auto moved = [&](std::uint64_t x) {
    EvalOutcome o = tp.at(x);
    return o.is_value() && o.value != x;
  };

  // Verified non-commutation collector against a gadget permutation.
  auto verify_points = [&](const PermExpr& gadget, const std::vector<std::uint64_t>& cand) {
    std::vector<std::uint64_t> out;
    for (auto n : cand) {
      if (out.size() >= opts.max_points) break;
      bool inside = true;
      EvalOutcome g1 = raw_eval(gadget, n);
      if (!g1.is_value()) continue;
      EvalOutcome a = g1.value < w.bound ? tp.at(g1.value) : EvalOutcome::unknown();
      EvalOutcome p1 = tp.at(n);
      EvalOutcome b = p1.is_value() ? raw_eval(gadget, p1.value) : p1;
      (void)inside;
      if (!a.is_value() || !b.is_value()) continue;
      if (a.value != b.value) out.push_back(n);
    }
    return out;
  };

  std::vector<std::size_t> heavy;
  for (std::size_t ai = 0; ai < family.size(); ++ai) {
    std::vector<std::uint64_t> inter;  // supp(pi) ∩ a within the interior
    for (auto x : pts[ai]) {
      if (x >= interior) break;
      if (moved(x)) inter.push_back(x);
    }
    if (inter.size() < opts.infinite_threshold) continue;  // finite at window scale
    heavy.push_back(ai);
    std::size_t partner = ai == 0 ? 1 : 0;
    if (family.size() < 2) throw std::invalid_argument("maximality_witness: need >= 2 members");

    // Cofiniteness of supp(pi) within the member: count unmoved member points
    // and, on failure, witness at entry->exit transitions of the support.
    std::vector<std::uint64_t> unmoved;
    for (auto x : pts[ai]) {
      if (x >= interior) break;
      if (!moved(x)) unmoved.push_back(x);
    }
    if (unmoved.size() >= opts.finite_slack) {
      std::vector<std::uint64_t> cand;
      for (std::size_t k = 0; k + 1 < pts[ai].size(); ++k) {
        std::uint64_t n = pts[ai][k], nx = pts[ai][k + 1];
        if (n < interior && moved(n) && !moved(nx) && nx < interior) cand.push_back(n);
      }
      PermExpr::Ptr gadget = phi_pair(family, ai, partner, w);
      res.kind = MaximalityWitness::Kind::CofinitenessFails;
      res.member = ai;
      res.partner = partner;
      res.points = verify_points(*gadget, cand);
      return res;
    }

    // Escape: member points sent outside the member.
    std::vector<std::uint64_t> escapes;
    for (auto x : pts[ai]) {
      if (x >= interior) break;
      EvalOutcome o = tp.at(x);
      if (o.is_value() && !in_member(ai, o.value)) escapes.push_back(x);
    }
    if (escapes.size() >= opts.infinite_threshold) {
      // Pick the partner leaving the most escaped images uncovered.
      std::size_t best = partner;
      std::uint64_t best_out = 0;
      for (std::size_t bi = 0; bi < family.size(); ++bi) {
        if (bi == ai) continue;
        std::uint64_t out_count = 0;
        for (auto x : escapes) {
          EvalOutcome o = tp.at(x);
          if (o.is_value() && !in_member(bi, o.value)) ++out_count;
        }
        if (out_count > best_out) {
          best_out = out_count;
          best = bi;
        }
      }
      std::vector<std::uint64_t> cand;
      for (auto x : escapes) {
        EvalOutcome o = tp.at(x);
        if (o.is_value() && !in_member(best, o.value)) cand.push_back(x);
      }
      PermExpr::Ptr gadget = phi_pair(family, ai, best, w);
      res.kind = MaximalityWitness::Kind::EscapesMember;
      res.member = ai;
      res.partner = best;
      res.points = verify_points(*gadget, cand);
      return res;
    }

    // Shift distance along the member must stabilize.
    std::map<std::int64_t, std::uint64_t> k_counts;
    std::vector<std::int64_t> k_of(pts[ai].size(), 0);
    std::vector<std::uint8_t> k_ok(pts[ai].size(), 0);
    for (std::size_t k = 0; k < pts[ai].size(); ++k) {
      std::uint64_t x = pts[ai][k];
      if (x >= interior) break;
      EvalOutcome o = tp.at(x);
      if (!o.is_value() || !in_member(ai, o.value)) continue;
      k_of[k] = index_distance(pts[ai], x, o.value);
      k_ok[k] = 1;
      ++k_counts[k_of[k]];
    }
    std::vector<std::uint64_t> jumps;
    for (std::size_t k = 0; k + 1 < pts[ai].size(); ++k)
      if (k_ok[k] && k_ok[k + 1] && k_of[k] != k_of[k + 1]) jumps.push_back(pts[ai][k]);
    if (jumps.size() >= opts.infinite_threshold) {
      PermExpr::Ptr gadget = pi_shift(family.members[ai], 1);
      res.kind = MaximalityWitness::Kind::NonUniformExponent;
      res.member = ai;
      res.partner = ai;
      res.points = verify_points(*gadget, jumps);
      return res;
    }
    std::int64_t best_k = 0;
    std::uint64_t best_c = 0;
    for (const auto& [kk, c] : k_counts)
      if (c > best_c) {
        best_c = c;
        best_k = kk;
      }
    res.exponents[ai] = best_k;
  }

  // Support must be covered by the heavy members.
  std::vector<std::uint8_t> covered(interior, 0);
  for (auto ai : heavy)
    for (auto x : pts[ai])
      if (x < interior) covered[x] = 1;
  std::uint64_t spilled = 0;
  std::vector<std::uint64_t> spill_points;
  for (std::uint64_t n = 0; n < interior; ++n)
    if (moved(n) && !covered[n]) {
      ++spilled;
      if (spill_points.size() < opts.max_points) spill_points.push_back(n);
    }
  if (spilled >= opts.infinite_threshold) {
    res.kind = MaximalityWitness::Kind::SupportSpills;
    res.points = std::move(spill_points);
    return res;
  }
  res.kind = MaximalityWitness::Kind::NoneExponents;
  return res;
}

}  // namespace permideal
