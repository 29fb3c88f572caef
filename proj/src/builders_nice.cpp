#include <algorithm>
#include <random>

#include "permideal/builders.hpp"

namespace permideal {

namespace {

constexpr std::uint64_t kInfDisp = UINT64_MAX;

// a/b < c/d for natural ratios, overflow-safe.
bool ratio_less(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  return static_cast<unsigned __int128>(a) * d < static_cast<unsigned __int128>(c) * b;
}

Rat one_plus_eps_bound(const Rat& delta, std::size_t m) {
  // (1 + 2^m (1 - (1+delta)^-m)) (1+delta)^m
  Rat pd = rat_pow(Rat(1) + delta, static_cast<unsigned>(m));
  Rat two_m = rat_pow(Rat(2), static_cast<unsigned>(m));
  return (Rat(1) + two_m * (Rat(1) - Rat(1) / pd)) * pd;
}

std::vector<std::uint64_t> map_domain(
    const std::vector<std::pair<std::uint64_t, std::uint64_t>>& f) {
  std::vector<std::uint64_t> d;
  d.reserve(f.size());
  for (const auto& [a, b] : f) d.push_back(a);
  return d;  // already sorted by construction
}

}  // namespace

bool NiceCondition::dom_contains(std::uint64_t x) const {
  auto it = std::lower_bound(f.begin(), f.end(), std::make_pair(x, std::uint64_t{0}));
  return it != f.end() && it->first == x;
}

const NiceFamily::LevelData& NiceFamily::level(std::size_t m) const {
  if (m > members.size())
    throw std::invalid_argument("NiceFamily::level: prefix longer than the family");
  auto it = cache_->find(m);
  if (it != cache_->end()) return it->second;

  LevelData ld;
  ld.view = FamilyView::make({members.begin(), members.begin() + m}, window);
  ld.part = omega_partition(ld.view);

  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      NCReport nc = nc_set(*members[i], *members[j], window);
      ld.nc_union.insert(ld.nc_union.end(), nc.points.begin(), nc.points.end());
    }
  std::sort(ld.nc_union.begin(), ld.nc_union.end());
  ld.nc_union.erase(std::unique(ld.nc_union.begin(), ld.nc_union.end()),
                    ld.nc_union.end());

  const std::uint64_t bound = window.bound;
  ld.displacement.assign(bound, 0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& t = ld.view.tables[i].t;
    for (std::uint64_t n = 0; n < bound; ++n) {
      if (t[n] < 0) {
        ld.displacement[n] = kInfDisp;  // window-limited knowledge
        continue;
      }
      std::uint64_t v = static_cast<std::uint64_t>(t[n]);
      std::uint64_t d = v > n ? v - n : n - v;
      if (ld.displacement[n] != kInfDisp)
        ld.displacement[n] = std::max(ld.displacement[n], d);
    }
  }

  const std::uint64_t interior = window.interior();
  ld.ratio_suffix_argmax.assign(interior, 0);
  std::uint32_t best = static_cast<std::uint32_t>(interior - 1);
  for (std::uint64_t n = interior; n-- > 1;) {
    if (ld.displacement[n] == kInfDisp)
      best = static_cast<std::uint32_t>(n);
    else if (ld.displacement[best] != kInfDisp &&
             ratio_less(ld.displacement[best], best, ld.displacement[n],
                        static_cast<std::uint64_t>(n)))
      best = static_cast<std::uint32_t>(n);
    ld.ratio_suffix_argmax[n] = best;
  }
  if (interior > 0) ld.ratio_suffix_argmax[0] = best;

  // Longest suffix of complete classes sharing one type.
  ld.stable_from = 0;
  std::optional<ClassType> last_type;
  for (std::size_t c = ld.part.size(); c-- > 0;) {
    if (!ld.part.is_complete(c)) continue;
    ClassType ty = class_type(ld.view, ld.part.classes[c]);
    if (!last_type) {
      last_type = std::move(ty);
      continue;
    }
    if (!(ty == *last_type)) {
      ld.stable_from = c + 1;
      break;
    }
  }

  auto [pos, inserted] = cache_->emplace(m, std::move(ld));
  (void)inserted;
  return pos->second;
}

namespace {

// Exact sup of displacement(n)/n over [from, interior), nullopt when infinite
// (a moved 0, or window-limited knowledge inside the range).
std::optional<Rat> tail_ratio_sup(const NiceFamily::LevelData& ld, std::uint64_t from,
                                  std::uint64_t interior) {
  if (from == 0 && ld.displacement[0] > 0) return std::nullopt;
  from = std::max<std::uint64_t>(from, 1);
  if (from >= interior) return Rat(0);
  std::uint32_t am = ld.ratio_suffix_argmax[from];
  if (ld.displacement[am] == kInfDisp) return std::nullopt;
  return rat_u64(ld.displacement[am], am);
}

}  // namespace

OrbitPartition nice_partition(const NiceFamily& fam, std::size_t m) {
  return fam.level(m).part;
}

FamilyView nice_view(const NiceFamily& fam, std::size_t m) { return fam.level(m).view; }

ConditionReport nice_validate(const NiceCondition& c, const NiceFamily& fam) {
  ConditionReport rep;
  if (c.m > fam.members.size()) {
    rep.detail = "prefix longer than the family";
    return rep;
  }
  const auto& lv = fam.level(c.m);

  // Involution permuting its own domain.
  rep.involution_ok = true;
  std::vector<std::uint64_t> dom = map_domain(c.f);
  for (const auto& [a, b] : c.f) {
    auto it = std::lower_bound(c.f.begin(), c.f.end(), std::make_pair(b, std::uint64_t{0}));
    if (it == c.f.end() || it->first != b || it->second != a) {
      rep.involution_ok = false;
      rep.detail = "not self-inverse at " + std::to_string(a);
      break;
    }
  }

  // Domain must be the first iP classes of the level partition.
  std::vector<std::uint64_t> expected;
  for (std::size_t cl = 0; cl < c.iP && cl < lv.part.size(); ++cl)
    expected.insert(expected.end(), lv.part.classes[cl].begin(),
                    lv.part.classes[cl].end());
  std::sort(expected.begin(), expected.end());
  rep.domain_ok = c.iP <= lv.part.size() && dom == expected;
  if (!rep.domain_ok && rep.detail.empty())
    rep.detail = "domain is not the class prefix";

  rep.classes_isomorphic = lv.stable_from <= c.iP;
  if (!rep.classes_isomorphic && rep.detail.empty())
    rep.detail = "class types differ past the frontier";

  rep.commute_outside = true;
  for (auto n : lv.nc_union)
    if (!c.dom_contains(n)) {
      rep.commute_outside = false;
      if (rep.detail.empty())
        rep.detail = "members fail to commute at " + std::to_string(n);
      break;
    }

  // delta over the complement (fast path for prefix domains).
  std::optional<Rat> delta;
  bool prefix_dom = dom.empty() || dom.back() + 1 == dom.size();
  if (c.m == 0) {
    delta = Rat(0);
  } else if (prefix_dom) {
    delta = tail_ratio_sup(lv, dom.size(), fam.window.interior());
  } else {
    Rat best(0);
    bool infinite = false;
    for (std::uint64_t n = 0; n < fam.window.interior(); ++n) {
      if (c.dom_contains(n)) continue;
      if (lv.displacement[n] == 0) continue;
      if (n == 0 || lv.displacement[n] == kInfDisp) {
        infinite = true;
        break;
      }
      best = std::max(best, rat_u64(lv.displacement[n], n));
    }
    if (!infinite) delta = best;
  }
  if (!delta) {
    rep.eps_ok = false;
    if (rep.detail.empty()) rep.detail = "ratio defect unbounded off the domain";
    return rep;
  }
  rep.delta = *delta;
  rep.eps_ok = one_plus_eps_bound(*delta, c.m) < Rat(1) + c.epsilon;
  if (!rep.eps_ok && rep.detail.empty()) rep.detail = "epsilon bound fails";
  return rep;
}

ExtensionReport nice_validate_extension(const NiceCondition& older,
                                        const NiceCondition& newer,
                                        const NiceFamily& fam) {
  ExtensionReport rep;
  if (newer.epsilon > older.epsilon || newer.m < older.m) {
    rep.detail = "parameter order violated";
    return rep;
  }
  for (const auto& [a, b] : older.f)
    if (!newer.dom_contains(a)) {
      rep.detail = "domain shrank";
      return rep;
    }

  const auto& lv = fam.level(newer.m);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> fresh;
  for (const auto& [a, b] : newer.f)
    if (!older.dom_contains(a)) fresh.emplace_back(a, b);

  // (A3): fresh domain splits into whole classes matched in pairs by the
  // order isomorphism.
  rep.pairing_ok = true;
  std::set<std::size_t> fresh_classes;
  for (const auto& [a, b] : fresh) fresh_classes.insert(lv.part.class_of(a));
  std::set<std::size_t> seen;
  for (auto u : fresh_classes) {
    if (seen.count(u)) continue;
    const auto& A = lv.part.classes[u];
    auto it = std::lower_bound(newer.f.begin(), newer.f.end(),
                               std::make_pair(A.front(), std::uint64_t{0}));
    if (it == newer.f.end() || it->first != A.front()) {
      rep.pairing_ok = false;
      break;
    }
    std::size_t v = lv.part.class_of(it->second);
    if (v == u || !fresh_classes.count(v)) {
      rep.pairing_ok = false;
      break;
    }
    const auto& B = lv.part.classes[v];
    auto dm = delta_map(A, B);
    for (const auto& [a, b] : dm) {
      auto jt = std::lower_bound(newer.f.begin(), newer.f.end(),
                                 std::make_pair(a, std::uint64_t{0}));
      if (jt == newer.f.end() || jt->first != a || jt->second != b) {
        rep.pairing_ok = false;
        break;
      }
    }
    seen.insert(u);
    seen.insert(v);
  }
  if (!rep.pairing_ok) {
    rep.detail = "fresh part is not a pairwise class matching";
    return rep;
  }

  // (A4) against the older epsilon.
  rep.ratio_ok = true;
  rep.worst_margin = older.epsilon;
  for (const auto& [a, b] : fresh) {
    if (a == 0) {
      rep.ratio_ok = b == 0;
      if (!rep.ratio_ok) {
        rep.detail = "ratio undefined at 0";
        return rep;
      }
      continue;
    }
    Rat r = rat_u64(b, a);
    Rat lo_margin = r - (Rat(1) - older.epsilon);
    Rat hi_margin = (Rat(1) + older.epsilon) - r;
    if (!(lo_margin > 0 && hi_margin > 0)) {
      rep.ratio_ok = false;
      rep.detail = "ratio bound fails at " + std::to_string(a);
      return rep;
    }
    rep.worst_margin = std::min(rep.worst_margin, std::min(lo_margin, hi_margin));
  }
  return rep;
}

NiceCondition nice_genesis(const NiceFamily& fam, std::size_t m, const Rat& epsilon,
                           std::size_t iP) {
  const auto& lv = fam.level(m);
  if (iP > lv.part.size()) throw WindowExhausted("nice_genesis: not enough classes");
  NiceCondition c;
  c.m = m;
  c.epsilon = epsilon;
  c.iP = iP;
  for (std::size_t cl = 0; cl < iP; ++cl)
    for (auto x : lv.part.classes[cl]) c.f.emplace_back(x, x);
  std::sort(c.f.begin(), c.f.end());
  return c;
}

NiceCondition nice_extend_point(const NiceCondition& c, const NiceFamily& fam,
                                std::uint64_t u) {
  if (u >= fam.window.interior())
    throw WindowExhausted("nice_extend_point: point outside the certified interior");
  const auto& lv = fam.level(c.m);
  NiceCondition cur = c;
  while (!cur.dom_contains(u)) {
    if (cur.iP + 1 >= lv.part.size())
      throw WindowExhausted("nice_extend_point: class supply exhausted");
    const auto& A = lv.part.classes[cur.iP];
    const auto& B = lv.part.classes[cur.iP + 1];
    if (!lv.part.is_complete(cur.iP) || !lv.part.is_complete(cur.iP + 1))
      throw WindowExhausted("nice_extend_point: frontier class touches the edge");
    if (!(class_type(lv.view, A) == class_type(lv.view, B)))
      throw ClassesNotIsomorphic("nice_extend_point: frontier classes differ in type");
    auto dm = delta_map(A, B);
    for (const auto& [a, b] : dm) {
      // (A4) in both directions with the current epsilon.
      if (a == 0 || b == 0)
        throw A4Violated("nice_extend_point: ratio undefined at 0");
      Rat r1 = rat_u64(b, a), r2 = rat_u64(a, b);
      for (const Rat& r : {r1, r2})
        if (!(Rat(1) - cur.epsilon < r && r < Rat(1) + cur.epsilon))
          throw A4Violated("nice_extend_point: ratio bound fails pairing classes " +
                           std::to_string(cur.iP) + "," + std::to_string(cur.iP + 1));
    }
    for (const auto& [a, b] : dm) {
      cur.f.emplace_back(a, b);
      cur.f.emplace_back(b, a);
    }
    std::sort(cur.f.begin(), cur.f.end());
    cur.iP += 2;
  }
  return cur;
}

NiceCondition nice_extend_params(const NiceCondition& c, const NiceFamily& fam,
                                 const Rat& newEpsilon, std::size_t newM) {
  if (newM < c.m) throw std::invalid_argument("nice_extend_params: m cannot shrink");
  if (newM > fam.members.size())
    throw std::invalid_argument("nice_extend_params: prefix longer than the family");
  if (!(newEpsilon > 0))
    throw std::invalid_argument("nice_extend_params: epsilon must be positive");

  const auto& lv_new = fam.level(newM);
  NiceCondition cur = c;
  for (std::size_t rounds = 0;; ++rounds) {
    if (rounds > fam.window.bound)
      throw WindowExhausted("nice_extend_params: no valid alignment in the window");
    std::uint64_t P = cur.f.size();  // prefix domain [0, P) in the intended flows
    bool prefix = cur.f.empty() || cur.f.back().first + 1 == cur.f.size();
    if (!prefix)
      throw Error("nice_extend_params: domain is not an initial segment");

    // Count level-newM classes fully inside [0, P).
    std::size_t k = 0;
    std::uint64_t covered = 0;
    bool straddle = false;
    for (std::size_t cl = 0; cl < lv_new.part.size(); ++cl) {
      const auto& cls = lv_new.part.classes[cl];
      if (cls.front() >= P) break;
      if (cls.back() >= P) {
        straddle = true;
        break;
      }
      covered += cls.size();
      ++k;
    }
    if (!straddle && covered == P) {
      NiceCondition candidate = cur;
      candidate.m = newM;
      candidate.epsilon = newEpsilon;
      candidate.iP = k;
      if (nice_validate(candidate, fam).ok()) return candidate;
    }
    cur = nice_extend_point(cur, fam, static_cast<std::uint64_t>(cur.f.size()));
  }
}

NiceCheckReport nice_check(const NiceFamily& fam, const Rat& ratio_threshold) {
  NiceCheckReport rep;
  const std::uint64_t interior = fam.window.interior();
  const std::size_t n = fam.members.size();
  if (n == 0) {
    rep.ratio_tends_to_one = rep.involutions = rep.pairwise_nc_finite =
        rep.class_types_stabilize = true;
    return rep;
  }
  const auto& lv = fam.level(n);

  // Condition 1: ratio defect on the far half of the window.
  rep.ratio_tends_to_one = true;
  for (std::size_t i = 0; i < n; ++i) {
    Rat sup(0);
    bool infinite = false;
    std::uint64_t best_num = 0, best_den = 1;
    const auto& t = lv.view.tables[i].t;
    for (std::uint64_t x = interior / 2; x < interior; ++x) {
      if (t[x] < 0) {
        infinite = true;
        break;
      }
      std::uint64_t v = static_cast<std::uint64_t>(t[x]);
      std::uint64_t d = v > x ? v - x : x - v;
      if (ratio_less(best_num, best_den, d, x)) {
        best_num = d;
        best_den = x;
      }
    }
    if (infinite) {
      rep.ratio_tends_to_one = false;
      rep.witness = "member " + std::to_string(i) + ": window-limited on the far half";
    } else {
      sup = rat_u64(best_num, best_den);
      rep.tail_ratio_sup.push_back(sup);
      if (!(sup <= ratio_threshold)) {
        rep.ratio_tends_to_one = false;
        rep.witness = "member " + std::to_string(i) + ": tail ratio defect " +
                      dec_string(sup);
      }
    }
  }

  // Condition 2: involutions, pointwise.
  rep.involutions = true;
  for (std::size_t i = 0; i < n && rep.involutions; ++i) {
    const auto& t = lv.view.tables[i].t;
    for (std::uint64_t x = 0; x < interior; ++x) {
      if (t[x] < 0) continue;
      std::uint64_t v = static_cast<std::uint64_t>(t[x]);
      if (v < fam.window.bound && t[v] >= 0 &&
          static_cast<std::uint64_t>(t[v]) != x) {
        rep.involutions = false;
        rep.witness = "member " + std::to_string(i) + " not an involution at " +
                      std::to_string(x);
        break;
      }
    }
  }

  // Condition 3: pairwise non-commutation confined to the near half.
  rep.nc_pair_count = lv.nc_union.size();
  rep.pairwise_nc_finite =
      lv.nc_union.empty() || lv.nc_union.back() < interior / 2;
  if (!rep.pairwise_nc_finite)
    rep.witness = "non-commutation at " + std::to_string(lv.nc_union.back());

  // Condition 4: class types stabilize at every level.
  rep.class_types_stabilize = true;
  for (std::size_t m = 1; m <= n; ++m) {
    const auto& lm = fam.level(m);
    rep.km[m] = lm.stable_from;
    if (lm.stable_from >= lm.part.size()) {
      rep.class_types_stabilize = false;
      rep.witness = "no stable class tail at level " + std::to_string(m);
      continue;
    }
    const auto& cls = lm.part.classes[lm.stable_from];
    if (cls.front() > interior / 2) {
      rep.class_types_stabilize = false;
      rep.witness = "stability only past the far half at level " + std::to_string(m);
    }
  }
  return rep;
}

NiceFamily build_nice_family(std::uint64_t seed, std::size_t count, const Window& w) {
  NiceFamily fam;
  fam.window = w;
  std::uint64_t prev_end = 0;

  for (std::size_t k = 0; k < count; ++k) {
    std::mt19937_64 rng(seed * 1000003 + k);
    const std::uint64_t blocksz = std::uint64_t{1} << k;
    const std::uint64_t align = blocksz * 2;
    std::uint64_t span = (4 + 2 * (rng() % 4)) * blocksz;
    std::uint64_t genesis = std::max(prev_end, span);
    genesis = (genesis + align - 1) / align * align;
    if (genesis * 4 > w.interior())
      throw WindowExhausted("build_nice_family: genesis region crowds the window");

    // Seeded involution on [0, genesis): a random perfect matching with a few
    // sprinkled fixed points.
    std::vector<std::uint64_t> pool(genesis);
    for (std::uint64_t x = 0; x < genesis; ++x) pool[x] = x;
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
    for (std::uint64_t t = 0; t + 1 < genesis; t += 2) {
      if (rng() % 8 == 0) continue;  // leave both fixed
      pairs.emplace_back(pool[t], pool[t + 1]);
      pairs.emplace_back(pool[t + 1], pool[t]);
    }
    std::vector<std::uint64_t> region(genesis);
    for (std::uint64_t x = 0; x < genesis; ++x) region[x] = x;
    PermExpr::Ptr member = PermExpr::piecewise(
        {{SetExpr::finite(region), PermExpr::finite_support(pairs)}},
        PermExpr::swap_periodic(2 * blocksz, 0, blocksz, blocksz));

    fam.members.push_back(member);
    fam.genesis_end.push_back(genesis);

    // Certification: the genesis condition is valid and a few sampled
    // extensions validate as poset moves that agree with the member's rule.
    const auto& lv = fam.level(k);
    std::size_t iP0 = 0;
    std::uint64_t covered = 0;
    while (iP0 < lv.part.size() && covered < genesis)
      covered += lv.part.classes[iP0++].size();
    if (covered != genesis)
      throw Error("build_nice_family: genesis region is not class-aligned");

    NiceCondition cond = nice_genesis(fam, k, Rat(1), iP0);
    // Patch the genesis involution into the condition.
    cond.f.clear();
    for (auto& pr : pairs) cond.f.push_back(pr);
    for (std::uint64_t x = 0; x < genesis; ++x)
      if (!std::any_of(pairs.begin(), pairs.end(),
                       [&](const auto& pr) { return pr.first == x; }))
        cond.f.emplace_back(x, x);
    std::sort(cond.f.begin(), cond.f.end());

    std::optional<Rat> delta = tail_ratio_sup(lv, genesis, w.interior());
    if (!delta) throw Error("build_nice_family: unbounded defect past the genesis");
    Rat needed = one_plus_eps_bound(*delta, k) - Rat(1);
    cond.epsilon = needed * 2 + Rat(1, 1024);
    ConditionReport rep = nice_validate(cond, fam);
    if (!rep.ok()) throw Error("build_nice_family: genesis fails: " + rep.detail);

    NiceCondition cur = cond;
    for (int step = 0; step < 6; ++step) {
      NiceCondition next =
          nice_extend_point(cur, fam, static_cast<std::uint64_t>(cur.f.size()));
      ExtensionReport ext = nice_validate_extension(cur, next, fam);
      if (!ext.ok())
        throw Error("build_nice_family: sampled extension fails: " + ext.detail);
      for (const auto& [a, b] : next.f) {
        EvalOutcome o = raw_eval(*member, a);
        if (!o.is_value() || o.value != b)
          throw Error("build_nice_family: member disagrees with its conditions");
      }
      cur = next;
    }
    prev_end = genesis;
  }

  const std::uint64_t interior = w.interior();
  for (std::size_t k = 0; k < count; ++k) {
    PermTable t = tabulate(*fam.members[k], Window(interior));
    std::uint64_t bn = 0, bd = 1;
    for (std::uint64_t x = 1; x < interior; ++x) {
      if (t.t[x] < 0) continue;
      std::uint64_t v = static_cast<std::uint64_t>(t.t[x]);
      std::uint64_t d = v > x ? v - x : x - v;
      if (ratio_less(bn, bd, d, x)) {
        bn = d;
        bd = x;
      }
    }
    fam.ratio_sup.push_back(rat_u64(bn, bd));
  }
  for (std::size_t m = 1; m <= count; ++m)
    fam.km_table[m] = fam.level(m).stable_from;
  return fam;
}

Cm1Report cm1_verify(const NiceFamily& fam, std::size_t m, std::size_t iLo,
                     std::size_t iHi, std::size_t k, const Rat& epsilon) {
  if (k == 0) throw std::invalid_argument("cm1_verify: jump must be positive");
  const auto& lv = fam.level(m);
  if (iHi + k >= lv.part.size() || iLo > iHi)
    throw std::invalid_argument("cm1_verify: class range outside the window");
  for (std::size_t c = iLo; c <= iHi + k; ++c)
    if (!lv.part.is_complete(c))
      throw HypothesisFails("cm1_verify: class " + std::to_string(c) +
                            " touches the window edge");

  const Rat one(1);
  Rat pe = rat_pow(one + epsilon, static_cast<unsigned>(m));
  Rat step_cap = one + rat_pow(Rat(2), static_cast<unsigned>(m)) * (one - one / pe);

  // Ratio hypothesis on every class that can interfere with the counting:
  // anything reaching above min(class iLo) shrunk by the spread bound.
  Rat floor_pt = rat_u64(lv.part.classes[iLo].front(), 1) / pe;
  for (std::size_t c = 0; c <= iHi + k; ++c) {
    if (!lv.part.is_complete(c)) continue;
    const auto& cls = lv.part.classes[c];
    if (Rat(int_from_u64(cls.back())) < floor_pt) continue;
    for (auto x : cls) {
      if (x == 0)
        throw HypothesisFails("cm1_verify: hypothesis fails at 0");
      for (std::size_t s = 0; s < m; ++s) {
        EvalOutcome o = lv.view.fwd(s, x);
        if (!o.is_value())
          throw HypothesisFails("cm1_verify: member undefined at " + std::to_string(x));
        Rat r = rat_u64(o.value, x);
        if (!(one - epsilon < r && r < one + epsilon))
          throw HypothesisFails("cm1_verify: ratio hypothesis fails at " +
                                std::to_string(x) + " (class " + std::to_string(c) +
                                ")");
      }
    }
  }

  Cm1Report rep;
  for (std::size_t i = iLo; i <= iHi; ++i) {
    const auto& A = lv.part.classes[i];
    const auto& N1 = lv.part.classes[i + 1];
    const auto& Nk = lv.part.classes[i + k];
    Cm1Row row;
    row.class_index = i;
    row.spread = rat_u64(A.back(), A.front());
    row.spread_cap = pe;
    row.step_ratio = rat_u64(N1.front(), A.front());
    row.step_cap = step_cap;
    row.jump_ratio = rat_u64(Nk.front(), A.front());
    row.jump_cap = rat_pow(step_cap, static_cast<unsigned>(k));
    row.iso_cap_lo = rat_pow(one - epsilon, static_cast<unsigned>(m));
    row.iso_cap_hi = row.jump_cap * pe;

    auto iso = s_isomorphic(lv.view, A, Nk);
    if (!iso)
      throw HypothesisFails("cm1_verify: classes " + std::to_string(i) + " and " +
                            std::to_string(i + k) + " are not isomorphic");
    row.iso_lo = rat_u64(iso->front().second, iso->front().first);
    row.iso_hi = row.iso_lo;
    for (const auto& [a, b] : *iso) {
      Rat r = rat_u64(b, a);
      row.iso_lo = std::min(row.iso_lo, r);
      row.iso_hi = std::max(row.iso_hi, r);
    }
    row.ok = row.spread < row.spread_cap && row.step_ratio < row.step_cap &&
             row.jump_ratio < row.jump_cap && row.iso_cap_lo < row.iso_lo &&
             row.iso_hi < row.iso_cap_hi;
    rep.all_hold = rep.all_hold && row.ok;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

DiagMassResult diagonalize_summable(const NiceCondition& c, const NiceFamily& fam,
                                    const PermExpr::Ptr& pi, std::uint64_t k,
                                    const Rat& targetMass) {
  const Window& w = fam.window;
  const std::uint64_t interior = w.interior();
  const auto& lv = fam.level(c.m);
  PermTable tp = tabulate(*pi, w);
  PermTable tpinv = tabulate(*invert(pi), w);

  DiagMassResult res;
  res.condition = c;
  std::map<std::uint64_t, std::uint64_t> f(res.condition.f.begin(),
                                           res.condition.f.end());
  auto fhat = [&](std::uint64_t x) {
    auto it = f.find(x);
    return it == f.end() ? x : it->second;
  };
  auto disagrees = [&](std::uint64_t x) -> bool {
    std::uint64_t y = fhat(x);
    if (y >= w.bound) return false;
    EvalOutcome a = tp.at(y);
    EvalOutcome b0 = tp.at(x);
    if (!a.is_value() || !b0.is_value()) return false;
    std::uint64_t b = b0.value < w.bound ? fhat(b0.value) : b0.value;
    return a.value != b;
  };

  // Scaled certified lower bound of the reciprocal mass, plus the witness set.
  constexpr std::uint64_t kScale = std::uint64_t{1} << 40;
  std::vector<std::uint8_t> wit(interior, 0);
  std::uint64_t lb = 0;
  auto weight_lb = [&](std::uint64_t x) { return x == 0 ? kScale : kScale / x; };
  for (std::uint64_t x = k; x < interior; ++x)
    if (disagrees(x)) {
      wit[x] = 1;
      lb += weight_lb(x);
    }

  auto refresh_points = [&](const std::vector<std::uint64_t>& affected) {
    for (auto x : affected) {
      if (x < k || x >= interior) continue;
      bool now = disagrees(x);
      if (now && !wit[x]) {
        wit[x] = 1;
        lb += weight_lb(x);
      } else if (!now && wit[x]) {
        wit[x] = 0;
        lb -= weight_lb(x);
      }
    }
  };

  auto target_reached = [&] { return Rat(int_from_u64(lb), int_from_u64(kScale)) > targetMass; };

  std::size_t frontier = res.condition.iP;
  while (!target_reached()) {
    if (frontier + 6 > lv.part.size()) break;
    bool group_ok = true;
    for (std::size_t t = 0; t < 6; ++t)
      if (!lv.part.is_complete(frontier + t)) group_ok = false;
    if (!group_ok) break;

    // Induced pattern of pi on the six classes, when well defined.
    Sym6 pattern{};
    bool pattern_total = true;
    for (std::size_t t = 0; t < 6 && pattern_total; ++t) {
      const auto& cls = lv.part.classes[frontier + t];
      std::optional<std::size_t> dest;
      for (auto x : cls) {
        EvalOutcome o = tp.at(x);
        if (!o.is_value() || o.value >= w.bound) {
          pattern_total = false;
          break;
        }
        std::size_t dc = lv.part.class_of(o.value);
        if (dc < frontier || dc >= frontier + 6) {
          pattern_total = false;
          break;
        }
        if (dest && *dest != dc) {
          pattern_total = false;
          break;
        }
        dest = dc;
      }
      if (pattern_total && dest) pattern[t] = static_cast<std::uint8_t>(*dest - frontier);
    }
    bool pattern_perm = pattern_total;
    if (pattern_total) {
      std::array<bool, 6> seen{};
      for (int t = 0; t < 6; ++t) {
        if (seen[pattern[t]]) pattern_perm = false;
        seen[pattern[t]] = true;
      }
    }
    bool pattern_id = true;
    for (int t = 0; t < 6; ++t)
      if (pattern[t] != t) pattern_id = false;

    // Candidate order: the witness against the induced pattern first, then
    // every pairing; the least pairing doubles as the structural fallback.
    std::vector<Sym6> sigmas;
    if (pattern_perm && !pattern_id) sigmas.push_back(sym6_witness(pattern));
    for (const Sym6& s : sym6_fpf_involutions()) sigmas.push_back(s);

    auto try_gadget = [&](const std::vector<std::pair<std::uint64_t, std::uint64_t>>&
                              gadget) -> std::optional<std::uint64_t> {
      // (A4) with the condition's epsilon.
      for (const auto& [a, b] : gadget) {
        if (a == 0) return std::nullopt;
        Rat r = rat_u64(b, a);
        if (!(Rat(1) - res.condition.epsilon < r && r < Rat(1) + res.condition.epsilon))
          return std::nullopt;
      }
      // Tentative mass gain over the affected points.
      std::vector<std::uint64_t> affected;
      for (const auto& [a, b] : gadget) {
        affected.push_back(a);
        EvalOutcome pre = tpinv.at(a);
        if (pre.is_value() && pre.value < w.bound) affected.push_back(pre.value);
      }
      std::sort(affected.begin(), affected.end());
      affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
      std::int64_t delta = 0;
      for (const auto& [a, b] : gadget) f[a] = b;
      for (auto x : affected) {
        if (x < k || x >= interior) continue;
        bool now = disagrees(x);
        if (now && !wit[x]) delta += static_cast<std::int64_t>(weight_lb(x));
        if (!now && wit[x]) delta -= static_cast<std::int64_t>(weight_lb(x));
      }
      // Gadget keys live beyond the frontier, so plain erasure restores f.
      for (const auto& [a, b] : gadget) f.erase(a);
      if (delta > 0) return static_cast<std::uint64_t>(delta);
      return std::nullopt;
    };

    auto build_within = [&](const Sym6& sigma) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> g;
      for (std::size_t t = 0; t < 6; ++t) {
        std::size_t u = frontier + t, v = frontier + sigma[t];
        if (u >= v) continue;
        for (const auto& [a, b] : delta_map(lv.part.classes[u], lv.part.classes[v])) {
          g.emplace_back(a, b);
          g.emplace_back(b, a);
        }
      }
      return g;
    };

    auto types_fine = [&](const Sym6& sigma) {
      for (std::size_t t = 0; t < 6; ++t) {
        std::size_t u = frontier + t, v = frontier + sigma[t];
        if (u < v &&
            !(class_type(lv.view, lv.part.classes[u]) ==
              class_type(lv.view, lv.part.classes[v])))
          return false;
      }
      return true;
    };
    auto a4_fine = [&](const std::vector<std::pair<std::uint64_t, std::uint64_t>>& g) {
      for (const auto& [a, b] : g) {
        if (a == 0) return false;
        Rat r = rat_u64(b, a);
        if (!(Rat(1) - res.condition.epsilon < r && r < Rat(1) + res.condition.epsilon))
          return false;
      }
      return true;
    };
    auto accept = [&](const std::vector<std::pair<std::uint64_t, std::uint64_t>>& gadget,
                      bool gained) {
      for (const auto& [a, b] : gadget) f[a] = b;
      std::vector<std::uint64_t> affected;
      for (const auto& [a, b] : gadget) {
        affected.push_back(a);
        EvalOutcome pre = tpinv.at(a);
        if (pre.is_value() && pre.value < w.bound) affected.push_back(pre.value);
      }
      refresh_points(affected);
      for (const auto& [a, b] : gadget) res.condition.f.emplace_back(a, b);
      res.gadget_log.push_back("group " + std::to_string(frontier) +
                               (gained ? " pairing gain" : " pairing fill"));
    };

    bool accepted = false;
    for (const Sym6& sigma : sigmas) {
      if (!types_fine(sigma)) continue;
      auto gadget = build_within(sigma);
      if (auto gain = try_gadget(gadget)) {
        accept(gadget, true);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Structural fill with the least pairing keeps the domain a class
      // prefix; a ratio failure here means the window is spent.
      const Sym6& least = sym6_fpf_involutions().front();
      if (!types_fine(least)) break;
      auto gadget = build_within(least);
      if (!a4_fine(gadget)) break;
      accept(gadget, false);
    }
    frontier += 6;
    res.condition.iP = frontier;
  }

  std::sort(res.condition.f.begin(), res.condition.f.end());
  res.condition.f.erase(std::unique(res.condition.f.begin(), res.condition.f.end()),
                        res.condition.f.end());

  // Exact reciprocal mass of the final witness set, balanced merge.
  std::vector<Rat> terms;
  for (std::uint64_t x = k; x < interior; ++x)
    if (wit[x]) {
      res.witnesses.push_back(x);
      terms.push_back(x == 0 ? Rat(1) : rat(Int(1), int_from_u64(x)));
    }
  while (terms.size() > 1) {
    std::vector<Rat> next;
    for (std::size_t t = 0; t + 1 < terms.size(); t += 2)
      next.push_back(terms[t] + terms[t + 1]);
    if (terms.size() % 2) next.push_back(terms.back());
    terms = std::move(next);
  }
  res.mass = terms.empty() ? Rat(0) : terms[0];
  return res;
}

}  // namespace permideal
