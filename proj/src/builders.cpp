#include "permideal/builders.hpp"

#include <algorithm>

namespace permideal {

nlohmann::ordered_json AuditRecord::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["rule"] = rule;
  if (point) j["point"] = *point;
  if (member) j["member"] = *member;
  if (witness) j["witness"] = *witness;
  j["added"] = added;
  if (!note.empty()) j["note"] = note;
  return j;
}

TowerBuilder::TowerBuilder(const Window& w) : window_(w) {
  fam_ = FamilyView::make({}, w);
  refresh();
}

void TowerBuilder::refresh() {
  part_ = omega_partition(fam_);
  istar_ = infinite_part(fam_, window_.bound);
  istar_mask_.assign(window_.bound, 0);
  for (auto p : istar_.points) istar_mask_[p] = 1;
}

std::size_t TowerBuilder::join_member(const PermExpr::Ptr& pi) {
  std::vector<std::uint64_t> dom;
  dom.reserve(h_.size());
  for (const auto& [a, b] : h_) dom.push_back(a);
  dom_at_join_.push_back(std::move(dom));

  fam_ = FamilyView::make(
      [&] {
        auto ms = fam_.members;
        ms.push_back(pi);
        return ms;
      }(),
      window_);
  refresh();

  AuditRecord rec;
  rec.step = ++steps_;
  rec.rule = "join-member";
  rec.member = fam_.size() - 1;
  audit_.push_back(std::move(rec));
  return fam_.size() - 1;
}

void TowerBuilder::add_pairs(
    const std::vector<std::pair<std::uint64_t, std::uint64_t>>& pairs, AuditRecord rec) {
  for (const auto& [a, b] : pairs) {
    if (in_dom(a) && h_[a] != b)
      throw Error("tower: extension collides with existing involution");
  }
  for (const auto& [a, b] : pairs) {
    h_[a] = b;
    h_[b] = a;
    rec.added.push_back(a);
    if (b != a) rec.added.push_back(b);
  }
  std::sort(rec.added.begin(), rec.added.end());
  rec.added.erase(std::unique(rec.added.begin(), rec.added.end()), rec.added.end());
  rec.step = ++steps_;
  audit_.push_back(std::move(rec));
}

void TowerBuilder::extend_point(std::uint64_t n) {
  if (n >= window_.bound) throw std::invalid_argument("tower: point outside window");
  AuditRecord rec;
  rec.point = n;
  if (in_dom(n)) {
    rec.rule = "noop-domain";
    rec.step = ++steps_;
    audit_.push_back(std::move(rec));
    return;
  }
  if (istar_mask_[n]) {
    rec.rule = "noop-infinite";
    rec.step = ++steps_;
    audit_.push_back(std::move(rec));
    return;
  }
  std::size_t c = part_.class_of(n);
  if (!part_.is_complete(c))
    throw IncompleteClass("tower: class of " + std::to_string(n) +
                          " touches the window edge");
  const auto& cls = part_.classes[c];
  std::vector<std::uint64_t> fresh;
  for (auto x : cls) {
    if (istar_mask_[x])
      throw Error("tower: class meets the infinite part unexpectedly");
    if (!in_dom(x)) fresh.push_back(x);
  }
  // New points must close under every member, allowing images that fall into
  // domain predating that member's join (those stay inside its audited set).
  for (std::size_t s = 0; s < fam_.size(); ++s) {
    for (auto j : fresh) {
      EvalOutcome o = fam_.fwd(s, j);
      if (!o.is_value()) continue;
      std::uint64_t img = o.value;
      if (std::binary_search(fresh.begin(), fresh.end(), img)) continue;
      if (!in_dom(img))
        throw Error("tower: class not closed inside the window");
      bool pre_join = std::binary_search(dom_at_join_[s].begin(),
                                         dom_at_join_[s].end(), img);
      if (!pre_join)
        throw Error("tower: extension would break the order conditions at " +
                    std::to_string(j));
      rec.note = "equivariance rests on pre-join domain";
    }
  }
  std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
  pairs.reserve(fresh.size());
  for (auto x : fresh) pairs.emplace_back(x, x);
  rec.rule = "point-absorb";
  add_pairs(pairs, std::move(rec));
}

std::uint64_t TowerBuilder::extend_diagonal(std::size_t member_idx, std::uint64_t k) {
  if (member_idx >= fam_.size())
    throw std::invalid_argument("tower: no such member");

  // First two eligible classes of one isomorphism type, in min order.
  std::vector<std::size_t> firsts;
  std::vector<ClassType> types;
  std::optional<std::pair<std::size_t, std::size_t>> found;
  for (std::size_t c = 0; c < part_.size() && !found; ++c) {
    if (!part_.is_complete(c)) continue;
    const auto& cls = part_.classes[c];
    if (cls.front() <= k) continue;
    bool free = true;
    for (auto x : cls)
      if (in_dom(x) || istar_mask_[x]) {
        free = false;
        break;
      }
    if (!free) continue;
    ClassType ty = class_type(fam_, cls);
    for (std::size_t t = 0; t < types.size(); ++t)
      if (types[t] == ty) {
        found = {firsts[t], c};
        break;
      }
    if (!found) {
      types.push_back(std::move(ty));
      firsts.push_back(c);
    }
  }
  if (!found)
    throw NoSuitableClassPair("tower: no isomorphic free class pair above " +
                              std::to_string(k));

  const auto& A = part_.classes[found->first];
  const auto& B = part_.classes[found->second];
  auto phi = delta_map(A, B);

  bool pi_equals_phi = true;
  std::uint64_t witness = A.front();
  for (const auto& [a, b] : phi) {
    EvalOutcome o = fam_.fwd(member_idx, a);
    if (!o.is_value() || o.value != b) {
      pi_equals_phi = false;
      witness = a;
      break;
    }
  }

  AuditRecord rec;
  rec.rule = "diagonal";
  rec.member = member_idx;
  rec.point = k;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
  if (pi_equals_phi) {
    // The member realizes the order isomorphism; fixing A disagrees with it.
    for (auto a : A) pairs.emplace_back(a, a);
    witness = A.front();
    rec.note = "identity branch";
  } else {
    for (const auto& [a, b] : phi) pairs.emplace_back(a, b);
  }
  rec.witness = witness;
  add_pairs(pairs, std::move(rec));
  return witness;
}

PermExpr::Ptr TowerBuilder::realize() const {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> moved;
  for (const auto& [a, b] : h_)
    if (a != b) moved.emplace_back(a, b);
  return PermExpr::finite_support(std::move(moved));
}

std::vector<std::uint64_t> TowerBuilder::audited_set(std::size_t member_idx) const {
  if (member_idx >= dom_at_join_.size())
    throw std::invalid_argument("tower: no such member");
  std::vector<std::uint64_t> out = dom_at_join_[member_idx];
  for (auto d : dom_at_join_[member_idx]) {
    for (const EvalOutcome& o :
         {fam_.fwd(member_idx, d), fam_.bwd(member_idx, d)})
      if (o.is_value() && o.value < window_.bound) out.push_back(o.value);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

TowerRunResult tower_run(
    const std::vector<PermExpr::Ptr>& members,
    const std::vector<std::uint64_t>& point_schedule,
    const std::vector<std::pair<std::size_t, std::uint64_t>>& diag_schedule,
    const Window& w) {
  TowerBuilder builder(w);

  // Interleave joins with slices of the point schedule so later members find
  // domain they did not certify; that is what the audited sets are for.
  std::size_t chunks = members.size() + 1;
  std::size_t per = point_schedule.size() / chunks;
  std::size_t cursor = 0;
  for (std::size_t mi = 0; mi < members.size(); ++mi) {
    for (std::size_t t = 0; t < per && cursor < point_schedule.size(); ++t, ++cursor)
      builder.extend_point(point_schedule[cursor]);
    builder.join_member(members[mi]);
  }
  for (; cursor < point_schedule.size(); ++cursor)
    builder.extend_point(point_schedule[cursor]);

  TowerRunResult res;
  for (const auto& [mi, k] : diag_schedule)
    res.witnesses.emplace_back(mi, builder.extend_diagonal(mi, k));

  res.realization = builder.realize();
  res.audit = builder.audit();
  for (std::size_t mi = 0; mi < members.size(); ++mi)
    res.audited_sets.push_back(builder.audited_set(mi));
  return res;
}

const std::vector<Sym6>& sym6_fpf_involutions() {
  static const std::vector<Sym6> table = [] {
    std::vector<Sym6> out;
    // Perfect matchings of six points, generated smallest-first.
    Sym6 cur{};
    std::array<bool, 6> used{};
    std::function<void()> rec = [&] {
      int a = -1;
      for (int i = 0; i < 6; ++i)
        if (!used[i]) {
          a = i;
          break;
        }
      if (a < 0) {
        out.push_back(cur);
        return;
      }
      for (int b = a + 1; b < 6; ++b) {
        if (used[b]) continue;
        used[a] = used[b] = true;
        cur[a] = static_cast<std::uint8_t>(b);
        cur[b] = static_cast<std::uint8_t>(a);
        rec();
        used[a] = used[b] = false;
      }
    };
    rec();
    std::sort(out.begin(), out.end());
    return out;
  }();
  return table;
}

Sym6 sym6_witness(const Sym6& pi) {
  bool is_id = true;
  for (int i = 0; i < 6; ++i)
    if (pi[i] != i) is_id = false;
  if (is_id) throw IdentityInput("sym6_witness: identity has no witness");
  for (const Sym6& sigma : sym6_fpf_involutions()) {
    for (int i = 0; i < 6; ++i)
      if (sigma[pi[i]] != pi[sigma[i]]) return sigma;
  }
  throw Error("sym6_witness: exhaustive search failed");  // cannot happen
}

PermExpr::Ptr six_block_swap(const FamilyView& fam, const OrbitPartition& part,
                             std::size_t m, std::size_t J, std::size_t i, std::size_t j,
                             const Sym6& sigma) {
  (void)m;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
  for (std::size_t w = 0; w < 6; ++w) {
    std::size_t ca = J + 6 * i + w;
    std::size_t cb = J + 6 * j + sigma[w];
    if (ca >= part.size() || cb >= part.size())
      throw ClassesNotIsomorphic("six_block_swap: class index out of window");
    if (!part.is_complete(ca) || !part.is_complete(cb))
      throw ClassesNotIsomorphic("six_block_swap: incomplete class");
    if (ca == cb) continue;  // identity on that class
    const auto& A = part.classes[ca];
    const auto& B = part.classes[cb];
    if (!(class_type(fam, A) == class_type(fam, B)))
      throw ClassesNotIsomorphic("six_block_swap: classes " + std::to_string(ca) +
                                 " and " + std::to_string(cb) + " differ in type");
    for (const auto& [a, b] : delta_map(A, B)) {
      pairs.emplace_back(a, b);
      pairs.emplace_back(b, a);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  // Self-inverse and equivariant for every member, by type equality; checked.
  for (const auto& [a, b] : pairs)
    for (std::size_t s = 0; s < fam.size(); ++s) {
      EvalOutcome ia = fam.fwd(s, a), ib = fam.fwd(s, b);
      if (!ia.is_value() || !ib.is_value()) continue;
      bool fine = false;
      for (const auto& [c, d] : pairs)
        if (c == ia.value && d == ib.value) fine = true;
      if (ia.value == a && ib.value == b) fine = true;
      if (!fine)
        throw ClassesNotIsomorphic("six_block_swap: equivariance failed at " +
                                   std::to_string(a));
    }
  return PermExpr::finite_support(std::move(pairs));
}

RepresentativeTable representative_table(const NiceFamily& fam, std::size_t j) {
  const auto& lv = fam.level(j);
  RepresentativeTable out;
  std::vector<ClassType> types;
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < lv.part.size(); ++c) {
    if (!lv.part.is_complete(c)) continue;
    const auto& cls = lv.part.classes[c];
    if (cls.front() < j) continue;  // closure meets [0, j)
    ClassType ty = class_type(lv.view, cls);
    bool known = false;
    for (std::size_t t = 0; t < types.size(); ++t)
      if (types[t] == ty) {
        known = true;
        break;
      }
    if (!known) {
      types.push_back(std::move(ty));
      chosen.push_back(c);  // classes scan in min order: first hit is minimal
    }
  }
  for (auto c : chosen) out.reps.push_back(lv.part.classes[c].front());
  std::sort(out.reps.begin(), out.reps.end());

  out.closure_disjoint = true;
  for (auto r : out.reps) {
    const auto& cls = lv.part.classes[lv.part.class_of(r)];
    if (cls.front() < j) out.closure_disjoint = false;
  }
  // Every eligible class's type is represented by a class of minimal minimum.
  out.types_covered = true;
  out.minimal = true;
  for (std::size_t c = 0; c < lv.part.size(); ++c) {
    if (!lv.part.is_complete(c)) continue;
    const auto& cls = lv.part.classes[c];
    if (cls.front() < j) continue;
    ClassType ty = class_type(lv.view, cls);
    bool matched = false;
    for (auto r : out.reps) {
      const auto& rcls = lv.part.classes[lv.part.class_of(r)];
      if (class_type(lv.view, rcls) == ty) {
        matched = true;
        if (rcls.front() > cls.front()) out.minimal = false;
        break;
      }
    }
    if (!matched) out.types_covered = false;
  }
  return out;
}

PermExpr::Ptr assemble_diagonal_blocks(const NiceFamily& fam, std::size_t m,
                                       const std::vector<DiagonalChallenge>& challenges) {
  const auto& lv = fam.level(m);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
  std::uint64_t prev_hi = 0;
  for (const auto& ch : challenges) {
    if (ch.lo < prev_hi) throw BlockViolation("assemble: block intervals overlap");
    prev_hi = ch.hi;
    if (ch.source.size() != ch.target.size())
      throw BlockViolation("assemble: source and target sizes differ");
    std::vector<std::uint64_t> s = ch.source, t = ch.target;
    std::sort(s.begin(), s.end());
    std::sort(t.begin(), t.end());
    std::vector<std::uint64_t> overlap;
    std::set_intersection(s.begin(), s.end(), t.begin(), t.end(),
                          std::back_inserter(overlap));
    if (!overlap.empty()) throw BlockViolation("assemble: source meets target");
    for (auto sets : {&s, &t})
      for (auto x : *sets)
        if (x < ch.lo || x >= ch.hi)
          throw BlockViolation("assemble: set leaves its block interval");
    for (auto sets : {&s, &t}) {
      ClosureResult cl = omega_closure(lv.view, *sets);
      if (!cl.complete || cl.points != *sets)
        throw BlockViolation("assemble: set is not a closed complete union");
    }
    auto dm = delta_map(s, t);
    // The order isomorphism must be equivariant for the first m members.
    auto image_of = [&](std::uint64_t x) -> std::optional<std::uint64_t> {
      auto it = std::lower_bound(dm.begin(), dm.end(),
                                 std::make_pair(x, std::uint64_t{0}));
      if (it != dm.end() && it->first == x) return it->second;
      for (const auto& [a, b] : dm)
        if (b == x) return a;
      return std::nullopt;
    };
    for (std::size_t s_idx = 0; s_idx < lv.view.size(); ++s_idx)
      for (const auto& [a, b] : dm) {
        EvalOutcome ia = lv.view.fwd(s_idx, a), ib = lv.view.fwd(s_idx, b);
        if (!ia.is_value() || !ib.is_value())
          throw BlockViolation("assemble: member undefined inside a block");
        auto mapped = image_of(ia.value);
        if (!mapped || *mapped != ib.value)
          throw BlockViolation("assemble: equivariance fails at " + std::to_string(a));
      }
    for (const auto& [a, b] : dm) {
      pairs.emplace_back(a, b);
      pairs.emplace_back(b, a);
    }
  }
  return PermExpr::finite_support(std::move(pairs));
}

RSequenceReport validate_r_sequence(
    const std::vector<std::vector<std::uint64_t>>& entries,
    const std::function<std::uint64_t(std::uint64_t)>& f,
    const std::vector<std::pair<std::uint64_t, std::uint64_t>>& h_samples,
    bool throw_on_violation) {
  RSequenceReport rep;
  rep.growth_ok = true;
  std::uint64_t running_max = 0;
  bool have_prior = false;
  for (std::size_t n = 0; n < entries.size(); ++n) {
    const auto& r = entries[n];
    if (n >= 1 && r.size() > n) {
      rep.growth_ok = false;
      rep.violation_index = n;
      break;
    }
    if (n >= 1 && !r.empty() && have_prior) {
      std::uint64_t mn = *std::min_element(r.begin(), r.end());
      if (f(running_max) >= mn) {
        rep.growth_ok = false;
        rep.violation_index = n;
        break;
      }
    }
    for (auto x : r) {
      running_max = std::max(running_max, x);
      have_prior = true;
    }
  }
  if (!rep.growth_ok && throw_on_violation)
    throw GrowthViolated(*rep.violation_index,
                         "r-sequence growth fails at entry " +
                             std::to_string(*rep.violation_index));
  if (rep.growth_ok) {
    for (std::size_t n = 1; n < entries.size(); ++n) {
      bool hit = false;
      for (const auto& [a, b] : h_samples)
        if (a < n &&
            std::find(entries[n].begin(), entries[n].end(), b) != entries[n].end())
          hit = true;
      if (hit) ++rep.hit_count;
    }
  }
  return rep;
}

}  // namespace permideal
