#include "permideal/setexpr.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "permideal/error.hpp"

namespace permideal {

namespace {

std::vector<std::uint64_t> sorted_unique(std::vector<std::uint64_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

IndexSet IndexSet::finite(std::vector<std::uint64_t> items) {
  IndexSet s;
  s.kind_ = Kind::Finite;
  s.items_ = sorted_unique(std::move(items));
  return s;
}

IndexSet IndexSet::cofinite(std::vector<std::uint64_t> excluded) {
  IndexSet s;
  s.kind_ = Kind::Cofinite;
  s.items_ = sorted_unique(std::move(excluded));
  return s;
}

IndexSet IndexSet::periodic(std::uint64_t modulus, std::vector<std::uint64_t> residues) {
  if (modulus == 0) throw std::invalid_argument("IndexSet: modulus must be positive");
  for (auto r : residues)
    if (r >= modulus) throw std::invalid_argument("IndexSet: residue >= modulus");
  IndexSet s;
  s.kind_ = Kind::Periodic;
  s.modulus_ = modulus;
  s.items_ = sorted_unique(std::move(residues));
  return s;
}

IndexSet IndexSet::explicit_list(std::vector<std::uint64_t> items, std::uint64_t cap) {
  IndexSet s;
  s.kind_ = Kind::Explicit;
  s.items_ = sorted_unique(std::move(items));
  if (!s.items_.empty() && s.items_.back() > cap)
    throw std::invalid_argument("IndexSet: explicit item above cap");
  s.cap_ = cap;
  return s;
}

bool IndexSet::contains(std::uint64_t i, bool* exact) const {
  if (exact) *exact = true;
  switch (kind_) {
    case Kind::Finite:
      return std::binary_search(items_.begin(), items_.end(), i);
    case Kind::Cofinite:
      return !std::binary_search(items_.begin(), items_.end(), i);
    case Kind::Periodic:
      return std::binary_search(items_.begin(), items_.end(), i % modulus_);
    case Kind::Explicit:
      if (i > cap_ && exact) *exact = false;
      return std::binary_search(items_.begin(), items_.end(), i);
  }
  return false;
}

std::optional<bool> IndexSet::is_infinite() const {
  switch (kind_) {
    case Kind::Finite:
      return false;
    case Kind::Cofinite:
      return true;
    case Kind::Periodic:
      return !items_.empty();
    case Kind::Explicit:
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<IndexSet> IndexSet::intersect(const IndexSet& a, const IndexSet& b) {
  using K = Kind;
  if (a.kind_ == K::Finite || (a.kind_ == K::Explicit)) {
    std::vector<std::uint64_t> out;
    for (auto i : a.items_)
      if (b.contains(i)) out.push_back(i);
    return a.kind_ == K::Finite ? finite(std::move(out))
                                : explicit_list(std::move(out), a.cap_);
  }
  if (b.kind_ == K::Finite || b.kind_ == K::Explicit) return intersect(b, a);
  if (a.kind_ == K::Cofinite && b.kind_ == K::Cofinite) {
    std::vector<std::uint64_t> ex = a.items_;
    ex.insert(ex.end(), b.items_.begin(), b.items_.end());
    return cofinite(std::move(ex));
  }
  if (a.kind_ == K::Periodic && b.kind_ == K::Periodic) {
    // CRT over the lcm of the moduli.
    std::uint64_t l = std::lcm(a.modulus_, b.modulus_);
    if (l > (1u << 20)) return std::nullopt;  // keep the calculus cheap
    std::vector<std::uint64_t> rs;
    for (std::uint64_t r = 0; r < l; ++r)
      if (a.contains(r) && b.contains(r)) rs.push_back(r);
    return periodic(l, std::move(rs));
  }
  // Periodic ∩ Cofinite: periodic minus finitely many, not representable here.
  return std::nullopt;
}

std::optional<bool> IndexSet::intersection_finite(const IndexSet& a, const IndexSet& b) {
  if (a.kind_ == Kind::Finite || b.kind_ == Kind::Finite) return true;
  if (a.kind_ == Kind::Explicit || b.kind_ == Kind::Explicit) return std::nullopt;
  if (auto c = intersect(a, b)) return !c->is_infinite().value_or(true);
  if (a.kind_ == Kind::Cofinite && b.kind_ == Kind::Periodic)
    return b.items_.empty();
  if (a.kind_ == Kind::Periodic && b.kind_ == Kind::Cofinite)
    return a.items_.empty();
  return std::nullopt;
}

nlohmann::ordered_json IndexSet::to_json() const {
  nlohmann::ordered_json j;
  switch (kind_) {
    case Kind::Finite:
      j["kind"] = "finite";
      j["items"] = items_;
      break;
    case Kind::Cofinite:
      j["kind"] = "cofinite";
      j["excluded"] = items_;
      break;
    case Kind::Periodic:
      j["kind"] = "periodic";
      j["modulus"] = modulus_;
      j["residues"] = items_;
      break;
    case Kind::Explicit:
      j["kind"] = "explicit";
      j["items"] = items_;
      j["cap"] = cap_;
      break;
  }
  return j;
}

IndexSet IndexSet::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  auto vec = [](const nlohmann::json& v) {
    return v.get<std::vector<std::uint64_t>>();
  };
  if (kind == "finite") return finite(vec(j.at("items")));
  if (kind == "cofinite") return cofinite(vec(j.at("excluded")));
  if (kind == "periodic")
    return periodic(j.at("modulus").get<std::uint64_t>(), vec(j.at("residues")));
  if (kind == "explicit")
    return explicit_list(vec(j.at("items")), j.at("cap").get<std::uint64_t>());
  throw SchemaError("IndexSet: unknown kind '" + kind + "'");
}

std::uint64_t SetTable::count() const {
  std::uint64_t c = 0;
  for (auto b : bits) c += b;
  return c;
}

SetExpr::Ptr SetExpr::finite(std::vector<std::uint64_t> points) {
  auto e = std::shared_ptr<SetExpr>(new SetExpr);
  e->kind_ = Kind::Finite;
  e->points_ = sorted_unique(std::move(points));
  return e;
}

SetExpr::Ptr SetExpr::block_union(BlockSequence blocks, IndexSet index) {
  auto e = std::shared_ptr<SetExpr>(new SetExpr);
  e->kind_ = Kind::BlockUnion;
  e->blocks_ = std::make_shared<const BlockSequence>(std::move(blocks));
  e->index_ = std::make_shared<const IndexSet>(std::move(index));
  return e;
}

SetExpr::Ptr SetExpr::set_union(Ptr a, Ptr b) {
  auto e = std::shared_ptr<SetExpr>(new SetExpr);
  e->kind_ = Kind::Union;
  e->left_ = std::move(a);
  e->right_ = std::move(b);
  return e;
}

SetExpr::Ptr SetExpr::set_intersection(Ptr a, Ptr b) {
  auto e = std::shared_ptr<SetExpr>(new SetExpr);
  e->kind_ = Kind::Intersection;
  e->left_ = std::move(a);
  e->right_ = std::move(b);
  return e;
}

SetExpr::Ptr SetExpr::set_difference(Ptr a, Ptr b) {
  auto e = std::shared_ptr<SetExpr>(new SetExpr);
  e->kind_ = Kind::Difference;
  e->left_ = std::move(a);
  e->right_ = std::move(b);
  return e;
}

SetExpr::Ptr SetExpr::sample(std::vector<std::uint8_t> bits) {
  auto e = std::shared_ptr<SetExpr>(new SetExpr);
  e->kind_ = Kind::Sample;
  e->sample_ = std::move(bits);
  return e;
}

SetExpr::Ptr SetExpr::residue(std::uint64_t modulus, std::uint64_t r) {
  return block_union(BlockSequence::arithmetic(0, 1), IndexSet::periodic(modulus, {r}));
}

Membership SetExpr::contains(std::uint64_t x) const {
  switch (kind_) {
    case Kind::Finite:
      return std::binary_search(points_.begin(), points_.end(), x) ? Membership::In
                                                                   : Membership::Out;
    case Kind::BlockUnion: {
      if (int_from_u64(x) < blocks_->n0()) return Membership::Out;
      std::size_t i;
      try {
        i = blocks_->block_of_u64(x);
      } catch (const std::out_of_range&) {
        return Membership::Unknown;  // past an explicit block end
      }
      bool exact = true;
      bool in = index_->contains(i, &exact);
      if (!exact) return Membership::Unknown;
      return in ? Membership::In : Membership::Out;
    }
    case Kind::Union: {
      Membership a = left_->contains(x), b = right_->contains(x);
      if (a == Membership::In || b == Membership::In) return Membership::In;
      if (a == Membership::Out && b == Membership::Out) return Membership::Out;
      return Membership::Unknown;
    }
    case Kind::Intersection: {
      Membership a = left_->contains(x), b = right_->contains(x);
      if (a == Membership::Out || b == Membership::Out) return Membership::Out;
      if (a == Membership::In && b == Membership::In) return Membership::In;
      return Membership::Unknown;
    }
    case Kind::Difference: {
      Membership a = left_->contains(x), b = right_->contains(x);
      if (a == Membership::Out || b == Membership::In) return Membership::Out;
      if (a == Membership::In && b == Membership::Out) return Membership::In;
      return Membership::Unknown;
    }
    case Kind::Sample:
      if (x < sample_.size())
        return sample_[x] ? Membership::In : Membership::Out;
      return Membership::Unknown;
  }
  return Membership::Unknown;
}

SetTable SetExpr::tabulate(std::uint64_t bound) const {
  SetTable t;
  t.bits.assign(bound, 0);
  switch (kind_) {
    case Kind::Finite:
      for (auto p : points_)
        if (p < bound) t.bits[p] = 1;
      break;
    case Kind::BlockUnion: {
      // Walk complete and partial blocks intersecting [0, bound).
      const BlockSequence& bs = *blocks_;
      std::uint64_t an0 = 0, astep = 0;
      if (bs.arithmetic_u64(&an0, &astep)) {
        for (std::uint64_t i = 0, lo = an0; lo < bound; ++i, lo += astep) {
          bool exact = true;
          if (index_->contains(i, &exact)) {
            const std::uint64_t hi = std::min(lo + astep, bound);
            for (std::uint64_t x = lo; x < hi; ++x) t.bits[x] = 1;
          }
          if (!exact) t.exact = false;
        }
        break;
      }
      if (int_from_u64(bound) <= bs.n0()) break;
      const Int big_bound = int_from_u64(bound);
      for (std::size_t i = 0;; ++i) {
        if (!bs.has_boundary(i + 1)) {
          if (bs.boundary(i) < big_bound) t.exact = false;  // explicit end inside window
          break;
        }
        const Int& lo = bs.boundary(i);
        if (lo >= big_bound) break;
        bool exact = true;
        if (index_->contains(i, &exact)) {
          const Int hi = std::min(bs.boundary(i + 1), big_bound);
          for (std::uint64_t x = to_u64(lo); x < to_u64(hi); ++x) t.bits[x] = 1;
        }
        if (!exact) t.exact = false;
      }
      break;
    }
    case Kind::Union: {
      SetTable a = left_->tabulate(bound), b = right_->tabulate(bound);
      for (std::uint64_t x = 0; x < bound; ++x) t.bits[x] = a.bits[x] | b.bits[x];
      t.exact = a.exact && b.exact;
      break;
    }
    case Kind::Intersection: {
      SetTable a = left_->tabulate(bound), b = right_->tabulate(bound);
      for (std::uint64_t x = 0; x < bound; ++x) t.bits[x] = a.bits[x] & b.bits[x];
      t.exact = a.exact && b.exact;
      break;
    }
    case Kind::Difference: {
      SetTable a = left_->tabulate(bound), b = right_->tabulate(bound);
      for (std::uint64_t x = 0; x < bound; ++x)
        t.bits[x] = a.bits[x] & static_cast<std::uint8_t>(!b.bits[x]);
      t.exact = a.exact && b.exact;
      break;
    }
    case Kind::Sample: {
      for (std::uint64_t x = 0; x < bound && x < sample_.size(); ++x)
        t.bits[x] = sample_[x];
      if (sample_.size() < bound) t.exact = false;
      break;
    }
  }
  return t;
}

std::vector<std::uint64_t> SetExpr::enumerate(std::uint64_t bound, bool* exact) const {
  SetTable t = tabulate(bound);
  if (exact) *exact = t.exact;
  std::vector<std::uint64_t> out;
  for (std::uint64_t x = 0; x < bound; ++x)
    if (t.bits[x]) out.push_back(x);
  return out;
}

nlohmann::ordered_json SetExpr::to_json() const {
  nlohmann::ordered_json j;
  switch (kind_) {
    case Kind::Finite:
      j["kind"] = "finite";
      j["points"] = points_;
      break;
    case Kind::BlockUnion:
      j["kind"] = "blockunion";
      j["blocks"] = blocks_->to_json();
      j["index"] = index_->to_json();
      break;
    case Kind::Union:
    case Kind::Intersection:
    case Kind::Difference:
      j["kind"] = kind_ == Kind::Union        ? "union"
                  : kind_ == Kind::Intersection ? "intersection"
                                                : "difference";
      j["left"] = left_->to_json();
      j["right"] = right_->to_json();
      break;
    case Kind::Sample: {
      j["kind"] = "sample";
      std::vector<std::uint64_t> pts;
      for (std::uint64_t x = 0; x < sample_.size(); ++x)
        if (sample_[x]) pts.push_back(x);
      j["bound"] = sample_.size();
      j["points"] = pts;
      break;
    }
  }
  return j;
}

SetExpr::Ptr SetExpr::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "finite")
    return finite(j.at("points").get<std::vector<std::uint64_t>>());
  if (kind == "blockunion")
    return block_union(BlockSequence::from_json(j.at("blocks")),
                       IndexSet::from_json(j.at("index")));
  if (kind == "union")
    return set_union(from_json(j.at("left")), from_json(j.at("right")));
  if (kind == "intersection")
    return set_intersection(from_json(j.at("left")), from_json(j.at("right")));
  if (kind == "difference")
    return set_difference(from_json(j.at("left")), from_json(j.at("right")));
  if (kind == "sample") {
    std::vector<std::uint8_t> bits(j.at("bound").get<std::uint64_t>(), 0);
    for (auto p : j.at("points").get<std::vector<std::uint64_t>>()) bits.at(p) = 1;
    return sample(std::move(bits));
  }
  throw SchemaError("SetExpr: unknown kind '" + kind + "'");
}

}  // namespace permideal
