#include "permideal/blockseq.hpp"

#include <stdexcept>

#include "permideal/error.hpp"

namespace permideal {

BlockSequence BlockSequence::explicit_seq(std::vector<Int> boundaries) {
  if (boundaries.size() < 2)
    throw std::invalid_argument("BlockSequence: need at least two boundaries");
  for (std::size_t i = 0; i + 1 < boundaries.size(); ++i)
    if (boundaries[i] >= boundaries[i + 1])
      throw std::invalid_argument("BlockSequence: boundaries must increase");
  BlockSequence s;
  s.rule_ = Rule::Explicit;
  s.n0_ = boundaries.front();
  s.prefix_ = std::move(boundaries);
  s.finite_ = true;
  return s;
}

BlockSequence BlockSequence::factorial_gaps(Int n0) {
  if (sgn(n0) < 0) throw std::invalid_argument("BlockSequence: n0 < 0");
  BlockSequence s;
  s.rule_ = Rule::FactorialGaps;
  s.n0_ = n0;
  s.prefix_ = {n0};
  return s;
}

BlockSequence BlockSequence::cubic_gaps(Int n0) {
  if (n0 < 2) throw std::invalid_argument("BlockSequence: cubic rule needs n0 >= 2");
  BlockSequence s;
  s.rule_ = Rule::CubicGaps;
  s.n0_ = n0;
  s.prefix_ = {n0};
  return s;
}

BlockSequence BlockSequence::arithmetic(Int n0, Int step) {
  if (sgn(n0) < 0 || step < 1)
    throw std::invalid_argument("BlockSequence: arithmetic rule needs step >= 1");
  BlockSequence s;
  s.rule_ = Rule::Arithmetic;
  s.n0_ = n0;
  s.step_ = step;
  s.prefix_ = {n0};
  return s;
}

void BlockSequence::extend_to(std::size_t i) const {
  if (finite_) return;
  while (prefix_.size() <= i) {
    const Int& last = prefix_.back();
    switch (rule_) {
      case Rule::FactorialGaps: {
        // n_{k+1} = n_k + k!, so the gap after the (k=size-1)-th boundary is (size-1)!
        Int fact = 1;
        for (std::size_t k = 2; k < prefix_.size(); ++k) fact *= static_cast<unsigned long>(k);
        prefix_.push_back(last + fact);
        break;
      }
      case Rule::CubicGaps:
        prefix_.push_back(last + last * last * last);
        break;
      case Rule::Arithmetic:
        prefix_.push_back(last + step_);
        break;
      case Rule::Explicit:
        break;
    }
  }
}

const Int& BlockSequence::boundary(std::size_t i) const {
  extend_to(i);
  if (i >= prefix_.size())
    throw std::out_of_range("BlockSequence: boundary index past explicit end");
  return prefix_[i];
}

bool BlockSequence::has_boundary(std::size_t i) const {
  if (!finite_) return true;
  return i < prefix_.size();
}

Int BlockSequence::block_size(std::size_t i) const {
  return boundary(i + 1) - boundary(i);
}

std::size_t BlockSequence::block_of(const Int& x) const {
  if (x < n0_) throw std::out_of_range("BlockSequence: point below first boundary");
  std::size_t i = 0;
  while (true) {
    if (finite_ && i + 1 >= prefix_.size())
      throw std::out_of_range("BlockSequence: point past explicit end");
    if (x < boundary(i + 1)) return i;
    ++i;
  }
}

bool BlockSequence::arithmetic_u64(std::uint64_t* n0, std::uint64_t* step) const {
  if (rule_ != Rule::Arithmetic || !fits_u64(n0_) || !fits_u64(step_)) return false;
  if (n0) *n0 = to_u64(n0_);
  if (step) *step = to_u64(step_);
  return true;
}

std::size_t BlockSequence::block_of_u64(std::uint64_t x) const {
  std::uint64_t n0 = 0, step = 0;
  if (arithmetic_u64(&n0, &step)) {
    if (x < n0) throw std::out_of_range("BlockSequence: point below first boundary");
    return static_cast<std::size_t>((x - n0) / step);
  }
  return block_of(int_from_u64(x));
}

std::size_t BlockSequence::complete_blocks_below(const Int& bound) const {
  std::size_t count = 0;
  while (has_boundary(count + 1) && boundary(count + 1) <= bound) ++count;
  return count;
}

Rat BlockSequence::gap_ratio(std::size_t i) const {
  Int a = boundary(i + 1) - boundary(i);
  Int b = boundary(i + 2) - boundary(i + 1);
  return rat(a, b);
}

std::vector<Rat> BlockSequence::gap_ratio_profile(std::size_t count) const {
  std::vector<Rat> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(gap_ratio(i));
  return out;
}

bool BlockSequence::operator==(const BlockSequence& other) const {
  if (rule_ != other.rule_) return false;
  switch (rule_) {
    case Rule::Explicit:
      return prefix_ == other.prefix_;
    case Rule::Arithmetic:
      return n0_ == other.n0_ && step_ == other.step_;
    default:
      return n0_ == other.n0_;
  }
}

nlohmann::ordered_json BlockSequence::to_json() const {
  nlohmann::ordered_json j;
  switch (rule_) {
    case Rule::Explicit: {
      j["rule"] = "explicit";
      auto arr = nlohmann::ordered_json::array();
      for (const auto& b : prefix_) arr.push_back(dec_string(b));
      j["boundaries"] = std::move(arr);
      break;
    }
    case Rule::FactorialGaps:
      j["rule"] = "factorial";
      j["n0"] = dec_string(n0_);
      break;
    case Rule::CubicGaps:
      j["rule"] = "cubic";
      j["n0"] = dec_string(n0_);
      break;
    case Rule::Arithmetic:
      j["rule"] = "arithmetic";
      j["n0"] = dec_string(n0_);
      j["step"] = dec_string(step_);
      break;
  }
  return j;
}

BlockSequence BlockSequence::from_json(const nlohmann::json& j) {
  const std::string rule = j.at("rule").get<std::string>();
  auto big = [](const nlohmann::json& v) { return Int(v.get<std::string>()); };
  if (rule == "explicit") {
    std::vector<Int> bs;
    for (const auto& b : j.at("boundaries")) bs.emplace_back(b.get<std::string>());
    return explicit_seq(std::move(bs));
  }
  if (rule == "factorial") return factorial_gaps(big(j.at("n0")));
  if (rule == "cubic") return cubic_gaps(big(j.at("n0")));
  if (rule == "arithmetic") return arithmetic(big(j.at("n0")), big(j.at("step")));
  throw SchemaError("BlockSequence: unknown rule '" + rule + "'");
}

}  // namespace permideal
