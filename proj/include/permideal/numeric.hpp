#pragma once

#include <cstdint>
#include <string>
#include <gmpxx.h>

namespace permideal {

// Arbitrary-precision integers and rationals. Block boundaries grow
// superexponentially, so fixed-width arithmetic is not an option there;
// window points themselves always fit in 64 bits.
using Int = mpz_class;
using Rat = mpq_class;

inline Int int_from_u64(std::uint64_t v) {
  Int r;
  mpz_import(r.get_mpz_t(), 1, 1, sizeof(v), 0, 0, &v);
  return r;
}

inline bool fits_u64(const Int& v) {
  return sgn(v) >= 0 && mpz_sizeinbase(v.get_mpz_t(), 2) <= 64;
}

inline std::uint64_t to_u64(const Int& v) {
  std::uint64_t out = 0;
  mpz_export(&out, nullptr, 1, sizeof(out), 0, 0, v.get_mpz_t());
  return out;
}

inline Rat rat(const Int& num, const Int& den) {
  Rat r(num, den);
  r.canonicalize();
  return r;
}

inline Rat rat_u64(std::uint64_t num, std::uint64_t den) {
  return rat(int_from_u64(num), int_from_u64(den));
}

// x^e for small non-negative exponents.
inline Rat rat_pow(const Rat& x, unsigned e) {
  Rat acc(1);
  for (unsigned i = 0; i < e; ++i) acc *= x;
  return acc;
}

inline std::string dec_string(const Int& v) { return v.get_str(10); }
inline std::string dec_string(const Rat& v) { return v.get_str(10); }

}  // namespace permideal
