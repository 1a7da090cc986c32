#pragma once

#include <cmath>

namespace freemesh::detail {

// Unevaluated sum hi + lo with |lo| <= ulp(hi)/2.
struct DoubleDouble {
  double hi = 0.0;
  double lo = 0.0;
};

// Veltkamp split; exact for |a| < ~1e300.
inline void split(double a, double& hi, double& lo) noexcept {
  const double c = 134217729.0 * a;  // 2^27 + 1
  hi = c - (c - a);
  lo = a - hi;
}

// Dekker's error-free product: a*b == p + e exactly.
inline DoubleDouble two_prod(double a, double b) noexcept {
  const double p = a * b;
  if (!std::isfinite(p) || std::fabs(a) > 1e150 || std::fabs(b) > 1e150) return {p, 0.0};
  double ah, al, bh, bl;
  split(a, ah, al);
  split(b, bh, bl);
  const double e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
  return {p, e};
}

inline DoubleDouble quick_two_sum(double a, double b) noexcept {
  const double s = a + b;
  return {s, b - (s - a)};
}

// Knuth's error-free sum, no ordering requirement.
inline DoubleDouble two_sum(double a, double b) noexcept {
  const double s = a + b;
  const double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

inline DoubleDouble add(DoubleDouble a, DoubleDouble b) noexcept {
  const DoubleDouble s = two_sum(a.hi, b.hi);
  return quick_two_sum(s.hi, s.lo + (a.lo + b.lo));
}

inline DoubleDouble mul(DoubleDouble a, double b) noexcept {
  DoubleDouble p = two_prod(a.hi, b);
  return quick_two_sum(p.hi, p.lo + a.lo * b);
}

inline DoubleDouble mul(DoubleDouble a, DoubleDouble b) noexcept {
  DoubleDouble p = two_prod(a.hi, b.hi);
  return quick_two_sum(p.hi, p.lo + (a.hi * b.lo + a.lo * b.hi));
}

}  // namespace freemesh::detail
