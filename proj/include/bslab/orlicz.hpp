#pragma once

// The Young pair Psi(t) = (1+t)log(1+t) - t, Phi(t) = e^t - 1 - t, their
// Luxemburg norms over atom clouds, and the averaged (Solomyak) norm.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "bslab/measures.hpp"

namespace bslab::orlicz {

enum class Young { psi, phi, psi_inverse, phi_inverse };

inline constexpr double phi_argument_cap = 700.0;

inline double psi(double t) {
  require(t >= 0.0, ErrorKind::invalid_argument, "Young functions are defined for t >= 0");
  if (t < 1e-4) return t * t * (0.5 - t * (1.0 / 6.0 - t / 12.0));
  return (1.0 + t) * std::log1p(t) - t;
}

inline double phi(double t) {
  require(t >= 0.0, ErrorKind::invalid_argument, "Young functions are defined for t >= 0");
  require(t <= phi_argument_cap, ErrorKind::saturation, "Phi argument exceeds the overflow cap");
  if (t < 1e-4) return t * t * (0.5 + t * (1.0 / 6.0 + t / 24.0));
  return std::expm1(t) - t;
}

namespace detail {
/// Monotone increasing f on [0, cap]: smallest t with f(t) >= y, to 1e-12.
template <class F>
double invert_increasing(F f, double y, double cap) {
  require(y >= 0.0, ErrorKind::invalid_argument, "Young functions are defined for t >= 0");
  if (y == 0.0) return 0.0;
  double hi = 1.0;
  while (f(hi) < y) {
    require(hi < cap, ErrorKind::saturation, "inverse exceeds the evaluation cap");
    hi = std::min(2.0 * hi, cap);
  }
  double lo = 0.0;
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (f(mid) < y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}
}  // namespace detail

inline double psi_inverse(double y) {
  return detail::invert_increasing([](double t) { return psi(t); }, y, std::numeric_limits<double>::max());
}
inline double phi_inverse(double y) {
  return detail::invert_increasing([](double t) { return phi(t); }, y, phi_argument_cap);
}

inline double young_eval(Young which, double t) {
  switch (which) {
    case Young::psi: return psi(t);
    case Young::phi: return phi(t);
    case Young::psi_inverse: return psi_inverse(t);
    case Young::phi_inverse: return phi_inverse(t);
  }
  fail(ErrorKind::invalid_argument, "unknown Young function");
}

struct NormResult {
  double value = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

/// inf { s > 0 : sum_i w_i F(|V_i| / s) <= 1 } for F = Psi or Phi.
inline NormResult luxemburg_norm(const SignedDensity& v, const PointCloudMeasure& mu, Young which) {
  check_compatible(mu, v);
  require(which == Young::psi || which == Young::phi, ErrorKind::invalid_argument,
          "Luxemburg norms are defined for psi and phi only");
  double vmax = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (mu.weight(i) > 0.0) vmax = std::max(vmax, std::abs(v[i]));
  if (vmax == 0.0) return {};

  auto modular = [&](double s) {
    double m = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double t = std::abs(v[i]) / s;
      if (mu.weight(i) == 0.0 || t == 0.0) continue;
      if (which == Young::phi && t > phi_argument_cap) return std::numeric_limits<double>::infinity();
      m += mu.weight(i) * (which == Young::psi ? psi(t) : phi(t));
    }
    return m;
  };

  NormResult r;
  double hi = vmax;
  while (modular(hi) > 1.0) hi *= 2.0;
  double lo = hi;
  while (modular(lo) <= 1.0) lo *= 0.5;
  // geometric bisection: the modular is smooth in log s
  for (; r.iterations < 200 && hi / lo - 1.0 > 4.0 * std::numeric_limits<double>::epsilon(); ++r.iterations) {
    const double mid = std::sqrt(lo * hi);
    if (mid <= lo || mid >= hi) break;
    (modular(mid) > 1.0 ? lo : hi) = mid;
  }
  r.value = hi;
  r.residual = std::abs(modular(hi) - 1.0);
  return r;
}

/// sup { sum_E w_i |V_i| g_i : sum_E w_i Phi(g_i) <= mu(E) }, attained at
/// g_i = log(1 + |V_i| / lambda) with lambda fixed by a tight constraint.
inline double averaged_norm(const SignedDensity& v, const PointCloudMeasure& mu, std::span<const std::size_t> subset) {
  check_compatible(mu, v);
  double mass = 0.0;
  double vmax = 0.0;
  for (std::size_t i : subset) {
    require(i < mu.size(), ErrorKind::invalid_argument, "subset index out of range");
    mass += mu.weight(i);
    if (mu.weight(i) > 0.0) vmax = std::max(vmax, std::abs(v[i]));
  }
  if (mass <= 0.0 || vmax == 0.0) return 0.0;

  // Phi(log(1 + a)) = a - log(1 + a), evaluated without overflow
  auto constraint = [&](double lambda) {
    double c = 0.0;
    for (std::size_t i : subset) {
      const double a = std::abs(v[i]) / lambda;
      c += mu.weight(i) * (a < 1e-4 ? a * a * (0.5 - a * (1.0 / 3.0 - 0.25 * a)) : a - std::log1p(a));
    }
    return c - mass;
  };
  double hi = vmax;  // a <= 1 gives Phi(g) <= 1 - log 2 < 1
  double lo = hi;
  while (constraint(lo) <= 0.0) lo *= 0.5;
  for (int it = 0; it < 200 && hi / lo - 1.0 > 4.0 * std::numeric_limits<double>::epsilon(); ++it) {
    const double mid = std::sqrt(lo * hi);
    if (mid <= lo || mid >= hi) break;
    (constraint(mid) > 0.0 ? lo : hi) = mid;
  }
  const double lambda = std::sqrt(lo * hi);
  double value = 0.0;
  for (std::size_t i : subset) value += mu.weight(i) * std::abs(v[i]) * std::log1p(std::abs(v[i]) / lambda);
  return value;
}

inline double averaged_norm(const SignedDensity& v, const PointCloudMeasure& mu) {
  std::vector<std::size_t> all(mu.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return averaged_norm(v, mu, all);
}

}  // namespace bslab::orlicz
