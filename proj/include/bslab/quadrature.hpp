#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "bslab/error.hpp"
#include "bslab/measures.hpp"

namespace bslab::quadrature {

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on P_n).
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  require(n >= 1, ErrorKind::invalid_argument, "Gauss-Legendre order must be positive");
  std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0, p1 = z;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[static_cast<std::size_t>(i)] = -z;
    x[static_cast<std::size_t>(n - 1 - i)] = z;
    w[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(n - 1 - i)] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

namespace detail {
// Product rule on S^{m-1} with `nodes` points per angular coordinate.
inline double sphere_rule(int m, int nodes, const std::function<double(const Vector&)>& f) {
  if (m == 1) {
    Vector e(1);
    e[0] = 1.0;
    const double a = f(e);
    e[0] = -1.0;
    return a + f(e);
  }
  if (m == 2) {
    double s = 0.0;
    Vector e(2);
    for (int k = 0; k < nodes; ++k) {
      const double t = 2.0 * std::numbers::pi * k / nodes;
      e << std::cos(t), std::sin(t);
      s += f(e);
    }
    return s * 2.0 * std::numbers::pi / nodes;
  }
  const auto [x, w] = gauss_legendre(nodes);
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double theta = 0.5 * std::numbers::pi * (x[k] + 1.0);
    const double st = std::sin(theta), ct = std::cos(theta);
    const double inner = sphere_rule(m - 1, nodes, [&](const Vector& u) {
      Vector e(m);
      e[0] = ct;
      e.tail(m - 1) = st * u;
      return f(e);
    });
    s += 0.5 * std::numbers::pi * w[k] * std::pow(st, m - 2) * inner;
  }
  return s;
}
}  // namespace detail

/// Integral over the unit sphere S^{m-1} in R^m, refined by node doubling
/// until successive values agree to `rel_tol`.
inline double integrate_sphere(int m, const std::function<double(const Vector&)>& f, double rel_tol = 1e-8,
                               int max_nodes = 512) {
  require(m >= 1, ErrorKind::invalid_argument, "sphere dimension must be positive");
  if (m == 1) return detail::sphere_rule(1, 1, f);
  double prev = detail::sphere_rule(m, 8, f);
  for (int nodes = 16; nodes <= max_nodes; nodes *= 2) {
    const double cur = detail::sphere_rule(m, nodes, f);
    if (std::abs(cur - prev) <= rel_tol * std::abs(cur) || cur == prev) return cur;
    prev = cur;
  }
  fail(ErrorKind::quadrature, "spherical quadrature did not converge within the node budget");
}

/// Adaptive Gauss-Kronrod on [0, infinity).
inline double integrate_half_line(const std::function<double(double)>& f, double rel_tol = 1e-10) {
  double error = 0.0;
  double l1 = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, 0.0, std::numeric_limits<double>::infinity(), 20, rel_tol, &error, &l1);
  require(std::isfinite(value) && error <= std::max(1e3 * rel_tol * l1, 1e-300), ErrorKind::quadrature,
          "radial quadrature did not converge");
  return value;
}

}  // namespace bslab::quadrature
