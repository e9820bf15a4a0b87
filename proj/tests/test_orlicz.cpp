#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "bslab/orlicz.hpp"

using namespace bslab;
using namespace bslab::orlicz;

namespace {

// Root of e^t - 1 - t = 1 (mpmath, 30 digits).
constexpr double phi_root = 1.14619322062058258523706102852;

PointCloudMeasure random_measure(std::mt19937_64& rng, int atoms) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix pos(2, atoms);
  Vector w(atoms);
  for (int i = 0; i < atoms; ++i) {
    pos(0, i) = u(rng);
    pos(1, i) = u(rng);
    w[i] = 0.05 + u(rng);
  }
  return PointCloudMeasure(pos, w, {});
}

SignedDensity random_density(std::mt19937_64& rng, int atoms, double scale = 3.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(atoms);
  for (auto& x : v) x = g(rng);
  return SignedDensity(v);
}

// Independent oracle for the averaged norm: the convex dual
// inf_{lambda > 0} lambda m + sum w lambda Psi(|V| / lambda), minimized by
// golden-section search in log lambda.
double averaged_norm_dual(const SignedDensity& v, const PointCloudMeasure& mu) {
  const double m = mu.total_mass();
  auto dual = [&](double loglam) {
    const double lam = std::exp(loglam);
    double s = lam * m;
    for (std::size_t i = 0; i < v.size(); ++i) s += mu.weight(i) * lam * psi(std::abs(v[i]) / lam);
    return s;
  };
  double a = -40.0, b = 40.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = dual(c), fd = dual(d);
  for (int it = 0; it < 300; ++it) {
    if (fc < fd) {
      b = d, d = c, fd = fc;
      c = b - g * (b - a), fc = dual(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + g * (b - a), fd = dual(d);
    }
  }
  return dual(0.5 * (a + b));
}

}  // namespace

TEST(Young, Values) {
  EXPECT_EQ(young_eval(Young::psi, 0.0), 0.0);
  EXPECT_EQ(young_eval(Young::phi, 0.0), 0.0);
  EXPECT_NEAR(young_eval(Young::phi, 1.0), std::numbers::e - 2.0, 1e-15);
  EXPECT_NEAR(young_eval(Young::psi, 1.0), 2.0 * std::log(2.0) - 1.0, 1e-15);
  // Psi(e - 1) = e - (e - 1) = 1
  EXPECT_NEAR(young_eval(Young::psi_inverse, 1.0), std::numbers::e - 1.0, 1e-11);
  EXPECT_NEAR(young_eval(Young::phi_inverse, 1.0), phi_root, 1e-11);
  // small-argument series agrees with the direct formula at the switch point
  EXPECT_NEAR(psi(1e-4), (1.0 + 1e-4) * std::log1p(1e-4) - 1e-4, 1e-20);
  EXPECT_NEAR(phi(1e-4), std::expm1(1e-4) - 1e-4, 1e-20);
  EXPECT_THROW(young_eval(Young::psi, -1.0), Error);
  EXPECT_THROW(phi(701.0), Error);
}

TEST(Young, ConvexIncreasingOnGrid) {
  for (auto f : {psi, phi}) {
    double prev = f(0.0);
    double prev_slope = 0.0;
    for (double t = 0.01; t < 20.0; t += 0.01) {
      const double y = f(t);
      EXPECT_GT(y, prev);
      const double slope = (y - prev) / 0.01;
      EXPECT_GE(slope, prev_slope - 1e-9);
      prev = y;
      prev_slope = slope;
    }
  }
}

TEST(Young, InversesRoundTrip) {
  for (double y : {1e-6, 0.3, 1.0, 7.5, 100.0}) {
    EXPECT_NEAR(psi(psi_inverse(y)), y, 1e-10 * std::max(1.0, y));
    EXPECT_NEAR(phi(phi_inverse(y)), y, 1e-10 * std::max(1.0, y));
  }
}

TEST(Luxemburg, ZeroAndConstant) {
  std::mt19937_64 rng(1);
  const auto mu = random_measure(rng, 30);
  EXPECT_EQ(luxemburg_norm(SignedDensity::constant(30, 0.0), mu, Young::psi).value, 0.0);
  const Vector prob = mu.weights() / mu.total_mass();
  const PointCloudMeasure p(mu.positions(), prob, {});
  for (double c : {0.5, 3.0, -2.0}) {
    const auto r = luxemburg_norm(SignedDensity::constant(30, c), p, Young::psi);
    EXPECT_NEAR(r.value, std::abs(c) / (std::numbers::e - 1.0), 1e-12 * std::abs(c));
    EXPECT_LE(r.residual, 1e-10);
    const auto q = luxemburg_norm(SignedDensity::constant(30, c), p, Young::phi);
    EXPECT_NEAR(q.value, std::abs(c) / phi_root, 1e-12 * std::abs(c));
  }
}

TEST(Luxemburg, ResidualAndHomogeneity) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mu = random_measure(rng, 40);
    const auto v = random_density(rng, 40);
    for (Young which : {Young::psi, Young::phi}) {
      const auto r = luxemburg_norm(v, mu, which);
      EXPECT_LE(r.residual, 1e-10);
      const auto r2 = luxemburg_norm(v.scaled(2.0), mu, which);
      EXPECT_NEAR(r2.value, 2.0 * r.value, 1e-9 * r.value);
      const auto r3 = luxemburg_norm(v.scaled(-0.37), mu, which);
      EXPECT_NEAR(r3.value, 0.37 * r.value, 1e-9 * r.value);
    }
  }
}

TEST(Holder, ConstantTwoOverRandomInstances) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> sizes(5, 60);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = sizes(rng);
    const auto mu = random_measure(rng, n);
    const auto small = random_density(rng, n, 0.8);
    const auto big = random_density(rng, n, 5.0);
    std::vector<double> sq(n);
    double lhs = 0.0;
    for (int i = 0; i < n; ++i) {
      sq[i] = small[i] * small[i];
      lhs += mu.weight(i) * sq[i] * big[i];
    }
    const double rhs = luxemburg_norm(SignedDensity(sq), mu, Young::phi).value *
                       luxemburg_norm(big, mu, Young::psi).value;
    EXPECT_LE(std::abs(lhs), 2.0 * rhs) << trial;
    worst = std::max(worst, std::abs(lhs) / rhs);
  }
  EXPECT_GT(worst, 0.0);
}

TEST(AveragedNorm, ZeroAndConstant) {
  std::mt19937_64 rng(4);
  const auto mu = random_measure(rng, 25);
  EXPECT_EQ(averaged_norm(SignedDensity::constant(25, 0.0), mu), 0.0);
  const std::vector<std::size_t> empty;
  EXPECT_EQ(averaged_norm(random_density(rng, 25), mu, empty), 0.0);
  const std::vector<std::size_t> subset = {1, 4, 9, 16};
  double m = 0.0;
  for (auto i : subset) m += mu.weight(i);
  for (double c : {1.0, -4.0, 1e-3}) {
    const double value = averaged_norm(SignedDensity::constant(25, c), mu, subset);
    EXPECT_NEAR(value, std::abs(c) * m * phi_root, 1e-9 * std::abs(c) * m);
  }
}

TEST(AveragedNorm, MatchesDualOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mu = random_measure(rng, 50);
    const auto v = random_density(rng, 50, trial % 2 ? 0.01 : 10.0);
    const double primal = averaged_norm(v, mu);
    const double dual = averaged_norm_dual(v, mu);
    EXPECT_NEAR(primal, dual, 1e-6 * dual) << trial;
  }
}

TEST(AveragedNorm, HomogeneityAndMonotonicity) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto mu = random_measure(rng, 40);
    const auto v = random_density(rng, 40);
    const double base = averaged_norm(v, mu);
    EXPECT_NEAR(averaged_norm(v.scaled(3.0), mu), 3.0 * base, 1e-9 * base);
    std::vector<std::size_t> inner(20), outer(40);
    std::iota(inner.begin(), inner.end(), std::size_t{0});
    std::iota(outer.begin(), outer.end(), std::size_t{0});
    // |V| extended by zero outside the inner subset
    std::vector<double> ext(40, 0.0);
    for (std::size_t i = 0; i < 20; ++i) ext[i] = v[i];
    const SignedDensity e(ext);
    EXPECT_GE(averaged_norm(e, mu, outer), averaged_norm(e, mu, inner) * (1.0 - 1e-12));
  }
}

TEST(AveragedNorm, EquivalentToLuxemburgOnFixedMeasure) {
  std::mt19937_64 rng(7);
  const auto mu = random_measure(rng, 100);
  double lo = 1e300, hi = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    auto v = random_density(rng, 100, std::pow(10.0, trial % 5 - 2));
    if (trial % 3 == 0) {
      std::vector<double> spike(100, 0.0);
      spike[trial] = v[trial] * 100.0;
      v = SignedDensity(spike);
    }
    const double ratio = averaged_norm(v, mu) / luxemburg_norm(v, mu, Young::psi).value;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi / lo, 10.0 * std::max(1.0, mu.total_mass()));
}
