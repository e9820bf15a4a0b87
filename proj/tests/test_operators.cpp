#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "bslab/operator_io.hpp"
#include "bslab/operators.hpp"
#include "bslab/orlicz.hpp"
#include "bslab/scenarios.hpp"
#include "bslab/spectral.hpp"

using namespace bslab;
using std::numbers::pi;

namespace {

PointCloudMeasure two_atoms(double distance) {
  Matrix pos = Matrix::Zero(2, 2);
  pos(0, 1) = distance;
  Vector w(2);
  w << 0.5, 0.5;
  return PointCloudMeasure::single(pos, w, 1.0);
}

template <class F>
void expect_error(ErrorKind kind, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected error " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

LogKernelSpec spec_with(double c, DiagonalRule rule) { return {KernelChoice::pure_log, c, rule}; }

}  // namespace

TEST(Fourier, RankOnePointMass) {
  const auto mu = PointCloudMeasure::single(Matrix::Zero(2, 1), Vector::Ones(1), 1.0);
  const auto op = assemble_fourier_bs(mu, SignedDensity::constant(1, 1.0), 2.0 * pi, 1);
  ASSERT_EQ(op.size(), 9);
  const auto r = eigen_spectrum(op);
  ASSERT_EQ(r.positive.size(), 1u);
  EXPECT_TRUE(r.negative.empty());
  // a(xi)^2 = 1 / (1 + |xi|^2): 1 + 4 / 2 + 4 / 3
  EXPECT_NEAR(r.positive[0], 13.0 / (12.0 * pi * pi), 1e-14);
}

TEST(Fourier, ZeroDensityAndErrors) {
  const auto circle = builtin_measure("circle", {{"atoms", 100}});
  const auto op = assemble_fourier_bs(circle.measure, SignedDensity::constant(100, 0.0), 8.0, 5);
  EXPECT_EQ(op.complex().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(eigen_spectrum(op).positive.empty());
  expect_error(ErrorKind::budget, [&] { assemble_fourier_bs(circle.measure, circle.density, 8.0, 60); });
  expect_error(ErrorKind::support_too_large, [&] { assemble_fourier_bs(circle.measure, circle.density, 3.0, 5); });
}

TEST(Fourier, HermitianPositiveAndInterlacing) {
  const auto circle = builtin_measure("circle", {{"atoms", 400}});
  const auto coarse = assemble_fourier_bs(circle.measure, circle.density, 8.0, 12);
  EXPECT_LE(coarse.hermitian_defect(), 1e-10);
  const auto rc = eigen_spectrum(coarse);
  for (double x : rc.negative) EXPECT_LE(x, 1e-10 * rc.norm);
  // the K = 12 matrix is a principal submatrix of the K = 16 one, so the
  // ordered eigenvalues can only grow with the cutoff
  const auto fine = assemble_fourier_bs(circle.measure, circle.density, 8.0, 16);
  const auto rf = eigen_spectrum(fine);
  for (std::size_t k = 0; k < 30; ++k) EXPECT_LE(rc.positive[k], rf.positive[k] * (1.0 + 1e-12)) << k;
  for (Eigen::Index i = 0; i < coarse.size(); ++i) {
    const int a = static_cast<int>(i / 25) - 12, b = static_cast<int>(i % 25) - 12;
    const Eigen::Index f = (a + 16) * 33 + (b + 16);
    EXPECT_EQ(coarse.complex()(i, i), fine.complex()(f, f));
  }
}

TEST(LogKernel, TwoAtomClosedForms) {
  const auto unit = eigen_spectrum(
      assemble_log_kernel(two_atoms(1.0), SignedDensity::constant(2, 1.0), spec_with(1.0, DiagonalRule::zero)));
  EXPECT_TRUE(unit.positive.empty());
  EXPECT_TRUE(unit.negative.empty());
  const auto op =
      assemble_log_kernel(two_atoms(std::exp(-1.0)), SignedDensity::constant(2, 1.0), spec_with(1.0, DiagonalRule::zero));
  EXPECT_NEAR(op.real()(0, 1), 0.5, 1e-15);
  EXPECT_EQ(op.real()(0, 0), 0.0);
  const auto r = eigen_spectrum(op);
  ASSERT_EQ(r.positive.size(), 1u);
  ASSERT_EQ(r.negative.size(), 1u);
  EXPECT_NEAR(r.positive[0], 0.5, 1e-15);
  EXPECT_NEAR(r.negative[0], 0.5, 1e-15);
}

TEST(LogKernel, CoefficientAndDiagonal) {
  EXPECT_NEAR(LogKernelSpec::for_dimension(2).log_coefficient, 1.0 / (2.0 * pi), 1e-16);
  EXPECT_NEAR(LogKernelSpec::for_dimension(3).log_coefficient, 4.0 * pi / std::pow(2.0 * pi, 3), 1e-16);
  // mean of -log|x| over [-delta/2, delta/2]
  for (double delta : {1.0, 0.01})
    EXPECT_NEAR(cell_mean_neg_log(delta, 1), 1.0 - std::log(delta / 2.0), 1e-14);
  // mean of -log|x| over the unit disk is 1/2
  EXPECT_NEAR(cell_mean_neg_log(std::sqrt(pi), 2), 0.5, 1e-14);
  // E log|x - y| on [-1, 1]: ln 2 - 3/2 (closed form)
  EXPECT_NEAR(cell_pair_mean_neg_log(2.0, 1), 1.5 - std::log(2.0), 1e-14);
  EXPECT_THROW(cell_pair_mean_neg_log(1.0, 4), Error);
  EXPECT_EQ(cell_dimension(std::log(2.0) / std::log(3.0), 2), 1);
  EXPECT_EQ(cell_dimension(2.0, 2), 2);
  EXPECT_EQ(cell_dimension(2.0, 1), 1);
}

TEST(LogKernel, PairMeanMatchesMonteCarloInTheDisk) {
  // independent oracle for the two-dimensional constant -1/4
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto draw = [&] {
    for (;;) {
      const double x = u(rng), y = u(rng);
      if (x * x + y * y <= 1.0) return std::pair{x, y};
    }
  };
  double sum = 0.0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    const auto [a, b] = draw();
    const auto [c, d] = draw();
    sum += 0.5 * std::log((a - c) * (a - c) + (b - d) * (b - d));
  }
  EXPECT_NEAR(sum / n, -0.25, 5e-3);
  EXPECT_NEAR(cell_pair_mean_neg_log(std::sqrt(pi), 2), 0.25, 1e-14);
}

TEST(LogKernel, CoincidentAtomsRejected) {
  expect_error(ErrorKind::degenerate_kernel, [] {
    assemble_log_kernel(two_atoms(0.0), SignedDensity::constant(2, 1.0), LogKernelSpec::for_dimension(2));
  });
}

TEST(LogKernel, CircleBesselMatchesFourierOracle) {
  const auto circle = builtin_measure("circle", {{"atoms", 2000}});
  const auto r = eigen_spectrum(assemble_log_kernel(
      circle.measure, circle.density, LogKernelSpec::for_dimension(2, KernelChoice::bessel_exact_N2)));
  for (std::size_t k = 50; k <= 200; k += 10) EXPECT_NEAR(k * r.positive[k - 1], 1.0, 0.05) << k;
}

TEST(LogKernel, SignsAndFraming) {
  const auto circle = builtin_measure("circle", {{"atoms", 200}});
  const auto spec = LogKernelSpec::for_dimension(2, KernelChoice::bessel_exact_N2);
  const auto pos = assemble_log_kernel(circle.measure, circle.density, spec);
  const auto neg = assemble_log_kernel(circle.measure, circle.density.scaled(-1.0), spec);
  EXPECT_EQ((pos.real() + neg.real()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_FALSE(neg.metadata().sign_framed);

  // mixed sign: spectrum of S^{1/2} diag(sgn V) S^{1/2} equals that of diag(sgn V) S
  const auto half = builtin_measure("half_signed_circle", {{"atoms", 120}});
  const auto framed = assemble_log_kernel(half.measure, half.density, spec);
  EXPECT_TRUE(framed.metadata().sign_framed);
  const auto plain = assemble_log_kernel(half.measure, half.density.abs(), spec);
  Vector sgn(120);
  for (int i = 0; i < 120; ++i) sgn[i] = half.density[i] > 0 ? 1.0 : -1.0;
  Eigen::EigenSolver<Matrix> es(sgn.asDiagonal() * plain.real());
  std::vector<double> oracle;
  for (int i = 0; i < 120; ++i) oracle.push_back(es.eigenvalues()[i].real());
  std::sort(oracle.begin(), oracle.end());
  Eigen::SelfAdjointEigenSolver<Matrix> sa(framed.real());
  const double scale = sa.eigenvalues().cwiseAbs().maxCoeff();
  const double tol = 1e-9 + framed.metadata().clipped_negative;
  for (int i = 0; i < 120; ++i) EXPECT_NEAR(sa.eigenvalues()[i], oracle[static_cast<std::size_t>(i)], tol * scale) << i;
}

TEST(LogKernel, SignDecompositionLocalizes) {
  const auto half = builtin_measure("half_signed_circle", {{"atoms", 1000}});
  const auto spec = LogKernelSpec::for_dimension(2, KernelChoice::bessel_exact_N2);
  const auto mixed = eigen_spectrum(assemble_log_kernel(half.measure, half.density, spec));
  // V_+ alone: zero-weight atoms drop out, so assemble on the positive half
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < half.measure.size(); ++i)
    if (half.density[i] > 0.0) keep.push_back(i);
  Matrix pos(2, static_cast<Eigen::Index>(keep.size()));
  Vector w(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    pos.col(static_cast<Eigen::Index>(j)) = half.measure.position(keep[j]);
    w[static_cast<Eigen::Index>(j)] = half.measure.weight(keep[j]);
  }
  const PointCloudMeasure upper = PointCloudMeasure::single(pos, w, 1.0);
  const auto alone = eigen_spectrum(assemble_log_kernel(upper, SignedDensity::constant(keep.size(), 1.0), spec));
  for (std::size_t k : {50u, 100u, 200u}) {
    const double lambda = alone.positive[k - 1];
    const double a = static_cast<double>(counting(mixed, lambda, Sign::plus));
    const double b = static_cast<double>(counting(alone, lambda, Sign::plus));
    EXPECT_NEAR(a, b, 0.1 * b) << k;
  }
}

TEST(LogKernel, TopEigenvalueOverLuxemburgIsStable) {
  double lo = 1e300, hi = 0.0;
  for (int atoms : {250, 500, 1000, 2000}) {
    const auto circle = builtin_measure("circle", {{"atoms", atoms}});
    const auto r = eigen_spectrum(assemble_log_kernel(circle.measure, circle.density,
                                                      LogKernelSpec::for_dimension(2, KernelChoice::bessel_exact_N2)));
    const double q = r.positive[0] / orlicz::luxemburg_norm(circle.density, circle.measure, orlicz::Young::psi).value;
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  EXPECT_LE(hi / lo, 2.0);
}

TEST(LogPotential, SingleAtomAndScaling) {
  const auto atom = PointCloudMeasure::single(Matrix::Zero(2, 1), Vector::Constant(1, 0.3), 1.0);
  const auto op = assemble_log_potential(atom, SignedDensity::constant(1, 2.0));
  // -(w V) times the mean of -log|x| over [-1/2, 1/2]
  EXPECT_NEAR(op.real()(0, 0), -0.6 * (1.0 + std::log(2.0)), 1e-15);
  EXPECT_EQ(assemble_log_potential(atom, SignedDensity::constant(1, 2.0), DiagonalRule::zero).real()(0, 0), 0.0);

  const auto cantor = builtin_measure("cantor_line", {{"depth", 6}});
  const auto s1 = singular_values(eigen_spectrum(assemble_log_potential(cantor.measure, cantor.density)));
  const auto s2 =
      singular_values(eigen_spectrum(assemble_log_potential(cantor.measure, cantor.density.scaled(2.0))));
  ASSERT_EQ(s1.size(), s2.size());
  for (std::size_t k = 0; k < s1.size(); ++k) EXPECT_NEAR(s2[k], 2.0 * s1[k], 1e-12 * s1[0]);
  const auto half = builtin_measure("half_signed_circle", {{"atoms", 20}});
  expect_error(ErrorKind::sign_framing, [&] { assemble_log_potential(half.measure, half.density); });
}

TEST(Steklov, LebesgueAnglesGiveDiagonalSpectrum) {
  const auto circle = builtin_measure("circle", {{"atoms", 1024}});
  // equal arclength weights on the unit circle are the Lebesgue angle measure
  const auto& d = circle.density;
  const auto op = assemble_steklov_circle(circle.measure, d, 40, ZeroMode::drop);
  const auto modes = steklov_modes(40, ZeroMode::drop);
  ASSERT_EQ(op.size(), 80);
  const auto& m = op.complex();
  double off = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    EXPECT_NEAR(m(i, i).real(), 1.0 / std::abs(modes[static_cast<std::size_t>(i)]), 1e-13);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j) off = std::max(off, std::abs(m(i, j)));
  }
  EXPECT_LT(off, 1e-13);
  const auto r = eigen_spectrum(op);
  // n_+(lambda) = #{|k| : 1/|k| > lambda}
  EXPECT_EQ(counting(r, 0.095, Sign::plus), 20u);
  EXPECT_EQ(counting(r, 0.1, Sign::plus), 18u);

  const auto shift = assemble_steklov_circle(circle.measure, d, 40, ZeroMode::shift);
  ASSERT_EQ(shift.size(), 81);
  EXPECT_NEAR(shift.complex()(40, 40).real(), 1.0, 1e-13);
}

TEST(Steklov, ZeroDensityAndChecks) {
  const auto circle = builtin_measure("circle", {{"atoms", 64}});
  const auto op = assemble_steklov_circle(circle.measure, SignedDensity::constant(64, 0.0), 8, ZeroMode::drop);
  EXPECT_EQ(op.complex().cwiseAbs().maxCoeff(), 0.0);
  const auto off = builtin_measure("circle", {{"atoms", 64}, {"radius", 2.0}});
  EXPECT_THROW(assemble_steklov_circle(off.measure, off.density, 8, ZeroMode::drop), Error);
  expect_error(ErrorKind::budget, [&] { assemble_steklov_circle(circle.measure, circle.density, 100, ZeroMode::drop, 50); });
}

TEST(OperatorIo, BinaryRoundTripAndMetadata) {
  const auto circle = builtin_measure("circle", {{"atoms", 50}});
  const auto real = assemble_log_kernel(circle.measure, circle.density, LogKernelSpec::for_dimension(2));
  const auto cplx = assemble_steklov_circle(circle.measure, circle.density, 6, ZeroMode::shift);
  for (const auto* op : {&real, &cplx}) {
    std::stringstream buf;
    write_operator_binary(buf, *op);
    const auto back = read_operator_binary(buf, op->route(), op->metadata());
    ASSERT_EQ(back.is_complex(), op->is_complex());
    if (op->is_complex()) EXPECT_EQ(back.complex(), op->complex());
    else EXPECT_EQ(back.real(), op->real());
  }
  const auto meta = operator_metadata_json(real);
  EXPECT_EQ(meta["route"], "logkernel");
  EXPECT_EQ(meta["diagonal_rule"], "cell_average");
  EXPECT_EQ(meta["fingerprint"], measure_fingerprint(circle.measure, circle.density));
  EXPECT_NE(measure_fingerprint(circle.measure, circle.density),
            measure_fingerprint(circle.measure, circle.density.scaled(2.0)));
}
