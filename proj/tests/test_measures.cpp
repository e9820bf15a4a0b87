#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "bslab/measure_io.hpp"
#include "bslab/measures.hpp"
#include "bslab/scenarios.hpp"

using namespace bslab;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

SimilitudeSystem cantor(int ambient = 1) { return detail::cantor_system(ambient, 1.0); }

PointCloudMeasure uniform_segment(int atoms) { return builtin_measure("segment", {{"atoms", atoms}}).measure; }

template <class F>
void expect_error(ErrorKind kind, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected error " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

}  // namespace

TEST(PointCloudMeasure, InvariantsAndMass) {
  Matrix pos(2, 3);
  pos << 0, 1, 2, 0, 0, 0;
  PointCloudMeasure mu(pos, vec({0.25, 0.5, 0.25}), {});
  EXPECT_DOUBLE_EQ(mu.total_mass(), 1.0);
  ASSERT_EQ(mu.components().size(), 1u);
  EXPECT_EQ(mu.components()[0].nominal_dim, 2.0);
  expect_error(ErrorKind::invalid_argument, [&] { PointCloudMeasure(pos, vec({1, -1, 0}), {}); });
  expect_error(ErrorKind::invalid_argument, [&] { PointCloudMeasure(pos, vec({1, 1}), {}); });
  expect_error(ErrorKind::invalid_argument, [&] { PointCloudMeasure(pos, vec({1, 1, 1}), {{0, 2, 1.0, ""}}); });
}

TEST(SignedDensity, PartsAndFlags) {
  SignedDensity v({1.5, -2.0, 0.0});
  EXPECT_TRUE(v.changes_sign());
  EXPECT_FALSE(v.nonnegative());
  EXPECT_EQ(v.positive_part()[0], 1.5);
  EXPECT_EQ(v.positive_part()[1], 0.0);
  EXPECT_EQ(v.negative_part()[1], 2.0);
  EXPECT_EQ(v.scaled(2.0)[1], -4.0);
  EXPECT_THROW(SignedDensity({std::nan("")}), Error);
}

TEST(IfsDimension, ClosedForms) {
  const auto c = cantor();
  EXPECT_NEAR(ifs_dimension(c.maps()), std::log(2.0) / std::log(3.0), 1e-12);
  const std::vector<Similitude> three = {Similitude::scaling(0.5, vec({0})), Similitude::scaling(0.5, vec({0.5})),
                                         Similitude::scaling(0.5, vec({0.25}))};
  EXPECT_NEAR(ifs_dimension(three), std::log(3.0) / std::log(2.0), 1e-12);
  const std::vector<Similitude> golden = {Similitude::scaling(0.5, vec({0})), Similitude::scaling(0.25, vec({0.5}))};
  const double d = ifs_dimension(golden);
  EXPECT_NEAR(d, std::log2((std::sqrt(5.0) + 1.0) / 2.0), 1e-12);
  EXPECT_NEAR(std::pow(0.5, d) + std::pow(0.25, d), 1.0, 1e-12);
}

TEST(IfsDimension, Errors) {
  const std::vector<Similitude> one = {Similitude::scaling(0.5, vec({0}))};
  expect_error(ErrorKind::degenerate_system, [&] { ifs_dimension(one); });
  expect_error(ErrorKind::invalid_ratio, [&] { Similitude::scaling(1.0, vec({0})); });
  expect_error(ErrorKind::invalid_ratio, [&] { Similitude::scaling(0.0, vec({0})); });
  Matrix skew(2, 2);
  skew << 1, 0.1, 0, 1;
  expect_error(ErrorKind::invalid_argument, [&] { Similitude(0.5, skew, vec({0, 0})); });
}

TEST(IfsMeasure, CantorDepths) {
  const auto d1 = ifs_self_similar_measure(cantor(), 1);
  ASSERT_EQ(d1.size(), 2u);
  EXPECT_NEAR(d1.weight(0), 0.5, 1e-14);
  EXPECT_NEAR(d1.weight(1), 0.5, 1e-14);
  const auto d8 = ifs_self_similar_measure(cantor(), 8);
  ASSERT_EQ(d8.size(), 256u);
  for (std::size_t i = 0; i < d8.size(); ++i) {
    EXPECT_NEAR(d8.weight(i), std::pow(2.0, -8), 1e-15);
    EXPECT_GE(d8.position(i)[0], 0.0);
    EXPECT_LE(d8.position(i)[0], 1.0);
  }
  EXPECT_NEAR(d8.total_mass(), 1.0, 1e-10);
  EXPECT_NEAR(d8.components()[0].nominal_dim, std::log(2.0) / std::log(3.0), 1e-12);
}

TEST(IfsMeasure, UnequalRatiosDepthTwo) {
  SimilitudeSystem sys({Similitude::scaling(0.5, vec({0})), Similitude::scaling(0.25, vec({0.5}))});
  const auto mu = ifs_self_similar_measure(sys, 2);
  ASSERT_EQ(mu.size(), 4u);
  const double x = std::pow(2.0, -sys.similarity_dim());
  EXPECT_NEAR(x, (std::sqrt(5.0) - 1.0) / 2.0, 1e-12);
  // word order 00, 01, 10, 11 with p0 = x, p1 = x^2
  EXPECT_NEAR(mu.weight(0), x * x, 1e-14);
  EXPECT_NEAR(mu.weight(1), x * x * x, 1e-14);
  EXPECT_NEAR(mu.weight(2), x * x * x, 1e-14);
  EXPECT_NEAR(mu.weight(3), std::pow(x, 4), 1e-14);
  EXPECT_NEAR(mu.total_mass(), 1.0, 1e-12);
}

TEST(IfsMeasure, AtomPositionsFollowWordConvention) {
  // word (j1, j2): S_{j1}(S_{j2}(fixed point of S_{j1}))
  const auto mu = ifs_self_similar_measure(cantor(), 2);
  // S0(x) = x / 3, S1(x) = x / 3 + 2 / 3, fixed points 0 and 1
  EXPECT_NEAR(mu.position(0)[0], 0.0, 1e-15);  // S0(S0(0))
  EXPECT_NEAR(mu.position(1)[0], 2.0 / 9.0, 1e-15);  // S0(S1(0))
  EXPECT_NEAR(mu.position(2)[0], 7.0 / 9.0, 1e-15);  // S1(S0(1))
  EXPECT_NEAR(mu.position(3)[0], 1.0, 1e-15);  // S1(S1(1))
  EXPECT_EQ(std::string(SimilitudeSystem::separation_status), "assumed");
}

TEST(IfsMeasure, BudgetAndWeightsAtEveryDepth) {
  expect_error(ErrorKind::budget, [] { ifs_self_similar_measure(cantor(), 12, 1000); });
  for (int depth = 1; depth <= 12; ++depth)
    EXPECT_NEAR(ifs_self_similar_measure(cantor(), depth).total_mass(), 1.0, 1e-10) << depth;
}

namespace {
LipschitzPatch graph_patch(std::function<double(double)> phi, double lo, double hi, int cells) {
  LipschitzPatch p;
  p.param_dim = 1;
  p.codim = 1;
  p.lower = vec({lo});
  p.upper = vec({hi});
  p.resolution = {cells};
  p.map = [phi](const Vector& x) { return vec({phi(x[0])}); };
  return p;
}

double circle_from_patches(int cells) {
  const double a = 1.0 / std::sqrt(2.0);
  double total = 0.0;
  Matrix swap(2, 2);
  swap << 0, 1, 1, 0;
  for (double sign : {1.0, -1.0}) {
    auto horizontal = graph_patch([sign](double x) { return sign * std::sqrt(1.0 - x * x); }, -a, a, cells);
    total += surface_measure(horizontal).total_mass();
    auto vertical = horizontal;
    vertical.frame = swap;
    total += surface_measure(vertical).total_mass();
  }
  return total;
}
}  // namespace

TEST(SurfaceMeasure, FlatAndDiagonalGraphs) {
  EXPECT_NEAR(surface_measure(graph_patch([](double) { return 0.0; }, 0, 1, 100)).total_mass(), 1.0, 1e-12);
  EXPECT_NEAR(surface_measure(graph_patch([](double x) { return x; }, 0, 1, 200)).total_mass(), std::sqrt(2.0), 1e-6);
}

TEST(SurfaceMeasure, CirclePatchesAndRefinementOrder) {
  const double e400 = std::abs(circle_from_patches(400) - 2.0 * std::numbers::pi);
  EXPECT_LT(e400, 1e-3);
  const double e200 = std::abs(circle_from_patches(200) - 2.0 * std::numbers::pi);
  const double e800 = std::abs(circle_from_patches(800) - 2.0 * std::numbers::pi);
  EXPECT_LE(e400, 0.5 * e200);
  EXPECT_LE(e800, 0.5 * e400);
}

TEST(SurfaceMeasure, TangentFramesAndLipschitzCheck) {
  auto p = graph_patch([](double x) { return 2.0 * x; }, 0, 1, 10);
  const auto mu = surface_measure(p);
  ASSERT_TRUE(mu.tangent_frames().has_value());
  const Matrix& t = (*mu.tangent_frames())[3];
  EXPECT_NEAR(std::abs(t(0, 0)), 1.0 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(std::abs(t(1, 0)), 2.0 / std::sqrt(5.0), 1e-12);
  p.lipschitz_estimate = 1.5;
  expect_error(ErrorKind::evaluation, [&] { surface_measure(p); });
  auto bad = graph_patch([](double x) { return 1.0 / (x - 0.55); }, 0, 1, 10);
  bad.map = [](const Vector& x) { return vec({std::log(x[0] - 0.5)}); };
  expect_error(ErrorKind::evaluation, [&] { surface_measure(bad); });
}

TEST(SurfaceMeasure, TwoDimensionalSquare) {
  LipschitzPatch sq;
  sq.param_dim = 2;
  sq.codim = 0;
  sq.lower = vec({0, 0});
  sq.upper = vec({1, 2});
  sq.resolution = {10, 20};
  sq.map = [](const Vector&) { return Vector(0); };
  const auto mu = surface_measure(sq);
  EXPECT_EQ(mu.size(), 200u);
  EXPECT_NEAR(mu.total_mass(), 2.0, 1e-12);
}

TEST(BuiltinMeasure, CatalogExamples) {
  const auto circle = builtin_measure("circle", {{"radius", 1}, {"atoms", 2000}});
  EXPECT_NEAR(circle.measure.total_mass(), 2.0 * std::numbers::pi, 1e-4);
  const auto two = builtin_measure("two_circles", {{"r1", 1}, {"r2", 0.5}, {"gap", 1}, {"atoms", 3000}});
  EXPECT_NEAR(two.measure.total_mass(), 3.0 * std::numbers::pi, 1e-3);
  EXPECT_EQ(two.measure.components().size(), 2u);
  const auto half = builtin_measure("half_signed_circle", {{"radius", 1}, {"atoms", 2000}});
  EXPECT_NEAR(integrate(half.measure, half.density), 0.0, 1e-6);
  EXPECT_NEAR(integrate(half.measure, half.density.positive_part()), std::numbers::pi, 1e-3);
  const auto mixed = builtin_measure("circle_plus_square", {{"atoms", 500}, {"cells", 20}});
  ASSERT_EQ(mixed.measure.components().size(), 2u);
  EXPECT_EQ(mixed.measure.components()[0].nominal_dim, 1.0);
  EXPECT_EQ(mixed.measure.components()[1].nominal_dim, 2.0);
  const auto sphere = builtin_measure("sphere", {{"atoms", 500}});
  EXPECT_EQ(sphere.measure.ambient_dim(), 3);
  EXPECT_NEAR(sphere.measure.total_mass(), 4.0 * std::numbers::pi, 1e-12);
  for (std::size_t i = 0; i < sphere.measure.size(); ++i) EXPECT_NEAR(sphere.measure.position(i).norm(), 1.0, 1e-12);
  const auto angles = builtin_measure("steklov_cantor", {{"depth", 6}});
  EXPECT_NEAR(angles.measure.total_mass(), 1.0, 1e-12);
  for (std::size_t i = 0; i < angles.measure.size(); ++i) EXPECT_NEAR(angles.measure.position(i).norm(), 1.0, 1e-12);
  const auto gasket = builtin_measure("sierpinski", {{"depth", 5}});
  EXPECT_EQ(gasket.measure.size(), 243u);
  EXPECT_NEAR(gasket.measure.components()[0].nominal_dim, std::log(3.0) / std::log(2.0), 1e-12);
}

TEST(BuiltinMeasure, Errors) {
  expect_error(ErrorKind::unknown_scenario, [] { builtin_measure("torus", {{"atoms", 10}}); });
  expect_error(ErrorKind::missing_parameter, [] { builtin_measure("circle", {}); });
  expect_error(ErrorKind::missing_parameter, [] { builtin_measure("cantor_line", {{"atoms", 4}}); });
}

TEST(UnionMeasure, Bookkeeping) {
  const auto a = builtin_measure("circle", {{"atoms", 100}});
  const std::vector<std::pair<PointCloudMeasure, SignedDensity>> one = {{a.measure, a.density}};
  const auto [same, v] = union_measure(one);
  EXPECT_EQ(same.positions(), a.measure.positions());
  EXPECT_EQ(same.weights(), a.measure.weights());
  const auto b = builtin_measure("circle", {{"atoms", 50}, {"radius", 0.5}, {"center_x", 3.0}});
  const std::vector<std::pair<PointCloudMeasure, SignedDensity>> two = {{a.measure, a.density},
                                                                         {b.measure, b.density}};
  const auto [merged, mv] = union_measure(two);
  EXPECT_NEAR(merged.total_mass(), a.measure.total_mass() + b.measure.total_mass(),
              1e-12 * merged.total_mass());
  EXPECT_EQ(mv.size(), 150u);
  const auto s3 = builtin_measure("sphere", {{"atoms", 10}});
  const std::vector<std::pair<PointCloudMeasure, SignedDensity>> bad = {{a.measure, a.density},
                                                                         {s3.measure, s3.density}};
  expect_error(ErrorKind::dimension_mismatch, [&] { union_measure(bad); });
}

TEST(BallMass, Examples) {
  const auto seg = uniform_segment(2000);
  EXPECT_NEAR(ball_mass(seg, vec({0.5, 0.0}), 10.0), seg.total_mass(), 1e-12);
  Matrix origin = Matrix::Zero(2, 1);
  const auto point = PointCloudMeasure::single(origin, vec({1.0}), 0.5);
  EXPECT_EQ(ball_mass(point, vec({0, 0}), 0.1), 1.0);
  // brute-force oracle: atoms at (i + 1/2) / 2000 within 0.05 of 0.5
  double oracle = 0.0;
  for (int i = 0; i < 2000; ++i)
    if (std::abs((i + 0.5) / 2000.0 - 0.5) <= 0.05) oracle += 1.0 / 2000.0;
  EXPECT_DOUBLE_EQ(ball_mass(seg, vec({0.5, 0.0}), 0.05), oracle);
  EXPECT_NEAR(ball_mass(seg, vec({0.5, 0.0}), 0.05), 0.1, 2e-3);
  double prev = 0.0;
  for (double r = 0.001; r < 1.0; r *= 1.3) {
    const double m = ball_mass(seg, vec({0.3, 0.0}), r);
    EXPECT_GE(m, prev);
    prev = m;
  }
}

TEST(BallMass, GridIndexAgreesWithScan) {
  const auto mu = builtin_measure("sphere", {{"atoms", 3000}}).measure;
  GridIndex grid(mu.positions(), 0.05);
  for (std::size_t c : {0u, 777u, 2999u}) {
    for (double r : {0.05, 0.2, 0.7}) {
      double m = 0.0;
      grid.for_each_within(mu.position(c), r, [&](Eigen::Index j) { m += mu.weights()[j]; });
      EXPECT_NEAR(m, ball_mass(mu, mu.position(c), r), 1e-12);
    }
  }
}

TEST(Ahlfors, UniformSegment) {
  const auto seg = uniform_segment(2000);
  const std::vector<double> radii = {0.002, 0.005, 0.01, 0.05, 0.1};
  const auto est = ahlfors_constants(seg, 1.0, radii, 50);
  EXPECT_GE(est.c_lower, 1.0 - 1e-9);
  EXPECT_LE(est.c_upper, 2.2);
  EXPECT_GE(est.ratio(), 1.0);
  EXPECT_LE(est.ratio(), 2.2);
  EXPECT_TRUE(est.regular());
  EXPECT_EQ(est.sampled_atoms.front(), 0u);
  EXPECT_EQ(est.sampled_atoms.back(), 1999u);
}

TEST(Ahlfors, WrongExponentIsNotRegular) {
  const auto seg = uniform_segment(5000);
  const std::vector<double> coarse = {0.05, 0.1};
  const std::vector<double> fine = {0.001, 0.1};
  const double r1 = ahlfors_constants(seg, 0.5, coarse, 20).ratio();
  const double r2 = ahlfors_constants(seg, 0.5, fine, 20).ratio();
  EXPECT_GT(r2, r1);
  // mass ~ r against r^{1/2}: the ratio grows at least like sqrt(0.1 / 0.001)
  EXPECT_GT(r2, 10.0);
  const std::vector<double> wide = {0.001, 0.5};
  EXPECT_FALSE(ahlfors_constants(seg, 0.5, wide, 20, 10.0).regular());
  EXPECT_TRUE(ahlfors_constants(seg, 1.0, wide, 20, 10.0).regular());
}

TEST(Ahlfors, CantorDepthTen) {
  const auto mu = ifs_self_similar_measure(cantor(), 10);
  std::vector<double> radii;
  for (int j = 2; j <= 7; ++j) radii.push_back(std::pow(3.0, -j));
  const double s = std::log(2.0) / std::log(3.0);
  const auto est = ahlfors_constants(mu, s, radii, 64);
  EXPECT_LE(est.ratio(), 10.0);
  const auto db = density_bounds(mu, s, vec({1.0}), radii);
  EXPECT_LE(db.upper / db.lower, 10.0);
  EXPECT_TRUE(db.positive_finite_density());
}

TEST(Ahlfors, ResolutionFloor) {
  const auto seg = uniform_segment(100);
  const std::vector<double> tiny = {0.001};
  expect_error(ErrorKind::resolution, [&] { ahlfors_constants(seg, 1.0, tiny, 5); });
  expect_error(ErrorKind::resolution, [&] { density_bounds(seg, 1.0, vec({0.5, 0}), tiny); });
}

TEST(DensityBounds, SegmentInteriorAndEndpoint) {
  const auto seg = uniform_segment(2000);
  std::vector<double> radii;
  for (double r = 0.002; r <= 0.1; r *= 1.5) radii.push_back(r);
  const auto inner = density_bounds(seg, 1.0, vec({0.5, 0.0}), radii);
  EXPECT_NEAR(inner.lower, 2.0, 0.1);
  EXPECT_NEAR(inner.upper, 2.0, 0.1);
  EXPECT_LE(inner.lower, 2.0 + 1e-12);
  EXPECT_GE(inner.upper, 2.0 - 1e-12);
  EXPECT_TRUE(inner.preiss_heuristic());
  const auto end = density_bounds(seg, 1.0, vec({0.0, 0.0}), radii);
  EXPECT_NEAR(end.lower, 1.0, 0.05);
  EXPECT_NEAR(end.upper, 1.0, 0.05);
}

TEST(MeasureIo, RoundTrip) {
  const auto s = builtin_measure("half_signed_circle", {{"atoms", 64}});
  std::stringstream buf;
  write_measure(buf, s.measure, &s.density);
  const auto [mu, v] = read_measure(buf);
  EXPECT_EQ(mu.positions(), s.measure.positions());
  EXPECT_EQ(mu.weights(), s.measure.weights());
  ASSERT_TRUE(v.has_value());
  for (std::size_t i = 0; i < v->size(); ++i) EXPECT_EQ((*v)[i], s.density[i]);

  const auto mixed = builtin_measure("circle_plus_square", {{"atoms", 40}, {"cells", 4}});
  std::stringstream buf2;
  write_measure(buf2, mixed.measure);
  std::string header;
  std::getline(buf2, header);
  EXPECT_EQ(header.substr(0, 11), "2 1:40,2:16");
  buf2.seekg(0);
  const auto [mu2, v2] = read_measure(buf2);
  EXPECT_FALSE(v2.has_value());
  ASSERT_EQ(mu2.components().size(), 2u);
  EXPECT_EQ(mu2.components()[1].size(), 16u);
}
