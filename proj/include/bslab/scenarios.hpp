#pragma once

// Builtin catalog of measures used by the experiment runner.

#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bslab/measures.hpp"

namespace bslab {

using ParamMap = std::map<std::string, double, std::less<>>;

struct ScenarioMeasure {
  PointCloudMeasure measure;
  SignedDensity density;
};

struct ScenarioInfo {
  std::string_view name;
  std::string_view description;
  std::string_view required;  // comma separated
};

inline const std::vector<ScenarioInfo>& scenario_catalog() {
  static const std::vector<ScenarioInfo> catalog = {
      {"circle", "circle of given radius in the plane, equally spaced arclength atoms", "atoms"},
      {"segment", "straight segment [0, length] on the first axis", "atoms"},
      {"two_circles", "two disjoint circles r1, r2 separated by gap; atoms split by length", "atoms"},
      {"sphere", "2-sphere in R^3, Fibonacci lattice atoms of equal area", "atoms"},
      {"cantor_line", "middle-third Cantor probability measure on [0, length]", "depth"},
      {"cantor_circle", "middle-third Cantor set of angles on the unit circle", "depth"},
      {"sierpinski", "Sierpinski gasket self-similar measure in the plane", "depth"},
      {"half_signed_circle", "circle with V = +1 on the upper half-arc and -1 on the lower", "atoms"},
      {"circle_plus_square", "unit circle plus an axis-aligned square patch (2-dimensional) inside it", "atoms"},
      {"steklov_cantor", "angle Cantor measure on the unit circle for the Steklov operator", "depth"},
  };
  return catalog;
}

namespace detail {

inline double param(const ParamMap& p, std::string_view key, std::optional<double> fallback = std::nullopt) {
  if (auto it = p.find(key); it != p.end()) return it->second;
  if (fallback) return *fallback;
  fail(ErrorKind::missing_parameter, "scenario parameter '" + std::string(key) + "' is required");
}

inline int count_param(const ParamMap& p, std::string_view key, std::optional<double> fallback = std::nullopt) {
  const double v = param(p, key, fallback);
  require(v >= 1.0 && v == std::floor(v), ErrorKind::invalid_argument,
          "parameter '" + std::string(key) + "' must be a positive integer");
  return static_cast<int>(v);
}

inline PointCloudMeasure circle_measure(double radius, int atoms, double cx, double cy, std::string label) {
  require(radius > 0.0, ErrorKind::invalid_argument, "radius must be positive");
  Matrix pos(2, atoms);
  Vector w = Vector::Constant(atoms, 2.0 * std::numbers::pi * radius / atoms);
  std::vector<Matrix> frames(static_cast<std::size_t>(atoms), Matrix(2, 1));
  for (int i = 0; i < atoms; ++i) {
    const double t = 2.0 * std::numbers::pi * (i + 0.5) / atoms;
    pos(0, i) = cx + radius * std::cos(t);
    pos(1, i) = cy + radius * std::sin(t);
    frames[static_cast<std::size_t>(i)] << -std::sin(t), std::cos(t);
  }
  return PointCloudMeasure::single(std::move(pos), std::move(w), 1.0, std::move(label))
      .with_tangent_frames(std::move(frames));
}

inline PointCloudMeasure segment_measure(double length, int atoms, int ambient) {
  require(length > 0.0, ErrorKind::invalid_argument, "length must be positive");
  Matrix pos = Matrix::Zero(ambient, atoms);
  for (int i = 0; i < atoms; ++i) pos(0, i) = length * (i + 0.5) / atoms;
  Matrix tangent = Matrix::Zero(ambient, 1);
  tangent(0, 0) = 1.0;
  return PointCloudMeasure::single(std::move(pos), Vector::Constant(atoms, length / atoms), 1.0, "segment")
      .with_tangent_frames(std::vector<Matrix>(static_cast<std::size_t>(atoms), tangent));
}

inline PointCloudMeasure sphere_measure(double radius, int atoms) {
  Matrix pos(3, atoms);
  std::vector<Matrix> frames(static_cast<std::size_t>(atoms));
  const double golden = std::numbers::pi * (1.0 + std::sqrt(5.0));
  for (int i = 0; i < atoms; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / atoms;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * (i + 0.5);
    Vector normal(3);
    normal << r * std::cos(phi), r * std::sin(phi), z;
    pos.col(i) = radius * normal;
    Eigen::HouseholderQR<Matrix> qr{Matrix(normal)};
    Matrix q = qr.householderQ();
    frames[static_cast<std::size_t>(i)] = q.rightCols(2);
  }
  const double area = 4.0 * std::numbers::pi * radius * radius;
  return PointCloudMeasure::single(std::move(pos), Vector::Constant(atoms, area / atoms), 2.0, "sphere")
      .with_tangent_frames(std::move(frames));
}

inline SimilitudeSystem cantor_system(int ambient, double length) {
  Vector b0 = Vector::Zero(ambient);
  Vector b1 = Vector::Zero(ambient);
  b1[0] = 2.0 * length / 3.0;
  return SimilitudeSystem({Similitude::scaling(1.0 / 3.0, b0), Similitude::scaling(1.0 / 3.0, b1)});
}

inline PointCloudMeasure cantor_angle_measure(int depth, std::string label) {
  const auto line = ifs_self_similar_measure(cantor_system(1, 1.0), depth);
  const auto n = static_cast<Eigen::Index>(line.size());
  Matrix pos(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = 2.0 * std::numbers::pi * line.positions()(0, i);
    pos(0, i) = std::cos(t);
    pos(1, i) = std::sin(t);
  }
  return PointCloudMeasure::single(std::move(pos), line.weights(), line.components().front().nominal_dim,
                                   std::move(label));
}

}  // namespace detail

/// Builds a catalog measure (and its density; V = 1 unless the scenario says
/// otherwise). Unknown names and missing required parameters raise.
inline ScenarioMeasure builtin_measure(std::string_view name, const ParamMap& p) {
  using detail::count_param;
  using detail::param;
  auto with_unit_density = [](PointCloudMeasure mu) {
    const auto n = mu.size();
    return ScenarioMeasure{std::move(mu), SignedDensity::constant(n, 1.0)};
  };

  if (name == "circle") {
    return with_unit_density(detail::circle_measure(param(p, "radius", 1.0), count_param(p, "atoms"),
                                                    param(p, "center_x", 0.0), param(p, "center_y", 0.0), "circle"));
  }
  if (name == "segment") {
    return with_unit_density(detail::segment_measure(param(p, "length", 1.0), count_param(p, "atoms"),
                                                     count_param(p, "ambient", 2.0)));
  }
  if (name == "two_circles") {
    const double r1 = param(p, "r1", 1.0);
    const double r2 = param(p, "r2", 0.5);
    const double gap = param(p, "gap", 1.0);
    const int atoms = count_param(p, "atoms");
    require(gap > 0.0, ErrorKind::invalid_argument, "gap must be positive");
    const int n1 = static_cast<int>(std::lround(atoms * r1 / (r1 + r2)));
    require(n1 >= 1 && atoms - n1 >= 1, ErrorKind::invalid_argument, "too few atoms for two circles");
    const std::vector<std::pair<PointCloudMeasure, SignedDensity>> parts = {
        {detail::circle_measure(r1, n1, 0.0, 0.0, "circle_1"), SignedDensity::constant(n1, 1.0)},
        {detail::circle_measure(r2, atoms - n1, r1 + gap + r2, 0.0, "circle_2"),
         SignedDensity::constant(atoms - n1, 1.0)}};
    auto [mu, v] = union_measure(parts);
    return {std::move(mu), std::move(v)};
  }
  if (name == "sphere") {
    return with_unit_density(detail::sphere_measure(param(p, "radius", 1.0), count_param(p, "atoms")));
  }
  if (name == "cantor_line") {
    auto mu = ifs_self_similar_measure(
        detail::cantor_system(count_param(p, "ambient", 2.0), param(p, "length", 1.0)), count_param(p, "depth"));
    return with_unit_density(std::move(mu));
  }
  if (name == "cantor_circle") {
    return with_unit_density(detail::cantor_angle_measure(count_param(p, "depth"), "cantor_circle"));
  }
  if (name == "steklov_cantor") {
    return with_unit_density(detail::cantor_angle_measure(count_param(p, "depth"), "steklov_cantor"));
  }
  if (name == "sierpinski") {
    Vector b0(2), b1(2), b2(2);
    b0 << 0.0, 0.0;
    b1 << 0.5, 0.0;
    b2 << 0.25, std::sqrt(3.0) / 4.0;
    SimilitudeSystem sys({Similitude::scaling(0.5, b0), Similitude::scaling(0.5, b1), Similitude::scaling(0.5, b2)});
    return with_unit_density(ifs_self_similar_measure(sys, count_param(p, "depth")));
  }
  if (name == "half_signed_circle") {
    const int atoms = count_param(p, "atoms");
    auto mu = detail::circle_measure(param(p, "radius", 1.0), atoms, 0.0, 0.0, "half_signed_circle");
    std::vector<double> v(static_cast<std::size_t>(atoms));
    for (int i = 0; i < atoms; ++i) v[static_cast<std::size_t>(i)] = mu.positions()(1, i) > 0.0 ? 1.0 : -1.0;
    return {std::move(mu), SignedDensity(std::move(v))};
  }
  if (name == "circle_plus_square") {
    const int atoms = count_param(p, "atoms");
    const int cells = count_param(p, "cells", 60.0);
    const double side = param(p, "side", 1.0);
    const double radius = param(p, "radius", 1.0);
    require(side * std::sqrt(0.5) < radius, ErrorKind::invalid_argument, "square must lie inside the circle");
    LipschitzPatch square;
    square.param_dim = 2;
    square.codim = 0;
    square.lower = Vector::Constant(2, -0.5 * side);
    square.upper = Vector::Constant(2, 0.5 * side);
    square.resolution = {cells, cells};
    square.map = [](const Vector&) { return Vector(0); };
    square.label = "square";
    auto sq = surface_measure(square);
    const auto ns = sq.size();
    const std::vector<std::pair<PointCloudMeasure, SignedDensity>> parts = {
        {detail::circle_measure(radius, atoms, 0.0, 0.0, "circle"), SignedDensity::constant(atoms, 1.0)},
        {std::move(sq), SignedDensity::constant(ns, 1.0)}};
    auto [mu, v] = union_measure(parts);
    return {std::move(mu), std::move(v)};
  }
  fail(ErrorKind::unknown_scenario, "unknown scenario '" + std::string(name) + "'");
}

}  // namespace bslab
