#pragma once

// Discrete approximations of singular measures: weighted atom clouds, the
// self-similar measures of similitude systems, surface measures of Lipschitz
// graphs, and finite-scale regularity and density diagnostics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bslab/error.hpp"
#include "bslab/parallel.hpp"

namespace bslab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Contiguous atom range [begin, end) sharing one nominal dimension.
struct Component {
  std::size_t begin = 0;
  std::size_t end = 0;
  double nominal_dim = 1.0;
  std::string label;

  std::size_t size() const { return end - begin; }
  bool integer_dim() const { return std::abs(nominal_dim - std::round(nominal_dim)) <= 1e-9; }
};

class PointCloudMeasure {
 public:
  PointCloudMeasure() = default;

  /// `positions` is N x n, one column per atom.
  PointCloudMeasure(Matrix positions, Vector weights, std::vector<Component> components)
      : positions_(std::move(positions)), weights_(std::move(weights)), components_(std::move(components)) {
    const auto n = static_cast<std::size_t>(positions_.cols());
    require(positions_.rows() >= 1, ErrorKind::invalid_argument, "ambient dimension must be positive");
    require(static_cast<std::size_t>(weights_.size()) == n, ErrorKind::invalid_argument,
            "weight count does not match atom count");
    require(positions_.allFinite(), ErrorKind::invalid_argument, "atom positions must be finite");
    for (Eigen::Index i = 0; i < weights_.size(); ++i) {
      require(std::isfinite(weights_[i]) && weights_[i] >= 0.0, ErrorKind::invalid_argument,
              "atom weights must be finite and nonnegative");
    }
    if (components_.empty() && n > 0) components_.push_back({0, n, static_cast<double>(ambient_dim()), ""});
    std::size_t cursor = 0;
    for (const auto& c : components_) {
      require(c.begin == cursor && c.end > c.begin, ErrorKind::invalid_argument,
              "components must partition the atom sequence");
      require(c.nominal_dim > 0.0 && c.nominal_dim <= ambient_dim() + 1e-12, ErrorKind::invalid_argument,
              "component dimension must lie in (0, N]");
      cursor = c.end;
    }
    require(cursor == n, ErrorKind::invalid_argument, "components must cover every atom");
    // pairwise summation keeps the invariant at 1e-12 relative for large clouds
    total_mass_ = pairwise_sum(0, n);
  }

  static PointCloudMeasure single(Matrix positions, Vector weights, double nominal_dim, std::string label = {}) {
    const auto n = static_cast<std::size_t>(positions.cols());
    return PointCloudMeasure(std::move(positions), std::move(weights), {{0, n, nominal_dim, std::move(label)}});
  }

  int ambient_dim() const { return static_cast<int>(positions_.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(positions_.cols()); }
  bool empty() const { return size() == 0; }

  const Matrix& positions() const { return positions_; }
  auto position(std::size_t i) const { return positions_.col(static_cast<Eigen::Index>(i)); }
  const Vector& weights() const { return weights_; }
  double weight(std::size_t i) const { return weights_[static_cast<Eigen::Index>(i)]; }
  const std::vector<Component>& components() const { return components_; }
  double total_mass() const { return total_mass_; }

  const Component& component_of(std::size_t atom) const {
    for (const auto& c : components_)
      if (atom >= c.begin && atom < c.end) return c;
    fail(ErrorKind::invalid_argument, "atom index out of range");
  }

  double component_mass(const Component& c) const {
    double m = 0.0;
    for (std::size_t i = c.begin; i < c.end; ++i) m += weight(i);
    return m;
  }

  Vector bbox_min() const { return positions_.rowwise().minCoeff(); }
  Vector bbox_max() const { return positions_.rowwise().maxCoeff(); }
  double diameter() const { return empty() ? 0.0 : (bbox_max() - bbox_min()).norm(); }

  /// Exact tangent frames (N x d per atom) when the constructor knows them.
  const std::optional<std::vector<Matrix>>& tangent_frames() const { return tangents_; }
  PointCloudMeasure with_tangent_frames(std::vector<Matrix> frames) && {
    require(frames.size() == size(), ErrorKind::invalid_argument, "one tangent frame per atom required");
    tangents_ = std::move(frames);
    return std::move(*this);
  }

 private:
  double pairwise_sum(std::size_t lo, std::size_t hi) const {
    if (hi - lo <= 64) {
      double s = 0.0;
      for (std::size_t i = lo; i < hi; ++i) s += weight(i);
      return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(lo, mid) + pairwise_sum(mid, hi);
  }

  Matrix positions_;
  Vector weights_;
  std::vector<Component> components_;
  double total_mass_ = 0.0;
  std::optional<std::vector<Matrix>> tangents_;
};

/// Real density V sampled at the atoms of a measure; P = V mu.
class SignedDensity {
 public:
  SignedDensity() = default;
  explicit SignedDensity(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) require(std::isfinite(v), ErrorKind::invalid_argument, "density values must be finite");
  }

  static SignedDensity constant(std::size_t n, double c) { return SignedDensity(std::vector<double>(n, c)); }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  SignedDensity positive_part() const { return map([](double v) { return std::max(v, 0.0); }); }
  SignedDensity negative_part() const { return map([](double v) { return std::max(-v, 0.0); }); }
  SignedDensity scaled(double s) const { return map([s](double v) { return s * v; }); }
  SignedDensity abs() const { return map([](double v) { return std::abs(v); }); }

  bool nonnegative() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v >= 0.0; });
  }
  bool changes_sign() const {
    const bool pos = std::any_of(values_.begin(), values_.end(), [](double v) { return v > 0.0; });
    const bool neg = std::any_of(values_.begin(), values_.end(), [](double v) { return v < 0.0; });
    return pos && neg;
  }
  bool all_zero() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
  }

 private:
  template <class F>
  SignedDensity map(F f) const {
    std::vector<double> out(values_.size());
    std::transform(values_.begin(), values_.end(), out.begin(), f);
    return SignedDensity(std::move(out));
  }

  std::vector<double> values_;
};

inline void check_compatible(const PointCloudMeasure& mu, const SignedDensity& v) {
  require(v.size() == mu.size(), ErrorKind::dimension_mismatch, "density length does not match atom count");
}

/// Weighted sum of V over the atoms: the integral of V against mu.
inline double integrate(const PointCloudMeasure& mu, const SignedDensity& v) {
  check_compatible(mu, v);
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += mu.weight(i) * v[i];
  return s;
}

// ---------------------------------------------------------------------------
// Similitude systems

struct Similitude {
  double ratio = 0.5;
  Matrix rotation;
  Vector translation;

  Similitude(double h, Matrix q, Vector b) : ratio(h), rotation(std::move(q)), translation(std::move(b)) {
    require(h > 0.0 && h < 1.0, ErrorKind::invalid_ratio, "contraction ratio must lie in (0, 1)");
    require(rotation.rows() == rotation.cols() && rotation.rows() == translation.size(),
            ErrorKind::dimension_mismatch, "rotation and translation dimensions differ");
    const Matrix gram = rotation.transpose() * rotation - Matrix::Identity(rotation.rows(), rotation.cols());
    require(gram.cwiseAbs().maxCoeff() <= 1e-10, ErrorKind::invalid_argument, "rotation must be orthogonal");
  }

  static Similitude scaling(double h, Vector b) {
    const auto n = b.size();
    return Similitude(h, Matrix::Identity(n, n), std::move(b));
  }

  int dim() const { return static_cast<int>(translation.size()); }
  Vector apply(const Vector& x) const { return ratio * (rotation * x) + translation; }
  Vector fixed_point() const {
    const Matrix a = Matrix::Identity(dim(), dim()) - ratio * rotation;
    return a.partialPivLu().solve(translation);
  }
};

/// Unique d > 0 with sum_j h_j^d = 1, by bisection on (0, 64].
inline double ifs_dimension(std::span<const Similitude> maps) {
  require(maps.size() >= 2, ErrorKind::degenerate_system, "a similitude system needs at least two maps");
  for (const auto& s : maps)
    require(s.ratio > 0.0 && s.ratio < 1.0, ErrorKind::invalid_ratio, "contraction ratio must lie in (0, 1)");
  auto excess = [&](double d) {
    double s = 0.0;
    for (const auto& m : maps) s += std::pow(m.ratio, d);
    return s - 1.0;
  };
  constexpr double cap = 64.0;
  require(excess(cap) < 0.0, ErrorKind::degenerate_system, "similarity dimension exceeds the bisection cap");
  double lo = 0.0;
  double hi = cap;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (excess(mid) > 0.0 ? lo : hi) = mid;
  }
  return std::abs(excess(lo)) <= std::abs(excess(hi)) ? lo : hi;
}

class SimilitudeSystem {
 public:
  explicit SimilitudeSystem(std::vector<Similitude> maps) : maps_(std::move(maps)) {
    require(maps_.size() >= 2, ErrorKind::degenerate_system, "a similitude system needs at least two maps");
    for (const auto& m : maps_)
      require(m.dim() == maps_.front().dim(), ErrorKind::dimension_mismatch, "maps act on different dimensions");
    dim_ = ifs_dimension(maps_);
    require(dim_ <= maps_.front().dim() + 1e-12, ErrorKind::degenerate_system,
            "similarity dimension exceeds the ambient dimension");
  }

  const std::vector<Similitude>& maps() const { return maps_; }
  double similarity_dim() const { return dim_; }
  int ambient_dim() const { return maps_.front().dim(); }
  /// The open set condition is assumed, never verified.
  static constexpr const char* separation_status = "assumed";

 private:
  std::vector<Similitude> maps_;
  double dim_ = 0.0;
};

inline constexpr std::size_t default_atom_budget = std::size_t{1} << 21;

/// One atom per word j1..jk at S_{j1} o ... o S_{jk}(x0), x0 the fixed point of
/// S_{j1}, carrying the self-similar weight prod h_{ji}^d.
inline PointCloudMeasure ifs_self_similar_measure(const SimilitudeSystem& system, int depth,
                                                  std::size_t atom_budget = default_atom_budget) {
  require(depth >= 1, ErrorKind::invalid_argument, "depth must be at least 1");
  const std::size_t m = system.maps().size();
  double count = std::pow(static_cast<double>(m), depth);
  require(count <= static_cast<double>(atom_budget), ErrorKind::budget, "atom budget exceeded");
  const auto n = static_cast<std::size_t>(count);
  const int dim = system.ambient_dim();
  const double d = system.similarity_dim();

  std::vector<double> probs;
  std::vector<Vector> fixed;
  for (const auto& s : system.maps()) {
    probs.push_back(std::pow(s.ratio, d));
    fixed.push_back(s.fixed_point());
  }

  Matrix positions(dim, static_cast<Eigen::Index>(n));
  Vector weights(static_cast<Eigen::Index>(n));
  // Affine composite x -> linear * x + offset, built depth-first in word order.
  struct Frame {
    Matrix linear;
    Vector offset;
    double weight;
  };
  std::size_t next = 0;
  std::function<void(int, std::size_t, const Frame&)> descend = [&](int level, std::size_t first, const Frame& f) {
    if (level == depth) {
      positions.col(static_cast<Eigen::Index>(next)) = f.linear * fixed[first] + f.offset;
      weights[static_cast<Eigen::Index>(next)] = f.weight;
      ++next;
      return;
    }
    for (std::size_t j = 0; j < m; ++j) {
      const auto& s = system.maps()[j];
      Frame g{f.linear * (s.ratio * s.rotation), f.linear * s.translation + f.offset, f.weight * probs[j]};
      descend(level + 1, level == 0 ? j : first, g);
    }
  };
  descend(0, 0, Frame{Matrix::Identity(dim, dim), Vector::Zero(dim), 1.0});
  return PointCloudMeasure::single(std::move(positions), std::move(weights), d, "ifs");
}

// ---------------------------------------------------------------------------
// Lipschitz graph patches

/// Graph {(x, phi(x)) : x in G} over an axis-aligned box G in R^d, embedded
/// in R^N by `frame * (x, phi(x)) + offset`.
struct LipschitzPatch {
  int param_dim = 1;
  int codim = 1;
  Vector lower;
  Vector upper;
  std::vector<int> resolution;
  std::function<Vector(const Vector&)> map;
  std::optional<double> lipschitz_estimate;
  std::optional<Matrix> frame;
  std::optional<Vector> offset;
  std::string label;

  int ambient_dim() const { return param_dim + codim; }
};

inline PointCloudMeasure surface_measure(const LipschitzPatch& patch) {
  const int d = patch.param_dim;
  const int c = patch.codim;
  const int n_amb = d + c;
  require(d >= 1 && c >= 0, ErrorKind::invalid_argument, "patch dimensions must be positive");
  require(patch.lower.size() == d && patch.upper.size() == d &&
              static_cast<int>(patch.resolution.size()) == d,
          ErrorKind::dimension_mismatch, "patch box and resolution must have one entry per parameter axis");
  require(static_cast<bool>(patch.map), ErrorKind::invalid_argument, "patch map is empty");
  for (int a = 0; a < d; ++a) {
    require(patch.resolution[a] >= 2, ErrorKind::invalid_argument, "grid resolution must be at least 2 per axis");
    require(patch.upper[a] > patch.lower[a], ErrorKind::invalid_argument, "patch box must have positive extent");
  }
  const Matrix frame = patch.frame.value_or(Matrix::Identity(n_amb, n_amb));
  const Vector offset = patch.offset.value_or(Vector::Zero(n_amb));
  require(frame.rows() == n_amb && frame.cols() == n_amb && offset.size() == n_amb, ErrorKind::dimension_mismatch,
          "embedding frame must be N x N");

  Vector h(d);
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) {
    h[a] = (patch.upper[a] - patch.lower[a]) / patch.resolution[a];
    total *= static_cast<std::size_t>(patch.resolution[a]);
  }
  auto unflatten = [&](std::size_t flat) {
    std::vector<int> idx(d);
    for (int a = d - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(flat % patch.resolution[a]);
      flat /= patch.resolution[a];
    }
    return idx;
  };
  auto flatten = [&](const std::vector<int>& idx) {
    std::size_t flat = 0;
    for (int a = 0; a < d; ++a) flat = flat * patch.resolution[a] + idx[a];
    return flat;
  };
  auto center = [&](const std::vector<int>& idx) {
    Vector x(d);
    for (int a = 0; a < d; ++a) x[a] = patch.lower[a] + (idx[a] + 0.5) * h[a];
    return x;
  };

  std::vector<Vector> values(total);
  for (std::size_t k = 0; k < total; ++k) {
    values[k] = patch.map(center(unflatten(k)));
    require(values[k].size() == c, ErrorKind::dimension_mismatch, "patch map returned a vector of the wrong size");
    require(values[k].allFinite(), ErrorKind::evaluation, "patch map is not finite on the grid");
  }

  const double cell_volume = h.prod();
  Matrix positions(n_amb, static_cast<Eigen::Index>(total));
  Vector weights(static_cast<Eigen::Index>(total));
  std::vector<Matrix> tangents(total);
  double max_grad = 0.0;
  for (std::size_t k = 0; k < total; ++k) {
    const auto idx = unflatten(k);
    Matrix jac(c, d);
    for (int a = 0; a < d; ++a) {
      auto lo_idx = idx;
      auto hi_idx = idx;
      double span = 2.0 * h[a];
      if (idx[a] == 0) {
        hi_idx[a] += 1;
        span = h[a];
      } else if (idx[a] == patch.resolution[a] - 1) {
        lo_idx[a] -= 1;
        span = h[a];
      } else {
        lo_idx[a] -= 1;
        hi_idx[a] += 1;
      }
      if (c > 0) jac.col(a) = (values[flatten(hi_idx)] - values[flatten(lo_idx)]) / span;
    }
    require(jac.allFinite(), ErrorKind::evaluation, "finite-difference gradient is not finite");
    const Matrix g = Matrix::Identity(d, d) + jac.transpose() * jac;
    const double sigma = std::sqrt(g.determinant());
    if (c > 0) max_grad = std::max(max_grad, jac.jacobiSvd().singularValues()(0));

    Vector local(n_amb);
    local.head(d) = center(idx);
    local.tail(c) = values[k];
    positions.col(static_cast<Eigen::Index>(k)) = frame * local + offset;
    weights[static_cast<Eigen::Index>(k)] = sigma * cell_volume;

    Matrix lift(n_amb, d);
    lift.topRows(d) = Matrix::Identity(d, d);
    lift.bottomRows(c) = jac;
    Eigen::HouseholderQR<Matrix> qr(frame * lift);
    tangents[k] = qr.householderQ() * Matrix::Identity(n_amb, d);
  }
  if (patch.lipschitz_estimate) {
    require(max_grad <= *patch.lipschitz_estimate * (1.0 + 1e-6), ErrorKind::evaluation,
            "finite-difference gradient exceeds the declared Lipschitz estimate");
  }
  return PointCloudMeasure::single(std::move(positions), std::move(weights), static_cast<double>(d), patch.label)
      .with_tangent_frames(std::move(tangents));
}

/// Concatenates parts; each part's components are kept with their dimensions.
inline std::pair<PointCloudMeasure, SignedDensity> union_measure(
    std::span<const std::pair<PointCloudMeasure, SignedDensity>> parts) {
  require(!parts.empty(), ErrorKind::invalid_argument, "union of no parts");
  const int n_amb = parts.front().first.ambient_dim();
  std::size_t total = 0;
  bool have_frames = true;
  for (const auto& [mu, v] : parts) {
    require(mu.ambient_dim() == n_amb, ErrorKind::dimension_mismatch, "parts live in different ambient dimensions");
    check_compatible(mu, v);
    total += mu.size();
    have_frames = have_frames && mu.tangent_frames().has_value();
  }
  Matrix positions(n_amb, static_cast<Eigen::Index>(total));
  Vector weights(static_cast<Eigen::Index>(total));
  std::vector<Component> components;
  std::vector<double> values;
  std::vector<Matrix> frames;
  values.reserve(total);
  std::size_t cursor = 0;
  for (const auto& [mu, v] : parts) {
    const auto n = static_cast<Eigen::Index>(mu.size());
    positions.middleCols(static_cast<Eigen::Index>(cursor), n) = mu.positions();
    weights.segment(static_cast<Eigen::Index>(cursor), n) = mu.weights();
    for (const auto& c : mu.components())
      components.push_back({c.begin + cursor, c.end + cursor, c.nominal_dim, c.label});
    values.insert(values.end(), v.values().begin(), v.values().end());
    if (have_frames) frames.insert(frames.end(), mu.tangent_frames()->begin(), mu.tangent_frames()->end());
    cursor += mu.size();
  }
  PointCloudMeasure merged(std::move(positions), std::move(weights), std::move(components));
  if (have_frames) merged = std::move(merged).with_tangent_frames(std::move(frames));
  return {std::move(merged), SignedDensity(std::move(values))};
}

// ---------------------------------------------------------------------------
// Ball queries

/// Uniform hash grid over the atoms; queries fall back to a scan when the ball
/// would touch more cells than there are atoms.
class GridIndex {
 public:
  GridIndex(const Matrix& points, double cell) : points_(&points), cell_(cell) {
    require(cell > 0.0, ErrorKind::invalid_argument, "grid cell must be positive");
    for (Eigen::Index i = 0; i < points.cols(); ++i) cells_[hash(key_of(points.col(i)))].push_back(i);
  }

  template <class Visit>
  void for_each_within(const Vector& center, double radius, Visit&& visit) const {
    const auto& pts = *points_;
    const int dim = static_cast<int>(pts.rows());
    const double span = 2.0 * radius / cell_ + 1.0;
    if (std::pow(span, dim) > static_cast<double>(pts.cols())) {
      for (Eigen::Index i = 0; i < pts.cols(); ++i)
        if ((pts.col(i) - center).norm() <= radius) visit(i);
      return;
    }
    std::vector<long long> lo(dim), hi(dim), cur(dim);
    for (int a = 0; a < dim; ++a) {
      lo[a] = static_cast<long long>(std::floor((center[a] - radius) / cell_));
      hi[a] = static_cast<long long>(std::floor((center[a] + radius) / cell_));
    }
    cur = lo;
    while (true) {
      if (auto it = cells_.find(hash(cur)); it != cells_.end()) {
        for (Eigen::Index i : it->second)
          if (key_of(pts.col(i)) == cur && (pts.col(i) - center).norm() <= radius) visit(i);
      }
      int a = 0;
      for (; a < dim; ++a) {
        if (++cur[a] <= hi[a]) break;
        cur[a] = lo[a];
      }
      if (a == dim) break;
    }
  }

 private:
  template <class V>
  std::vector<long long> key_of(const V& p) const {
    std::vector<long long> k(static_cast<std::size_t>(p.size()));
    for (Eigen::Index a = 0; a < p.size(); ++a) k[a] = static_cast<long long>(std::floor(p[a] / cell_));
    return k;
  }
  static std::size_t hash(const std::vector<long long>& k) {
    std::size_t h = 1469598103934665603ull;
    for (long long v : k) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ull;
    return h;
  }

  const Matrix* points_;
  double cell_;
  std::unordered_map<std::size_t, std::vector<Eigen::Index>> cells_;
};

inline constexpr std::size_t spatial_index_threshold = 100000;

inline double ball_mass(const PointCloudMeasure& mu, const Vector& center, double radius) {
  require(radius > 0.0, ErrorKind::invalid_argument, "radius must be positive");
  require(center.size() == mu.ambient_dim(), ErrorKind::dimension_mismatch, "center dimension mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    if ((mu.position(i) - center).norm() <= radius) m += mu.weight(i);
  return m;
}

/// Distance from each atom to its nearest other atom (infinity for a lone atom).
inline std::vector<double> nearest_neighbor_distances(const PointCloudMeasure& mu) {
  const std::size_t n = mu.size();
  std::vector<double> out(n, std::numeric_limits<double>::infinity());
  if (n < 2) return out;
  const Matrix& p = mu.positions();
  if (n <= spatial_index_threshold) {
    parallel_for(0, n, [&](std::size_t i) {
      double best = std::numeric_limits<double>::infinity();
      const auto xi = p.col(static_cast<Eigen::Index>(i));
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        best = std::min(best, (p.col(static_cast<Eigen::Index>(j)) - xi).squaredNorm());
      }
      out[i] = std::sqrt(best);
    });
    return out;
  }
  const double cell = mu.diameter() / std::pow(static_cast<double>(n), 1.0 / mu.ambient_dim());
  GridIndex grid(p, cell);
  parallel_for(0, n, [&](std::size_t i) {
    const Vector xi = p.col(static_cast<Eigen::Index>(i));
    for (double r = cell; std::isinf(out[i]); r *= 2.0) {
      double best = std::numeric_limits<double>::infinity();
      grid.for_each_within(xi, r, [&](Eigen::Index j) {
        if (static_cast<std::size_t>(j) != i) best = std::min(best, (p.col(j) - xi).norm());
      });
      if (best <= r) out[i] = best;
    }
  });
  return out;
}

/// Coarsest local atom spacing: the resolution floor for ball diagnostics is
/// four times this value.
inline double atom_spacing(const PointCloudMeasure& mu) {
  const auto nn = nearest_neighbor_distances(mu);
  double s = 0.0;
  for (double v : nn)
    if (std::isfinite(v)) s = std::max(s, v);
  return s;
}

struct AhlforsEstimate {
  double exponent = 0.0;
  double c_lower = 0.0;
  double c_upper = 0.0;
  double threshold = 50.0;
  std::vector<double> radii;
  std::vector<std::size_t> sampled_atoms;

  double ratio() const { return c_lower > 0.0 ? c_upper / c_lower : std::numeric_limits<double>::infinity(); }
  bool regular() const { return ratio() <= threshold; }
};

namespace detail {
inline void check_radii(const PointCloudMeasure& mu, std::span<const double> radii) {
  require(!radii.empty(), ErrorKind::invalid_argument, "no radii supplied");
  const double floor = 4.0 * atom_spacing(mu);
  for (double r : radii) {
    require(r > 0.0, ErrorKind::invalid_argument, "radius must be positive");
    require(r >= floor * (1.0 - 1e-12), ErrorKind::resolution,
            "radius " + std::to_string(r) + " below the resolution floor " + std::to_string(floor));
  }
}

inline std::vector<double> ball_masses(const PointCloudMeasure& mu, const Vector& center,
                                       std::span<const double> radii, const GridIndex* grid) {
  std::vector<double> out;
  out.reserve(radii.size());
  for (double r : radii) {
    if (!grid) {
      out.push_back(ball_mass(mu, center, r));
      continue;
    }
    double m = 0.0;
    grid->for_each_within(center, r, [&](Eigen::Index j) { m += mu.weights()[j]; });
    out.push_back(m);
  }
  return out;
}
}  // namespace detail

/// Extremes of mu(B(X, r)) / r^s over evenly spaced sample atoms (first and
/// last included) and the given radii.
inline AhlforsEstimate ahlfors_constants(const PointCloudMeasure& mu, double s, std::span<const double> radii,
                                         std::size_t sample_count, double threshold = 50.0) {
  require(sample_count >= 1, ErrorKind::invalid_argument, "sample_count must be at least 1");
  require(!mu.empty(), ErrorKind::invalid_argument, "empty measure");
  detail::check_radii(mu, radii);
  AhlforsEstimate est;
  est.exponent = s;
  est.threshold = threshold;
  est.radii.assign(radii.begin(), radii.end());
  const std::size_t n = mu.size();
  const std::size_t samples = std::min(sample_count, n);
  for (std::size_t j = 0; j < samples; ++j) {
    const std::size_t idx =
        samples == 1 ? 0 : static_cast<std::size_t>(std::llround(static_cast<double>(j) * (n - 1) / (samples - 1)));
    if (est.sampled_atoms.empty() || est.sampled_atoms.back() != idx) est.sampled_atoms.push_back(idx);
  }
  std::optional<GridIndex> grid;
  if (n > spatial_index_threshold) grid.emplace(mu.positions(), *std::min_element(radii.begin(), radii.end()));
  std::vector<std::vector<double>> masses(est.sampled_atoms.size());
  parallel_for(0, est.sampled_atoms.size(), [&](std::size_t k) {
    masses[k] = detail::ball_masses(mu, mu.position(est.sampled_atoms[k]), radii, grid ? &*grid : nullptr);
  });
  est.c_lower = std::numeric_limits<double>::infinity();
  est.c_upper = 0.0;
  for (const auto& row : masses) {
    for (std::size_t r = 0; r < radii.size(); ++r) {
      const double q = row[r] / std::pow(radii[r], s);
      est.c_lower = std::min(est.c_lower, q);
      est.c_upper = std::max(est.c_upper, q);
    }
  }
  return est;
}

struct DensityEstimate {
  double exponent = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<double> radii_used;
  /// Preiss constant placeholder; the true constant is nonconstructive.
  double preiss_constant = 10.0;

  /// Finite-scale proxy for 0 < Theta^s < infinity.
  bool positive_finite_density() const { return lower > 0.0 && std::isfinite(upper); }
  /// Heuristic: upper density < c * lower density at the sampled scales.
  bool preiss_heuristic() const { return lower > 0.0 && upper < preiss_constant * lower; }
};

inline DensityEstimate density_bounds(const PointCloudMeasure& mu, double s, const Vector& center,
                                      std::span<const double> radii, double preiss_constant = 10.0) {
  detail::check_radii(mu, radii);
  DensityEstimate est;
  est.exponent = s;
  est.preiss_constant = preiss_constant;
  est.radii_used.assign(radii.begin(), radii.end());
  est.lower = std::numeric_limits<double>::infinity();
  est.upper = 0.0;
  for (double r : radii) {
    const double q = ball_mass(mu, center, r) / std::pow(r, s);
    est.lower = std::min(est.lower, q);
    est.upper = std::max(est.upper, q);
  }
  return est;
}

}  // namespace bslab
