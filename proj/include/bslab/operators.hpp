#pragma once

// Finite-dimensional discretizations of T = A* P A with A = (1 - Laplacian)^{-N/4}:
//
//  * fourier:      the quadratic form of T on trigonometric polynomials of a
//                  torus of period L, frequencies |xi|_inf <= K;
//  * logkernel:    the atom-collocated (Nystrom) matrix of U K K* U, whose
//                  kernel is c_log * (-log|X - Y|) up to a smooth remainder;
//  * logpotential: the logarithmic potential in L2(P);
//  * steklov:      the Dirichlet-to-Neumann weighted form on the unit circle.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bslab/coeffs.hpp"
#include "bslab/lapack.hpp"
#include "bslab/measures.hpp"
#include "bslab/parallel.hpp"

namespace bslab {

using ComplexMatrix = Eigen::MatrixXcd;

enum class Route { fourier, logkernel, logpotential, steklov };
enum class KernelChoice { pure_log, bessel_exact_N2 };
enum class DiagonalRule { cell_average, cell_pair_average, zero };
enum class ZeroMode { drop, shift };

inline constexpr std::string_view to_string(Route r) {
  switch (r) {
    case Route::fourier: return "fourier";
    case Route::logkernel: return "logkernel";
    case Route::logpotential: return "logpotential";
    case Route::steklov: return "steklov";
  }
  return "?";
}
inline constexpr std::string_view to_string(KernelChoice k) {
  return k == KernelChoice::pure_log ? "pure_log" : "bessel_exact_N2";
}
inline constexpr std::string_view to_string(DiagonalRule d) {
  switch (d) {
    case DiagonalRule::cell_average: return "cell_average";
    case DiagonalRule::cell_pair_average: return "cell_pair_average";
    case DiagonalRule::zero: return "zero";
  }
  return "?";
}
inline constexpr std::string_view to_string(ZeroMode z) { return z == ZeroMode::drop ? "drop" : "shift"; }

inline constexpr std::size_t default_matrix_budget = 12000;

struct OperatorMetadata {
  std::optional<double> period;
  std::optional<int> cutoff;
  std::optional<KernelChoice> kernel;
  std::optional<double> log_coefficient;
  std::optional<DiagonalRule> diagonal;
  std::optional<ZeroMode> zero_mode;
  std::string fingerprint;
  bool sign_framed = false;
  /// Largest negative eigenvalue of S clipped during sign framing, relative to ||S||.
  double clipped_negative = 0.0;
};

class AssembledOperator {
 public:
  AssembledOperator(Matrix m, Route route, OperatorMetadata meta)
      : matrix_(std::move(m)), route_(route), meta_(std::move(meta)) {
    validate();
  }
  AssembledOperator(ComplexMatrix m, Route route, OperatorMetadata meta)
      : matrix_(std::move(m)), route_(route), meta_(std::move(meta)) {
    validate();
  }

  bool is_complex() const { return std::holds_alternative<ComplexMatrix>(matrix_); }
  const Matrix& real() const { return std::get<Matrix>(matrix_); }
  const ComplexMatrix& complex() const { return std::get<ComplexMatrix>(matrix_); }
  Eigen::Index size() const {
    return std::visit([](const auto& m) { return m.rows(); }, matrix_);
  }
  Route route() const { return route_; }
  const OperatorMetadata& metadata() const { return meta_; }

  double hermitian_defect() const {
    return std::visit([](const auto& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }, matrix_);
  }

 private:
  void validate() const {
    require(size() > 0, ErrorKind::invalid_argument, "assembled operator is empty");
    std::visit([](const auto& m) { require(m.allFinite(), ErrorKind::evaluation, "operator entries not finite"); },
               matrix_);
    require(hermitian_defect() <= 1e-10, ErrorKind::evaluation, "assembled operator is not self-adjoint");
  }

  std::variant<Matrix, ComplexMatrix> matrix_;
  Route route_;
  OperatorMetadata meta_;
};

/// FNV-1a digest of positions, weights and density.
inline std::string measure_fingerprint(const PointCloudMeasure& mu, const SignedDensity& v) {
  std::uint64_t h = 1469598103934665603ull;
  auto feed = [&](const double* p, std::size_t count) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < count * sizeof(double); ++i) h = (h ^ bytes[i]) * 1099511628211ull;
  };
  feed(mu.positions().data(), static_cast<std::size_t>(mu.positions().size()));
  feed(mu.weights().data(), static_cast<std::size_t>(mu.weights().size()));
  feed(v.values().data(), v.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Fourier route

/// Fourier multiplier of (1 - Laplacian)^{-N/4} on the torus of period L.
inline double torus_multiplier(const Eigen::VectorXi& xi, double period) {
  const double rho = 2.0 * std::numbers::pi * xi.cast<double>().norm() / period;
  return std::pow(1.0 + rho * rho, -0.25 * static_cast<double>(xi.size()));
}

inline AssembledOperator assemble_fourier_bs(const PointCloudMeasure& mu, const SignedDensity& v, double period,
                                             int cutoff, std::size_t budget = default_matrix_budget) {
  check_compatible(mu, v);
  require(period > 0.0 && cutoff >= 0, ErrorKind::invalid_argument, "period must be positive, cutoff nonnegative");
  const int n_amb = mu.ambient_dim();
  const int side = 2 * cutoff + 1;
  const double size_d = std::pow(static_cast<double>(side), n_amb);
  require(size_d <= static_cast<double>(budget), ErrorKind::budget, "frequency grid exceeds the matrix budget");
  const Vector extent = mu.bbox_max() - mu.bbox_min();
  require(extent.maxCoeff() <= 0.5 * period * (1.0 + 1e-12), ErrorKind::support_too_large,
          "support must fit in a box of side L/2");

  const auto size = static_cast<Eigen::Index>(size_d);
  const int wide = 4 * cutoff + 1;  // difference grid side
  const std::size_t atoms = mu.size();

  // z_{i,a}^m = exp(2 pi i m X_{i,a} / L), m in [-2K, 2K]
  std::vector<ComplexMatrix> powers(static_cast<std::size_t>(n_amb), ComplexMatrix(static_cast<Eigen::Index>(atoms), wide));
  for (int a = 0; a < n_amb; ++a) {
    parallel_for(0, atoms, [&](std::size_t i) {
      const double base = 2.0 * std::numbers::pi * mu.positions()(a, static_cast<Eigen::Index>(i)) / period;
      for (int m = -2 * cutoff; m <= 2 * cutoff; ++m)
        powers[static_cast<std::size_t>(a)](static_cast<Eigen::Index>(i), m + 2 * cutoff) = std::polar(1.0, base * m);
    });
  }

  // Measure transform F(eta) = sum_i w_i V_i exp(2 pi i eta . X_i / L); the
  // last axis is contracted with a matrix product.
  Eigen::Index lead = 1;
  for (int a = 0; a + 1 < n_amb; ++a) lead *= wide;
  ComplexMatrix left(lead, static_cast<Eigen::Index>(atoms));
  parallel_for(0, atoms, [&](std::size_t i) {
    const std::complex<double> c = mu.weight(i) * v[i];
    for (Eigen::Index r = 0; r < lead; ++r) {
      std::complex<double> prod = c;
      Eigen::Index rem = r;
      for (int a = n_amb - 2; a >= 0; --a) {
        prod *= powers[static_cast<std::size_t>(a)](static_cast<Eigen::Index>(i), rem % wide);
        rem /= wide;
      }
      left(r, static_cast<Eigen::Index>(i)) = prod;
    }
  });
  const ComplexMatrix transform = left * powers[static_cast<std::size_t>(n_amb - 1)];  // lead x wide

  std::vector<Eigen::VectorXi> freqs(static_cast<std::size_t>(size), Eigen::VectorXi(n_amb));
  Vector mult(size);
  for (Eigen::Index f = 0; f < size; ++f) {
    Eigen::Index rem = f;
    auto& xi = freqs[static_cast<std::size_t>(f)];
    for (int a = n_amb - 1; a >= 0; --a) {
      xi[a] = static_cast<int>(rem % side) - cutoff;
      rem /= side;
    }
    mult[f] = torus_multiplier(xi, period);
  }

  const double norm = std::pow(period, -n_amb);
  ComplexMatrix m(size, size);
  parallel_for(0, static_cast<std::size_t>(size), [&](std::size_t col) {
    const auto& xj = freqs[col];
    for (Eigen::Index row = 0; row < size; ++row) {
      const auto& xr = freqs[static_cast<std::size_t>(row)];
      Eigen::Index lead_idx = 0;
      for (int a = 0; a + 1 < n_amb; ++a) lead_idx = lead_idx * wide + (xj[a] - xr[a] + 2 * cutoff);
      const int last = xj[n_amb - 1] - xr[n_amb - 1] + 2 * cutoff;
      m(row, static_cast<Eigen::Index>(col)) =
          mult[row] * mult[static_cast<Eigen::Index>(col)] * norm * transform(lead_idx, last);
    }
  });
  // exact Hermitian symmetry
  for (Eigen::Index j = 0; j < size; ++j) {
    m(j, j) = m(j, j).real();
    for (Eigen::Index i = j + 1; i < size; ++i) m(j, i) = std::conj(m(i, j));
  }
  OperatorMetadata meta;
  meta.period = period;
  meta.cutoff = cutoff;
  meta.fingerprint = measure_fingerprint(mu, v);
  return AssembledOperator(std::move(m), Route::fourier, std::move(meta));
}

// ---------------------------------------------------------------------------
// Logarithmic kernels

struct LogKernelSpec {
  KernelChoice kernel = KernelChoice::pure_log;
  double log_coefficient = 1.0 / (2.0 * std::numbers::pi);
  DiagonalRule diagonal = DiagonalRule::cell_average;

  /// c_log = |S^{N-1}| / (2 pi)^N, the logarithmic coefficient of the kernel
  /// of (1 - Laplacian)^{-N/2} in R^N.
  static LogKernelSpec for_dimension(int n, KernelChoice kernel = KernelChoice::pure_log,
                                     DiagonalRule diagonal = DiagonalRule::cell_average) {
    return {kernel, sphere_area(n) / std::pow(2.0 * std::numbers::pi, n), diagonal};
  }
};

/// Mean of -log|x| over the atom's cell: a cube of side delta (the nearest
/// neighbour distance) in the component's cell dimension, replaced by the ball
/// of equal volume. In one dimension this is 1 - log(delta / 2).
inline double cell_mean_neg_log(double delta, int cell_dim) {
  const double unit_ball = std::pow(std::numbers::pi, 0.5 * cell_dim) / std::tgamma(0.5 * cell_dim + 1.0);
  const double radius = delta * std::pow(unit_ball, -1.0 / cell_dim);
  return 1.0 / cell_dim - std::log(radius);
}

/// Mean of -log|x - y| over independent uniform pairs in the same equal-volume
/// ball (the Galerkin counterpart of cell_mean_neg_log), for cell dimensions 1..3.
inline double cell_pair_mean_neg_log(double delta, int cell_dim) {
  require(cell_dim >= 1 && cell_dim <= 3, ErrorKind::invalid_argument,
          "pair-averaged diagonal is tabulated for cell dimensions 1 to 3");
  // E log|x - y| over the unit ball
  static constexpr double unit_mean[3] = {std::numbers::ln2 - 1.5, -0.25, std::numbers::ln2 - 0.75};
  const double unit_ball = std::pow(std::numbers::pi, 0.5 * cell_dim) / std::tgamma(0.5 * cell_dim + 1.0);
  const double radius = delta * std::pow(unit_ball, -1.0 / cell_dim);
  return -std::log(radius) - unit_mean[cell_dim - 1];
}

inline int cell_dimension(double nominal_dim, int ambient) {
  return std::clamp(static_cast<int>(std::ceil(nominal_dim - 1e-9)), 1, ambient);
}

namespace detail {

/// Per-atom diagonal value of -log under the rule (lone atoms use delta = 1).
inline std::vector<double> neg_log_diagonal(const PointCloudMeasure& mu, const std::vector<double>& nn,
                                            DiagonalRule rule) {
  std::vector<double> out(mu.size(), 0.0);
  if (rule == DiagonalRule::zero) return out;
  for (const auto& c : mu.components()) {
    const int dim = cell_dimension(c.nominal_dim, mu.ambient_dim());
    for (std::size_t i = c.begin; i < c.end; ++i) {
      const double delta = std::isfinite(nn[i]) ? nn[i] : 1.0;
      out[i] = rule == DiagonalRule::cell_average ? cell_mean_neg_log(delta, dim) : cell_pair_mean_neg_log(delta, dim);
    }
  }
  return out;
}

inline std::vector<double> checked_spacing(const PointCloudMeasure& mu) {
  auto nn = nearest_neighbor_distances(mu);
  for (double d : nn) require(d > 0.0, ErrorKind::degenerate_kernel, "coincident atoms make the kernel singular");
  return nn;
}

}  // namespace detail

/// Gram-type matrix S_ij = sqrt(D_i) k(X_i, X_j) sqrt(D_j), D_i = w_i |V_i|,
/// framed by sgn V as S^{1/2} diag(sgn V) S^{1/2} when V changes sign.
inline AssembledOperator assemble_log_kernel(const PointCloudMeasure& mu, const SignedDensity& v,
                                             const LogKernelSpec& spec) {
  check_compatible(mu, v);
  require(spec.log_coefficient > 0.0, ErrorKind::invalid_argument, "log coefficient must be positive");
  require(spec.kernel == KernelChoice::pure_log || mu.ambient_dim() == 2, ErrorKind::invalid_argument,
          "the exact Bessel kernel is available in two dimensions only");
  const auto nn = detail::checked_spacing(mu);
  const auto diag = detail::neg_log_diagonal(mu, nn, spec.diagonal);
  const std::size_t n = mu.size();
  const double c = spec.log_coefficient;
  const bool bessel = spec.kernel == KernelChoice::bessel_exact_N2;
  // K_0(r) = -log r + (log 2 - gamma) + O(r^2 log r)
  const double bessel_offset = std::log(2.0) - std::numbers::egamma;

  Vector root(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) root[static_cast<Eigen::Index>(i)] = std::sqrt(mu.weight(i) * std::abs(v[i]));

  Matrix s(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  parallel_for(0, n, [&](std::size_t j) {
    const auto jj = static_cast<Eigen::Index>(j);
    for (std::size_t i = j + 1; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double r = (mu.position(i) - mu.position(j)).norm();
      const double k = bessel ? c * std::cyl_bessel_k(0.0, r) : -c * std::log(r);
      s(ii, jj) = root[ii] * k * root[jj];
    }
    double kd = 0.0;
    if (spec.diagonal != DiagonalRule::zero) kd = c * (diag[j] + (bessel ? bessel_offset : 0.0));
    s(jj, jj) = root[jj] * kd * root[jj];
  });
  for (Eigen::Index j = 0; j < s.cols(); ++j)
    for (Eigen::Index i = j + 1; i < s.rows(); ++i) s(j, i) = s(i, j);

  OperatorMetadata meta;
  meta.kernel = spec.kernel;
  meta.log_coefficient = spec.log_coefficient;
  meta.diagonal = spec.diagonal;
  meta.fingerprint = measure_fingerprint(mu, v);

  if (v.changes_sign()) {
    lapack::DenseMatrix<double> u = s;
    auto lambda = lapack::symmetric_eigen_full(u);
    const double scale = std::max(std::abs(lambda.front()), std::abs(lambda.back()));
    for (double& l : lambda) {
      if (l < 0.0) {
        meta.clipped_negative = std::max(meta.clipped_negative, -l / std::max(scale, 1e-300));
        l = 0.0;
      }
    }
    Vector sqrt_l(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) sqrt_l[static_cast<Eigen::Index>(i)] = std::sqrt(lambda[i]);
    const Matrix half = u * sqrt_l.asDiagonal() * u.transpose();
    Vector sign(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) sign[static_cast<Eigen::Index>(i)] = v[i] > 0.0 ? 1.0 : (v[i] < 0.0 ? -1.0 : 0.0);
    Matrix framed = half * sign.asDiagonal() * half;
    framed = 0.5 * (framed + framed.transpose()).eval();
    meta.sign_framed = true;
    return AssembledOperator(std::move(framed), Route::logkernel, std::move(meta));
  }
  if (!v.nonnegative()) s = -s;
  return AssembledOperator(std::move(s), Route::logkernel, std::move(meta));
}

/// Logarithmic potential f -> integral of log|X - Y| f(Y) dP(Y), realized in
/// L2(P) as sqrt(w_i V_i) log|X_i - X_j| sqrt(w_j V_j). Requires V >= 0.
inline AssembledOperator assemble_log_potential(const PointCloudMeasure& mu, const SignedDensity& v,
                                                DiagonalRule rule = DiagonalRule::cell_average) {
  check_compatible(mu, v);
  require(v.nonnegative(), ErrorKind::sign_framing,
          "negative density needs sign framing; use the log-kernel assembly instead");
  const auto nn = detail::checked_spacing(mu);
  const auto diag = detail::neg_log_diagonal(mu, nn, rule);
  const std::size_t n = mu.size();
  Vector root(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) root[static_cast<Eigen::Index>(i)] = std::sqrt(mu.weight(i) * v[i]);
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  parallel_for(0, n, [&](std::size_t j) {
    const auto jj = static_cast<Eigen::Index>(j);
    for (std::size_t i = j + 1; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      m(ii, jj) = root[ii] * std::log((mu.position(i) - mu.position(j)).norm()) * root[jj];
    }
    m(jj, jj) = -root[jj] * diag[j] * root[jj];
  });
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = j + 1; i < m.rows(); ++i) m(j, i) = m(i, j);
  OperatorMetadata meta;
  meta.diagonal = rule;
  meta.log_coefficient = 1.0;
  meta.fingerprint = measure_fingerprint(mu, v);
  return AssembledOperator(std::move(m), Route::logpotential, std::move(meta));
}

// ---------------------------------------------------------------------------
// Steklov problem on the unit disk

/// Circle modes used by the Steklov assembly, in increasing order.
inline std::vector<int> steklov_modes(int cutoff, ZeroMode zero_mode) {
  std::vector<int> modes;
  for (int k = -cutoff; k <= cutoff; ++k)
    if (k != 0 || zero_mode == ZeroMode::shift) modes.push_back(k);
  return modes;
}

/// Weighted form of (DN)^{-1/2} on circle modes: M_kk' = b(k) b(k') (2 pi)^{-1}
/// sum_i w_i V_i exp(i (k' - k) theta_i), b(k) = |k|^{-1/2} or (|k| + 1)^{-1/2}.
inline AssembledOperator assemble_steklov_circle(const PointCloudMeasure& mu, const SignedDensity& v, int cutoff,
                                                 ZeroMode zero_mode, std::size_t budget = default_matrix_budget) {
  check_compatible(mu, v);
  require(mu.ambient_dim() == 2, ErrorKind::dimension_mismatch, "Steklov assembly needs a planar measure");
  require(cutoff >= 1, ErrorKind::invalid_argument, "cutoff must be at least 1");
  const auto modes = steklov_modes(cutoff, zero_mode);
  require(modes.size() <= budget, ErrorKind::budget, "mode count exceeds the matrix budget");
  std::vector<double> theta(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto x = mu.position(i);
    require(std::abs(x.norm() - 1.0) <= 1e-6, ErrorKind::invalid_argument, "atoms must lie on the unit circle");
    theta[i] = std::atan2(x[1], x[0]);
  }
  const int wide = 4 * cutoff + 1;
  std::vector<std::complex<double>> transform(static_cast<std::size_t>(wide));
  parallel_for(0, static_cast<std::size_t>(wide), [&](std::size_t idx) {
    const int m = static_cast<int>(idx) - 2 * cutoff;
    std::complex<double> s = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) s += mu.weight(i) * v[i] * std::polar(1.0, m * theta[i]);
    transform[idx] = s / (2.0 * std::numbers::pi);
  });
  auto b = [&](int k) {
    return zero_mode == ZeroMode::drop ? 1.0 / std::sqrt(std::abs(k)) : 1.0 / std::sqrt(std::abs(k) + 1.0);
  };
  const auto size = static_cast<Eigen::Index>(modes.size());
  ComplexMatrix m(size, size);
  for (Eigen::Index c = 0; c < size; ++c) {
    const int kc = modes[static_cast<std::size_t>(c)];
    for (Eigen::Index r = c; r < size; ++r) {
      const int kr = modes[static_cast<std::size_t>(r)];
      m(r, c) = b(kr) * b(kc) * transform[static_cast<std::size_t>(kc - kr + 2 * cutoff)];
      m(c, r) = std::conj(m(r, c));
    }
    m(c, c) = m(c, c).real();
  }
  OperatorMetadata meta;
  meta.cutoff = cutoff;
  meta.zero_mode = zero_mode;
  meta.fingerprint = measure_fingerprint(mu, v);
  return AssembledOperator(std::move(m), Route::steklov, std::move(meta));
}

}  // namespace bslab
