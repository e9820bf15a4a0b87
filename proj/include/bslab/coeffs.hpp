#pragma once

// Asymptotic coefficients of the eigenvalue counting function: sphere areas,
// the absolutely continuous Weyl constant, the surface constant Z(d, codim),
// the fiber symbol r_{-d}, its cosphere density, and predicted traces.
//
// Z(d, codim) exists in two normalizations. `printed` divides by (2 pi)^codim;
// `calibrated` divides by (2 pi)^(d + codim), which reduces to the absolutely
// continuous constant at codim = 0 and reproduces the exact circle spectrum.

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "bslab/measures.hpp"
#include "bslab/quadrature.hpp"

namespace bslab {

enum class CoefficientMode { printed, calibrated };
enum class CoefficientKind { surface_Z, ac_varpi, rho_integral };

inline constexpr std::string_view to_string(CoefficientMode m) {
  return m == CoefficientMode::printed ? "printed" : "calibrated";
}

struct AsymptoticCoefficient {
  double d = 0.0;
  double codim = 0.0;
  double value = 0.0;
  CoefficientMode mode = CoefficientMode::calibrated;
  CoefficientKind kind = CoefficientKind::surface_Z;
};

/// Area of the unit sphere S^{n-1} in R^n.
inline double sphere_area(int n) {
  require(n >= 1, ErrorKind::invalid_argument, "sphere_area needs n >= 1");
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

inline AsymptoticCoefficient weyl_ac_coefficient(int n) {
  require(n >= 1, ErrorKind::invalid_argument, "ambient dimension must be positive");
  const double value = sphere_area(n) / (n * std::pow(2.0 * std::numbers::pi, n));
  return {static_cast<double>(n), 0.0, value, CoefficientMode::calibrated, CoefficientKind::ac_varpi};
}

inline AsymptoticCoefficient weyl_surface_coefficient(int d, int codim, CoefficientMode mode) {
  require(d >= 1 && codim >= 1, ErrorKind::invalid_argument, "surface coefficient needs d >= 1 and codim >= 1");
  const double core = sphere_area(codim) * sphere_area(d) * std::beta(0.5 * d, 0.5 * codim) / (2.0 * d);
  const double power = mode == CoefficientMode::printed ? codim : d + codim;
  return {static_cast<double>(d), static_cast<double>(codim), core / std::pow(2.0 * std::numbers::pi, power), mode,
          CoefficientKind::surface_Z};
}

/// Coefficient used for a component of dimension d in R^n: Z(d, n - d), or the
/// absolutely continuous constant when d = n.
inline double component_coefficient(int d, int n, CoefficientMode mode) {
  if (d == n) return weyl_ac_coefficient(n).value;
  return weyl_surface_coefficient(d, n - d, mode).value;
}

inline std::string coefficient_table_csv(int max_dim) {
  std::ostringstream out;
  out.precision(17);
  out << "d,codim,printed,calibrated\n";
  for (int d = 1; d <= max_dim; ++d)
    for (int c = 1; c <= max_dim; ++c)
      out << d << ',' << c << ',' << weyl_surface_coefficient(d, c, CoefficientMode::printed).value << ','
          << weyl_surface_coefficient(d, c, CoefficientMode::calibrated).value << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Symbols

/// Principal symbol a_{-l}(X, Xi) of order -l = -N/2.
struct SymbolDescriptor {
  double order = 0.0;
  std::function<double(const Vector&, const Vector&)> evaluate;
  bool flagship = false;

  /// a(X, Xi) = |Xi|^{-N/2}, the symbol of (1 - Laplacian)^{-N/4}.
  static SymbolDescriptor flagship_symbol(int n) {
    const double l = 0.5 * n;
    return {-l, [l](const Vector&, const Vector& xi) { return std::pow(xi.norm(), -l); }, true};
  }
};

/// Largest relative deviation from a(X, 2 Xi) = 2^{order} a(X, Xi) over the
/// given sample pairs.
inline double homogeneity_defect(const SymbolDescriptor& symbol, std::span<const std::pair<Vector, Vector>> samples) {
  double worst = 0.0;
  for (const auto& [x, xi] : samples) {
    const double a = symbol.evaluate(x, xi);
    const double b = symbol.evaluate(x, Vector(2.0 * xi));
    worst = std::max(worst, std::abs(b - std::pow(2.0, symbol.order) * a) / std::max(std::abs(b), 1e-300));
  }
  return worst;
}

namespace detail {
inline void check_frames(const Matrix& tangent, const Matrix& normal) {
  require(tangent.rows() == normal.rows(), ErrorKind::dimension_mismatch, "frame row counts differ");
  require(tangent.cols() >= 1, ErrorKind::invalid_argument, "tangent frame must be nonempty");
  Matrix both(tangent.rows(), tangent.cols() + normal.cols());
  both << tangent, normal;
  const Matrix gram = both.transpose() * both - Matrix::Identity(both.cols(), both.cols());
  require(gram.cwiseAbs().maxCoeff() <= 1e-8, ErrorKind::invalid_argument, "frames must be orthonormal");
}

/// Orthonormal complement of the columns of `tangent` in R^N.
inline Matrix normal_complement(const Matrix& tangent) {
  const auto n = tangent.rows();
  const auto d = tangent.cols();
  Eigen::HouseholderQR<Matrix> qr(tangent);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  return q.rightCols(n - d);
}
}  // namespace detail

/// r_{-d}(X, xi) = (2 pi)^{-codim} * integral over the normal fiber of
/// |a(X, T xi + N eta)|^2, in radial-spherical coordinates on the fiber.
inline double fiber_symbol_r(const SymbolDescriptor& symbol, const Vector& x, const Matrix& tangent,
                             const Matrix& normal, const Vector& xi, double rel_tol = 1e-8) {
  detail::check_frames(tangent, normal);
  require(xi.size() == tangent.cols(), ErrorKind::dimension_mismatch, "xi must be a tangent-coordinate vector");
  require(xi.norm() > 0.0, ErrorKind::invalid_argument, "xi must be nonzero");
  const int codim = static_cast<int>(normal.cols());
  const Vector base = tangent * xi;
  if (codim == 0) {
    const double a = symbol.evaluate(x, base);
    return a * a;
  }
  const double integral = quadrature::integrate_sphere(
      codim,
      [&](const Vector& omega) {
        const Vector dir = normal * omega;
        return quadrature::integrate_half_line(
            [&](double rho) {
              if (rho == 0.0 && codim > 1) return 0.0;
              const double a = symbol.evaluate(x, base + rho * dir);
              return a * a * std::pow(rho, codim - 1);
            },
            rel_tol);
      },
      rel_tol);
  return integral / std::pow(2.0 * std::numbers::pi, codim);
}

/// rho_A(X): integral of r_{-d}(X, .) over the unit cosphere of the tangent space.
inline double rho_density(const SymbolDescriptor& symbol, const Vector& x, const Matrix& tangent, const Matrix& normal,
                          double rel_tol = 1e-7) {
  const int d = static_cast<int>(tangent.cols());
  return quadrature::integrate_sphere(
      d, [&](const Vector& xi) { return fiber_symbol_r(symbol, x, tangent, normal, xi, 0.1 * rel_tol); }, rel_tol);
}

/// Tangent frame of dimension d at an atom from the k nearest neighbors.
inline Matrix local_pca_frame(const PointCloudMeasure& mu, std::size_t atom, int d, int k = 12) {
  const std::size_t n = mu.size();
  require(n > static_cast<std::size_t>(d), ErrorKind::invalid_argument, "too few atoms for a tangent estimate");
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(n);
  for (std::size_t j = 0; j < n; ++j) dist.emplace_back((mu.position(j) - mu.position(atom)).squaredNorm(), j);
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k) + 1, n);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
  Vector mean = Vector::Zero(mu.ambient_dim());
  for (std::size_t t = 0; t < take; ++t) mean += mu.position(dist[t].second);
  mean /= static_cast<double>(take);
  Matrix cov = Matrix::Zero(mu.ambient_dim(), mu.ambient_dim());
  for (std::size_t t = 0; t < take; ++t) {
    const Vector c = mu.position(dist[t].second) - mean;
    cov += c * c.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  return es.eigenvectors().rightCols(d);
}

struct ComponentPrediction {
  double dim = 0.0;
  double coefficient = 0.0;  // Z or varpi for flagship symbols; 0 otherwise
  double plus = 0.0;
  double minus = 0.0;
  bool approximate_frames = false;
};

struct PredictedTrace {
  double plus = 0.0;
  double minus = 0.0;
  double residue = 0.0;
  CoefficientMode mode = CoefficientMode::calibrated;
  std::vector<ComponentPrediction> components;
};

/// A_+/- = sum over components of the normalized measure applied to V_+/-.
/// Flagship symbols use the closed-form coefficients; other symbols integrate
/// rho_A atom by atom.
inline PredictedTrace predicted_trace(const PointCloudMeasure& mu, const SignedDensity& v,
                                      const SymbolDescriptor& symbol, CoefficientMode mode) {
  check_compatible(mu, v);
  const int n = mu.ambient_dim();
  PredictedTrace out;
  out.mode = mode;
  for (const auto& c : mu.components()) {
    require(c.integer_dim(), ErrorKind::prediction_unavailable,
            "asymptotic prediction requires integer-dimensional components");
    const int d = static_cast<int>(std::lround(c.nominal_dim));
    ComponentPrediction cp;
    cp.dim = d;
    if (symbol.flagship) {
      cp.coefficient = component_coefficient(d, n, mode);
      for (std::size_t i = c.begin; i < c.end; ++i) {
        cp.plus += cp.coefficient * mu.weight(i) * std::max(v[i], 0.0);
        cp.minus += cp.coefficient * mu.weight(i) * std::max(-v[i], 0.0);
      }
    } else {
      const double scale =
          d == n ? 1.0 / (n * std::pow(2.0 * std::numbers::pi, n))
                 : 1.0 / (d * std::pow(2.0 * std::numbers::pi, mode == CoefficientMode::printed ? d - 1 : d));
      for (std::size_t i = c.begin; i < c.end; ++i) {
        if (v[i] == 0.0 || mu.weight(i) == 0.0) continue;
        Matrix tangent;
        if (mu.tangent_frames()) {
          tangent = (*mu.tangent_frames())[i];
        } else if (d == n) {
          tangent = Matrix::Identity(n, n);
        } else {
          tangent = local_pca_frame(mu, i, d);
          cp.approximate_frames = true;
        }
        const Vector x = mu.position(i);
        const double rho = rho_density(symbol, x, tangent, detail::normal_complement(tangent));
        cp.plus += scale * rho * mu.weight(i) * std::max(v[i], 0.0);
        cp.minus += scale * rho * mu.weight(i) * std::max(-v[i], 0.0);
      }
    }
    out.plus += cp.plus;
    out.minus += cp.minus;
    out.components.push_back(cp);
  }
  out.residue = out.plus - out.minus;
  return out;
}

}  // namespace bslab
