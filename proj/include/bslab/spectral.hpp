#pragma once

// Eigendecomposition of assembled operators and the spectral functionals read
// off the eigenvalue sequences: counting functions, Weyl plateaus, Dixmier
// partial sums, order bounds and cross-route matching.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <optional>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bslab/lapack.hpp"
#include "bslab/operators.hpp"

namespace bslab {

enum class Sign { plus, minus };

inline constexpr std::string_view to_string(Sign s) { return s == Sign::plus ? "+" : "-"; }

inline constexpr double eigen_floor_factor = 1e-14;
inline constexpr double residual_tolerance_factor = 1e-8;

struct EigenReport {
  std::vector<double> positive;  // descending
  std::vector<double> negative;  // descending |lambda|
  std::size_t size = 0;
  double norm = 0.0;
  double max_residual = 0.0;  // relative to norm, over the sampled pairs
  std::optional<Route> route;
  OperatorMetadata metadata;

  const std::vector<double>& sequence(Sign s) const { return s == Sign::plus ? positive : negative; }

  /// Report over a synthetic or externally computed spectrum.
  static EigenReport from_eigenvalues(std::span<const double> values) {
    EigenReport r;
    r.size = values.size();
    for (double v : values) r.norm = std::max(r.norm, std::abs(v));
    r.split(values);
    return r;
  }

  /// Report over given descending sequences (entries must be positive).
  static EigenReport from_sequences(std::vector<double> positive, std::vector<double> negative) {
    EigenReport r;
    auto desc = [](std::vector<double>& s) {
      std::sort(s.begin(), s.end(), std::greater<>());
      require(s.empty() || s.back() > 0.0, ErrorKind::invalid_argument, "sequence entries must be positive");
    };
    desc(positive);
    desc(negative);
    r.size = positive.size() + negative.size();
    r.norm = std::max(positive.empty() ? 0.0 : positive.front(), negative.empty() ? 0.0 : negative.front());
    r.positive = std::move(positive);
    r.negative = std::move(negative);
    return r;
  }

  void split(std::span<const double> values) {
    const double floor = eigen_floor_factor * norm;
    positive.clear();
    negative.clear();
    for (double v : values) {
      if (v > floor) positive.push_back(v);
      else if (-v > floor) negative.push_back(-v);
    }
    std::sort(positive.begin(), positive.end(), std::greater<>());
    std::sort(negative.begin(), negative.end(), std::greater<>());
  }
};

namespace detail {
inline std::vector<int> sample_indices(int n) {
  std::vector<int> idx;
  for (int q = 0; q < 5; ++q) idx.push_back(static_cast<int>((static_cast<long long>(n - 1) * q) / 4));
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

template <class Scalar>
EigenReport eigen_dense(const lapack::DenseMatrix<Scalar>& m) {
  lapack::DenseMatrix<Scalar> work = m;
  const auto idx = sample_indices(static_cast<int>(m.rows()));
  auto eig = lapack::self_adjoint_eigen<Scalar>(work, idx);
  EigenReport r;
  r.size = static_cast<std::size_t>(m.rows());
  r.norm = std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
  for (std::size_t c = 0; c < eig.vector_indices.size(); ++c) {
    const double lambda = eig.values[static_cast<std::size_t>(eig.vector_indices[c])];
    const auto v = eig.vectors.col(static_cast<Eigen::Index>(c));
    const double res = (m * v - lambda * v).norm() / std::max(v.norm(), 1e-300);
    r.max_residual = std::max(r.max_residual, r.norm > 0.0 ? res / r.norm : res);
  }
  if (r.norm > 0.0 && r.max_residual > residual_tolerance_factor) {
    std::ostringstream msg;
    msg << "eigenpair residual " << r.max_residual << " x ||M|| exceeds tolerance; ||M|| = " << r.norm
        << ", smallest |lambda| = " << std::min(std::abs(eig.values.front()), std::abs(eig.values.back()))
        << ", size = " << r.size;
    fail(ErrorKind::solver, msg.str());
  }
  r.split(eig.values);
  return r;
}
}  // namespace detail

/// Full spectrum of the assembled operator, split by sign above the floor
/// 1e-14 ||M||, with residuals checked on five sampled eigenpairs.
inline EigenReport eigen_spectrum(const AssembledOperator& op) {
  EigenReport r = op.is_complex() ? detail::eigen_dense(op.complex()) : detail::eigen_dense(op.real());
  r.route = op.route();
  r.metadata = op.metadata();
  return r;
}

/// n_sign(lambda) = #{k : lambda_k^sign > lambda}.
inline std::size_t counting(const EigenReport& report, double lambda, Sign sign) {
  require(lambda > 0.0, ErrorKind::invalid_argument, "counting needs lambda > 0");
  const auto& s = report.sequence(sign);
  return static_cast<std::size_t>(
      std::partition_point(s.begin(), s.end(), [lambda](double x) { return x > lambda; }) - s.begin());
}

struct WeylFit {
  std::size_t k_min = 0;
  std::size_t k_max = 0;
  double plateau = 0.0;
  double dispersion = 0.0;
};

inline constexpr std::size_t min_plateau_count = 40;

namespace detail {
/// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> sorted, double q) {
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::vector<double> k_lambda(const std::vector<double>& s, std::size_t k_min, std::size_t k_max) {
  require(k_min >= 1 && k_min <= k_max, ErrorKind::invalid_argument, "empty index window");
  require(k_max <= s.size(), ErrorKind::invalid_argument, "index window exceeds the sequence length");
  std::vector<double> out;
  out.reserve(k_max - k_min + 1);
  for (std::size_t k = k_min; k <= k_max; ++k) out.push_back(static_cast<double>(k) * s[k - 1]);
  return out;
}
}  // namespace detail

/// Median and relative interquartile range of k lambda_k over k in [k_min, k_max] (1-based).
inline WeylFit weyl_plateau_window(const EigenReport& report, Sign sign, std::size_t k_min, std::size_t k_max) {
  const auto& s = report.sequence(sign);
  require(s.size() >= min_plateau_count, ErrorKind::invalid_argument, "too few eigenvalues for a plateau");
  const auto kl = detail::k_lambda(s, k_min, k_max);
  WeylFit fit{k_min, k_max, detail::quantile(kl, 0.5), 0.0};
  const double iqr = detail::quantile(kl, 0.75) - detail::quantile(kl, 0.25);
  fit.dispersion = fit.plateau > 0.0 ? iqr / fit.plateau : 0.0;
  return fit;
}

/// Plateau over the relative window k in [f1 n, f2 n], n the sequence length.
inline WeylFit weyl_plateau(const EigenReport& report, Sign sign, double f1 = 0.05, double f2 = 0.25) {
  require(0.0 <= f1 && f1 < f2 && f2 <= 1.0, ErrorKind::invalid_argument, "window fractions must satisfy 0 <= f1 < f2 <= 1");
  const auto n = report.sequence(sign).size();
  require(n >= min_plateau_count, ErrorKind::invalid_argument, "too few eigenvalues for a plateau");
  const auto k_min = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(f1 * static_cast<double>(n))));
  const auto k_max = static_cast<std::size_t>(std::floor(f2 * static_cast<double>(n)));
  return weyl_plateau_window(report, sign, k_min, k_max);
}

struct DixmierEstimate {
  std::vector<double> sequence;  // entry n-1 holds (log(n+2))^{-1} sum_{k<=n} s_k
  double final = 0.0;
};

/// Log-averaged partial sums of a descending nonnegative sequence.
inline DixmierEstimate dixmier_sequence(std::span<const double> s) {
  require(!s.empty(), ErrorKind::invalid_argument, "Dixmier sequence needs a nonempty input");
  DixmierEstimate out;
  out.sequence.reserve(s.size());
  double partial = 0.0, carry = 0.0;  // Kahan summation
  for (std::size_t k = 0; k < s.size(); ++k) {
    require(s[k] >= 0.0, ErrorKind::invalid_argument, "singular values must be nonnegative");
    const double y = s[k] - carry;
    const double t = partial + y;
    carry = (t - partial) - y;
    partial = t;
    out.sequence.push_back(partial / std::log(static_cast<double>(k + 1) + 2.0));
  }
  out.final = out.sequence.back();
  return out;
}

struct SignedDixmier {
  DixmierEstimate positive;
  DixmierEstimate negative;
  double final = 0.0;  // positive.final - negative.final
};

inline SignedDixmier dixmier_signed(const EigenReport& report) {
  SignedDixmier out;
  if (!report.positive.empty()) out.positive = dixmier_sequence(report.positive);
  if (!report.negative.empty()) out.negative = dixmier_sequence(report.negative);
  out.final = out.positive.final - out.negative.final;
  return out;
}

/// Singular values |lambda| of the report, descending.
inline std::vector<double> singular_values(const EigenReport& report) {
  std::vector<double> s(report.positive);
  s.insert(s.end(), report.negative.begin(), report.negative.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

/// Dixmier estimate of the singular values of the report.
inline DixmierEstimate dixmier_sequence(const EigenReport& report) {
  const auto s = singular_values(report);
  return dixmier_sequence(std::span<const double>(s));
}

struct OrderBounds {
  double inf = 0.0;
  double sup = 0.0;
  double ratio() const { return inf > 0.0 ? sup / inf : std::numeric_limits<double>::infinity(); }
};

/// min and max of k lambda_k over the 1-based window [k_min, k_max].
inline OrderBounds order_bounds(const EigenReport& report, Sign sign, std::size_t k_min, std::size_t k_max) {
  const auto kl = detail::k_lambda(report.sequence(sign), k_min, k_max);
  const auto [lo, hi] = std::minmax_element(kl.begin(), kl.end());
  return {*lo, *hi};
}

struct SpectraMatch {
  bool match = true;
  std::vector<double> positive_deviation;
  std::vector<double> negative_deviation;
  double worst = 0.0;
};

/// Elementwise comparison of the `top` largest eigenvalues of each sign.
/// Deviations are |a - b| / max(a, b); a missing entry counts as zero, and
/// pairs below 1e-8 of the larger norm are treated as matching numerical zeros.
inline SpectraMatch spectra_match(const EigenReport& a, const EigenReport& b, std::size_t top, double rel_tol) {
  require(a.size > 0 && b.size > 0, ErrorKind::invalid_argument, "spectra_match needs nonempty reports");
  SpectraMatch out;
  const double negligible = 1e-8 * std::max(a.norm, b.norm);
  auto compare = [&](const std::vector<double>& x, const std::vector<double>& y, std::vector<double>& dev) {
    const std::size_t count = std::min(top, std::max(x.size(), y.size()));
    for (std::size_t k = 0; k < count; ++k) {
      const double u = k < x.size() ? x[k] : 0.0;
      const double v = k < y.size() ? y[k] : 0.0;
      const double big = std::max(u, v);
      const double d = big <= negligible ? 0.0 : std::abs(u - v) / big;
      dev.push_back(d);
      out.worst = std::max(out.worst, d);
      if (d > rel_tol) out.match = false;
    }
  };
  compare(a.positive, b.positive, out.positive_deviation);
  compare(a.negative, b.negative, out.negative_deviation);
  return out;
}

// ---------------------------------------------------------------------------
// CSV: index,sign,lambda,k_lambda (lambda is signed)

inline void write_spectrum_csv(std::ostream& out, const EigenReport& report) {
  out << "index,sign,lambda,k_lambda\n";
  char buf[64];
  auto emit = [&](const std::vector<double>& s, Sign sign) {
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double lambda = sign == Sign::plus ? s[k] : -s[k];
      out << k + 1 << ',' << to_string(sign) << ',';
      std::snprintf(buf, sizeof buf, "%.17g", lambda);
      out << buf << ',';
      std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(k + 1) * s[k]);
      out << buf << '\n';
    }
  };
  emit(report.positive, Sign::plus);
  emit(report.negative, Sign::minus);
}

inline EigenReport read_spectrum_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "index,sign,lambda,k_lambda", ErrorKind::io,
          "spectrum CSV header missing");
  std::vector<double> pos, neg;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string index, sign, lambda;
    require(std::getline(row, index, ',') && std::getline(row, sign, ',') && std::getline(row, lambda, ','),
            ErrorKind::io, "malformed spectrum CSV row: " + line);
    const double v = std::strtod(lambda.c_str(), nullptr);
    (sign == "+" ? pos : neg).push_back(std::abs(v));
  }
  return EigenReport::from_sequences(std::move(pos), std::move(neg));
}

}  // namespace bslab
