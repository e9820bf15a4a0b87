#pragma once

// Narrow wrapper over the LAPACK dense self-adjoint eigensolvers.
//
// All eigenvalues come from one Householder tridiagonalization (sytrd/hetrd)
// followed by dsterf. Eigenvectors are produced only for a few requested
// indices (bisection + inverse iteration on the tridiagonal, then the
// Householder back-transform), which keeps residual checks cheap for large
// matrices.

#include <complex>
#ifndef LAPACK_COMPLEX_CPP
#define LAPACK_COMPLEX_CPP
#endif
#ifndef lapack_complex_float
#define lapack_complex_float std::complex<float>
#endif
#ifndef lapack_complex_double
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

#include <Eigen/Dense>

#include <complex>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "bslab/error.hpp"

namespace bslab::lapack {

template <class Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

template <class Scalar>
struct SelectedEigen {
  std::vector<double> values;                   // ascending
  std::vector<int> vector_indices;              // into `values`
  DenseMatrix<Scalar> vectors;                  // one column per requested index
};

namespace detail {
inline void check(lapack_int info, const char* routine) {
  if (info != 0) fail(ErrorKind::solver, std::string(routine) + " failed with info = " + std::to_string(info));
}
}  // namespace detail

/// Eigenvalues of the self-adjoint matrix `a` (lower triangle referenced;
/// `a` is overwritten) plus eigenvectors for `indices` (0-based ascending order).
template <class Scalar>
SelectedEigen<Scalar> self_adjoint_eigen(DenseMatrix<Scalar>& a, std::span<const int> indices = {}) {
  constexpr bool is_complex = !std::is_same_v<Scalar, double>;
  static_assert(std::is_same_v<Scalar, double> || std::is_same_v<Scalar, std::complex<double>>);
  require(a.rows() == a.cols(), ErrorKind::solver, "matrix must be square");
  const auto n = static_cast<lapack_int>(a.rows());
  SelectedEigen<Scalar> out;
  if (n == 0) return out;

  std::vector<double> diag(static_cast<std::size_t>(n)), off(static_cast<std::size_t>(std::max(n - 1, 1)));
  std::vector<Scalar> tau(static_cast<std::size_t>(std::max(n - 1, 1)));
  if constexpr (is_complex) {
    detail::check(LAPACKE_zhetrd(LAPACK_COL_MAJOR, 'L', n, a.data(), n, diag.data(), off.data(), tau.data()),
                  "zhetrd");
  } else {
    detail::check(LAPACKE_dsytrd(LAPACK_COL_MAJOR, 'L', n, a.data(), n, diag.data(), off.data(), tau.data()),
                  "dsytrd");
  }

  out.values = diag;
  {
    std::vector<double> e = off;
    detail::check(LAPACKE_dsterf(n, out.values.data(), e.data()), "dsterf");
  }

  out.vectors.resize(n, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    const lapack_int k = indices[c];
    require(k >= 0 && k < n, ErrorKind::solver, "eigenvector index out of range");
    lapack_int m = 0, nsplit = 0;
    std::vector<double> w(static_cast<std::size_t>(n));
    std::vector<lapack_int> iblock(static_cast<std::size_t>(n)), isplit(static_cast<std::size_t>(n));
    detail::check(LAPACKE_dstebz('I', 'B', n, 0.0, 0.0, k + 1, k + 1, 0.0, diag.data(), off.data(), &m, &nsplit,
                                 w.data(), iblock.data(), isplit.data()),
                  "dstebz");
    require(m == 1, ErrorKind::solver, "dstebz returned an unexpected eigenvalue count");
    lapack_int ifail = 0;
    DenseMatrix<Scalar> z(n, 1);
    if constexpr (is_complex) {
      detail::check(LAPACKE_zstein(LAPACK_COL_MAJOR, n, diag.data(), off.data(), 1, w.data(), iblock.data(),
                                   isplit.data(), z.data(), n, &ifail),
                    "zstein");
      detail::check(LAPACKE_zunmtr(LAPACK_COL_MAJOR, 'L', 'L', 'N', n, 1, a.data(), n, tau.data(), z.data(), n),
                    "zunmtr");
    } else {
      detail::check(LAPACKE_dstein(LAPACK_COL_MAJOR, n, diag.data(), off.data(), 1, w.data(), iblock.data(),
                                   isplit.data(), z.data(), n, &ifail),
                    "dstein");
      detail::check(LAPACKE_dormtr(LAPACK_COL_MAJOR, 'L', 'L', 'N', n, 1, a.data(), n, tau.data(), z.data(), n),
                    "dormtr");
    }
    out.vectors.col(static_cast<Eigen::Index>(c)) = z.col(0);
    out.vector_indices.push_back(k);
  }
  return out;
}

/// Full eigendecomposition of a real symmetric matrix (values ascending,
/// vectors as columns). `a` is overwritten with the eigenvectors.
inline std::vector<double> symmetric_eigen_full(DenseMatrix<double>& a) {
  require(a.rows() == a.cols(), ErrorKind::solver, "matrix must be square");
  const auto n = static_cast<lapack_int>(a.rows());
  std::vector<double> w(static_cast<std::size_t>(n));
  if (n == 0) return w;
  detail::check(LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, a.data(), n, w.data()), "dsyevd");
  return w;
}

}  // namespace bslab::lapack
