#pragma once

// Binary operator export: uint64 n, uint64 complex flag (0 or 1), then the
// lower triangle in row-major order (row i holds entries j = 0..i), reals as
// one double and complex entries as interleaved (re, im). Native byte order.
// Metadata goes to a JSON sidecar.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <istream>
#include <ostream>

#include "bslab/operators.hpp"

namespace bslab {

inline nlohmann::json operator_metadata_json(const AssembledOperator& op) {
  const auto& m = op.metadata();
  nlohmann::json j;
  j["route"] = std::string(to_string(op.route()));
  j["size"] = op.size();
  j["complex"] = op.is_complex();
  j["fingerprint"] = m.fingerprint;
  if (m.period) j["period"] = *m.period;
  if (m.cutoff) j["cutoff"] = *m.cutoff;
  if (m.kernel) j["kernel"] = std::string(to_string(*m.kernel));
  if (m.log_coefficient) j["log_coefficient"] = *m.log_coefficient;
  if (m.diagonal) j["diagonal_rule"] = std::string(to_string(*m.diagonal));
  if (m.zero_mode) j["zero_mode"] = std::string(to_string(*m.zero_mode));
  j["sign_framed"] = m.sign_framed;
  j["clipped_negative"] = m.clipped_negative;
  return j;
}

inline void write_operator_binary(std::ostream& out, const AssembledOperator& op) {
  const auto n = static_cast<std::uint64_t>(op.size());
  const std::uint64_t is_complex = op.is_complex() ? 1 : 0;
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&is_complex), sizeof is_complex);
  for (Eigen::Index i = 0; i < op.size(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      if (is_complex) {
        const std::complex<double> z = op.complex()(i, j);
        const double pair[2] = {z.real(), z.imag()};
        out.write(reinterpret_cast<const char*>(pair), sizeof pair);
      } else {
        const double x = op.real()(i, j);
        out.write(reinterpret_cast<const char*>(&x), sizeof x);
      }
    }
  }
  require(static_cast<bool>(out), ErrorKind::io, "failed to write operator");
}

/// Reads a matrix written by write_operator_binary; the route and metadata are
/// not part of the binary layout and must be supplied.
inline AssembledOperator read_operator_binary(std::istream& in, Route route, OperatorMetadata meta = {}) {
  std::uint64_t n = 0, is_complex = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&is_complex), sizeof is_complex);
  require(static_cast<bool>(in) && n > 0 && is_complex <= 1, ErrorKind::io, "malformed operator header");
  const auto size = static_cast<Eigen::Index>(n);
  if (is_complex) {
    ComplexMatrix m(size, size);
    for (Eigen::Index i = 0; i < size; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        double pair[2];
        in.read(reinterpret_cast<char*>(pair), sizeof pair);
        m(i, j) = {pair[0], pair[1]};
        m(j, i) = std::conj(m(i, j));
      }
    }
    require(static_cast<bool>(in), ErrorKind::io, "truncated operator file");
    return AssembledOperator(std::move(m), route, std::move(meta));
  }
  Matrix m(size, size);
  for (Eigen::Index i = 0; i < size; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      double x;
      in.read(reinterpret_cast<char*>(&x), sizeof x);
      m(i, j) = m(j, i) = x;
    }
  }
  require(static_cast<bool>(in), ErrorKind::io, "truncated operator file");
  return AssembledOperator(std::move(m), route, std::move(meta));
}

}  // namespace bslab
