#pragma once

// Columnar text format for atom clouds:
//
//   N  d1:n1,d2:n2,...  total_mass
//   x1 ... xN weight [V]
//
// The second header token lists each component's nominal dimension with its
// atom count, in atom order.

#include <charconv>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bslab/measures.hpp"

namespace bslab {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_measure(std::ostream& out, const PointCloudMeasure& mu, const SignedDensity* v = nullptr) {
  if (v) check_compatible(mu, *v);
  out << mu.ambient_dim() << ' ';
  for (std::size_t c = 0; c < mu.components().size(); ++c) {
    const auto& comp = mu.components()[c];
    out << (c ? "," : "") << format_double(comp.nominal_dim) << ':' << comp.size();
  }
  out << ' ' << format_double(mu.total_mass()) << '\n';
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (int a = 0; a < mu.ambient_dim(); ++a) out << format_double(mu.positions()(a, static_cast<Eigen::Index>(i))) << ' ';
    out << format_double(mu.weight(i));
    if (v) out << ' ' << format_double((*v)[i]);
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::io, "failed writing measure");
}

inline std::pair<PointCloudMeasure, std::optional<SignedDensity>> read_measure(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::io, "missing measure header");
  std::istringstream header(line);
  int dim = 0;
  std::string comps;
  double declared_mass = 0.0;
  require(static_cast<bool>(header >> dim >> comps >> declared_mass) && dim >= 1, ErrorKind::io,
          "malformed measure header");

  std::vector<std::pair<double, std::size_t>> spec;
  std::istringstream cs(comps);
  std::string item;
  while (std::getline(cs, item, ',')) {
    const auto colon = item.find(':');
    require(colon != std::string::npos, ErrorKind::io, "malformed component token '" + item + "'");
    spec.emplace_back(std::stod(item.substr(0, colon)), std::stoull(item.substr(colon + 1)));
  }

  std::vector<std::vector<double>> rows;
  std::optional<bool> has_v;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> row;
    double x;
    while (ls >> x) row.push_back(x);
    const bool with_v = row.size() == static_cast<std::size_t>(dim) + 2;
    require(with_v || row.size() == static_cast<std::size_t>(dim) + 1, ErrorKind::io, "malformed atom line");
    if (!has_v) has_v = with_v;
    require(*has_v == with_v, ErrorKind::io, "inconsistent density column");
    rows.push_back(std::move(row));
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix pos(dim, n);
  Vector w(n);
  std::vector<double> values;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (int a = 0; a < dim; ++a) pos(a, i) = r[static_cast<std::size_t>(a)];
    w[i] = r[static_cast<std::size_t>(dim)];
    if (has_v && *has_v) values.push_back(r[static_cast<std::size_t>(dim) + 1]);
  }
  std::vector<Component> components;
  std::size_t cursor = 0;
  for (const auto& [d, count] : spec) {
    components.push_back({cursor, cursor + count, d, ""});
    cursor += count;
  }
  PointCloudMeasure mu(std::move(pos), std::move(w), std::move(components));
  const double tol = 1e-12 * std::max(1.0, std::abs(declared_mass));
  require(std::abs(mu.total_mass() - declared_mass) <= tol, ErrorKind::io, "declared total mass does not match atoms");
  std::optional<SignedDensity> density;
  if (has_v && *has_v) density = SignedDensity(std::move(values));
  return {std::move(mu), std::move(density)};
}

}  // namespace bslab
