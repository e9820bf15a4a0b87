#pragma once

// Declarative experiments: a JSON config names a scenario, a density, an
// operator route and the analyses to run; the runner writes a summary JSON,
// the spectrum CSV, plot data and verdicts into an output directory.

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "bslab/coeffs.hpp"
#include "bslab/expression.hpp"
#include "bslab/measure_io.hpp"
#include "bslab/operator_io.hpp"
#include "bslab/operators.hpp"
#include "bslab/orlicz.hpp"
#include "bslab/scenarios.hpp"
#include "bslab/spectral.hpp"
#include "bslab/svg_plot.hpp"

namespace bslab::experiment {

using nlohmann::json;

inline constexpr int schema_version = 1;
inline constexpr std::size_t matrix_budget_cap = 20000;

enum ExitCode : int { exit_pass = 0, exit_verdict = 1, exit_config = 2, exit_numerical = 3 };

struct DensitySpec {
  std::string type = "scenario";  // scenario | constant | expression | file
  double value = 1.0;
  std::string expression;
  std::string path;
  double scale = 1.0;
};

struct OperatorSpec {
  Route route = Route::logkernel;
  KernelChoice kernel = KernelChoice::pure_log;
  std::optional<double> log_coefficient;
  DiagonalRule diagonal = DiagonalRule::cell_average;
  double period = 8.0;
  int cutoff = 40;
  ZeroMode zero_mode = ZeroMode::drop;
  std::size_t budget = default_matrix_budget;
};

struct CheckSpec {
  std::string name;
  std::string quantity;
  std::string op = "rel";  // rel | abs | le | ge
  std::variant<double, std::string> target = 0.0;
  double factor = 1.0;
  double tol = 0.0;
};

struct AnalysisSpec {
  double f1 = 0.05;
  double f2 = 0.25;
  std::optional<std::pair<std::size_t, std::size_t>> window;
  std::optional<std::pair<std::size_t, std::size_t>> order_window;
  CoefficientMode mode = CoefficientMode::calibrated;
  std::optional<OperatorSpec> reference;
  std::size_t match_top = 30;
  double match_tol = 0.10;
  bool diagonal_sensitivity = false;
  std::vector<CheckSpec> checks;
};

struct OutputSpec {
  std::string dir = "out";
  bool svg = true;
  bool export_operator = false;
};

struct ExperimentConfig {
  std::string id;
  std::string scenario;
  ParamMap params;
  DensitySpec density;
  OperatorSpec op;
  AnalysisSpec analysis;
  OutputSpec output;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  require(j.is_object(), ErrorKind::config, std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    require(ok, ErrorKind::config, "unknown key '" + key + "' in " + std::string(where));
  }
}

template <class T>
T get(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("bad value for '") + key + "': " + e.what());
  }
}

inline Route parse_route(const std::string& s) {
  if (s == "fourier") return Route::fourier;
  if (s == "logkernel") return Route::logkernel;
  if (s == "logpotential") return Route::logpotential;
  if (s == "steklov") return Route::steklov;
  fail(ErrorKind::config, "unknown route '" + s + "'");
}
inline KernelChoice parse_kernel(const std::string& s) {
  if (s == "pure_log") return KernelChoice::pure_log;
  if (s == "bessel_exact_N2") return KernelChoice::bessel_exact_N2;
  fail(ErrorKind::config, "unknown kernel '" + s + "'");
}
inline DiagonalRule parse_diagonal(const std::string& s) {
  if (s == "cell_average") return DiagonalRule::cell_average;
  if (s == "cell_pair_average") return DiagonalRule::cell_pair_average;
  if (s == "zero") return DiagonalRule::zero;
  fail(ErrorKind::config, "unknown diagonal rule '" + s + "'");
}
inline ZeroMode parse_zero_mode(const std::string& s) {
  if (s == "drop") return ZeroMode::drop;
  if (s == "shift") return ZeroMode::shift;
  fail(ErrorKind::config, "unknown zero mode '" + s + "'");
}

inline OperatorSpec parse_operator(const json& j) {
  check_keys(j, {"route", "kernel", "log_coefficient", "diagonal_rule", "period", "cutoff", "zero_mode", "budget"},
             "operator");
  OperatorSpec op;
  op.route = parse_route(get<std::string>(j, "route", "logkernel"));
  op.kernel = parse_kernel(get<std::string>(j, "kernel", "pure_log"));
  if (j.contains("log_coefficient")) op.log_coefficient = get<double>(j, "log_coefficient", 0.0);
  op.diagonal = parse_diagonal(get<std::string>(j, "diagonal_rule", "cell_average"));
  op.period = get<double>(j, "period", op.period);
  op.cutoff = get<int>(j, "cutoff", op.cutoff);
  op.zero_mode = parse_zero_mode(get<std::string>(j, "zero_mode", "drop"));
  op.budget = get<std::size_t>(j, "budget", op.budget);
  return op;
}

inline json operator_json(const OperatorSpec& op) {
  json j;
  j["route"] = std::string(to_string(op.route));
  j["kernel"] = std::string(to_string(op.kernel));
  if (op.log_coefficient) j["log_coefficient"] = *op.log_coefficient;
  j["diagonal_rule"] = std::string(to_string(op.diagonal));
  j["period"] = op.period;
  j["cutoff"] = op.cutoff;
  j["zero_mode"] = std::string(to_string(op.zero_mode));
  j["budget"] = op.budget;
  return j;
}

inline std::pair<std::size_t, std::size_t> parse_window(const json& j, const char* what) {
  require(j.is_array() && j.size() == 2, ErrorKind::config, std::string(what) + " must be [k_min, k_max]");
  const auto a = j[0].get<long long>(), b = j[1].get<long long>();
  require(a >= 1 && b >= a, ErrorKind::config, std::string(what) + " must satisfy 1 <= k_min <= k_max");
  return {static_cast<std::size_t>(a), static_cast<std::size_t>(b)};
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  using detail::get;
  detail::check_keys(j, {"id", "scenario", "params", "density", "operator", "analysis", "output", "seed"}, "config");
  ExperimentConfig c;
  c.id = get<std::string>(j, "id", "experiment");
  require(j.contains("scenario"), ErrorKind::config, "config needs a 'scenario'");
  c.scenario = get<std::string>(j, "scenario", "");
  if (j.contains("params")) {
    require(j["params"].is_object(), ErrorKind::config, "params must be an object");
    for (const auto& [k, v] : j["params"].items()) {
      require(v.is_number(), ErrorKind::config, "scenario parameter '" + k + "' must be numeric");
      c.params[k] = v.get<double>();
    }
  }
  if (j.contains("density")) {
    const auto& d = j["density"];
    detail::check_keys(d, {"type", "value", "expression", "path", "scale"}, "density");
    c.density.type = get<std::string>(d, "type", "scenario");
    c.density.value = get<double>(d, "value", 1.0);
    c.density.expression = get<std::string>(d, "expression", "");
    c.density.path = get<std::string>(d, "path", "");
    c.density.scale = get<double>(d, "scale", 1.0);
  }
  if (j.contains("operator")) c.op = detail::parse_operator(j["operator"]);
  if (j.contains("analysis")) {
    const auto& a = j["analysis"];
    detail::check_keys(a,
                       {"window_fractions", "window", "order_window", "coefficient_mode", "reference_operator",
                        "match_top", "match_tol", "diagonal_sensitivity", "checks"},
                       "analysis");
    if (a.contains("window_fractions")) {
      const auto& f = a["window_fractions"];
      require(f.is_array() && f.size() == 2, ErrorKind::config, "window_fractions must be [f1, f2]");
      c.analysis.f1 = f[0].get<double>();
      c.analysis.f2 = f[1].get<double>();
    }
    if (a.contains("window")) c.analysis.window = detail::parse_window(a["window"], "window");
    if (a.contains("order_window")) c.analysis.order_window = detail::parse_window(a["order_window"], "order_window");
    const auto mode = get<std::string>(a, "coefficient_mode", "calibrated");
    require(mode == "calibrated" || mode == "printed", ErrorKind::config, "coefficient_mode must be calibrated or printed");
    c.analysis.mode = mode == "printed" ? CoefficientMode::printed : CoefficientMode::calibrated;
    if (a.contains("reference_operator")) c.analysis.reference = detail::parse_operator(a["reference_operator"]);
    c.analysis.match_top = get<std::size_t>(a, "match_top", 30);
    c.analysis.match_tol = get<double>(a, "match_tol", 0.10);
    c.analysis.diagonal_sensitivity = get<bool>(a, "diagonal_sensitivity", false);
    if (a.contains("checks")) {
      require(a["checks"].is_array(), ErrorKind::config, "checks must be an array");
      for (const auto& cj : a["checks"]) {
        detail::check_keys(cj, {"name", "quantity", "op", "target", "factor", "tol"}, "check");
        CheckSpec ck;
        ck.quantity = get<std::string>(cj, "quantity", "");
        require(!ck.quantity.empty(), ErrorKind::config, "check needs a quantity");
        ck.name = get<std::string>(cj, "name", ck.quantity);
        ck.op = get<std::string>(cj, "op", "rel");
        require(ck.op == "rel" || ck.op == "abs" || ck.op == "le" || ck.op == "ge", ErrorKind::config,
                "check op must be rel, abs, le or ge");
        require(cj.contains("target"), ErrorKind::config, "check '" + ck.name + "' needs a target");
        if (cj["target"].is_string()) ck.target = cj["target"].get<std::string>();
        else if (cj["target"].is_number()) ck.target = cj["target"].get<double>();
        else fail(ErrorKind::config, "check target must be a number or a quantity name");
        ck.factor = get<double>(cj, "factor", 1.0);
        ck.tol = get<double>(cj, "tol", 0.0);
        require(ck.tol >= 0.0, ErrorKind::config, "check tolerance must be nonnegative");
        c.analysis.checks.push_back(std::move(ck));
      }
    }
  }
  if (j.contains("output")) {
    const auto& o = j["output"];
    detail::check_keys(o, {"dir", "svg", "export_operator"}, "output");
    c.output.dir = get<std::string>(o, "dir", c.output.dir);
    c.output.svg = get<bool>(o, "svg", true);
    c.output.export_operator = get<bool>(o, "export_operator", false);
  }
  c.seed = get<std::uint64_t>(j, "seed", 0);
  return c;
}

inline json config_json(const ExperimentConfig& c) {
  json j;
  j["id"] = c.id;
  j["scenario"] = c.scenario;
  j["params"] = json::object();
  for (const auto& [k, v] : c.params) j["params"][k] = v;
  j["density"] = {{"type", c.density.type}, {"scale", c.density.scale}};
  if (c.density.type == "constant") j["density"]["value"] = c.density.value;
  if (c.density.type == "expression") j["density"]["expression"] = c.density.expression;
  if (c.density.type == "file") j["density"]["path"] = c.density.path;
  j["operator"] = detail::operator_json(c.op);
  auto& a = j["analysis"];
  a["window_fractions"] = {c.analysis.f1, c.analysis.f2};
  if (c.analysis.window) a["window"] = {c.analysis.window->first, c.analysis.window->second};
  if (c.analysis.order_window) a["order_window"] = {c.analysis.order_window->first, c.analysis.order_window->second};
  a["coefficient_mode"] = std::string(to_string(c.analysis.mode));
  if (c.analysis.reference) a["reference_operator"] = detail::operator_json(*c.analysis.reference);
  a["match_top"] = c.analysis.match_top;
  a["match_tol"] = c.analysis.match_tol;
  a["diagonal_sensitivity"] = c.analysis.diagonal_sensitivity;
  a["checks"] = json::array();
  for (const auto& ck : c.analysis.checks) {
    json cj{{"name", ck.name}, {"quantity", ck.quantity}, {"op", ck.op}, {"factor", ck.factor}, {"tol", ck.tol}};
    std::visit([&](const auto& t) { cj["target"] = t; }, ck.target);
    a["checks"].push_back(cj);
  }
  j["output"] = {{"dir", c.output.dir}, {"svg", c.output.svg}, {"export_operator", c.output.export_operator}};
  j["seed"] = c.seed;
  return j;
}

inline int scenario_ambient(const ExperimentConfig& c) {
  if (c.scenario == "sphere") return 3;
  if (c.scenario == "segment" || c.scenario == "cantor_line") {
    auto it = c.params.find("ambient");
    return it == c.params.end() ? 2 : static_cast<int>(it->second);
  }
  return 2;
}

/// Static checks that need no numerical work: the scenario and its required
/// parameters, the density spec, and operator budgets.
inline void validate_config(const ExperimentConfig& c) {
  const ScenarioInfo* info = nullptr;
  for (const auto& s : scenario_catalog())
    if (s.name == c.scenario) info = &s;
  require(info != nullptr, ErrorKind::unknown_scenario, "unknown scenario '" + c.scenario + "'");
  std::string_view req = info->required;
  while (!req.empty()) {
    const auto comma = req.find(',');
    const auto key = req.substr(0, comma);
    require(c.params.count(std::string(key)) == 1, ErrorKind::missing_parameter,
            "scenario '" + c.scenario + "' needs parameter '" + std::string(key) + "'");
    req = comma == std::string_view::npos ? std::string_view{} : req.substr(comma + 1);
  }
  const auto& d = c.density.type;
  require(d == "scenario" || d == "constant" || d == "expression" || d == "file", ErrorKind::config,
          "density type must be scenario, constant, expression or file");
  if (d == "expression") DensityExpression{c.density.expression};
  if (d == "file") require(!c.density.path.empty(), ErrorKind::config, "file density needs a path");
  require(std::isfinite(c.density.scale), ErrorKind::config, "density scale must be finite");
  auto check_op = [&](const OperatorSpec& op) {
    require(op.budget <= matrix_budget_cap, ErrorKind::config, "operator budget exceeds the configured cap");
    if (op.route == Route::fourier) {
      require(op.period > 0.0 && op.cutoff >= 0, ErrorKind::config, "fourier route needs period > 0 and cutoff >= 0");
      const double size = std::pow(2.0 * op.cutoff + 1.0, scenario_ambient(c));
      require(size <= static_cast<double>(op.budget), ErrorKind::budget, "fourier matrix exceeds the budget");
    }
    if (op.route == Route::steklov) {
      require(op.cutoff >= 1 && 2.0 * op.cutoff + 1.0 <= static_cast<double>(op.budget), ErrorKind::budget,
              "steklov cutoff exceeds the budget");
    }
    if (op.log_coefficient) require(*op.log_coefficient > 0.0, ErrorKind::config, "log_coefficient must be positive");
  };
  check_op(c.op);
  if (c.analysis.reference) check_op(*c.analysis.reference);
  require(0.0 <= c.analysis.f1 && c.analysis.f1 < c.analysis.f2 && c.analysis.f2 <= 1.0, ErrorKind::config,
          "window fractions must satisfy 0 <= f1 < f2 <= 1");
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::config, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, "config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Builtin experiments

struct BuiltinExperiment {
  std::string_view id;
  std::string_view reference;  // named result of the underlying theory
  std::string_view expected;   // pass | fail
  std::string_view note;
  std::string_view config;     // JSON
};

inline const std::vector<BuiltinExperiment>& builtin_experiments() {
  static const std::vector<BuiltinExperiment> catalog = {
      {"circle_weyl", "Weyl asymptotics on a Lipschitz curve; calibrated Z(1,1)", "pass",
       "plateau over k in [100, 500] against the exact circle spectrum; Dixmier agreement; calibration",
       R"({"id": "circle_weyl", "scenario": "circle", "params": {"atoms": 2000},
           "operator": {"route": "logkernel", "kernel": "bessel_exact_N2"},
           "analysis": {"window": [100, 500], "diagonal_sensitivity": true, "checks": [
             {"name": "plateau", "quantity": "plateau_plus", "op": "rel", "target": 1.0, "tol": 0.05},
             {"name": "plateau_vs_prediction", "quantity": "plateau_plus", "op": "rel", "target": "predicted_plus", "tol": 0.05},
             {"name": "calibrated_coefficient", "quantity": "plateau_over_mass", "op": "rel", "target": "coefficient_calibrated", "tol": 0.10},
             {"name": "dixmier_vs_plateau", "quantity": "dixmier_final", "op": "rel", "target": "plateau_plus", "tol": 0.10}]},
           "output": {"dir": "out/circle_weyl"}})"},
      {"circle_fourier", "Nonzero spectra of K*K and KK* coincide", "fail",
       "Fourier truncation at K = 40 undershoots the spectrum beyond the first few eigenvalues",
       R"({"id": "circle_fourier", "scenario": "circle", "params": {"atoms": 2000},
           "operator": {"route": "fourier", "period": 8, "cutoff": 40},
           "analysis": {"reference_operator": {"route": "logkernel", "kernel": "bessel_exact_N2"},
             "match_top": 30, "match_tol": 0.10, "checks": [
             {"name": "route_agreement", "quantity": "match_pass", "op": "ge", "target": 1},
             {"name": "plateau", "quantity": "plateau_plus", "op": "rel", "target": 1.0, "tol": 0.08}]},
           "output": {"dir": "out/circle_fourier"}})"},
      {"segment", "Weyl asymptotics on a Lipschitz curve", "pass", "unit segment in the plane",
       R"({"id": "segment", "scenario": "segment", "params": {"atoms": 2000},
           "operator": {"route": "logkernel", "kernel": "bessel_exact_N2"},
           "analysis": {"checks": [
             {"name": "plateau", "quantity": "plateau_plus", "op": "rel", "target": "predicted_plus", "tol": 0.10}]},
           "output": {"dir": "out/segment"}})"},
      {"two_circles", "Additivity over separated components", "pass", "circles r = 1 and r = 0.5, gap 1",
       R"({"id": "two_circles", "scenario": "two_circles", "params": {"atoms": 3000},
           "operator": {"route": "logkernel", "kernel": "bessel_exact_N2"},
           "analysis": {"checks": [
             {"name": "plateau", "quantity": "plateau_plus", "op": "rel", "target": "predicted_plus", "tol": 0.10}]},
           "output": {"dir": "out/two_circles"}})"},
      {"half_signed_circle", "Sign splitting of the asymptotics", "pass", "V = sign(y) on the unit circle",
       R"({"id": "half_signed_circle", "scenario": "half_signed_circle", "params": {"atoms": 2000},
           "operator": {"route": "logkernel", "kernel": "bessel_exact_N2"},
           "analysis": {"checks": [
             {"name": "plateau_plus", "quantity": "plateau_plus", "op": "rel", "target": 0.5, "tol": 0.12},
             {"name": "plateau_minus", "quantity": "plateau_minus", "op": "rel", "target": 0.5, "tol": 0.12},
             {"name": "signed_dixmier", "quantity": "dixmier_signed", "op": "abs", "target": 0.0, "tol": 0.1}]},
           "output": {"dir": "out/half_signed_circle"}})"},
      {"mixed_dimensions", "Sum of asymptotics over components of different dimension", "fail",
       "Fourier truncation at K = 40 leaves too few resolved eigenvalues for the plateau",
       R"({"id": "mixed_dimensions", "scenario": "circle_plus_square", "params": {"atoms": 2000, "cells": 60},
           "operator": {"route": "fourier", "period": 8, "cutoff": 40},
           "analysis": {"checks": [
             {"name": "plateau", "quantity": "plateau_plus", "op": "rel", "target": "predicted_plus", "tol": 0.12}]},
           "output": {"dir": "out/mixed_dimensions"}})"},
      {"cantor_order", "Order-sharp eigenvalue estimate for fractal measures", "pass",
       "middle-third Cantor measure, depth 9",
       R"({"id": "cantor_order", "scenario": "cantor_line", "params": {"depth": 9},
           "operator": {"route": "logkernel", "kernel": "pure_log"},
           "analysis": {"order_window": [20, 400], "checks": [
             {"name": "order_ratio", "quantity": "order_ratio_plus", "op": "le", "target": 10},
             {"name": "averaged_norm_consistency", "quantity": "order_sup_plus", "op": "le", "target": "fitted_constant_bound", "factor": 5}]},
           "output": {"dir": "out/cantor_order"}})"},
      {"steklov_cantor", "Steklov eigenvalue estimate for singular weights", "pass",
       "angle Cantor measure depth 10; drop and shift zero-mode policies compared",
       R"({"id": "steklov_cantor", "scenario": "steklov_cantor", "params": {"depth": 10},
           "operator": {"route": "steklov", "cutoff": 2500, "zero_mode": "drop"},
           "analysis": {"order_window": [20, 300],
             "reference_operator": {"route": "steklov", "cutoff": 2500, "zero_mode": "shift"}, "checks": [
             {"name": "order_ratio", "quantity": "order_ratio_plus", "op": "le", "target": 10},
             {"name": "zero_mode_agreement", "quantity": "reference_plateau_deviation", "op": "le", "target": 0.02}]},
           "output": {"dir": "out/steklov_cantor"}})"},
      {"steklov_lebesgue", "Steklov spectrum for the arclength weight", "pass", "diagonal spectrum 1/|k|",
       R"({"id": "steklov_lebesgue", "scenario": "circle", "params": {"atoms": 1024},
           "operator": {"route": "steklov", "cutoff": 200, "zero_mode": "drop"},
           "analysis": {"checks": [
             {"name": "plateau", "quantity": "plateau_plus", "op": "rel", "target": "predicted_plus", "tol": 0.02},
             {"name": "offdiagonal", "quantity": "offdiagonal_max", "op": "le", "target": 1e-12}]},
           "output": {"dir": "out/steklov_lebesgue"}})"},
      {"sphere", "Surface coefficient Z(2,1) in three dimensions", "pass", "unit 2-sphere, Fibonacci atoms",
       R"({"id": "sphere", "scenario": "sphere", "params": {"atoms": 3000},
           "operator": {"route": "logkernel", "kernel": "pure_log"},
           "analysis": {"checks": [
             {"name": "plateau", "quantity": "plateau_plus", "op": "rel", "target": "predicted_plus", "tol": 0.15}]},
           "output": {"dir": "out/sphere"}})"},
  };
  return catalog;
}

inline ExperimentConfig builtin_config(std::string_view id) {
  for (const auto& b : builtin_experiments())
    if (b.id == id) return parse_config(json::parse(b.config));
  fail(ErrorKind::unknown_scenario, "unknown builtin experiment '" + std::string(id) + "'");
}

// ---------------------------------------------------------------------------
// Running

struct Verdict {
  std::string name;
  std::string quantity;
  std::optional<double> value;
  std::optional<double> target;
  std::string op;
  double tol = 0.0;
  bool pass = false;
};

struct ExperimentReport {
  ExperimentConfig config;
  json summary;
  std::map<std::string, double> quantities;
  std::vector<Verdict> verdicts;
  std::optional<EigenReport> spectrum;
  std::vector<std::pair<std::string, double>> timings;
  std::string failed_stage;
  std::string failure;
  int exit_code = exit_pass;
};

inline Verdict evaluate_check(const CheckSpec& ck, const std::map<std::string, double>& q) {
  Verdict v;
  v.name = ck.name;
  v.quantity = ck.quantity;
  v.op = ck.op;
  v.tol = ck.tol;
  if (auto it = q.find(ck.quantity); it != q.end()) v.value = it->second;
  if (const auto* num = std::get_if<double>(&ck.target)) {
    v.target = ck.factor * *num;
  } else if (auto it = q.find(std::get<std::string>(ck.target)); it != q.end()) {
    v.target = ck.factor * it->second;
  }
  if (!v.value || !v.target || !std::isfinite(*v.value) || !std::isfinite(*v.target)) return v;
  const double x = *v.value, t = *v.target;
  if (ck.op == "rel") v.pass = std::abs(x - t) <= ck.tol * std::abs(t);
  else if (ck.op == "abs") v.pass = std::abs(x - t) <= ck.tol;
  else if (ck.op == "le") v.pass = x <= t;
  else v.pass = x >= t;
  return v;
}

namespace detail {

inline json nullable(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

inline SignedDensity build_density(const ExperimentConfig& c, const ScenarioMeasure& s) {
  const auto& d = c.density;
  SignedDensity v = s.density;
  if (d.type == "constant") v = SignedDensity::constant(s.measure.size(), d.value);
  if (d.type == "expression") v = DensityExpression(d.expression).evaluate(s.measure);
  if (d.type == "file") {
    std::ifstream in(d.path);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open density file " + d.path);
    std::vector<double> values;
    for (double x; in >> x;) values.push_back(x);
    require(values.size() == s.measure.size(), ErrorKind::dimension_mismatch,
            "density file has " + std::to_string(values.size()) + " values for " + std::to_string(s.measure.size()) +
                " atoms");
    v = SignedDensity(std::move(values));
  }
  return d.scale == 1.0 ? v : v.scaled(d.scale);
}

inline AssembledOperator assemble(const OperatorSpec& op, const PointCloudMeasure& mu, const SignedDensity& v) {
  switch (op.route) {
    case Route::fourier: return assemble_fourier_bs(mu, v, op.period, op.cutoff, op.budget);
    case Route::logkernel: {
      auto spec = LogKernelSpec::for_dimension(mu.ambient_dim(), op.kernel, op.diagonal);
      if (op.log_coefficient) spec.log_coefficient = *op.log_coefficient;
      return assemble_log_kernel(mu, v, spec);
    }
    case Route::logpotential: return assemble_log_potential(mu, v, op.diagonal);
    case Route::steklov: return assemble_steklov_circle(mu, v, op.cutoff, op.zero_mode, op.budget);
  }
  fail(ErrorKind::config, "unknown route");
}

inline std::optional<WeylFit> plateau_of(const EigenReport& r, Sign sign, const AnalysisSpec& a) {
  const auto n = r.sequence(sign).size();
  if (n < min_plateau_count) return std::nullopt;
  if (a.window) {
    if (a.window->second > n) return std::nullopt;
    return weyl_plateau_window(r, sign, a.window->first, a.window->second);
  }
  return weyl_plateau(r, sign, a.f1, a.f2);
}

inline json fit_json(const std::optional<WeylFit>& f) {
  if (!f) return nullptr;
  return {{"k_min", f->k_min}, {"k_max", f->k_max}, {"plateau", f->plateau}, {"dispersion", f->dispersion}};
}

inline std::vector<double> geometric_radii(double lo, double hi, int count) {
  std::vector<double> r;
  for (int i = 0; i < count; ++i) r.push_back(lo * std::pow(hi / lo, count == 1 ? 0.0 : double(i) / (count - 1)));
  return r;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + p.string());
  out << text;
  require(static_cast<bool>(out), ErrorKind::io, "failed writing " + p.string());
}

inline std::string format_pair(double a, double b) { return format_double(a) + ' ' + format_double(b) + '\n'; }

}  // namespace detail

/// Writes the summary, spectrum CSV, plot data and timings for a report.
inline void emit_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::io, "cannot create output directory " + dir.string());
  detail::write_text(dir / "summary.json", report.summary.dump(2) + "\n");
  json timings = json::object();
  for (const auto& [stage, seconds] : report.timings) timings[stage] = seconds;
  detail::write_text(dir / "timings.json", timings.dump(2) + "\n");
  if (!report.spectrum) return;
  const auto& r = *report.spectrum;
  {
    std::ofstream out(dir / "spectrum.csv", std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write spectrum.csv");
    write_spectrum_csv(out, r);
  }
  for (Sign sign : {Sign::plus, Sign::minus}) {
    const auto& s = r.sequence(sign);
    std::string text;
    LinePlot plot{std::string("k lambda_k (") + std::string(to_string(sign)) + ")", "k", "k lambda_k", true, {}, {}};
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double kl = static_cast<double>(k + 1) * s[k];
      text += detail::format_pair(static_cast<double>(k + 1), kl);
      plot.points.emplace_back(static_cast<double>(k + 1), kl);
    }
    const std::string stem = sign == Sign::plus ? "weyl_plus" : "weyl_minus";
    detail::write_text(dir / (stem + ".dat"), text);
    if (report.config.output.svg && !s.empty()) {
      const std::string key = sign == Sign::plus ? "predicted_plus" : "predicted_minus";
      if (auto it = report.quantities.find(key); it != report.quantities.end()) plot.reference = it->second;
      std::ostringstream svg;
      write_svg(svg, plot);
      detail::write_text(dir / (stem + ".svg"), svg.str());
    }
  }
  const auto sv = singular_values(r);
  std::string text;
  LinePlot plot{"Dixmier partial sums", "n", "Dixmier_n", true, {}, {}};
  if (!sv.empty()) {
    const auto d = dixmier_sequence(std::span<const double>(sv));
    for (std::size_t n = 0; n < d.sequence.size(); ++n) {
      text += detail::format_pair(static_cast<double>(n + 1), d.sequence[n]);
      plot.points.emplace_back(static_cast<double>(n + 1), d.sequence[n]);
    }
  }
  detail::write_text(dir / "dixmier.dat", text);
  if (report.config.output.svg && !sv.empty()) {
    std::ostringstream svg;
    write_svg(svg, plot);
    detail::write_text(dir / "dixmier.svg", svg.str());
  }
}

/// Runs the pipeline and writes every artifact to config.output.dir. A config
/// error returns exit 2 before anything is written; a failure in a later stage
/// keeps the partial outputs and writes a FAILED marker naming the stage.
inline ExperimentReport run_experiment(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  ExperimentReport report;
  report.config = config;
  try {
    validate_config(config);
  } catch (const Error& e) {
    report.failed_stage = "validate";
    report.failure = e.what();
    report.exit_code = exit_config;
    return report;
  }

  const fs::path dir = config.output.dir;
  auto& q = report.quantities;
  json& summary = report.summary;
  summary["schema_version"] = schema_version;
  summary["config"] = config_json(config);
  std::string stage;
  auto clock = std::chrono::steady_clock::now();
  auto begin = [&](std::string name) {
    stage = std::move(name);
    clock = std::chrono::steady_clock::now();
  };
  auto end = [&] {
    report.timings.emplace_back(stage,
                                std::chrono::duration<double>(std::chrono::steady_clock::now() - clock).count());
  };

  try {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorKind::io, "cannot create output directory " + dir.string());
    fs::remove(dir / "FAILED", ec);

    begin("measure");
    auto scenario = builtin_measure(config.scenario, config.params);
    const auto& mu = scenario.measure;
    end();

    begin("density");
    const SignedDensity v = detail::build_density(config, scenario);
    {
      std::ofstream out(dir / "measure.txt", std::ios::binary);
      require(static_cast<bool>(out), ErrorKind::io, "cannot write measure.txt");
      write_measure(out, mu, &v);
    }
    end();

    begin("diagnostics");
    json measure;
    measure["ambient_dim"] = mu.ambient_dim();
    measure["atoms"] = mu.size();
    measure["total_mass"] = mu.total_mass();
    measure["integral_v"] = integrate(mu, v);
    measure["integral_v_plus"] = integrate(mu, v.positive_part());
    measure["integral_v_minus"] = integrate(mu, v.negative_part());
    measure["components"] = json::array();
    for (const auto& c : mu.components())
      measure["components"].push_back(
          {{"label", c.label}, {"atoms", c.size()}, {"nominal_dim", c.nominal_dim}, {"mass", mu.component_mass(c)}});
    q["atoms"] = static_cast<double>(mu.size());
    q["total_mass"] = mu.total_mass();
    q["integral_v_plus"] = measure["integral_v_plus"].get<double>();
    q["integral_v_minus"] = measure["integral_v_minus"].get<double>();
    measure["ahlfors"] = nullptr;
    measure["density_bounds"] = nullptr;
    if (mu.components().size() == 1 && mu.size() > 1) {
      const double s = mu.components().front().nominal_dim;
      const double lo = 4.0 * atom_spacing(mu);
      const double hi = 0.25 * mu.diameter();
      if (hi > 2.0 * lo) {
        const auto radii = detail::geometric_radii(lo, hi, 6);
        const auto a = ahlfors_constants(mu, s, radii, 50);
        measure["ahlfors"] = {{"exponent", s},         {"c_lower", a.c_lower},         {"c_upper", a.c_upper},
                              {"ratio", a.ratio()},    {"regular", a.regular()},       {"radii", radii},
                              {"samples", a.sampled_atoms.size()}};
        q["ahlfors_ratio"] = a.ratio();
        std::mt19937_64 rng(config.seed);
        const auto center = static_cast<std::size_t>(rng() % mu.size());
        const auto db = density_bounds(mu, s, mu.position(center), radii);
        measure["density_bounds"] = {{"center_atom", center},
                                     {"lower", db.lower},
                                     {"upper", db.upper},
                                     {"positive_finite", db.positive_finite_density()},
                                     {"preiss_heuristic", db.preiss_heuristic()}};
      }
    }
    summary["measure"] = measure;
    end();

    begin("orlicz");
    json orl;
    orl["luxemburg_psi"] = orlicz::luxemburg_norm(v, mu, orlicz::Young::psi).value;
    try {
      orl["luxemburg_phi"] = orlicz::luxemburg_norm(v, mu, orlicz::Young::phi).value;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::saturation) throw;
      orl["luxemburg_phi"] = nullptr;
    }
    orl["averaged_norm"] = orlicz::averaged_norm(v, mu);
    q["luxemburg_psi"] = orl["luxemburg_psi"].get<double>();
    q["averaged_norm"] = orl["averaged_norm"].get<double>();
    summary["orlicz"] = orl;
    end();

    begin("prediction");
    json pred;
    pred["mode"] = std::string(to_string(config.analysis.mode));
    pred["available"] = false;
    if (config.op.route == Route::steklov) {
      // the weight lives on the circle itself: absolutely continuous in dimension 1
      const bool integer = mu.components().front().integer_dim();
      if (integer) {
        const double c = weyl_ac_coefficient(1).value;
        pred["available"] = true;
        pred["coefficient"] = c;
        q["predicted_plus"] = c * q["integral_v_plus"];
        q["predicted_minus"] = c * q["integral_v_minus"];
      }
    } else {
      try {
        const auto symbol = SymbolDescriptor::flagship_symbol(mu.ambient_dim());
        const auto printed = predicted_trace(mu, v, symbol, CoefficientMode::printed);
        const auto calibrated = predicted_trace(mu, v, symbol, CoefficientMode::calibrated);
        auto block = [](const PredictedTrace& t) {
          json b{{"plus", t.plus}, {"minus", t.minus}, {"residue", t.residue}, {"components", json::array()}};
          for (const auto& c : t.components)
            b["components"].push_back({{"dim", c.dim}, {"coefficient", c.coefficient}, {"plus", c.plus}, {"minus", c.minus}});
          return b;
        };
        pred["available"] = true;
        pred["printed"] = block(printed);
        pred["calibrated"] = block(calibrated);
        const auto& chosen = config.analysis.mode == CoefficientMode::printed ? printed : calibrated;
        q["predicted_plus"] = chosen.plus;
        q["predicted_minus"] = chosen.minus;
        q["predicted_plus_printed"] = printed.plus;
        q["predicted_plus_calibrated"] = calibrated.plus;
        if (mu.components().size() == 1) {
          q["coefficient_printed"] = printed.components.front().coefficient;
          q["coefficient_calibrated"] = calibrated.components.front().coefficient;
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::prediction_unavailable) throw;
        pred["reason"] = e.what();
      }
    }
    summary["prediction"] = pred;
    end();

    begin("assemble");
    const auto op = detail::assemble(config.op, mu, v);
    if (config.output.export_operator) {
      std::ofstream out(dir / "operator.bin", std::ios::binary);
      write_operator_binary(out, op);
      detail::write_text(dir / "operator.json", operator_metadata_json(op).dump(2) + "\n");
    }
    if (config.op.route == Route::steklov) {
      const ComplexMatrix& m = op.complex();
      q["offdiagonal_max"] = (m - ComplexMatrix(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff();
    }
    end();

    begin("eigensolve");
    report.spectrum = eigen_spectrum(op);
    const auto& r = *report.spectrum;
    end();

    begin("analysis");
    json spec;
    spec["size"] = r.size;
    spec["norm"] = r.norm;
    spec["max_residual"] = r.max_residual;
    spec["positive_count"] = r.positive.size();
    spec["negative_count"] = r.negative.size();
    spec["operator"] = operator_metadata_json(op);
    q["positive_count"] = static_cast<double>(r.positive.size());
    q["negative_count"] = static_cast<double>(r.negative.size());
    q["clipped_negative"] = op.metadata().clipped_negative;
    if (!r.positive.empty()) {
      q["top_eigenvalue"] = r.positive.front();
      if (q["luxemburg_psi"] > 0.0) q["top_over_luxemburg"] = r.positive.front() / q["luxemburg_psi"];
    }
    const auto plus = detail::plateau_of(r, Sign::plus, config.analysis);
    const auto minus = detail::plateau_of(r, Sign::minus, config.analysis);
    spec["weyl_plus"] = detail::fit_json(plus);
    spec["weyl_minus"] = detail::fit_json(minus);
    spec["window_fractions"] = {config.analysis.f1, config.analysis.f2};
    if (plus) {
      q["plateau_plus"] = plus->plateau;
      q["dispersion_plus"] = plus->dispersion;
      if (q["integral_v_plus"] > 0.0) q["plateau_over_mass"] = plus->plateau / q["integral_v_plus"];
      if (q["averaged_norm"] > 0.0) {
        q["fitted_constant"] = plus->plateau / q["averaged_norm"];
        q["fitted_constant_bound"] = q["fitted_constant"] * q["averaged_norm"];
      }
    }
    if (minus) {
      q["plateau_minus"] = minus->plateau;
      q["dispersion_minus"] = minus->dispersion;
    }
    const auto sv = singular_values(r);
    if (!sv.empty()) {
      q["dixmier_final"] = dixmier_sequence(std::span<const double>(sv)).final;
      const auto sd = dixmier_signed(r);
      q["dixmier_plus"] = sd.positive.final;
      q["dixmier_minus"] = sd.negative.final;
      q["dixmier_signed"] = sd.final;
    }
    spec["dixmier"] = {{"final", detail::nullable(sv.empty() ? std::nullopt : std::optional(q["dixmier_final"]))},
                       {"signed", detail::nullable(sv.empty() ? std::nullopt : std::optional(q["dixmier_signed"]))}};
    if (config.analysis.order_window) {
      const auto [k0, k1] = *config.analysis.order_window;
      if (k1 <= r.positive.size()) {
        const auto b = order_bounds(r, Sign::plus, k0, k1);
        q["order_inf_plus"] = b.inf;
        q["order_sup_plus"] = b.sup;
        q["order_ratio_plus"] = b.ratio();
        spec["order_bounds"] = {{"window", {k0, k1}}, {"inf", b.inf}, {"sup", b.sup}, {"ratio", b.ratio()}};
      } else {
        spec["order_bounds"] = {{"window", {k0, k1}}, {"error", "window exceeds the positive spectrum"}};
      }
    }
    if (config.analysis.reference) {
      const auto ref_op = detail::assemble(*config.analysis.reference, mu, v);
      const auto ref = eigen_spectrum(ref_op);
      const auto m = spectra_match(r, ref, config.analysis.match_top, config.analysis.match_tol);
      q["match_worst"] = m.worst;
      q["match_pass"] = m.match ? 1.0 : 0.0;
      json rj{{"operator", operator_metadata_json(ref_op)},
              {"positive_count", ref.positive.size()},
              {"negative_count", ref.negative.size()},
              {"match_top", config.analysis.match_top},
              {"match_tol", config.analysis.match_tol},
              {"match", m.match},
              {"worst_deviation", m.worst},
              {"positive_deviation", m.positive_deviation}};
      const auto ref_plus = detail::plateau_of(ref, Sign::plus, config.analysis);
      rj["weyl_plus"] = detail::fit_json(ref_plus);
      if (ref_plus) {
        q["reference_plateau_plus"] = ref_plus->plateau;
        if (plus) q["reference_plateau_deviation"] = std::abs(plus->plateau - ref_plus->plateau) / ref_plus->plateau;
      }
      spec["reference"] = rj;
    }
    if (config.analysis.diagonal_sensitivity && plus &&
        (config.op.route == Route::logkernel || config.op.route == Route::logpotential)) {
      auto alt = config.op;
      alt.diagonal = config.op.diagonal == DiagonalRule::cell_average ? DiagonalRule::cell_pair_average
                                                                        : DiagonalRule::cell_average;
      const auto alt_r = eigen_spectrum(detail::assemble(alt, mu, v));
      const auto alt_plus = detail::plateau_of(alt_r, Sign::plus, config.analysis);
      if (alt_plus) {
        q["diagonal_shift"] = std::abs(alt_plus->plateau - plus->plateau) / plus->plateau;
        spec["diagonal_sensitivity"] = {{"alternative_rule", std::string(to_string(alt.diagonal))},
                                        {"plateau", alt_plus->plateau},
                                        {"relative_shift", q["diagonal_shift"]},
                                        {"flagged", q["diagonal_shift"] >= 0.02}};
      }
    }
    summary["spectral"] = spec;
    end();
  } catch (const std::exception& e) {
    report.failed_stage = stage;
    report.failure = e.what();
    report.exit_code = exit_numerical;
  }

  json quantities = json::object();
  for (const auto& [k, val] : q) quantities[k] = val;
  summary["quantities"] = quantities;
  for (const char* key : {"measure", "orlicz", "prediction", "spectral"})
    if (!summary.contains(key)) summary[key] = nullptr;
  summary["verdicts"] = json::array();
  bool all_pass = true;
  for (const auto& ck : config.analysis.checks) {
    auto v = evaluate_check(ck, q);
    all_pass = all_pass && v.pass;
    summary["verdicts"].push_back({{"name", v.name},
                                   {"quantity", v.quantity},
                                   {"value", detail::nullable(v.value)},
                                   {"op", v.op},
                                   {"target", detail::nullable(v.target)},
                                   {"tol", v.tol},
                                   {"pass", v.pass}});
    report.verdicts.push_back(std::move(v));
  }
  if (!report.failed_stage.empty()) summary["failure"] = {{"stage", report.failed_stage}, {"message", report.failure}};
  else if (!all_pass) report.exit_code = exit_verdict;

  try {
    emit_report(report, dir);
    if (!report.failed_stage.empty())
      detail::write_text(dir / "FAILED", "stage: " + report.failed_stage + "\nmessage: " + report.failure + "\n");
  } catch (const Error& e) {
    if (report.failed_stage.empty()) {
      report.failed_stage = "report";
      report.failure = e.what();
      report.exit_code = exit_numerical;
    }
  }
  return report;
}

}  // namespace bslab::experiment
