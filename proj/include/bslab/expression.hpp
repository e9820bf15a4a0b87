#pragma once

// Density expressions over atom coordinates, e.g. "1 + 0.5*sin(3*theta)" or
// "sign(y)". Grammar:
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := ('+' | '-') unary | power
//   power  := atom ('^' unary)?
//   atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
// Names: x y z, x1..x9, r (Euclidean norm), theta (polar angle of x, y), pi, e.

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "bslab/measures.hpp"

namespace bslab {

class DensityExpression {
 public:
  explicit DensityExpression(std::string source) : source_(std::move(source)) {
    pos_ = 0;
    root_ = parse_expr();
    skip_space();
    require(pos_ == source_.size(), ErrorKind::config, "unexpected trailing input in expression '" + source_ + "'");
  }

  double operator()(const Vector& x) const { return root_(x); }

  const std::string& source() const { return source_; }

  /// Density values at every atom of the measure.
  SignedDensity evaluate(const PointCloudMeasure& mu) const {
    std::vector<double> v(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
      v[i] = root_(mu.position(i));
      require(std::isfinite(v[i]), ErrorKind::evaluation, "density expression is not finite at atom " + std::to_string(i));
    }
    return SignedDensity(std::move(v));
  }

 private:
  using Node = std::function<double(const Vector&)>;

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorKind::config, what + " at offset " + std::to_string(pos_) + " in expression '" + source_ + "'");
  }
  void skip_space() {
    while (pos_ < source_.size() && std::isspace(static_cast<unsigned char>(source_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_space();
    if (pos_ < source_.size() && source_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Node parse_expr() {
    Node lhs = parse_term();
    while (true) {
      if (accept('+')) {
        lhs = [a = lhs, b = parse_term()](const Vector& x) { return a(x) + b(x); };
      } else if (accept('-')) {
        lhs = [a = lhs, b = parse_term()](const Vector& x) { return a(x) - b(x); };
      } else {
        return lhs;
      }
    }
  }
  Node parse_term() {
    Node lhs = parse_unary();
    while (true) {
      if (accept('*')) {
        lhs = [a = lhs, b = parse_unary()](const Vector& x) { return a(x) * b(x); };
      } else if (accept('/')) {
        lhs = [a = lhs, b = parse_unary()](const Vector& x) { return a(x) / b(x); };
      } else {
        return lhs;
      }
    }
  }
  Node parse_unary() {
    if (accept('-')) return [a = parse_unary()](const Vector& x) { return -a(x); };
    if (accept('+')) return parse_unary();
    return parse_power();
  }
  Node parse_power() {
    Node base = parse_atom();
    if (accept('^')) return [a = base, b = parse_unary()](const Vector& x) { return std::pow(a(x), b(x)); };
    return base;
  }

  Node parse_atom() {
    skip_space();
    if (pos_ >= source_.size()) error("unexpected end of input");
    const char c = source_[pos_];
    if (accept('(')) {
      Node inner = parse_expr();
      if (!accept(')')) error("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      char* end = nullptr;
      const double value = std::strtod(source_.c_str() + pos_, &end);
      if (end == source_.c_str() + pos_) error("malformed number");
      pos_ = static_cast<std::size_t>(end - source_.c_str());
      return [value](const Vector&) { return value; };
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < source_.size() && std::isalnum(static_cast<unsigned char>(source_[pos_]))) ++pos_;
      const std::string name = source_.substr(start, pos_ - start);
      if (accept('(')) {
        std::vector<Node> args{parse_expr()};
        while (accept(',')) args.push_back(parse_expr());
        if (!accept(')')) error("expected ')'");
        return function(name, std::move(args));
      }
      return variable(name);
    }
    error(std::string("unexpected character '") + c + "'");
  }

  Node variable(const std::string& name) {
    if (name == "pi") return [](const Vector&) { return std::numbers::pi; };
    if (name == "e") return [](const Vector&) { return std::numbers::e; };
    if (name == "r") return [](const Vector& x) { return x.norm(); };
    if (name == "theta")
      return [](const Vector& x) {
        require(x.size() >= 2, ErrorKind::dimension_mismatch, "theta needs at least two coordinates");
        return std::atan2(x[1], x[0]);
      };
    int axis = -1;
    if (name == "x") axis = 0;
    if (name == "y") axis = 1;
    if (name == "z") axis = 2;
    if (name.size() == 2 && name[0] == 'x' && name[1] >= '1' && name[1] <= '9') axis = name[1] - '1';
    if (axis < 0) error("unknown variable '" + name + "'");
    return [axis](const Vector& x) {
      require(axis < x.size(), ErrorKind::dimension_mismatch, "expression coordinate exceeds the ambient dimension");
      return x[axis];
    };
  }

  Node function(const std::string& name, std::vector<Node> args) {
    auto unary = [&](double (*f)(double)) -> Node {
      if (args.size() != 1) error("function '" + name + "' takes one argument");
      return [f, a = args[0]](const Vector& x) { return f(a(x)); };
    };
    auto binary = [&](double (*f)(double, double)) -> Node {
      if (args.size() != 2) error("function '" + name + "' takes two arguments");
      return [f, a = args[0], b = args[1]](const Vector& x) { return f(a(x), b(x)); };
    };
    if (name == "sin") return unary([](double t) { return std::sin(t); });
    if (name == "cos") return unary([](double t) { return std::cos(t); });
    if (name == "tan") return unary([](double t) { return std::tan(t); });
    if (name == "exp") return unary([](double t) { return std::exp(t); });
    if (name == "log") return unary([](double t) { return std::log(t); });
    if (name == "sqrt") return unary([](double t) { return std::sqrt(t); });
    if (name == "abs") return unary([](double t) { return std::abs(t); });
    if (name == "sign") return unary([](double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); });
    if (name == "min") return binary([](double a, double b) { return std::min(a, b); });
    if (name == "max") return binary([](double a, double b) { return std::max(a, b); });
    if (name == "atan2") return binary([](double a, double b) { return std::atan2(a, b); });
    error("unknown function '" + name + "'");
  }

  std::string source_;
  std::size_t pos_ = 0;
  Node root_;
};

}  // namespace bslab
