#pragma once

// Small expression language for chart-model vector fields.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          (right associative)
//   primary := number | name | func '(' expr ')' | '(' expr ')'
//   func    := sin | cos | exp | tanh | log
//
// Names are the declared coordinate names plus the constant `pi`.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace engel_lab::expr {

enum class Op { constant, variable, add, sub, mul, div, pow, neg, sin, cos, exp, tanh, log };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::constant;
  double value = 0.0;
  int var = -1;
  NodePtr a;
  NodePtr b;
};

namespace detail {

inline NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

inline NodePtr constant(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::constant;
  n->value = v;
  return n;
}

inline NodePtr variable(int i) {
  auto n = std::make_shared<Node>();
  n->op = Op::variable;
  n->var = i;
  return n;
}

inline bool is_const(const NodePtr& n, double v) { return n->op == Op::constant && n->value == v; }
inline bool is_const(const NodePtr& n) { return n->op == Op::constant; }

inline double apply_unary(Op op, double x) {
  switch (op) {
    case Op::neg: return -x;
    case Op::sin: return std::sin(x);
    case Op::cos: return std::cos(x);
    case Op::exp: return std::exp(x);
    case Op::tanh: return std::tanh(x);
    case Op::log: return std::log(x);
    default: return x;
  }
}

inline double apply_binary(Op op, double x, double y) {
  switch (op) {
    case Op::add: return x + y;
    case Op::sub: return x - y;
    case Op::mul: return x * y;
    case Op::div: return x / y;
    case Op::pow: return std::pow(x, y);
    default: return x;
  }
}

// Simplifying constructors. Folding is skipped when it would produce a non-finite constant.
inline NodePtr unary(Op op, NodePtr a) {
  if (is_const(a)) {
    const double v = apply_unary(op, a->value);
    if (std::isfinite(v)) return constant(v);
  }
  if (op == Op::neg && a->op == Op::neg) return a->a;
  return make(op, std::move(a));
}

inline NodePtr binary(Op op, NodePtr a, NodePtr b) {
  if (is_const(a) && is_const(b)) {
    const double v = apply_binary(op, a->value, b->value);
    if (std::isfinite(v)) return constant(v);
  }
  switch (op) {
    case Op::add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case Op::sub:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return unary(Op::neg, b);
      break;
    case Op::mul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      if (is_const(a, -1.0)) return unary(Op::neg, b);
      if (is_const(b, -1.0)) return unary(Op::neg, a);
      break;
    case Op::div:
      if (is_const(a, 0.0) && !is_const(b, 0.0)) return constant(0.0);
      if (is_const(b, 1.0)) return a;
      break;
    case Op::pow:
      if (is_const(b, 0.0)) return constant(1.0);
      if (is_const(b, 1.0)) return a;
      break;
    default: break;
  }
  return make(op, std::move(a), std::move(b));
}

inline double eval(const Node& n, std::span<const double> x) {
  switch (n.op) {
    case Op::constant: return n.value;
    case Op::variable: return x[static_cast<std::size_t>(n.var)];
    case Op::add: return eval(*n.a, x) + eval(*n.b, x);
    case Op::sub: return eval(*n.a, x) - eval(*n.b, x);
    case Op::mul: return eval(*n.a, x) * eval(*n.b, x);
    case Op::div: return eval(*n.a, x) / eval(*n.b, x);
    case Op::pow: return std::pow(eval(*n.a, x), eval(*n.b, x));
    case Op::neg: return -eval(*n.a, x);
    case Op::sin: return std::sin(eval(*n.a, x));
    case Op::cos: return std::cos(eval(*n.a, x));
    case Op::exp: return std::exp(eval(*n.a, x));
    case Op::tanh: return std::tanh(eval(*n.a, x));
    case Op::log: return std::log(eval(*n.a, x));
  }
  return 0.0;
}

inline NodePtr derivative(const NodePtr& n, int v) {
  using detail::binary;
  using detail::constant;
  using detail::unary;
  switch (n->op) {
    case Op::constant: return constant(0.0);
    case Op::variable: return constant(n->var == v ? 1.0 : 0.0);
    case Op::add: return binary(Op::add, derivative(n->a, v), derivative(n->b, v));
    case Op::sub: return binary(Op::sub, derivative(n->a, v), derivative(n->b, v));
    case Op::mul:
      return binary(Op::add, binary(Op::mul, derivative(n->a, v), n->b),
                    binary(Op::mul, n->a, derivative(n->b, v)));
    case Op::div: {
      // (a'b - ab') / b^2
      auto num = binary(Op::sub, binary(Op::mul, derivative(n->a, v), n->b),
                        binary(Op::mul, n->a, derivative(n->b, v)));
      return binary(Op::div, num, binary(Op::mul, n->b, n->b));
    }
    case Op::pow: {
      auto da = derivative(n->a, v);
      auto db = derivative(n->b, v);
      if (is_const(db, 0.0)) {
        // b a^(b-1) a'
        auto e = binary(Op::sub, n->b, constant(1.0));
        return binary(Op::mul, binary(Op::mul, n->b, binary(Op::pow, n->a, e)), da);
      }
      // a^b (b' log a + b a'/a)
      auto inner = binary(Op::add, binary(Op::mul, db, unary(Op::log, n->a)),
                          binary(Op::div, binary(Op::mul, n->b, da), n->a));
      return binary(Op::mul, n, inner);
    }
    case Op::neg: return unary(Op::neg, derivative(n->a, v));
    case Op::sin: return binary(Op::mul, unary(Op::cos, n->a), derivative(n->a, v));
    case Op::cos:
      return unary(Op::neg, binary(Op::mul, unary(Op::sin, n->a), derivative(n->a, v)));
    case Op::exp: return binary(Op::mul, n, derivative(n->a, v));
    case Op::tanh: {
      auto sech2 = binary(Op::sub, constant(1.0), binary(Op::mul, n, n));
      return binary(Op::mul, sech2, derivative(n->a, v));
    }
    case Op::log: return binary(Op::div, derivative(n->a, v), n->a);
  }
  return constant(0.0);
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const char* function_name(Op op) {
  switch (op) {
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::exp: return "exp";
    case Op::tanh: return "tanh";
    case Op::log: return "log";
    default: return "";
  }
}

inline void print(const Node& n, const std::vector<std::string>& names, std::string& out) {
  switch (n.op) {
    case Op::constant:
      if (n.value < 0 || std::signbit(n.value)) {
        out += "(" + format_number(n.value) + ")";
      } else {
        out += format_number(n.value);
      }
      return;
    case Op::variable: out += names[static_cast<std::size_t>(n.var)]; return;
    case Op::neg:
      out += "(-";
      print(*n.a, names, out);
      out += ")";
      return;
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div:
    case Op::pow: {
      static constexpr char symbols[] = {'+', '-', '*', '/', '^'};
      const int idx = static_cast<int>(n.op) - static_cast<int>(Op::add);
      out += "(";
      print(*n.a, names, out);
      out += symbols[idx];
      print(*n.b, names, out);
      out += ")";
      return;
    }
    default:
      out += function_name(n.op);
      out += "(";
      print(*n.a, names, out);
      out += ")";
      return;
  }
}

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& names) : s_(text), names_(names) {}

  NodePtr parse() {
    skip();
    if (pos_ >= s_.size()) fail("empty expression", pos_);
    auto n = expression();
    skip();
    if (pos_ < s_.size()) {
      if (s_[pos_] == ')') fail("unbalanced parentheses: unexpected ')'", pos_);
      fail(std::string("unexpected character '") + s_[pos_] + "'", pos_);
    }
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw ParseError(msg, static_cast<int>(at) + 1);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expression() {
    auto lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = binary(Op::add, lhs, term());
      } else if (accept('-')) {
        lhs = binary(Op::sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    auto lhs = unary_expr();
    for (;;) {
      if (accept('*')) {
        lhs = binary(Op::mul, lhs, unary_expr());
      } else if (accept('/')) {
        lhs = binary(Op::div, lhs, unary_expr());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary_expr() {
    if (accept('-')) return unary(Op::neg, unary_expr());
    if (accept('+')) return unary_expr();
    return power();
  }

  NodePtr power() {
    auto base = primary();
    if (accept('^')) return binary(Op::pow, base, unary_expr());
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of expression", pos_);
    const char c = s_[pos_];
    if (c == '(') {
      const std::size_t open = pos_;
      ++pos_;
      auto inner = expression();
      if (!accept(')')) fail("unbalanced parentheses: '(' is never closed", open);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    if (c == ')') fail("unbalanced parentheses: unexpected ')'", pos_);
    fail(std::string("unexpected character '") + c + "'", pos_);
  }

  NodePtr number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < s_.size() && (s_[p] == '+' || s_[p] == '-')) ++p;
      if (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) {
        pos_ = p;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      }
    }
    const std::string token(s_.substr(start, pos_ - start));
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) fail("malformed number '" + token + "'", start);
    return constant(v);
  }

  NodePtr name() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
      ++pos_;
    }
    const std::string id(s_.substr(start, pos_ - start));
    static constexpr std::pair<const char*, Op> functions[] = {
        {"sin", Op::sin}, {"cos", Op::cos}, {"exp", Op::exp}, {"tanh", Op::tanh}, {"log", Op::log}};
    for (const auto& [fname, op] : functions) {
      if (id == fname) {
        skip();
        if (pos_ >= s_.size() || s_[pos_] != '(') fail("function '" + id + "' needs an argument list", start);
        const std::size_t open = pos_;
        ++pos_;
        skip();
        if (pos_ < s_.size() && s_[pos_] == ')') fail("arity error: '" + id + "' takes 1 argument, got 0", start);
        auto arg = expression();
        skip();
        if (pos_ < s_.size() && s_[pos_] == ',') {
          fail("arity error: '" + id + "' takes 1 argument", start);
        }
        if (!accept(')')) fail("unbalanced parentheses: '(' is never closed", open);
        return unary(op, arg);
      }
    }
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == id) return variable(static_cast<int>(i));
    }
    if (id == "pi") return constant(3.141592653589793238462643383279502884);
    fail("unknown identifier '" + id + "'", start);
  }

  std::string_view s_;
  const std::vector<std::string>& names_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parsed scalar expression over a fixed list of coordinate names.
class Expression {
 public:
  Expression() : root_(detail::constant(0.0)) {}

  static Expression parse(std::string_view text, std::vector<std::string> names) {
    Expression e;
    e.names_ = std::move(names);
    e.root_ = detail::Parser(text, e.names_).parse();
    e.source_ = std::string(text);
    return e;
  }

  static Expression constant(double v, std::vector<std::string> names) {
    Expression e;
    e.names_ = std::move(names);
    e.root_ = detail::constant(v);
    e.source_ = detail::format_number(v);
    return e;
  }

  double operator()(std::span<const double> x) const { return detail::eval(*root_, x); }

  /// Symbolic partial derivative with respect to the coordinate at `index`.
  Expression derivative(int index) const {
    Expression e;
    e.names_ = names_;
    e.root_ = detail::derivative(root_, index);
    e.source_ = e.to_string();
    return e;
  }

  /// Fully parenthesized form that reparses to an identical tree.
  std::string to_string() const {
    std::string out;
    detail::print(*root_, names_, out);
    return out;
  }

  bool is_constant() const { return root_->op == Op::constant; }
  bool is_zero() const { return detail::is_const(root_, 0.0); }

  const std::string& source() const { return source_; }
  const std::vector<std::string>& names() const { return names_; }
  const NodePtr& root() const { return root_; }

  static Expression from_node(NodePtr n, std::vector<std::string> names) {
    Expression e;
    e.names_ = std::move(names);
    e.root_ = std::move(n);
    e.source_ = e.to_string();
    return e;
  }

  friend Expression operator+(const Expression& a, const Expression& b) {
    return from_node(detail::binary(Op::add, a.root_, b.root_), a.names_);
  }
  friend Expression operator-(const Expression& a, const Expression& b) {
    return from_node(detail::binary(Op::sub, a.root_, b.root_), a.names_);
  }
  friend Expression operator*(const Expression& a, const Expression& b) {
    return from_node(detail::binary(Op::mul, a.root_, b.root_), a.names_);
  }
  friend Expression operator*(double s, const Expression& b) {
    return from_node(detail::binary(Op::mul, detail::constant(s), b.root_), b.names_);
  }

 private:
  NodePtr root_;
  std::vector<std::string> names_;
  std::string source_;
};

}  // namespace engel_lab::expr
