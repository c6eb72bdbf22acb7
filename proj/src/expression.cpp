#include "hjsing/expression.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace hjsing {

enum class Op { constant, variable, add, sub, mul, div, pow, neg, sin, cos, exp, sqrt, log };

struct Expression::Node {
  Op op = Op::constant;
  double value = 0.0;
  Var var = Var::x1;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make_const(double c) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::constant;
  n->value = c;
  return n;
}

NodePtr make_var(Var v) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::variable;
  n->var = v;
  return n;
}

bool is_const(const NodePtr& n, double c) {
  return n->op == Op::constant && n->value == c;
}

double apply_unary(Op op, double a) {
  switch (op) {
    case Op::neg: return -a;
    case Op::sin: return std::sin(a);
    case Op::cos: return std::cos(a);
    case Op::exp: return std::exp(a);
    case Op::sqrt: return std::sqrt(a);
    case Op::log: return std::log(a);
    default: return a;
  }
}

double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return a / b;
    case Op::pow: return std::pow(a, b);
    default: return 0.0;
  }
}

// Constructors with light constant folding; keeps derivative trees small.
NodePtr unary(Op op, NodePtr a) {
  if (a->op == Op::constant) return make_const(apply_unary(op, a->value));
  if (op == Op::neg && a->op == Op::neg) return a->lhs;
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->lhs = std::move(a);
  return n;
}

NodePtr binary(Op op, NodePtr a, NodePtr b) {
  if (a->op == Op::constant && b->op == Op::constant) {
    return make_const(apply_binary(op, a->value, b->value));
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
      if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      break;
    case Op::div:
      if (is_const(a, 0.0)) return make_const(0.0);
      if (is_const(b, 1.0)) return a;
      break;
    case Op::pow:
      if (is_const(b, 1.0)) return a;
      if (is_const(b, 0.0)) return make_const(1.0);
      break;
    default:
      break;
  }
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

double eval_node(const Expression::Node& n, const VarValues& v) {
  switch (n.op) {
    case Op::constant: return n.value;
    case Op::variable: return v[static_cast<std::size_t>(n.var)];
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div:
    case Op::pow:
      return apply_binary(n.op, eval_node(*n.lhs, v), eval_node(*n.rhs, v));
    default:
      return apply_unary(n.op, eval_node(*n.lhs, v));
  }
}

bool depends(const Expression::Node& n, Var var) {
  switch (n.op) {
    case Op::constant: return false;
    case Op::variable: return n.var == var;
    default:
      return depends(*n.lhs, var) || (n.rhs && depends(*n.rhs, var));
  }
}

NodePtr diff(const NodePtr& n, Var var) {
  if (!depends(*n, var)) return make_const(0.0);
  const NodePtr& a = n->lhs;
  const NodePtr& b = n->rhs;
  switch (n->op) {
    case Op::constant:
      return make_const(0.0);
    case Op::variable:
      return make_const(1.0);
    case Op::add:
      return binary(Op::add, diff(a, var), diff(b, var));
    case Op::sub:
      return binary(Op::sub, diff(a, var), diff(b, var));
    case Op::mul:
      return binary(Op::add, binary(Op::mul, diff(a, var), b),
                    binary(Op::mul, a, diff(b, var)));
    case Op::div:
      // (a'b - ab') / b^2
      return binary(Op::div,
                    binary(Op::sub, binary(Op::mul, diff(a, var), b),
                           binary(Op::mul, a, diff(b, var))),
                    binary(Op::mul, b, b));
    case Op::pow:
      if (!depends(*b, var)) {
        // b a^(b-1) a'
        return binary(Op::mul,
                      binary(Op::mul, b,
                             binary(Op::pow, a,
                                    binary(Op::sub, b, make_const(1.0)))),
                      diff(a, var));
      }
      // a^b (b' log a + b a'/a)
      return binary(
          Op::mul, n,
          binary(Op::add, binary(Op::mul, diff(b, var), unary(Op::log, a)),
                 binary(Op::div, binary(Op::mul, b, diff(a, var)), a)));
    case Op::neg:
      return unary(Op::neg, diff(a, var));
    case Op::sin:
      return binary(Op::mul, unary(Op::cos, a), diff(a, var));
    case Op::cos:
      return unary(Op::neg, binary(Op::mul, unary(Op::sin, a), diff(a, var)));
    case Op::exp:
      return binary(Op::mul, n, diff(a, var));
    case Op::sqrt:
      return binary(Op::div, diff(a, var), binary(Op::mul, make_const(2.0), n));
    case Op::log:
      return binary(Op::div, diff(a, var), a);
  }
  return make_const(0.0);
}

const char* var_name(Var v) {
  switch (v) {
    case Var::x1: return "x1";
    case Var::x2: return "x2";
    case Var::p1: return "p1";
    case Var::p2: return "p2";
  }
  return "?";
}

void print(const Expression::Node& n, std::ostringstream& os) {
  switch (n.op) {
    case Op::constant: {
      std::ostringstream num;
      num.precision(17);
      num << n.value;
      if (n.value < 0) {
        os << '(' << num.str() << ')';
      } else {
        os << num.str();
      }
      return;
    }
    case Op::variable:
      os << var_name(n.var);
      return;
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div:
    case Op::pow: {
      const char sym = n.op == Op::add   ? '+'
                       : n.op == Op::sub ? '-'
                       : n.op == Op::mul ? '*'
                       : n.op == Op::div ? '/'
                                         : '^';
      os << '(';
      print(*n.lhs, os);
      os << sym;
      print(*n.rhs, os);
      os << ')';
      return;
    }
    case Op::neg:
      os << "(-";
      print(*n.lhs, os);
      os << ')';
      return;
    default: {
      const char* name = n.op == Op::sin    ? "sin"
                         : n.op == Op::cos  ? "cos"
                         : n.op == Op::exp  ? "exp"
                         : n.op == Op::sqrt ? "sqrt"
                                            : "log";
      os << name << '(';
      print(*n.lhs, os);
      os << ')';
      return;
    }
  }
}

class Parser {
 public:
  Parser(std::string_view text, std::span<const Var> allowed)
      : text_(text), allowed_(allowed) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ExpressionError(msg + " at column " + std::to_string(pos_ + 1),
                          pos_ + 1);
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
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
    NodePtr lhs = unary_expr();
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
    NodePtr base = primary();
    if (accept('^')) return binary(Op::pow, base, unary_expr());
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return number();
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
              text_[pos_] == '_')) {
        ++pos_;
      }
      const std::string_view name = text_.substr(start, pos_ - start);
      static constexpr std::pair<std::string_view, Op> kFuncs[] = {
          {"sin", Op::sin}, {"cos", Op::cos},   {"exp", Op::exp},
          {"sqrt", Op::sqrt}, {"log", Op::log}};
      for (const auto& [fname, op] : kFuncs) {
        if (name == fname) {
          if (!accept('(')) fail("expected '(' after " + std::string(name));
          NodePtr arg = expr();
          if (!accept(')')) fail("expected ')'");
          return unary(op, arg);
        }
      }
      static constexpr std::pair<std::string_view, Var> kVars[] = {
          {"x1", Var::x1}, {"x2", Var::x2}, {"p1", Var::p1}, {"p2", Var::p2}};
      for (const auto& [vname, v] : kVars) {
        if (name == vname) {
          if (std::find(allowed_.begin(), allowed_.end(), v) == allowed_.end()) {
            pos_ = start;
            fail("variable '" + std::string(name) + "' not allowed here");
          }
          return make_var(v);
        }
      }
      pos_ = start;
      fail("unknown name '" + std::string(name) + "'");
    }
    if (accept('(')) {
      NodePtr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr number() {
    const std::string rest(text_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - rest.c_str());
    return make_const(v);
  }

  std::string_view text_;
  std::span<const Var> allowed_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression() : node_(make_const(0.0)) {}
Expression::Expression(double c) : node_(make_const(c)) {}

Expression Expression::parse(std::string_view text, std::span<const Var> allowed) {
  return Expression(Parser(text, allowed).parse());
}

double Expression::eval(const VarValues& v) const { return eval_node(*node_, v); }

Expression Expression::derivative(Var v) const { return Expression(diff(node_, v)); }

bool Expression::depends_on(Var v) const { return depends(*node_, v); }

bool Expression::is_constant() const {
  return std::none_of(kAllVars.begin(), kAllVars.end(),
                      [&](Var v) { return depends_on(v); });
}

std::string Expression::to_string() const {
  std::ostringstream os;
  print(*node_, os);
  return os.str();
}

}  // namespace hjsing
