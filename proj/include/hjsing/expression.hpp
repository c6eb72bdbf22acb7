#pragma once

// Small arithmetic-expression language used by scenario files to declare
// Hamiltonians, potentials and solution branches.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | name | func '(' expr ')' | '(' expr ')'
//   func    := sin | cos | exp | sqrt | log
//   name    := x1 | x2 | p1 | p2
//
// Expressions are immutable and can be differentiated symbolically.

#include <array>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hjsing {

enum class Var : std::size_t { x1 = 0, x2 = 1, p1 = 2, p2 = 3 };
inline constexpr std::size_t kVarCount = 4;
using VarValues = std::array<double, kVarCount>;

class ExpressionError : public std::invalid_argument {
 public:
  ExpressionError(const std::string& what, std::size_t column)
      : std::invalid_argument(what), column_(column) {}
  // 1-based column of the offending token, 0 when not positional.
  std::size_t column() const { return column_; }

 private:
  std::size_t column_;
};

class Expression {
 public:
  struct Node;

  Expression();  // the constant 0
  explicit Expression(double c);

  // Parses `text`; names outside `allowed` are rejected.
  static Expression parse(std::string_view text,
                          std::span<const Var> allowed = kAllVars);

  double eval(const VarValues& v) const;
  Expression derivative(Var v) const;
  bool depends_on(Var v) const;
  bool is_constant() const;
  std::string to_string() const;

  static constexpr std::array<Var, 4> kAllVars{Var::x1, Var::x2, Var::p1,
                                               Var::p2};
  static constexpr std::array<Var, 2> kPositionVars{Var::x1, Var::x2};

  explicit Expression(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  const std::shared_ptr<const Node>& node() const { return node_; }

 private:
  std::shared_ptr<const Node> node_;
};

}  // namespace hjsing
