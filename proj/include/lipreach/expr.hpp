#pragma once

// Arithmetic expression language for plant dynamics and measurement maps.
//
// Grammar (lowest to highest precedence):
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | pi | e | x<k> | u<k> | func '(' sum ')' | '(' sum ')'
//   func    := sin | cos | tan | exp | sqrt | abs

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lipreach::expr {

enum class NodeKind : std::uint8_t { Constant, Variable, Unary, Binary };
enum class VarKind : std::uint8_t { State, Input };
enum class UnaryOp : std::uint8_t { Neg, Sin, Cos, Tan, Exp, Sqrt, Abs };
enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div, Pow };

struct SourceSpan {
  std::size_t offset = 0;
  std::size_t length = 0;
  int line = 1;
  int column = 1;
};

struct Node {
  NodeKind kind = NodeKind::Constant;
  double value = 0.0;             // Constant
  VarKind var = VarKind::State;   // Variable
  std::size_t index = 0;          // Variable, 1-based as written
  UnaryOp unary = UnaryOp::Neg;   // Unary
  BinaryOp binary = BinaryOp::Add;  // Binary
  std::int32_t lhs = -1;          // child (Unary uses lhs only)
  std::int32_t rhs = -1;
  SourceSpan span;
};

/// Immutable parsed expression. Nodes are stored in a flat arena with the
/// children of every node preceding it.
class Ast {
public:
  Ast() = default;

  const Node& root() const { return nodes_.at(static_cast<std::size_t>(root_)); }
  const Node& node(std::int32_t i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  std::int32_t root_index() const noexcept { return root_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  const std::string& source() const noexcept { return source_; }

  /// Largest 1-based index of an x<k> (resp. u<k>) reference; 0 if none.
  std::size_t max_state_index() const noexcept { return max_state_; }
  std::size_t max_input_index() const noexcept { return max_input_; }

private:
  friend class Parser;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
  std::string source_;
  std::size_t max_state_ = 0;
  std::size_t max_input_ = 0;
};

/// Parses `text`; throws ParseError with line/column on failure.
Ast parse(std::string_view text);

/// Evaluates `ast` at state `x` and control `u`.
/// Throws DomainError on division by zero, sqrt of a negative number, a
/// non-integer power of a negative base, any non-finite result, or a
/// variable index outside `x`/`u`.
double eval(const Ast& ast, std::span<const double> x, std::span<const double> u);

/// Fully parenthesised rendering that reparses to a structurally equal tree.
std::string to_string(const Ast& ast);

/// Structural equality ignoring source spans. Constants compare bitwise.
bool structurally_equal(const Ast& a, const Ast& b);

}  // namespace lipreach::expr
