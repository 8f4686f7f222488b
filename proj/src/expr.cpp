#include "lipreach/expr.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <optional>
#include <utility>

#include "lipreach/error.hpp"

namespace lipreach::expr {

namespace {

constexpr int kMaxDepth = 200;

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }

std::optional<UnaryOp> function_named(std::string_view name) {
  if (name == "sin") return UnaryOp::Sin;
  if (name == "cos") return UnaryOp::Cos;
  if (name == "tan") return UnaryOp::Tan;
  if (name == "exp") return UnaryOp::Exp;
  if (name == "sqrt") return UnaryOp::Sqrt;
  if (name == "abs") return UnaryOp::Abs;
  return std::nullopt;
}

const char* function_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
    case UnaryOp::Tan: return "tan";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Sqrt: return "sqrt";
    case UnaryOp::Abs: return "abs";
    case UnaryOp::Neg: break;
  }
  return "-";
}

}  // namespace

class Parser {
public:
  explicit Parser(std::string_view text) : text_(text) {}

  Ast run() {
    ast_.source_ = std::string(text_);
    skip_space();
    if (pos_ == text_.size()) fail("empty expression", pos_);
    ast_.root_ = parse_sum(0);
    skip_space();
    if (pos_ != text_.size()) {
      if (text_[pos_] == ')') fail("unbalanced parenthesis: unexpected ')'", pos_);
      fail("unexpected input", pos_);
    }
    return std::move(ast_);
  }

private:
  [[noreturn]] void fail(const std::string& message, std::size_t offset) const {
    int line = 1;
    int column = 1;
    for (std::size_t i = 0; i < offset && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError(message, line, column);
  }

  SourceSpan span_at(std::size_t begin) const {
    SourceSpan s;
    s.offset = begin;
    s.length = pos_ - begin;
    for (std::size_t i = 0; i < begin; ++i) {
      if (text_[i] == '\n') {
        ++s.line;
        s.column = 1;
      } else {
        ++s.column;
      }
    }
    return s;
  }

  void skip_space() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool peek(char c) {
    skip_space();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  std::int32_t push(Node n) {
    ast_.nodes_.push_back(n);
    return static_cast<std::int32_t>(ast_.nodes_.size() - 1);
  }

  std::int32_t binary(BinaryOp op, std::int32_t lhs, std::int32_t rhs, std::size_t begin) {
    Node n;
    n.kind = NodeKind::Binary;
    n.binary = op;
    n.lhs = lhs;
    n.rhs = rhs;
    n.span = span_at(begin);
    return push(n);
  }

  void enter(int depth) const {
    if (depth > kMaxDepth) fail("expression nested too deeply", pos_);
  }

  std::int32_t parse_sum(int depth) {
    enter(depth);
    skip_space();
    const std::size_t begin = pos_;
    std::int32_t lhs = parse_product(depth + 1);
    while (true) {
      if (peek('+')) {
        ++pos_;
        lhs = binary(BinaryOp::Add, lhs, parse_product(depth + 1), begin);
      } else if (peek('-')) {
        ++pos_;
        lhs = binary(BinaryOp::Sub, lhs, parse_product(depth + 1), begin);
      } else {
        return lhs;
      }
    }
  }

  std::int32_t parse_product(int depth) {
    enter(depth);
    skip_space();
    const std::size_t begin = pos_;
    std::int32_t lhs = parse_unary(depth + 1);
    while (true) {
      if (peek('*')) {
        ++pos_;
        lhs = binary(BinaryOp::Mul, lhs, parse_unary(depth + 1), begin);
      } else if (peek('/')) {
        ++pos_;
        lhs = binary(BinaryOp::Div, lhs, parse_unary(depth + 1), begin);
      } else {
        return lhs;
      }
    }
  }

  std::int32_t parse_unary(int depth) {
    enter(depth);
    skip_space();
    const std::size_t begin = pos_;
    if (peek('-')) {
      ++pos_;
      std::int32_t operand = parse_unary(depth + 1);
      Node n;
      n.kind = NodeKind::Unary;
      n.unary = UnaryOp::Neg;
      n.lhs = operand;
      n.span = span_at(begin);
      return push(n);
    }
    return parse_power(depth + 1);
  }

  std::int32_t parse_power(int depth) {
    enter(depth);
    skip_space();
    const std::size_t begin = pos_;
    std::int32_t base = parse_primary(depth + 1);
    if (peek('^')) {
      ++pos_;
      std::int32_t exponent = parse_unary(depth + 1);
      return binary(BinaryOp::Pow, base, exponent, begin);
    }
    return base;
  }

  std::int32_t parse_primary(int depth) {
    enter(depth);
    skip_space();
    if (pos_ == text_.size()) fail("unexpected end of expression", pos_);
    const std::size_t begin = pos_;
    const char c = text_[pos_];

    if (c == '(') {
      ++pos_;
      std::int32_t inner = parse_sum(depth + 1);
      if (!peek(')')) fail("unbalanced parenthesis: expected ')'", pos_);
      ++pos_;
      return inner;
    }
    if (is_digit(c) || c == '.') return parse_number();
    if (is_alpha(c)) {
      while (pos_ < text_.size() && (is_alpha(text_[pos_]) || is_digit(text_[pos_]))) ++pos_;
      const std::string_view word = text_.substr(begin, pos_ - begin);

      if (word == "pi" || word == "e") {
        Node n;
        n.kind = NodeKind::Constant;
        n.value = word == "pi" ? std::numbers::pi : std::numbers::e;
        n.span = span_at(begin);
        return push(n);
      }
      if (auto op = function_named(word)) {
        if (!peek('(')) fail("expected '(' after function '" + std::string(word) + "'", pos_);
        ++pos_;
        std::int32_t arg = parse_sum(depth + 1);
        if (!peek(')')) fail("unbalanced parenthesis: expected ')'", pos_);
        ++pos_;
        Node n;
        n.kind = NodeKind::Unary;
        n.unary = *op;
        n.lhs = arg;
        n.span = span_at(begin);
        return push(n);
      }
      if ((word[0] == 'x' || word[0] == 'u') && word.size() > 1) {
        const std::string_view digits = word.substr(1);
        bool all_digits = digits.size() <= 9;
        for (char d : digits) all_digits = all_digits && is_digit(d);
        if (all_digits) {
          std::size_t index = 0;
          std::from_chars(digits.data(), digits.data() + digits.size(), index);
          if (index == 0) fail("variable index must be positive in '" + std::string(word) + "'", begin);
          Node n;
          n.kind = NodeKind::Variable;
          n.var = word[0] == 'x' ? VarKind::State : VarKind::Input;
          n.index = index;
          n.span = span_at(begin);
          if (n.var == VarKind::State) {
            ast_.max_state_ = std::max(ast_.max_state_, index);
          } else {
            ast_.max_input_ = std::max(ast_.max_input_, index);
          }
          return push(n);
        }
      }
      fail("unknown identifier '" + std::string(word) + "'", begin);
    }
    if (c == ')') fail("unbalanced parenthesis: unexpected ')'", pos_);
    fail("unexpected character", pos_);
  }

  std::int32_t parse_number() {
    const std::size_t begin = pos_;
    while (pos_ < text_.size() && (is_digit(text_[pos_]) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      const std::size_t exp_begin = pos_;
      while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
      if (pos_ == exp_begin) fail("malformed number", begin);
    }
    if (pos_ < text_.size() && (is_alpha(text_[pos_]) || text_[pos_] == '.')) {
      fail("malformed number", begin);
    }
    const std::string literal(text_.substr(begin, pos_ - begin));
    int dots = 0;
    bool has_digit = false;
    for (char ch : literal) {
      if (ch == 'e' || ch == 'E') break;
      dots += ch == '.';
      has_digit = has_digit || is_digit(ch);
    }
    if (dots > 1 || !has_digit) fail("malformed number", begin);

    char* end = nullptr;
    const double value = std::strtod(literal.c_str(), &end);
    if (end != literal.c_str() + literal.size() || !std::isfinite(value)) {
      fail("malformed number", begin);
    }
    Node n;
    n.kind = NodeKind::Constant;
    n.value = value;
    n.span = span_at(begin);
    return push(n);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  Ast ast_;
};

Ast parse(std::string_view text) { return Parser(text).run(); }

namespace {

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string("non-finite result in ") + what);
  return v;
}

double eval_node(const Ast& ast, std::int32_t i, std::span<const double> x, std::span<const double> u) {
  const Node& n = ast.node(i);
  switch (n.kind) {
    case NodeKind::Constant:
      return n.value;
    case NodeKind::Variable: {
      const auto& vec = n.var == VarKind::State ? x : u;
      if (n.index > vec.size()) {
        throw DomainError(std::string("variable ") + (n.var == VarKind::State ? "x" : "u") +
                          std::to_string(n.index) + " out of range (size " + std::to_string(vec.size()) + ")");
      }
      return vec[n.index - 1];
    }
    case NodeKind::Unary: {
      const double a = eval_node(ast, n.lhs, x, u);
      switch (n.unary) {
        case UnaryOp::Neg: return -a;
        case UnaryOp::Sin: return std::sin(a);
        case UnaryOp::Cos: return std::cos(a);
        case UnaryOp::Tan: return checked(std::tan(a), "tan");
        case UnaryOp::Exp: return checked(std::exp(a), "exp");
        case UnaryOp::Abs: return std::fabs(a);
        case UnaryOp::Sqrt:
          if (a < 0.0) throw DomainError("sqrt of negative value");
          return std::sqrt(a);
      }
      break;
    }
    case NodeKind::Binary: {
      const double a = eval_node(ast, n.lhs, x, u);
      const double b = eval_node(ast, n.rhs, x, u);
      switch (n.binary) {
        case BinaryOp::Add: return checked(a + b, "+");
        case BinaryOp::Sub: return checked(a - b, "-");
        case BinaryOp::Mul: return checked(a * b, "*");
        case BinaryOp::Div:
          if (b == 0.0) throw DomainError("division by zero");
          return checked(a / b, "/");
        case BinaryOp::Pow:
          if (a < 0.0 && std::trunc(b) != b) throw DomainError("non-integer power of negative base");
          if (a == 0.0 && b < 0.0) throw DomainError("division by zero in power");
          return checked(std::pow(a, b), "^");
      }
      break;
    }
  }
  throw DomainError("corrupt expression node");
}

void render(const Ast& ast, std::int32_t i, std::string& out) {
  const Node& n = ast.node(i);
  switch (n.kind) {
    case NodeKind::Constant: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      out += buf;
      return;
    }
    case NodeKind::Variable:
      out += n.var == VarKind::State ? 'x' : 'u';
      out += std::to_string(n.index);
      return;
    case NodeKind::Unary:
      if (n.unary == UnaryOp::Neg) {
        out += "(-";
        render(ast, n.lhs, out);
        out += ')';
      } else {
        out += function_name(n.unary);
        out += '(';
        render(ast, n.lhs, out);
        out += ')';
      }
      return;
    case NodeKind::Binary: {
      static constexpr const char* symbols[] = {" + ", " - ", " * ", " / ", " ^ "};
      out += '(';
      render(ast, n.lhs, out);
      out += symbols[static_cast<int>(n.binary)];
      render(ast, n.rhs, out);
      out += ')';
      return;
    }
  }
}

bool equal_nodes(const Ast& a, std::int32_t i, const Ast& b, std::int32_t j) {
  const Node& p = a.node(i);
  const Node& q = b.node(j);
  if (p.kind != q.kind) return false;
  switch (p.kind) {
    case NodeKind::Constant:
      return std::bit_cast<std::uint64_t>(p.value) == std::bit_cast<std::uint64_t>(q.value);
    case NodeKind::Variable:
      return p.var == q.var && p.index == q.index;
    case NodeKind::Unary:
      return p.unary == q.unary && equal_nodes(a, p.lhs, b, q.lhs);
    case NodeKind::Binary:
      return p.binary == q.binary && equal_nodes(a, p.lhs, b, q.lhs) && equal_nodes(a, p.rhs, b, q.rhs);
  }
  return false;
}

}  // namespace

double eval(const Ast& ast, std::span<const double> x, std::span<const double> u) {
  if (ast.empty()) throw DomainError("empty expression");
  return eval_node(ast, ast.root_index(), x, u);
}

std::string to_string(const Ast& ast) {
  std::string out;
  if (!ast.empty()) render(ast, ast.root_index(), out);
  return out;
}

bool structurally_equal(const Ast& a, const Ast& b) {
  if (a.empty() || b.empty()) return a.empty() && b.empty();
  return equal_nodes(a, a.root_index(), b, b.root_index());
}

}  // namespace lipreach::expr
