#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lipreach/error.hpp"
#include "lipreach/expr.hpp"

using namespace lipreach;
using namespace lipreach::expr;

namespace {

int error_column(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.column();
  }
  return -1;
}

bool rejects(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError&) {
    return true;
  }
  return false;
}

double ev(const std::string& text, std::vector<double> x = {}, std::vector<double> u = {}) {
  return eval(parse(text), x, u);
}

// Random grammar-valid expression text.
std::string random_expr(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 9);
  static const char* funcs[] = {"sin", "cos", "tan", "exp", "sqrt", "abs"};
  static const char* ops[] = {"+", "-", "*", "/", "^"};
  switch (pick(rng)) {
    case 0: return std::to_string(rng() % 100) + (rng() % 2 ? ".25" : "");
    case 1: return "x" + std::to_string(1 + rng() % 3);
    case 2: return rng() % 2 ? "u1" : (rng() % 2 ? "pi" : "2.5e-3");
    case 3: return "-" + random_expr(rng, depth - 1);
    case 4:
    case 5: return std::string(funcs[rng() % 6]) + "(" + random_expr(rng, depth - 1) + ")";
    case 6: return "(" + random_expr(rng, depth - 1) + ")";
    default:
      return random_expr(rng, depth - 1) + " " + ops[rng() % 5] + " " + random_expr(rng, depth - 1);
  }
}

}  // namespace

TEST_CASE("parse builds the documented trees") {
  const Ast a = parse("x1 + 2*u1");
  const Node& add = a.root();
  REQUIRE(add.kind == NodeKind::Binary);
  CHECK(add.binary == BinaryOp::Add);
  CHECK(a.node(add.lhs).kind == NodeKind::Variable);
  CHECK(a.node(add.lhs).index == 1);
  const Node& mul = a.node(add.rhs);
  CHECK(mul.binary == BinaryOp::Mul);
  CHECK(a.node(mul.lhs).value == 2.0);
  CHECK(a.node(mul.rhs).var == VarKind::Input);

  const Ast b = parse("-sin(x2)^2");
  const Node& neg = b.root();
  REQUIRE(neg.kind == NodeKind::Unary);
  CHECK(neg.unary == UnaryOp::Neg);
  const Node& pow = b.node(neg.lhs);
  CHECK(pow.binary == BinaryOp::Pow);
  CHECK(b.node(pow.lhs).unary == UnaryOp::Sin);
  CHECK(b.node(b.node(pow.lhs).lhs).index == 2);
  CHECK(b.node(pow.rhs).value == 2.0);
}

TEST_CASE("precedence and associativity") {
  CHECK(ev("-x1^2", {3}) == -9.0);
  CHECK(ev("2^3^2") == 512.0);
  CHECK(ev("8/2/2") == 2.0);
  CHECK(ev("1-2-3") == -4.0);
  CHECK(ev("2*3+4*5") == 26.0);
  CHECK(ev("2^-1") == 0.5);
  CHECK(ev("(1+2)*3") == 9.0);
  CHECK(ev("1.5e-3*2e3") == doctest::Approx(3.0));
  CHECK(ev("pi") == doctest::Approx(3.141592653589793));
  CHECK(ev("e") == doctest::Approx(2.718281828459045));
  CHECK(ev(" x1\n+\tx2 ", {1, 2}) == 3.0);
}

TEST_CASE("parse errors carry positions") {
  CHECK(error_column("x1 + (u1") == 9);
  CHECK(error_column("x1 + y") == 6);
  CHECK(error_column("1.2.3") == 1);
  CHECK(error_column("x1)") == 3);
  CHECK(rejects(""));
  CHECK(rejects("   "));
  CHECK(rejects("x0"));
  CHECK(rejects("1e"));
  CHECK(rejects("2x1"));
  CHECK(rejects("sin x1"));
  CHECK(rejects("x1 +"));
  CHECK(rejects("log(x1)"));
  CHECK(rejects("."));

  try {
    parse("x1 +\n  (u1");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 6);
  }
}

TEST_CASE("eval examples") {
  CHECK(ev("x1 + 2*u1", {3}, {0.5}) == 4.0);
  CHECK(ev("sin(x1)", {0}) == 0.0);
  CHECK_THROWS_AS(ev("x1/x2", {1, 0}), DomainError);
}

TEST_CASE("eval domain errors never escape as crashes") {
  CHECK_THROWS_AS(ev("sqrt(x1)", {-1}), DomainError);
  CHECK_THROWS_AS(ev("x1^0.5", {-2}), DomainError);
  CHECK(ev("x1^3", {-2}) == -8.0);
  CHECK_THROWS_AS(ev("0^(-1)"), DomainError);
  CHECK_THROWS_AS(ev("exp(1000)"), DomainError);
  CHECK_THROWS_AS(ev("x3", {1, 2}), DomainError);
  CHECK_THROWS_AS(ev("u1", {1}), DomainError);
}

TEST_CASE("variable index bookkeeping") {
  const Ast a = parse("x1*u2 + x7");
  CHECK(a.max_state_index() == 7);
  CHECK(a.max_input_index() == 2);
  CHECK(parse("3").max_state_index() == 0);
}

TEST_CASE("pretty-printed expressions reparse to the same tree") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 2000; ++i) {
    const std::string text = random_expr(rng, 5);
    const Ast a = parse(text);
    const std::string printed = to_string(a);
    const Ast b = parse(printed);
    INFO(text, " -> ", printed);
    CHECK(structurally_equal(a, b));
    CHECK(to_string(b) == printed);
  }
}

TEST_CASE("eval is referentially transparent") {
  std::mt19937_64 rng(7);
  const std::vector<double> x = {0.3, -1.2, 2.5};
  const std::vector<double> u = {0.7};
  for (int i = 0; i < 500; ++i) {
    const Ast a = parse(random_expr(rng, 4));
    double first = 0.0;
    double second = 0.0;
    bool first_ok = true;
    bool second_ok = true;
    try { first = eval(a, x, u); } catch (const DomainError&) { first_ok = false; }
    try { second = eval(a, x, u); } catch (const DomainError&) { second_ok = false; }
    CHECK(first_ok == second_ok);
    if (first_ok) CHECK(std::bit_cast<std::uint64_t>(first) == std::bit_cast<std::uint64_t>(second));
  }
}

TEST_CASE("parser survives arbitrary bytes") {
  std::mt19937_64 rng(99);
  const std::string alphabet = "x1u2+-*/^()., esincoqrtabp\n\t\xff\x80";
  for (int i = 0; i < 20000; ++i) {
    std::string s;
    const std::size_t len = rng() % 24;
    for (std::size_t k = 0; k < len; ++k) {
      s += i % 2 ? static_cast<char>(rng() % 256) : alphabet[rng() % alphabet.size()];
    }
    try {
      const Ast a = parse(s);
      CHECK(!a.empty());
    } catch (const ParseError&) {
    }
  }
  CHECK(rejects(std::string(100000, '(') + "1"));
  CHECK(rejects(std::string(100000, '-') + "1"));
}
