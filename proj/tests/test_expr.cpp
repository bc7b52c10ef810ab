#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "bsdelab/expr.hpp"

using namespace bsdelab::dsl;

TEST_CASE("parse builds the expected tree for the running example") {
  Expr e = parse("3*powabs(y,2/3)");
  REQUIRE(e.op() == Op::Mul);
  CHECK(e.lhs().op() == Op::Num);
  CHECK(e.lhs().value() == 3.0);
  REQUIRE(e.rhs().op() == Op::PowAbs);
  CHECK(e.rhs().lhs().op() == Op::Variable);
  CHECK(e.rhs().lhs().variable() == Var::Y);
  REQUIRE(e.rhs().rhs().op() == Op::Div);
  CHECK(e.rhs().rhs().lhs().value() == 2.0);
  CHECK(e.rhs().rhs().rhs().value() == 3.0);
}

TEST_CASE("identity and free variables") {
  Expr e = parse("y");
  CHECK(e.op() == Op::Variable);
  CHECK(e.variable() == Var::Y);
  CHECK(e.uses(Var::Y));
  CHECK_FALSE(e.uses(Var::Z));

  Expr f = parse("t + z*lam");
  CHECK(f.uses(Var::T));
  CHECK(f.uses(Var::Z));
  CHECK(f.uses(Var::Lam));
  CHECK_FALSE(f.uses(Var::W));
}

TEST_CASE("division by zero parses but fails at evaluation") {
  Expr e = parse("1/0");
  CHECK_THROWS_AS(evaluate(e, {{"t", 0.0}, {"y", 0.0}, {"z", 0.0}}), EvalError);

  Expr g = parse("1/(y - y)");
  CHECK_THROWS_AS(evaluate(g, {{"y", 5.0}}), EvalError);
}

TEST_CASE("evaluation examples") {
  Expr e = parse("3*powabs(y,2/3)");
  CHECK(evaluate(e, {{"y", 8.0}}) == doctest::Approx(12.0).epsilon(1e-12));
  // |y| convention: the direct computation 3*|-8|^(2/3) is the oracle
  double direct = 3.0 * std::pow(std::abs(-8.0), 2.0 / 3.0);
  CHECK(evaluate(e, {{"y", -8.0}}) == doctest::Approx(direct).epsilon(1e-12));
  CHECK(evaluate(e, {{"y", -8.0}}) == doctest::Approx(12.0).epsilon(1e-12));

  CHECK(evaluate(parse("powabs(y, 0.5)"), {{"y", 0.0}}) == 0.0);
  CHECK(evaluate(parse("sgn(y)"), {{"y", -3.0}}) == -1.0);
  CHECK(evaluate(parse("sgn(y)"), {{"y", 0.0}}) == 0.0);
  CHECK(evaluate(parse("sgn(y)"), {{"y", 2.0}}) == 1.0);
  CHECK(evaluate(parse("min(2, max(3, 1))"), {}) == 2.0);
  CHECK(evaluate(parse("exp(0)"), {}) == 1.0);
  CHECK(evaluate(parse("sqrt(2.25)"), {}) == 1.5);
}

TEST_CASE("precedence and associativity") {
  CHECK(evaluate(parse("2^3^2"), {}) == 512.0);          // right-assoc pow
  CHECK(evaluate(parse("1-2-3"), {}) == -4.0);           // left-assoc sub
  CHECK(evaluate(parse("2*3+4"), {}) == 10.0);
  CHECK(evaluate(parse("(1+2)*3"), {}) == 9.0);
  CHECK(evaluate(parse("-y^2"), {{"y", 3.0}}) == -9.0);  // pow binds tighter than neg
  CHECK(evaluate(parse("y^-2"), {{"y", 2.0}}) == 0.25);
  CHECK(evaluate(parse("6/3/2"), {}) == 1.0);
}

TEST_CASE("pow with fractional exponent is rejected unless the base is provably nonnegative") {
  CHECK_THROWS_AS(parse("y^(2/3)"), ParseError);
  CHECK_THROWS_AS(parse("y^0.5"), ParseError);
  CHECK_THROWS_AS(parse("(-2)^0.5"), ParseError);
  CHECK_NOTHROW(parse("abs(y)^0.5"));
  CHECK_NOTHROW(parse("2^0.5"));
  CHECK_NOTHROW(parse("y^2"));
  CHECK_NOTHROW(parse("y^-3"));
  CHECK_NOTHROW(parse("powabs(y, 2/3)"));
  try {
    parse("y^(2/3)");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.message.find("powabs") != std::string::npos);
  }
}

TEST_CASE("parse diagnostics carry positions") {
  try {
    parse("1 + q");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.message.find("unknown identifier") != std::string::npos);
    CHECK(e.offset == 4);
    CHECK(e.line == 1);
    CHECK(e.col == 5);
    CHECK(std::string(e.what()).rfind("1:5:", 0) == 0);  // "line:col: message"
  }
  CHECK_THROWS_AS(parse("min(y)"), ParseError);  // arity
  CHECK_THROWS_AS(parse("1 +"), ParseError);
  CHECK_THROWS_AS(parse("(1+2"), ParseError);
  CHECK_THROWS_AS(parse("1 2"), ParseError);
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("foo(1)"), ParseError);
}

TEST_CASE("evaluate rejects unbound variables") {
  CHECK_THROWS_AS(evaluate(parse("y + z"), {{"y", 1.0}}), EvalError);
}

TEST_CASE("overflow to non-finite is an evaluation error") {
  CHECK_THROWS_AS(evaluate(parse("exp(exp(exp(y)))"), {{"y", 100.0}}), EvalError);
}

namespace {

// random normalized ASTs for the round-trip property: pow exponents stay
// integer literals so generated trees always reparse
Expr gen_expr(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 9);
  auto num = [&] {
    static const double pool[] = {0.0, 1.0, 2.0, 3.25, 0.5, 100.0, 1e-3, 7.0, 4.75};
    std::uniform_int_distribution<int> i(0, 8);
    std::uniform_int_distribution<int> neg(0, 3);
    double v = pool[i(rng)];
    return Expr::num(neg(rng) == 0 && v != 0.0 ? -v : v);
  };
  auto var = [&] {
    std::uniform_int_distribution<int> i(0, kNumVars - 1);
    return Expr::var(static_cast<Var>(i(rng)));
  };
  switch (pick(rng)) {
    case 0:
      return num();
    case 1:
      return var();
    case 2: {
      Expr c = gen_expr(rng, depth - 1);
      if (c.op() == Op::Num) return Expr::unary(Op::Abs, std::move(c));  // keep Neg off literals
      return Expr::unary(Op::Neg, std::move(c));
    }
    case 3:
      return Expr::unary(Op::Abs, gen_expr(rng, depth - 1));
    case 4: {
      std::uniform_int_distribution<int> f(0, 2);
      int w = f(rng);
      Op op = w == 0 ? Op::Sgn : (w == 1 ? Op::Exp : Op::Sqrt);
      return Expr::unary(op, gen_expr(rng, depth - 1));
    }
    case 5: {
      std::uniform_int_distribution<int> e(-3, 3);
      return Expr::binary(Op::Pow, gen_expr(rng, depth - 1), Expr::num(e(rng)));
    }
    case 6: {
      std::uniform_int_distribution<int> f(0, 2);
      int w = f(rng);
      Op op = w == 0 ? Op::Min : (w == 1 ? Op::Max : Op::PowAbs);
      return Expr::binary(op, gen_expr(rng, depth - 1), gen_expr(rng, depth - 1));
    }
    default: {
      std::uniform_int_distribution<int> f(0, 3);
      int w = f(rng);
      Op op = w == 0 ? Op::Add : (w == 1 ? Op::Sub : (w == 2 ? Op::Mul : Op::Div));
      return Expr::binary(op, gen_expr(rng, depth - 1), gen_expr(rng, depth - 1));
    }
  }
}

}  // namespace

TEST_CASE("round-trip: reparsing the printed form reproduces the tree") {
  std::mt19937_64 rng(20240811);
  for (int i = 0; i < 800; ++i) {
    Expr e = gen_expr(rng, 5);
    std::string printed = to_string(e);
    CAPTURE(printed);
    Expr back = parse(printed);
    CHECK(back == e);
  }
}

TEST_CASE("round-trip on source strings: parse-print-parse is stable") {
  const char* sources[] = {
      "3*powabs(y,2/3)",
      "y",
      "1/0",
      "2^3^2",
      "-y^2",
      "1-2-3",
      "t*y - z/2 + min(y, max(z, 1))",
      "exp(-abs(y))*sqrt(abs(z) + 1)",
      "1e-3*w + 2.5E2",
  };
  for (const char* s : sources) {
    Expr e = parse(s);
    CAPTURE(s);
    CHECK(parse(to_string(e)) == e);
  }
}

TEST_CASE("compiled evaluation agrees with the interpreter") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> val(-3.0, 3.0);
  int compared = 0;
  for (int i = 0; i < 600; ++i) {
    Expr e = gen_expr(rng, 4);
    std::map<std::string, double> env;
    EvalEnv fast;
    for (int v = 0; v < kNumVars; ++v) {
      double x = val(rng);
      env[std::string(var_name(static_cast<Var>(v)))] = x;
      fast[static_cast<Var>(v)] = x;
    }
    double interpreted;
    try {
      interpreted = evaluate(e, env);
    } catch (const EvalError&) {
      continue;  // error paths are exercised elsewhere
    }
    Compiled c(e);
    double compiled = c.eval(fast);
    CAPTURE(to_string(e));
    CHECK(compiled == doctest::Approx(interpreted).epsilon(1e-12));
    ++compared;
  }
  CHECK(compared > 200);  // the generator must produce plenty of evaluable cases
}

TEST_CASE("substitute pins a variable to a constant") {
  Expr e = parse("lam*y + lam");
  Expr s = substitute(e, Var::Lam, 0.5);
  CHECK_FALSE(s.uses(Var::Lam));
  CHECK(evaluate(s, {{"y", 4.0}}) == doctest::Approx(2.5));
  // untouched expressions are shared, not copied
  Expr t = parse("y + 1");
  CHECK(substitute(t, Var::Lam, 2.0) == t);
}

TEST_CASE("hostile nesting is rejected with diagnostics, not a crash") {
  std::string deep(500, '(');
  deep += "y";
  deep += std::string(500, ')');
  CHECK_THROWS_AS(parse(deep), ParseError);

  std::string signs = "y^" + std::string(500, '-') + "2";
  CHECK_THROWS_AS(parse(signs), ParseError);
  CHECK(evaluate(parse("y^--2"), {{"y", 3.0}}) == 9.0);

  // parses fine but exceeds the evaluation stack
  std::string tower = "y";
  for (int i = 0; i < 80; ++i) tower = "y + (" + tower + ")";
  Expr e = parse(tower);
  CHECK_THROWS_AS(Compiled{e}, std::invalid_argument);
}
