#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bsdelab::dsl {

// Variables the grammar knows about. `w` is only meaningful in terminal-value
// expressions, `lam` only in driver families; call sites restrict the allowed
// set when they bind an expression.
enum class Var : int { T = 0, Y = 1, Z = 2, W = 3, Lam = 4 };

constexpr int kNumVars = 5;

std::string_view var_name(Var v);

enum class Op : std::uint8_t {
  Num,
  Variable,
  // unary
  Neg,
  Abs,
  Sgn,
  Exp,
  Sqrt,
  // binary
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Min,
  Max,
  PowAbs,
};

bool is_unary(Op op);
bool is_binary(Op op);

struct Node;

// Immutable value-semantic expression handle. Copies are cheap and evaluation
// is pure, so expressions can be shared freely across threads.
class Expr {
 public:
  Expr() = default;

  static Expr num(double v);
  static Expr var(Var v);
  static Expr unary(Op op, Expr child);
  static Expr binary(Op op, Expr lhs, Expr rhs);

  bool empty() const { return node_ == nullptr; }
  const Node& node() const;

  Op op() const;
  double value() const;        // Num only
  Var variable() const;        // Variable only
  const Expr& lhs() const;     // unary child lives here too
  const Expr& rhs() const;

  // bitmask over Var of free variables
  unsigned free_vars() const;
  bool uses(Var v) const { return (free_vars() >> static_cast<int>(v)) & 1u; }

  // Value of a variable-free subtree, std::nullopt otherwise (or when the
  // constant does not evaluate to a finite number).
  std::optional<double> constant_value() const;

  std::string str() const;

  friend bool operator==(const Expr& a, const Expr& b);  // structural

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

struct Node {
  Op op = Op::Num;
  double value = 0.0;  // Num
  Var var = Var::T;    // Variable
  Expr lhs, rhs;
  unsigned free_mask = 0;
};

struct ParseError : std::runtime_error {
  ParseError(std::string msg, std::size_t offset, int line, int col);
  std::string message;  // bare message, without the position prefix
  std::size_t offset;   // byte offset into the source
  int line, col;        // 1-based
};

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Recursive-descent parser. Precedence pow > unary > mul/div > add/sub,
// everything left-associative except pow. Unary minus folds into numeric
// literals so that printing round-trips structurally. pow with a constant
// non-integer exponent is rejected unless the base is syntactically
// nonnegative; powabs(x,p) is the supported spelling of |x|^p.
Expr parse(std::string_view source);

// Minimal-parentheses printer; parse(e.str()) == e structurally.
std::string to_string(const Expr& e);

// Substitute a constant for a variable (used to take family slices).
Expr substitute(const Expr& e, Var v, double value);

// Interpreted evaluation against a name->value environment. Every free
// variable must be bound; division by zero and other non-finite results are
// reported as EvalError. Intended for tests and one-off evaluation; hot loops
// should go through Compiled.
double evaluate(const Expr& e, const std::map<std::string, double>& env);

struct EvalEnv {
  double slot[kNumVars] = {0, 0, 0, 0, 0};
  double& operator[](Var v) { return slot[static_cast<int>(v)]; }
  double operator[](Var v) const { return slot[static_cast<int>(v)]; }
};

// Flat post-order program for fast repeated evaluation. Constant subtrees are
// folded at compile time; the AST itself is left untouched.
class Compiled {
 public:
  Compiled() = default;
  explicit Compiled(const Expr& e);

  // IEEE semantics; the caller is responsible for checking finiteness when it
  // matters (eval_checked does it and throws EvalError).
  double eval(const EvalEnv& env) const;
  double eval_checked(const EvalEnv& env) const;

  unsigned free_vars() const { return free_mask_; }

 private:
  struct Instr {
    Op op;
    double value = 0.0;
    int var = 0;
  };
  std::vector<Instr> code_;
  unsigned free_mask_ = 0;
  int max_stack_ = 0;
};

// shortest round-trip decimal rendering of a double
std::string format_double(double v);

}  // namespace bsdelab::dsl
