#include "bsdelab/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace bsdelab::dsl {

namespace {

constexpr int kEvalStackSize = 64;

const std::array<std::string_view, kNumVars> kVarNames = {"t", "y", "z", "w", "lam"};

std::string position_prefix(std::size_t offset, std::string_view source, int* line_out, int* col_out) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < source.size(); ++i) {
    if (source[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  *line_out = line;
  *col_out = col;
  return std::to_string(line) + ":" + std::to_string(col);
}

}  // namespace

std::string_view var_name(Var v) { return kVarNames[static_cast<int>(v)]; }

bool is_unary(Op op) {
  switch (op) {
    case Op::Neg:
    case Op::Abs:
    case Op::Sgn:
    case Op::Exp:
    case Op::Sqrt:
      return true;
    default:
      return false;
  }
}

bool is_binary(Op op) {
  switch (op) {
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
    case Op::Pow:
    case Op::Min:
    case Op::Max:
    case Op::PowAbs:
      return true;
    default:
      return false;
  }
}

Expr Expr::num(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Num;
  n->value = v;
  return Expr(std::move(n));
}

Expr Expr::var(Var v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Variable;
  n->var = v;
  n->free_mask = 1u << static_cast<int>(v);
  return Expr(std::move(n));
}

Expr Expr::unary(Op op, Expr child) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->free_mask = child.empty() ? 0u : child.free_vars();
  n->lhs = std::move(child);
  return Expr(std::move(n));
}

Expr Expr::binary(Op op, Expr lhs, Expr rhs) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->free_mask = lhs.free_vars() | rhs.free_vars();
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return Expr(std::move(n));
}

const Node& Expr::node() const {
  if (!node_) throw std::logic_error("empty expression");
  return *node_;
}

Op Expr::op() const { return node().op; }
double Expr::value() const { return node().value; }
Var Expr::variable() const { return node().var; }
const Expr& Expr::lhs() const { return node().lhs; }
const Expr& Expr::rhs() const { return node().rhs; }
unsigned Expr::free_vars() const { return node_ ? node_->free_mask : 0u; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (!a.node_ || !b.node_) return false;
  if (a.op() != b.op()) return false;
  switch (a.op()) {
    case Op::Num:
      // bitwise so that round-trip checks are exact (incl. -0.0 vs 0.0)
      return a.value() == b.value() && std::signbit(a.value()) == std::signbit(b.value());
    case Op::Variable:
      return a.variable() == b.variable();
    default:
      if (is_unary(a.op())) return a.lhs() == b.lhs();
      return a.lhs() == b.lhs() && a.rhs() == b.rhs();
  }
}

std::optional<double> Expr::constant_value() const {
  if (free_vars() != 0) return std::nullopt;
  try {
    double v = evaluate(*this, {});
    return v;
  } catch (const EvalError&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// parsing

ParseError::ParseError(std::string msg, std::size_t off, int ln, int cl)
    : std::runtime_error(std::to_string(ln) + ":" + std::to_string(cl) + ": " + msg),
      message(std::move(msg)),
      offset(off),
      line(ln),
      col(cl) {}

namespace {

struct FunctionInfo {
  std::string_view name;
  Op op;
  int arity;
};

constexpr std::array<FunctionInfo, 7> kFunctions = {{
    {"abs", Op::Abs, 1},
    {"sgn", Op::Sgn, 1},
    {"exp", Op::Exp, 1},
    {"sqrt", Op::Sqrt, 1},
    {"min", Op::Min, 2},
    {"max", Op::Max, 2},
    {"powabs", Op::PowAbs, 2},
}};

// A subtree that can be shown to be >= 0 for all inputs. Used to allow pow
// with fractional constant exponents on provably safe bases.
bool syntactically_nonneg(const Expr& e) {
  switch (e.op()) {
    case Op::Num:
      return e.value() >= 0.0;
    case Op::Abs:
    case Op::Sqrt:
    case Op::Exp:
    case Op::PowAbs:
      return true;
    case Op::Add:
    case Op::Mul:
    case Op::Min:
    case Op::Max:
      return syntactically_nonneg(e.lhs()) && syntactically_nonneg(e.rhs());
    default:
      return false;
  }
}

bool is_integer_value(double v) {
  return std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15;
}

constexpr int kMaxParseDepth = 200;

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Expr run() {
    Expr e = parse_expr();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected trailing input", pos_);
    return e;
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;
  int depth_ = 0;

  struct DepthGuard {
    Parser* p;
    explicit DepthGuard(Parser* parser) : p(parser) {
      if (++p->depth_ > kMaxParseDepth) {
        p->fail("expression is nested too deeply", p->pos_);
      }
    }
    ~DepthGuard() { --p->depth_; }
  };

  [[noreturn]] void fail(std::string msg, std::size_t at) const {
    int line = 0, col = 0;
    position_prefix(at, src_, &line, &col);
    throw ParseError(std::move(msg), at, line, col);
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  Expr parse_expr() {
    DepthGuard guard(this);
    Expr e = parse_term();
    for (;;) {
      if (eat('+')) {
        e = Expr::binary(Op::Add, std::move(e), parse_term());
      } else if (eat('-')) {
        e = Expr::binary(Op::Sub, std::move(e), parse_term());
      } else {
        return e;
      }
    }
  }

  Expr parse_term() {
    Expr e = parse_unary();
    for (;;) {
      if (eat('*')) {
        e = Expr::binary(Op::Mul, std::move(e), parse_unary());
      } else if (eat('/')) {
        e = Expr::binary(Op::Div, std::move(e), parse_unary());
      } else {
        return e;
      }
    }
  }

  Expr parse_unary() {
    DepthGuard guard(this);
    skip_ws();
    if (eat('-')) {
      Expr child = parse_unary();
      // fold so that "-3" is the literal -3, not Neg(3); keeps printing
      // structurally round-trippable
      if (child.op() == Op::Num) return Expr::num(-child.value());
      return Expr::unary(Op::Neg, std::move(child));
    }
    return parse_power();
  }

  Expr parse_power() {
    std::size_t at = pos_;
    Expr base = parse_primary();
    skip_ws();
    if (eat('^')) {
      // right-associative; exponent may carry a sign
      Expr expo = parse_signed_power();
      if (auto c = expo.constant_value(); c && !is_integer_value(*c) && !syntactically_nonneg(base)) {
        fail("pow with possibly negative base and non-integer exponent; use powabs(x,p)", at);
      }
      return Expr::binary(Op::Pow, std::move(base), std::move(expo));
    }
    return base;
  }

  Expr parse_signed_power() {
    DepthGuard guard(this);
    skip_ws();
    if (eat('-')) {
      Expr child = parse_signed_power();
      if (child.op() == Op::Num) return Expr::num(-child.value());
      return Expr::unary(Op::Neg, std::move(child));
    }
    return parse_power();
  }

  Expr parse_primary() {
    skip_ws();
    std::size_t at = pos_;
    if (pos_ >= src_.size()) fail("unexpected end of input", at);
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_expr();
      if (!eat(')')) fail("expected ')'", pos_);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    fail(std::string("unexpected character '") + c + "'", at);
  }

  Expr parse_number() {
    std::size_t at = pos_;
    std::size_t end = pos_;
    while (end < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[end])) || src_[end] == '.')) {
      ++end;
    }
    if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
      std::size_t e = end + 1;
      if (e < src_.size() && (src_[e] == '+' || src_[e] == '-')) ++e;
      if (e < src_.size() && std::isdigit(static_cast<unsigned char>(src_[e]))) {
        ++e;
        while (e < src_.size() && std::isdigit(static_cast<unsigned char>(src_[e]))) ++e;
        end = e;
      }
    }
    double v = 0;
    auto res = std::from_chars(src_.data() + at, src_.data() + end, v);
    if (res.ec != std::errc() || res.ptr != src_.data() + end) fail("malformed number", at);
    pos_ = end;
    return Expr::num(v);
  }

  Expr parse_ident() {
    std::size_t at = pos_;
    std::size_t end = pos_;
    while (end < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_')) {
      ++end;
    }
    std::string_view name = src_.substr(at, end - at);
    pos_ = end;
    for (int i = 0; i < kNumVars; ++i) {
      if (name == kVarNames[i]) return Expr::var(static_cast<Var>(i));
    }
    for (const auto& fn : kFunctions) {
      if (name != fn.name) continue;
      if (!eat('(')) fail("expected '(' after function name", pos_);
      std::vector<Expr> args;
      args.push_back(parse_expr());
      while (eat(',')) args.push_back(parse_expr());
      if (!eat(')')) fail("expected ')'", pos_);
      if (static_cast<int>(args.size()) != fn.arity) {
        fail(std::string(fn.name) + " expects " + std::to_string(fn.arity) + " argument(s), got " +
                 std::to_string(args.size()),
             at);
      }
      if (fn.arity == 1) return Expr::unary(fn.op, std::move(args[0]));
      return Expr::binary(fn.op, std::move(args[0]), std::move(args[1]));
    }
    fail("unknown identifier '" + std::string(name) + "'", at);
  }
};

}  // namespace

Expr parse(std::string_view source) { return Parser(source).run(); }

// ---------------------------------------------------------------------------
// printing

namespace {

// precedence levels: add/sub 1, mul/div 2, unary 3, pow 4, atoms 5
int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::Add:
    case Op::Sub:
      return 1;
    case Op::Mul:
    case Op::Div:
      return 2;
    case Op::Neg:
      return 3;
    case Op::Num:
      // negative literals reparse through unary minus
      return (e.value() < 0 || std::signbit(e.value())) ? 3 : 5;
    case Op::Pow:
      return 4;
    default:
      return 5;  // variables, function calls
  }
}

void print(const Expr& e, std::string& out);

void print_child(const Expr& child, int min_prec, std::string& out) {
  if (precedence(child) < min_prec) {
    out += '(';
    print(child, out);
    out += ')';
  } else {
    print(child, out);
  }
}

std::string_view function_name(Op op) {
  for (const auto& fn : kFunctions) {
    if (fn.op == op) return fn.name;
  }
  return "?";
}

void print(const Expr& e, std::string& out) {
  switch (e.op()) {
    case Op::Num:
      out += format_double(e.value());
      return;
    case Op::Variable:
      out += var_name(e.variable());
      return;
    case Op::Neg:
      out += '-';
      // parenthesize nested unary minus for readability; higher-prec children
      // (pow, atoms) bind tighter than the minus and need no parens
      print_child(e.lhs(), 4, out);
      return;
    case Op::Add:
      print_child(e.lhs(), 1, out);
      out += " + ";
      print_child(e.rhs(), 2, out);
      return;
    case Op::Sub:
      print_child(e.lhs(), 1, out);
      out += " - ";
      print_child(e.rhs(), 2, out);
      return;
    case Op::Mul:
      print_child(e.lhs(), 2, out);
      out += "*";
      print_child(e.rhs(), 3, out);
      return;
    case Op::Div:
      print_child(e.lhs(), 2, out);
      out += "/";
      print_child(e.rhs(), 3, out);
      return;
    case Op::Pow:
      // right-associative: the left child needs parens even at equal level
      print_child(e.lhs(), 5, out);
      out += "^";
      print_child(e.rhs(), 4, out);
      return;
    default: {
      out += function_name(e.op());
      out += '(';
      print(e.lhs(), out);
      if (is_binary(e.op())) {
        out += ", ";
        print(e.rhs(), out);
      }
      out += ')';
      return;
    }
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

std::string Expr::str() const { return to_string(*this); }

Expr substitute(const Expr& e, Var v, double value) {
  if (!e.uses(v)) return e;
  switch (e.op()) {
    case Op::Variable:
      return e.variable() == v ? Expr::num(value) : e;
    default:
      if (is_unary(e.op())) return Expr::unary(e.op(), substitute(e.lhs(), v, value));
      return Expr::binary(e.op(), substitute(e.lhs(), v, value), substitute(e.rhs(), v, value));
  }
}

// ---------------------------------------------------------------------------
// evaluation

namespace {

double apply_unary(Op op, double a) {
  switch (op) {
    case Op::Neg:
      return -a;
    case Op::Abs:
      return std::abs(a);
    case Op::Sgn:
      return a > 0 ? 1.0 : (a < 0 ? -1.0 : 0.0);
    case Op::Exp:
      return std::exp(a);
    case Op::Sqrt:
      return std::sqrt(a);
    default:
      return std::numeric_limits<double>::quiet_NaN();
  }
}

double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::Add:
      return a + b;
    case Op::Sub:
      return a - b;
    case Op::Mul:
      return a * b;
    case Op::Div:
      return a / b;
    case Op::Pow:
      return std::pow(a, b);
    case Op::Min:
      return std::min(a, b);
    case Op::Max:
      return std::max(a, b);
    case Op::PowAbs:
      // |a|^b with the 0^b = 0 convention for b > 0
      if (a == 0.0) return b > 0 ? 0.0 : std::pow(0.0, b);
      return std::pow(std::abs(a), b);
    default:
      return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

double evaluate(const Expr& e, const std::map<std::string, double>& env) {
  switch (e.op()) {
    case Op::Num:
      return e.value();
    case Op::Variable: {
      auto it = env.find(std::string(var_name(e.variable())));
      if (it == env.end()) {
        throw EvalError("unbound variable '" + std::string(var_name(e.variable())) + "'");
      }
      return it->second;
    }
    default: {
      double r;
      if (is_unary(e.op())) {
        r = apply_unary(e.op(), evaluate(e.lhs(), env));
      } else {
        double a = evaluate(e.lhs(), env);
        double b = evaluate(e.rhs(), env);
        if (e.op() == Op::Div && b == 0.0) throw EvalError("division by zero");
        r = apply_binary(e.op(), a, b);
      }
      if (!std::isfinite(r)) {
        throw EvalError("evaluation produced a non-finite value in '" + to_string(e) + "'");
      }
      return r;
    }
  }
}

Compiled::Compiled(const Expr& e) {
  free_mask_ = e.free_vars();
  int depth = 0;
  // post-order emit with constant folding
  auto emit = [&](auto&& self, const Expr& n) -> void {
    if (n.op() != Op::Num && n.free_vars() == 0) {
      if (auto c = n.constant_value()) {
        code_.push_back({Op::Num, *c, 0});
        max_stack_ = std::max(max_stack_, ++depth);
        return;
      }
      // constant subtree that fails to evaluate (e.g. 1/0): keep the tree so
      // the error surfaces at evaluation time
    }
    switch (n.op()) {
      case Op::Num:
        code_.push_back({Op::Num, n.value(), 0});
        max_stack_ = std::max(max_stack_, ++depth);
        return;
      case Op::Variable:
        code_.push_back({Op::Variable, 0.0, static_cast<int>(n.variable())});
        max_stack_ = std::max(max_stack_, ++depth);
        return;
      default:
        self(self, n.lhs());
        if (is_binary(n.op())) {
          self(self, n.rhs());
          --depth;
        }
        code_.push_back({n.op(), 0.0, 0});
        return;
    }
  };
  emit(emit, e);
  if (max_stack_ > kEvalStackSize) {
    throw std::invalid_argument("expression is too deep to compile (depth " +
                                std::to_string(max_stack_) + ")");
  }
}

double Compiled::eval(const EvalEnv& env) const {
  double stack[kEvalStackSize];
  int sp = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Num:
        stack[sp++] = in.value;
        break;
      case Op::Variable:
        stack[sp++] = env.slot[in.var];
        break;
      default:
        if (is_unary(in.op)) {
          stack[sp - 1] = apply_unary(in.op, stack[sp - 1]);
        } else {
          --sp;
          stack[sp - 1] = apply_binary(in.op, stack[sp - 1], stack[sp]);
        }
        break;
    }
  }
  return stack[0];
}

double Compiled::eval_checked(const EvalEnv& env) const {
  double v = eval(env);
  if (!std::isfinite(v)) {
    throw EvalError("evaluation produced a non-finite value (division by zero or overflow)");
  }
  return v;
}

}  // namespace bsdelab::dsl
