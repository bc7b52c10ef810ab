#include "bsdelab/driver.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace bsdelab {

namespace {

using dsl::Expr;
using dsl::Var;

unsigned mask_of(std::initializer_list<Var> vars) {
  unsigned m = 0;
  for (Var v : vars) m |= 1u << static_cast<int>(v);
  return m;
}

void require_vars(const Expr& e, std::initializer_list<Var> allowed, const char* what) {
  unsigned extra = e.free_vars() & ~mask_of(allowed);
  if (extra == 0) return;
  std::string names;
  for (int i = 0; i < dsl::kNumVars; ++i) {
    if (extra & (1u << i)) {
      if (!names.empty()) names += ", ";
      names += dsl::var_name(static_cast<Var>(i));
    }
  }
  throw std::invalid_argument(std::string(what) + " may not reference: " + names);
}

}  // namespace

Driver::Driver(Expr expr, double growth_a, std::optional<double> lipschitz, Assumptions flags,
               std::string name)
    : expr_(std::move(expr)),
      code_(expr_),
      growth_a_(growth_a),
      lipschitz_(lipschitz),
      flags_(flags),
      name_(std::move(name)) {
  require_vars(expr_, {Var::T, Var::Y, Var::Z}, "driver expression");
  if (!(growth_a_ >= 0.0)) throw std::invalid_argument("growth constant A must be nonnegative");
  if (lipschitz_ && !(*lipschitz_ >= 0.0)) {
    throw std::invalid_argument("Lipschitz constant K must be nonnegative");
  }
  if (name_.empty()) name_ = expr_.str();
}

double Driver::operator()(double t, double y, double z) const {
  dsl::EvalEnv env;
  env[Var::T] = t;
  env[Var::Y] = y;
  env[Var::Z] = z;
  return code_.eval_checked(env);
}

TerminalValue::TerminalValue(Expr expr, std::string name)
    : expr_(std::move(expr)), code_(expr_), name_(std::move(name)) {
  require_vars(expr_, {Var::W}, "terminal value");
  if (name_.empty()) name_ = expr_.str();
}

TerminalValue TerminalValue::constant(double c) { return TerminalValue(Expr::num(c)); }

TerminalValue TerminalValue::parse(std::string_view source) {
  return TerminalValue(dsl::parse(source));
}

double TerminalValue::operator()(double w) const {
  dsl::EvalEnv env;
  env[Var::W] = w;
  return code_.eval_checked(env);
}

bool TerminalValue::is_constant() const { return expr_.free_vars() == 0; }

DriverFamily::DriverFamily(Expr expr, double domain_lo, double domain_hi, double lam0,
                           double growth_a, std::optional<double> uniform_modulus,
                           Assumptions flags, std::string name)
    : expr_(std::move(expr)),
      lo_(domain_lo),
      hi_(domain_hi),
      lam0_(lam0),
      growth_a_(growth_a),
      modulus_(uniform_modulus),
      flags_(flags),
      name_(std::move(name)) {
  require_vars(expr_, {Var::T, Var::Y, Var::Z, Var::Lam}, "driver family expression");
  if (!(lo_ <= hi_)) throw std::invalid_argument("family domain is empty");
  if (lam0_ < lo_ || lam0_ > hi_) throw std::invalid_argument("lam0 outside the family domain");
  if (!(growth_a_ >= 0.0)) throw std::invalid_argument("growth constant A must be nonnegative");
  if (name_.empty()) name_ = expr_.str();
}

Driver DriverFamily::slice(double lam) const {
  if (lam < lo_ || lam > hi_) {
    throw std::invalid_argument("lambda " + dsl::format_double(lam) + " outside domain [" +
                                dsl::format_double(lo_) + ", " + dsl::format_double(hi_) + "]");
  }
  Expr sliced = dsl::substitute(expr_, Var::Lam, lam);
  Assumptions f = flags_;
  return Driver(std::move(sliced), growth_a_, std::nullopt, f,
                name_ + " @ lam=" + dsl::format_double(lam));
}

TerminalFamily::TerminalFamily(Expr expr, std::string name)
    : expr_(std::move(expr)), name_(std::move(name)) {
  require_vars(expr_, {Var::W, Var::Lam}, "terminal family");
  if (name_.empty()) name_ = expr_.str();
}

TerminalFamily TerminalFamily::parse(std::string_view source) {
  return TerminalFamily(dsl::parse(source));
}

TerminalValue TerminalFamily::at(double lam) const {
  return TerminalValue(dsl::substitute(expr_, Var::Lam, lam),
                       name_ + " @ lam=" + dsl::format_double(lam));
}

// ---------------------------------------------------------------------------
// catalog

namespace {

double require_param(const std::map<std::string, double>& params, const std::string& key,
                     const std::string& entry) {
  auto it = params.find(key);
  if (it == params.end()) {
    throw std::invalid_argument("catalog entry '" + entry + "' needs parameter '" + key + "'");
  }
  return it->second;
}

}  // namespace

CatalogEntry catalog_lookup(const std::string& name, const std::map<std::string, double>& params) {
  if (name == "remark33") {
    // g(t,y,z) = 3|y|^(2/3): continuous, linear growth with A = 3, not
    // Lipschitz at y = 0
    Expr e = dsl::parse("3*powabs(y, 2/3)");
    return Driver(std::move(e), 3.0, std::nullopt, {}, "remark33");
  }
  if (name == "linear") {
    double a = require_param(params, "a", name);
    double b = require_param(params, "b", name);
    double k = std::max(std::abs(a), std::abs(b));
    Expr e = Expr::binary(dsl::Op::Add,
                          Expr::binary(dsl::Op::Mul, Expr::num(a), Expr::var(Var::Y)),
                          Expr::binary(dsl::Op::Mul, Expr::num(b), Expr::var(Var::Z)));
    return Driver(std::move(e), k, k, {},
                  "linear(" + dsl::format_double(a) + "," + dsl::format_double(b) + ")");
  }
  if (name == "constant") {
    double c = require_param(params, "c", name);
    return Driver(Expr::num(c), std::abs(c), 0.0, {}, "constant(" + dsl::format_double(c) + ")");
  }
  if (name == "remark33_shift") {
    // g^lam = 3|y|^(2/3) + lam on D = [0,1]; |g^lam - g^mu| = |lam - mu|
    Expr e = dsl::parse("3*powabs(y, 2/3) + lam");
    return DriverFamily(std::move(e), 0.0, 1.0, 0.0, 4.0, 1.0, {}, "remark33_shift");
  }
  if (name == "linear_lam") {
    // g^lam = lam*y on D = [-1,1]; Lipschitz in (y,z) uniformly over D
    Expr e = dsl::parse("lam*y");
    return DriverFamily(std::move(e), -1.0, 1.0, 0.0, 1.0, std::nullopt, {}, "linear_lam");
  }
  throw std::invalid_argument("unknown catalog entry '" + name + "'");
}

std::vector<std::string> catalog_names() {
  return {"remark33", "linear", "constant", "remark33_shift", "linear_lam"};
}

Driver resolve_driver(const std::string& source, std::optional<double> growth_a,
                      std::optional<double> lipschitz) {
  // catalog name, optionally with positional arguments: linear(2,-1)
  auto paren = source.find('(');
  std::string head = source.substr(0, paren);
  bool catalogish = false;
  for (const auto& n : catalog_names()) {
    if (n == head) catalogish = true;
  }
  if (catalogish) {
    std::map<std::string, double> params;
    if (paren != std::string::npos) {
      if (source.back() != ')') throw std::invalid_argument("expected ')' in '" + source + "'");
      std::string args = source.substr(paren + 1, source.size() - paren - 2);
      std::vector<double> vals;
      std::stringstream ss(args);
      std::string item;
      while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
      static const char* positional[] = {"a", "b", "c"};
      for (std::size_t i = 0; i < vals.size() && i < 3; ++i) params[positional[i]] = vals[i];
      if (head == "constant" && !vals.empty()) params["c"] = vals[0];
    }
    CatalogEntry entry = catalog_lookup(head, params);
    if (auto* d = std::get_if<Driver>(&entry)) return *d;
    throw std::invalid_argument("catalog entry '" + head + "' is a family, not a driver");
  }

  Expr e = dsl::parse(source);
  if ((e.free_vars() & (mask_of({Var::Y, Var::Z}))) == 0) {
    // (y,z)-free: K = 0, and a constant bound can stand in for A when the
    // caller gave none and the expression is t-free as well
    if (!growth_a && e.free_vars() == 0) growth_a = std::abs(*e.constant_value());
    if (!lipschitz) lipschitz = 0.0;
  }
  if (!growth_a) {
    throw std::invalid_argument("driver '" + source + "' needs a declared growth constant A");
  }
  return Driver(std::move(e), *growth_a, lipschitz, {}, source);
}

// ---------------------------------------------------------------------------
// audits

double audit_linear_growth(const Driver& d, const AuditBox& box, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(0.0, box.horizon);
  std::uniform_real_distribution<double> uv(-box.box, box.box);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    double t = ut(rng), y = uv(rng), z = uv(rng);
    double g = d(t, y, z);
    worst = std::max(worst, std::abs(g) - d.growth_a() * (1.0 + std::abs(y) + std::abs(z)));
  }
  return worst;
}

double audit_lipschitz(const Driver& d, const AuditBox& box, int sample_pairs, std::uint64_t seed) {
  if (!d.lipschitz()) throw std::invalid_argument("driver has no declared Lipschitz constant");
  double k = *d.lipschitz();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(0.0, box.horizon);
  std::uniform_real_distribution<double> uv(-box.box, box.box);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < sample_pairs; ++i) {
    double t = ut(rng);
    double y1 = uv(rng), z1 = uv(rng), y2 = uv(rng), z2 = uv(rng);
    double lhs = std::abs(d(t, y1, z1) - d(t, y2, z2));
    worst = std::max(worst, lhs - k * (std::abs(y1 - y2) + std::abs(z1 - z2)));
  }
  return worst;
}

}  // namespace bsdelab
