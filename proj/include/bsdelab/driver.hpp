#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bsdelab/expr.hpp"

namespace bsdelab {

// Declared satisfaction of the standing assumptions: linear growth (h1),
// square-integrability of t -> g(t,y,z) (h2), continuity in (y,z) (h3) and,
// for families, continuity in the parameter at lam0 (h4). These are caller
// assertions audited by sampling, not symbolically verified.
struct Assumptions {
  bool h1 = true;
  bool h2 = true;
  bool h3 = true;
  bool h4 = true;
};

// An evaluable generator g(t,y,z) together with its declared linear-growth
// constant A and, when known, a Lipschitz constant K. Immutable; evaluation
// is pure and thread-safe.
class Driver {
 public:
  Driver(dsl::Expr expr, double growth_a, std::optional<double> lipschitz,
         Assumptions flags = {}, std::string name = {});

  double operator()(double t, double y, double z) const;

  const dsl::Expr& expr() const { return expr_; }
  double growth_a() const { return growth_a_; }
  const std::optional<double>& lipschitz() const { return lipschitz_; }
  const Assumptions& flags() const { return flags_; }
  const std::string& name() const { return name_; }

  bool uses_y() const { return expr_.uses(dsl::Var::Y); }
  bool uses_z() const { return expr_.uses(dsl::Var::Z); }

 private:
  dsl::Expr expr_;
  dsl::Compiled code_;
  double growth_a_;
  std::optional<double> lipschitz_;
  Assumptions flags_;
  std::string name_;
};

// Terminal value xi as a function of the terminal Brownian level w (possibly
// constant).
class TerminalValue {
 public:
  explicit TerminalValue(dsl::Expr expr, std::string name = {});
  static TerminalValue constant(double c);
  static TerminalValue parse(std::string_view source);

  double operator()(double w) const;
  bool is_constant() const;
  const dsl::Expr& expr() const { return expr_; }
  const std::string& name() const { return name_; }

 private:
  dsl::Expr expr_;
  dsl::Compiled code_;
  std::string name_;
};

// Parameterized driver family g^lam over a closed interval D, with a shared
// linear-growth constant (uniform in lam) and an optional declared modulus of
// continuity in lam: |g^lam - g^lam0| <= modulus * |lam - lam0| on the region
// of interest.
class DriverFamily {
 public:
  DriverFamily(dsl::Expr expr, double domain_lo, double domain_hi, double lam0,
               double growth_a, std::optional<double> uniform_modulus = std::nullopt,
               Assumptions flags = {}, std::string name = {});

  Driver slice(double lam) const;  // lam must lie in D

  double domain_lo() const { return lo_; }
  double domain_hi() const { return hi_; }
  double lam0() const { return lam0_; }
  double growth_a() const { return growth_a_; }
  const std::optional<double>& uniform_modulus() const { return modulus_; }
  const Assumptions& flags() const { return flags_; }
  const std::string& name() const { return name_; }
  const dsl::Expr& expr() const { return expr_; }

 private:
  dsl::Expr expr_;
  double lo_, hi_, lam0_, growth_a_;
  std::optional<double> modulus_;
  Assumptions flags_;
  std::string name_;
};

// Terminal-value family lam -> xi^lam, an expression over {w, lam}.
class TerminalFamily {
 public:
  explicit TerminalFamily(dsl::Expr expr, std::string name = {});
  static TerminalFamily parse(std::string_view source);
  TerminalValue at(double lam) const;
  const dsl::Expr& expr() const { return expr_; }

 private:
  dsl::Expr expr_;
  std::string name_;
};

using CatalogEntry = std::variant<Driver, DriverFamily>;

// Named driver catalog. "remark33" is g = 3|y|^(2/3) with A = 3 and no
// Lipschitz constant; "linear" takes parameters a,b and is g = a*y + b*z with
// A = K = max(|a|,|b|). Throws std::invalid_argument on unknown names or
// missing parameters.
CatalogEntry catalog_lookup(const std::string& name,
                            const std::map<std::string, double>& params = {});

std::vector<std::string> catalog_names();

// Resolve a --driver value: either a catalog name (optionally with positional
// numeric arguments, e.g. "linear(2,-1)") or raw DSL source. Raw sources need
// a declared growth constant unless the expression is (t,y,z)-constant.
Driver resolve_driver(const std::string& source, std::optional<double> growth_a,
                      std::optional<double> lipschitz);

// Sampling audits for declared metadata. Both return the worst violation seen
// (<= 0 means the declaration held on every sample). Points are drawn
// uniformly from t in [0,horizon], |y| <= box, |z| <= box.
struct AuditBox {
  double horizon = 1.0;
  double box = 50.0;
};

double audit_linear_growth(const Driver& d, const AuditBox& box, int samples, std::uint64_t seed);
double audit_lipschitz(const Driver& d, const AuditBox& box, int sample_pairs, std::uint64_t seed);

}  // namespace bsdelab
