#pragma once

#include <functional>
#include <memory>
#include <span>

#include "bsdelab/driver.hpp"

namespace bsdelab {

enum class EnvelopeKind { Lower, Upper };

// Radius R = 2A(1+|y|+|z|)/(m-A) such that restricting the inf/sup in the
// Lipschitz envelopes to {|y-u| + |z-v| <= R} does not change the value: the
// candidate (u,v) = (y,z) already achieves a value within A(1+|y|+|z|) of
// zero, and linear growth forces any point farther than R to do worse.
// Requires m > A strictly (the m = A envelope has no finite search radius).
double search_radius(double growth_a, double m, double y, std::span<const double> z);

// Base generator for envelope computation with z of dimension d >= 1. The
// optimize flags mark arguments the base actually depends on; inactive axes
// are pinned to the query point (exact, since the penalty alone is minimized
// there).
struct EnvelopeBase {
  std::function<double(double t, double y, std::span<const double> z)> fn;
  double growth_a = 0.0;
  bool optimize_y = true;
  bool optimize_z = true;
};

// inf over the search ball, grid step h per coordinate, of
//   g(t,u,v) + m(|y-u| + |z-v|),
// followed by a golden-section polish per coordinate around the best grid
// point. The grid contains (y,z) itself, so the result never exceeds
// g(t,y,z); every probed point bounds the true envelope from above, so the
// computed value lies between the true envelope and g(t,y,z).
double lower_envelope(const EnvelopeBase& base, double m, double t, double y,
                      std::span<const double> z, double h);

// Mirror image: sup over the same ball of g(t,u,v) - m(|y-u| + |z-v|).
double upper_envelope(const EnvelopeBase& base, double m, double t, double y,
                      std::span<const double> z, double h);

// d = 1 convenience overloads for DSL drivers.
double lower_envelope(const Driver& base, double m, double t, double y, double z, double h);
double upper_envelope(const Driver& base, double m, double t, double y, double z, double h);

// A Lipschitz driver obtained as the lower or upper envelope of a continuous
// base driver, with lipschitz metadata m (monotonicity in m, the Lipschitz
// bound and the growth bound are exercised in the test suite). Evaluations are memoized on the exact input
// triple; copies share the memo table. Thread-safe.
class EnvelopeDriver {
 public:
  EnvelopeDriver(Driver base, EnvelopeKind kind, double m, double grid_step);

  double operator()(double t, double y, double z) const;

  const Driver& base() const { return base_; }
  EnvelopeKind kind() const { return kind_; }
  double m() const { return m_; }
  double lipschitz() const { return m_; }
  double grid_step() const { return grid_step_; }
  std::string name() const;

 private:
  Driver base_;
  EnvelopeKind kind_;
  double m_;
  double grid_step_;
  struct Memo;
  std::shared_ptr<Memo> memo_;
};

// Envelope of every lambda-slice of a family; inherits continuity in lambda
// at lam0 from the base family.
class EnvelopeFamily {
 public:
  EnvelopeFamily(DriverFamily family, EnvelopeKind kind, double m, double grid_step);
  EnvelopeDriver at(double lam) const;

  const DriverFamily& family() const { return family_; }
  EnvelopeKind kind() const { return kind_; }
  double m() const { return m_; }

 private:
  DriverFamily family_;
  EnvelopeKind kind_;
  double m_;
  double grid_step_;
};

EnvelopeFamily envelope_family(DriverFamily family, double m, EnvelopeKind kind, double grid_step);

}  // namespace bsdelab
