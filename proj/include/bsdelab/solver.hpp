#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/driver.hpp"
#include "bsdelab/envelope.hpp"
#include "bsdelab/lattice.hpp"

namespace bsdelab {

enum class Scheme { Explicit, Implicit };

std::string_view scheme_name(Scheme s);
Scheme parse_scheme(std::string_view s);

// Generator handed to the backward induction: a plain callable plus the
// Lipschitz constant governing the step-size conditions. Drivers and
// envelope drivers both adapt to this.
struct Generator {
  std::function<double(double t, double y, double z)> fn;
  double lipschitz = 0.0;
  std::string name;
};

Generator as_generator(const Driver& d);          // requires declared K
Generator as_generator(const EnvelopeDriver& e);  // K = m

struct SolveMeta {
  std::string driver;
  Scheme scheme = Scheme::Explicit;
  std::optional<double> m;           // envelope index when envelope-based
  std::optional<double> picard_gap;  // sup gap between the last two sweeps
};

// Discrete analog of a solution (y_t, z_t): y on steps 0..N, z on 0..N-1.
// y at step N equals xi at the terminal nodes bit-for-bit; interior steps
// satisfy the one-step consistency rule of the chosen scheme.
struct SolutionField {
  AdaptedField y;
  AdaptedField z;
  Lattice model;
  SolveMeta meta;

  double y_root() const { return y.at(0, 0); }
};

// Backward induction from step N to 0: z(k,j) from the martingale increment,
// then y(k,j) = E[y_{k+1}] + g(t_k, yhat, z(k,j)) dt with yhat = E[y_{k+1}]
// (explicit) or yhat = y(k,j) resolved by fixed point to 1e-12 (implicit).
// Step-size conditions: K dt <= 1/2 for the explicit scheme (discrete
// comparison), K dt < 1 for the implicit fixed point to contract.
SolutionField solve_generator(const Lattice& model, const Generator& g, const TerminalValue& xi,
                              Scheme scheme);

// Same, for a driver with a declared Lipschitz constant (the classical
// unique-solution regime; rejects drivers without K).
SolutionField solve_lipschitz(const Lattice& model, const Driver& driver, const TerminalValue& xi,
                              Scheme scheme = Scheme::Explicit);

// Picard iteration: (y^0, z^0) = (0, 0); each sweep solves the linear
// backward recursion with the driver frozen at the previous iterate. Returns
// after `iters` sweeps with the sup gap between the last two sweeps recorded
// in meta.picard_gap.
SolutionField picard_iterate(const Lattice& model, const Driver& driver, const TerminalValue& xi,
                             int iters);

// Monotone envelope scheme: solve with the lower (resp. upper) envelope
// driver for each m in the increasing schedule; the last element approximates
// the minimal (resp. maximal) solution. Envelope grid step is tied to dt.
std::vector<SolutionField> minimal_solution(const Lattice& model, const Driver& base,
                                            const TerminalValue& xi,
                                            std::span<const double> m_schedule,
                                            Scheme scheme = Scheme::Explicit);
std::vector<SolutionField> maximal_solution(const Lattice& model, const Driver& base,
                                            const TerminalValue& xi,
                                            std::span<const double> m_schedule,
                                            Scheme scheme = Scheme::Explicit);

// {A+1, 2(A+1), 4(A+1), 8(A+1)}, the default monotone schedule.
std::vector<double> default_m_schedule(double growth_a, int count = 4);

// The default schedule restricted to indices admissible at this step size;
// empty when even A+1 violates the step condition.
std::vector<double> admissible_m_schedule(double growth_a, double dt, Scheme scheme);

// Smallest power of two N with m_max * (T/N) <= 1/2.
int default_steps(double m_max, double horizon);

// Deterministic reduction: when xi is constant and the generator z-free the
// lattice solution is constant on every time slice with z = 0, and the
// backward induction collapses to the scalar recursion
//   y_k = y_{k+1} + g(t_k, yhat, 0) dt.
// Returns the per-slice values (size N+1); bitwise identical to the slices of
// solve_generator under the stated hypotheses.
std::vector<double> solve_deterministic(const Lattice& model, const Generator& g, double xi0,
                                        Scheme scheme);

}  // namespace bsdelab
