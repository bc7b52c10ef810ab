#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bsdelab/solver.hpp"

namespace bsdelab {

enum class Selector { Minimal, Maximal };

std::string_view selector_name(Selector s);
Selector parse_selector(std::string_view s);

struct SupDistanceOptions {
  int max_enum_steps = kDefaultMaxEnumSteps;
  int sample_count = 4096;
  std::uint64_t seed = 1;
};

// E[ max_k |y_a - y_b|^2 ] over the shared lattice: exact when both fields
// are deterministic (slice-constant) or when N allows full path enumeration,
// a seeded sampled estimate otherwise. Requires matching lattices.
double sup_distance(const SolutionField& a, const SolutionField& b,
                    const SupDistanceOptions& opts = {});

enum class Verdict { Converges, DivergesTo, Inconclusive };

std::string verdict_string(Verdict v, double diverges_to);

struct PerturbationPoint {
  std::string label;
  double size;  // E|xi_n - xi|^2, or lam - lam0 for parameter curves
};

struct DependenceReport {
  std::vector<PerturbationPoint> perturbations;
  std::vector<double> distances;  // matched with perturbations
  Verdict verdict = Verdict::Inconclusive;
  double diverges_to = 0.0;  // meaningful when verdict == DivergesTo
  std::vector<double> ratios;
  double scheme_error_estimate = 0.0;
};

struct CurveOptions {
  std::vector<double> m_schedule;  // the largest entry drives every solve, for comparability
  Scheme scheme = Scheme::Explicit;
  double converge_threshold = 1e-2;
  SupDistanceOptions metric;
  bool parallel = true;  // curve points are independent solves
};

// Continuous dependence on the terminal value: solve
// the base and every perturbed problem with the selected extremal scheme at
// the largest scheduled m, measure sup distances, and classify the tail.
DependenceReport xi_dependence_curve(const Lattice& model, const Driver& driver,
                                     const TerminalValue& xi,
                                     std::span<const TerminalValue> xi_seq, Selector sel,
                                     const CurveOptions& opts);

// Joint perturbation of driver and terminal value.
// ratios[i] = distance / (E|xi^lam - xi^lam0|^2 + E int |g^lam - g^lam0|^2 dt
// along the base solution), the right-hand side of the Lipschitz a priori
// estimate.
DependenceReport lambda_dependence_curve(const Lattice& model, const DriverFamily& family,
                                         const TerminalFamily& xi_family,
                                         std::span<const double> lam_seq, Selector sel,
                                         const CurveOptions& opts);

struct UniquenessResult {
  double gap = 0.0;  // sup distance between minimal and maximal at the last m
  std::vector<double> m_schedule;
  std::vector<double> per_m_gaps;
  double scheme_error_estimate = 0.0;
};

// Lattice witness of (non-)uniqueness: distance between the extremal
// solutions at the end of the doubling schedule capped by m_max. Values far
// above the scheme error signal non-uniqueness; values at scheme-error scale
// are consistent with uniqueness.
UniquenessResult uniqueness_gap(const Lattice& model, const Driver& driver,
                                const TerminalValue& xi, double m_max,
                                Scheme scheme = Scheme::Explicit,
                                const SupDistanceOptions& metric = {});

struct AprioriResult {
  std::vector<double> ratios;
  std::vector<std::string> notes;  // one entry per skipped pair
};

// A priori estimate ratios sup_distance / E|xi1 - xi2|^2 for a Lipschitz
// driver; identical pairs are skipped with a note.
AprioriResult apriori_check(const Lattice& model, const Driver& driver,
                            std::span<const std::pair<TerminalValue, TerminalValue>> xi_pairs,
                            Scheme scheme = Scheme::Explicit,
                            const SupDistanceOptions& metric = {});

// Closed forms of the non-uniqueness counterexample: for driver 3|y|^(2/3)
// and terminal value 1/n the unique perturbed solution is (T - t + n^{-1/3})^3,
// while the unperturbed extremal pair is 0 and (T - t)^3; the divergence
// plateau is T^6.
struct OraclePoint {
  double y_n;
  double y_min;
  double y_max;
};

OraclePoint counterexample_oracle(double horizon, long long n, double t);

struct CounterexampleOracle {
  double horizon;
  long long n;

  double y_n(double t) const;
  double y_min(double) const { return 0.0; }
  double y_max(double t) const;
  double gap_constant() const;  // T^6
};

// Counterexample reproduction on the lattice. Point n uses the terminal
// value n^-3 (the 1/n terminal sequence sampled at the cube indices, so the
// measured curve actually reaches its limits) and the envelope index
// m(n) = 4n, for which the envelope coincides with the driver along the whole
// solution (the terminal value stays above 27/m^3), on max(min_steps, 8nT)
// time steps. Everything is deterministic (slice-constant), so the metric
// needs no path work and the solves run through the scalar reduction of the
// backward induction.
struct CounterexampleOptions {
  std::vector<long long> n_list;  // default 1, 2, 4, ..., 1024
  int min_steps = 1024;
  Scheme scheme = Scheme::Explicit;
  double converge_threshold = 1e-2;
};

struct CounterexamplePoint {
  long long n;
  double terminal;         // n^-3
  double distance;         // measured lattice sup distance
  double oracle_distance;  // closed-form value of the same quantity
};

struct CounterexampleCurve {
  std::vector<CounterexamplePoint> points;
  DependenceReport report;
};

CounterexampleCurve counterexample_curve(double horizon, Selector sel,
                                         const CounterexampleOptions& opts = {});

}  // namespace bsdelab
