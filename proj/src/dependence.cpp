#include "bsdelab/dependence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "bsdelab/errors.hpp"

namespace bsdelab {

std::string_view selector_name(Selector s) { return s == Selector::Minimal ? "min" : "max"; }

Selector parse_selector(std::string_view s) {
  if (s == "min" || s == "minimal") return Selector::Minimal;
  if (s == "max" || s == "maximal") return Selector::Maximal;
  throw std::invalid_argument("unknown solution selector '" + std::string(s) + "'");
}

std::string verdict_string(Verdict v, double diverges_to) {
  switch (v) {
    case Verdict::Converges:
      return "converges";
    case Verdict::DivergesTo:
      return "diverges-to:" + dsl::format_double(diverges_to);
    default:
      return "inconclusive";
  }
}

namespace {

template <class Fn>
void parallel_for_index(int count, bool enabled, Fn&& fn) {
  if (!enabled || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  unsigned hw = std::thread::hardware_concurrency();
  int workers = std::min(count, static_cast<int>(hw ? hw : 4));
  std::atomic<int> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

double field_sup_gap(const AdaptedField& a, const AdaptedField& b) {
  double gap = 0.0;
  for (int k = 0; k <= a.last_step(); ++k) {
    auto sa = a.slice(k);
    auto sb = b.slice(k);
    for (int j = 0; j <= k; ++j) gap = std::max(gap, std::abs(sa[j] - sb[j]));
  }
  return gap;
}

// E|xi1 - xi2|^2 over the terminal slice (exact binomial weights)
double terminal_l2_gap(const Lattice& model, const TerminalValue& xi1, const TerminalValue& xi2) {
  const int n = model.steps();
  auto weights = model.node_weights(n);
  double acc = 0.0;
  for (int j = 0; j <= n; ++j) {
    double d = xi1(model.w(n, j)) - xi2(model.w(n, j));
    acc += weights[j] * d * d;
  }
  return acc;
}

// discretization-error indicator: sup-node gap between the explicit and
// implicit schemes on the same problem (both are O(dt) accurate, so their
// gap tracks the scheme error scale)
double scheme_gap_estimate(const Lattice& model, const Generator& gen, const TerminalValue& xi,
                           const SolutionField& ref, Scheme used) {
  Scheme other = used == Scheme::Explicit ? Scheme::Implicit : Scheme::Explicit;
  try {
    SolutionField o = solve_generator(model, gen, xi, other);
    return field_sup_gap(ref.y, o.y);
  } catch (const std::invalid_argument&) {
    return 0.0;  // other scheme not admissible at this step size
  }
}

Verdict classify(const std::vector<double>& d, double threshold, double scheme_err,
                 double* diverges_to) {
  double first = d.front(), last = d.back();
  if ((last < first || last == 0.0) && last < threshold) return Verdict::Converges;
  if (d.size() >= 3) {
    double a = d[d.size() - 3], b = d[d.size() - 2], c = last;
    double hi = std::max({a, b, c});
    double lo = std::min({a, b, c});
    // a genuine plateau: the last three points agree to 5% and sit well above
    // the scheme-error scale
    if (lo > 0.0 && hi <= 1.05 * lo && c > 10.0 * scheme_err) {
      *diverges_to = (a + b + c) / 3.0;
      return Verdict::DivergesTo;
    }
  }
  return Verdict::Inconclusive;
}

}  // namespace

double sup_distance(const SolutionField& a, const SolutionField& b,
                    const SupDistanceOptions& opts) {
  if (!a.model.same_as(b.model)) {
    throw std::invalid_argument("sup_distance needs both solutions on the same lattice");
  }
  const Lattice& model = a.model;
  const int n = model.steps();

  if (a.y.deterministic() && b.y.deterministic()) {
    // the path sup is attained slice-wise; no path work needed
    double best = 0.0;
    for (int k = 0; k <= n; ++k) {
      double d = a.y.at(k, 0) - b.y.at(k, 0);
      best = std::max(best, d * d);
    }
    return best;
  }

  auto path_max = [&](const PathVisit& p) {
    double best = 0.0;
    for (int k = 0; k <= n; ++k) {
      double d = a.y.at(k, p.levels[k]) - b.y.at(k, p.levels[k]);
      best = std::max(best, d * d);
    }
    return best;
  };

  if (n <= opts.max_enum_steps) {
    double acc = 0.0;
    for_each_path(model, [&](const PathVisit& p) { acc += path_max(p); }, opts.max_enum_steps);
    return std::ldexp(acc, -n);  // * 2^-n
  }
  if (opts.sample_count < 1) throw std::invalid_argument("sample count must be positive");
  double acc = 0.0;
  sample_paths(model, opts.sample_count, opts.seed,
               [&](const PathVisit& p) { acc += path_max(p); });
  return acc / opts.sample_count;
}

DependenceReport xi_dependence_curve(const Lattice& model, const Driver& driver,
                                     const TerminalValue& xi,
                                     std::span<const TerminalValue> xi_seq, Selector sel,
                                     const CurveOptions& opts) {
  if (xi_seq.empty()) throw std::invalid_argument("perturbation sequence is empty");
  std::vector<double> ms =
      opts.m_schedule.empty() ? default_m_schedule(driver.growth_a()) : opts.m_schedule;
  double m_big = ms.back();
  EnvelopeKind kind = sel == Selector::Minimal ? EnvelopeKind::Lower : EnvelopeKind::Upper;
  EnvelopeDriver env(driver, kind, m_big, model.dt());
  Generator gen = as_generator(env);

  SolutionField base = solve_generator(model, gen, xi, opts.scheme);
  DependenceReport report;
  report.scheme_error_estimate = scheme_gap_estimate(model, gen, xi, base, opts.scheme);

  const int count = static_cast<int>(xi_seq.size());
  report.perturbations.resize(count);
  report.distances.assign(count, 0.0);
  std::vector<double> sizes(count, 0.0);
  parallel_for_index(count, opts.parallel, [&](int i) {
    SolutionField sol = solve_generator(model, gen, xi_seq[i], opts.scheme);
    report.distances[i] = sup_distance(sol, base, opts.metric);
    sizes[i] = terminal_l2_gap(model, xi_seq[i], xi);
    report.perturbations[i] = PerturbationPoint{xi_seq[i].name(), sizes[i]};
  });
  for (int i = 0; i < count; ++i) {
    if (sizes[i] > 0.0) report.ratios.push_back(report.distances[i] / sizes[i]);
  }
  report.verdict = classify(report.distances, opts.converge_threshold,
                            report.scheme_error_estimate, &report.diverges_to);
  return report;
}

DependenceReport lambda_dependence_curve(const Lattice& model, const DriverFamily& family,
                                         const TerminalFamily& xi_family,
                                         std::span<const double> lam_seq, Selector sel,
                                         const CurveOptions& opts) {
  if (lam_seq.empty()) throw std::invalid_argument("lambda sequence is empty");
  const Assumptions& f = family.flags();
  if (!f.h1 || !f.h2 || !f.h3 || !f.h4) {
    throw std::invalid_argument("family '" + family.name() + "' must declare (H1')-(H4')");
  }
  std::vector<double> ms =
      opts.m_schedule.empty() ? default_m_schedule(family.growth_a()) : opts.m_schedule;
  double m_big = ms.back();
  EnvelopeKind kind = sel == Selector::Minimal ? EnvelopeKind::Lower : EnvelopeKind::Upper;
  EnvelopeFamily env_family(family, kind, m_big, model.dt());

  const double lam0 = family.lam0();
  Driver g0 = family.slice(lam0);
  TerminalValue xi0 = xi_family.at(lam0);
  EnvelopeDriver env0 = env_family.at(lam0);
  Generator gen0 = as_generator(env0);
  SolutionField base = solve_generator(model, gen0, xi0, opts.scheme);

  DependenceReport report;
  report.scheme_error_estimate = scheme_gap_estimate(model, gen0, xi0, base, opts.scheme);

  // E int |g^lam - g^lam0|^2 dt along the base solution, by exact lattice
  // quadrature (the right-hand side of the a priori estimate)
  auto quadrature = [&](const Driver& g_lam) {
    double acc = 0.0;
    for (int k = 0; k < model.steps(); ++k) {
      auto weights = model.node_weights(k);
      double t = model.time(k);
      double slice_acc = 0.0;
      for (int j = 0; j <= k; ++j) {
        double y0 = base.y.at(k, j);
        double z0 = base.z.at(k, j);
        double d = g_lam(t, y0, z0) - g0(t, y0, z0);
        slice_acc += weights[j] * d * d;
      }
      acc += slice_acc * model.dt();
    }
    return acc;
  };

  const int count = static_cast<int>(lam_seq.size());
  report.perturbations.resize(count);
  report.distances.assign(count, 0.0);
  std::vector<double> rhs(count, 0.0);
  parallel_for_index(count, opts.parallel, [&](int i) {
    double lam = lam_seq[i];
    EnvelopeDriver env_lam = env_family.at(lam);
    TerminalValue xi_lam = xi_family.at(lam);
    SolutionField sol = solve_generator(model, as_generator(env_lam), xi_lam, opts.scheme);
    report.distances[i] = sup_distance(sol, base, opts.metric);
    rhs[i] = terminal_l2_gap(model, xi_lam, xi0) + quadrature(family.slice(lam));
    report.perturbations[i] = PerturbationPoint{"lam=" + dsl::format_double(lam), lam - lam0};
  });
  for (int i = 0; i < count; ++i) {
    if (rhs[i] > 0.0) report.ratios.push_back(report.distances[i] / rhs[i]);
  }
  report.verdict = classify(report.distances, opts.converge_threshold,
                            report.scheme_error_estimate, &report.diverges_to);
  return report;
}

UniquenessResult uniqueness_gap(const Lattice& model, const Driver& driver,
                                const TerminalValue& xi, double m_max, Scheme scheme,
                                const SupDistanceOptions& metric) {
  if (scheme == Scheme::Explicit && m_max * model.dt() > 0.5 + 1e-12) {
    throw std::invalid_argument("m_max*dt = " + dsl::format_double(m_max * model.dt()) +
                                " violates the explicit step condition <= 1/2");
  }
  std::vector<double> schedule;
  for (double m = driver.growth_a() + 1.0; m <= m_max + 1e-12; m *= 2.0) schedule.push_back(m);
  if (schedule.empty()) {
    throw std::invalid_argument("m_max must be at least A+1 = " +
                                dsl::format_double(driver.growth_a() + 1.0));
  }
  auto mins = minimal_solution(model, driver, xi, schedule, scheme);
  auto maxs = maximal_solution(model, driver, xi, schedule, scheme);

  UniquenessResult out;
  out.m_schedule = schedule;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    out.per_m_gaps.push_back(sup_distance(mins[i], maxs[i], metric));
  }
  out.gap = out.per_m_gaps.back();

  EnvelopeDriver upper(driver, EnvelopeKind::Upper, schedule.back(), model.dt());
  EnvelopeDriver lower(driver, EnvelopeKind::Lower, schedule.back(), model.dt());
  out.scheme_error_estimate =
      std::max(scheme_gap_estimate(model, as_generator(upper), xi, maxs.back(), scheme),
               scheme_gap_estimate(model, as_generator(lower), xi, mins.back(), scheme));
  return out;
}

AprioriResult apriori_check(const Lattice& model, const Driver& driver,
                            std::span<const std::pair<TerminalValue, TerminalValue>> xi_pairs,
                            Scheme scheme, const SupDistanceOptions& metric) {
  if (!driver.lipschitz()) {
    throw std::invalid_argument("a priori check needs a driver with declared K");
  }
  AprioriResult out;
  for (const auto& [xi1, xi2] : xi_pairs) {
    double gap = terminal_l2_gap(model, xi1, xi2);
    if (gap == 0.0) {
      out.notes.push_back("skipped pair (" + xi1.name() + ", " + xi2.name() +
                          "): identical terminal values");
      continue;
    }
    SolutionField a = solve_lipschitz(model, driver, xi1, scheme);
    SolutionField b = solve_lipschitz(model, driver, xi2, scheme);
    out.ratios.push_back(sup_distance(a, b, metric) / gap);
  }
  return out;
}

// ---------------------------------------------------------------------------
// non-uniqueness counterexample

namespace {

double cube(double x) { return x * x * x; }

}  // namespace

OraclePoint counterexample_oracle(double horizon, long long n, double t) {
  if (n < 1) throw std::invalid_argument("counterexample index n must be >= 1");
  if (t < 0.0 || t > horizon) throw std::invalid_argument("t outside [0, T]");
  double c = 1.0 / std::cbrt(static_cast<double>(n));
  return OraclePoint{cube(horizon - t + c), 0.0, cube(horizon - t)};
}

double CounterexampleOracle::y_n(double t) const { return counterexample_oracle(horizon, n, t).y_n; }
double CounterexampleOracle::y_max(double t) const { return cube(horizon - t); }
double CounterexampleOracle::gap_constant() const { return cube(horizon) * cube(horizon); }

CounterexampleCurve counterexample_curve(double horizon, Selector sel,
                                         const CounterexampleOptions& opts) {
  std::vector<long long> ns = opts.n_list;
  if (ns.empty()) {
    for (long long n = 1; n <= 1024; n *= 2) ns.push_back(n);
  }
  Driver remark33 = std::get<Driver>(catalog_lookup("remark33"));
  EnvelopeKind kind = sel == Selector::Minimal ? EnvelopeKind::Lower : EnvelopeKind::Upper;

  CounterexampleCurve out;
  const int count = static_cast<int>(ns.size());
  out.points.resize(count);
  out.report.perturbations.resize(count);
  out.report.distances.assign(count, 0.0);
  std::vector<double> errs(count, 0.0);

  // Along these solutions the envelope coincides with the driver for any
  // grid step (the solution never drops below 27/m^3 where the two part
  // ways), so h need not shrink with dt; a fixed h keeps the per-step scan
  // cost flat while N grows to tame the Euler error near the singular
  // terminal data.
  const double grid_h = horizon / 256.0;
  parallel_for_index(count, true, [&](int i) {
    const long long n = ns[i];
    if (n < 1) throw std::invalid_argument("counterexample index n must be >= 1");
    const double xi_n = 1.0 / cube(static_cast<double>(n));
    const double m = 4.0 * static_cast<double>(n);
    const int steps =
        std::max(opts.min_steps, static_cast<int>(std::ceil(8.0 * n * horizon)));
    Lattice model(horizon, steps);

    EnvelopeDriver env(remark33, kind, m, grid_h);
    Generator gen = as_generator(env);
    std::vector<double> perturbed = solve_deterministic(model, gen, xi_n, opts.scheme);
    std::vector<double> base = solve_deterministic(model, gen, 0.0, opts.scheme);

    double dist = 0.0;
    for (int k = 0; k <= steps; ++k) {
      double d = perturbed[k] - base[k];
      dist = std::max(dist, d * d);
    }

    // Richardson-style error indicator: refine the time grid once
    {
      Lattice fine(horizon, 2 * steps);
      EnvelopeDriver env_fine(remark33, kind, m, grid_h);
      Generator gen_fine = as_generator(env_fine);
      std::vector<double> p2 = solve_deterministic(fine, gen_fine, xi_n, opts.scheme);
      std::vector<double> b2 = solve_deterministic(fine, gen_fine, 0.0, opts.scheme);
      double e = 0.0;
      for (int k = 0; k <= steps; ++k) {
        std::size_t fk = 2 * static_cast<std::size_t>(k);
        e = std::max(e, std::abs(perturbed[k] - p2[fk]));
        e = std::max(e, std::abs(base[k] - b2[fk]));
      }
      errs[i] = e;
    }

    // closed-form value of the same sup distance (both curves peak at t = 0)
    double c = 1.0 / static_cast<double>(n);
    double oracle = sel == Selector::Minimal
                        ? cube(horizon + c) * cube(horizon + c)
                        : (cube(horizon + c) - cube(horizon)) * (cube(horizon + c) - cube(horizon));

    out.points[i] = CounterexamplePoint{n, xi_n, dist, oracle};
    out.report.distances[i] = dist;
    out.report.perturbations[i] = PerturbationPoint{"n=" + std::to_string(n), xi_n * xi_n};
  });

  for (int i = 0; i < count; ++i) {
    if (out.report.perturbations[i].size > 0.0) {
      out.report.ratios.push_back(out.report.distances[i] / out.report.perturbations[i].size);
    }
    out.report.scheme_error_estimate = std::max(out.report.scheme_error_estimate, errs[i]);
  }
  out.report.verdict = classify(out.report.distances, opts.converge_threshold,
                                out.report.scheme_error_estimate, &out.report.diverges_to);
  return out;
}

}  // namespace bsdelab
