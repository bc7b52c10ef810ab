#include "bsdelab/solver.hpp"

#include <cmath>

#include "bsdelab/errors.hpp"

namespace bsdelab {

namespace {

constexpr double kFixedPointTol = 1e-12;
constexpr int kFixedPointMaxIters = 200;
constexpr double kCflSlack = 1e-12;

void check_step_condition(double k, double dt, Scheme scheme) {
  if (scheme == Scheme::Explicit) {
    if (k * dt > 0.5 + kCflSlack) {
      throw std::invalid_argument("explicit scheme needs K*dt <= 1/2, got " +
                                  dsl::format_double(k * dt));
    }
  } else if (k * dt >= 1.0) {
    throw std::invalid_argument("implicit scheme needs K*dt < 1, got " +
                                dsl::format_double(k * dt));
  }
}

double one_step(const Generator& g, Scheme scheme, double t, double expectation, double zval,
                double dt) {
  double yv;
  if (scheme == Scheme::Explicit) {
    yv = expectation + g.fn(t, expectation, zval) * dt;
  } else {
    yv = expectation;
    int it = 0;
    for (;;) {
      double next = expectation + g.fn(t, yv, zval) * dt;
      double delta = std::abs(next - yv);
      yv = next;
      if (delta <= kFixedPointTol) break;
      if (++it >= kFixedPointMaxIters) {
        throw NumericError("implicit fixed point did not converge in " +
                           std::to_string(kFixedPointMaxIters) + " iterations at t=" +
                           dsl::format_double(t) + " (step condition violated?)");
      }
    }
  }
  if (!std::isfinite(yv)) {
    throw NumericError("solver produced a non-finite value at t=" + dsl::format_double(t));
  }
  return yv;
}

}  // namespace

std::string_view scheme_name(Scheme s) { return s == Scheme::Explicit ? "explicit" : "implicit"; }

Scheme parse_scheme(std::string_view s) {
  if (s == "explicit") return Scheme::Explicit;
  if (s == "implicit") return Scheme::Implicit;
  throw std::invalid_argument("unknown scheme '" + std::string(s) + "'");
}

Generator as_generator(const Driver& d) {
  if (!d.lipschitz()) {
    throw std::invalid_argument("driver '" + d.name() +
                                "' has no declared Lipschitz constant; use the envelope scheme");
  }
  return Generator{[d](double t, double y, double z) { return d(t, y, z); }, *d.lipschitz(),
                   d.name()};
}

Generator as_generator(const EnvelopeDriver& e) {
  return Generator{[e](double t, double y, double z) { return e(t, y, z); }, e.lipschitz(),
                   e.name()};
}

SolutionField solve_generator(const Lattice& model, const Generator& g, const TerminalValue& xi,
                              Scheme scheme) {
  const int n = model.steps();
  const double dt = model.dt();
  check_step_condition(g.lipschitz, dt, scheme);

  SolutionField out{AdaptedField(n), AdaptedField(n > 0 ? n - 1 : 0), model,
                    SolveMeta{g.name, scheme, std::nullopt, std::nullopt}};
  for (int j = 0; j <= n; ++j) out.y.at(n, j) = xi(model.w(n, j));

  for (int k = n - 1; k >= 0; --k) {
    const double t = model.time(k);
    if (out.y.slice_constant(k + 1)) {
      // deterministic slice: z = 0 and one value serves every node
      double e = out.y.at(k + 1, 0);
      double yv = one_step(g, scheme, t, e, 0.0, dt);
      auto ys = out.y.slice(k);
      auto zs = out.z.slice(k);
      for (int j = 0; j <= k; ++j) {
        ys[j] = yv;
        zs[j] = 0.0;
      }
      continue;
    }
    for (int j = 0; j <= k; ++j) {
      double zv = martingale_coeff(model, out.y, k, j);
      double e = cond_expect(out.y, k, j);
      out.z.at(k, j) = zv;
      out.y.at(k, j) = one_step(g, scheme, t, e, zv, dt);
    }
  }
  return out;
}

SolutionField solve_lipschitz(const Lattice& model, const Driver& driver, const TerminalValue& xi,
                              Scheme scheme) {
  return solve_generator(model, as_generator(driver), xi, scheme);
}

SolutionField picard_iterate(const Lattice& model, const Driver& driver, const TerminalValue& xi,
                             int iters) {
  if (!driver.lipschitz()) {
    throw std::invalid_argument("picard iteration needs a declared Lipschitz constant");
  }
  if (iters < 1) throw std::invalid_argument("picard iteration needs at least one sweep");
  const int n = model.steps();
  const double dt = model.dt();

  SolutionField cur{AdaptedField(n), AdaptedField(n > 0 ? n - 1 : 0), model,
                    SolveMeta{driver.name(), Scheme::Explicit, std::nullopt, std::nullopt}};
  // (y^0, z^0) = (0, 0)
  double gap = std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < iters; ++sweep) {
    AdaptedField ynext(n), znext(n > 0 ? n - 1 : 0);
    for (int j = 0; j <= n; ++j) ynext.at(n, j) = xi(model.w(n, j));
    for (int k = n - 1; k >= 0; --k) {
      const double t = model.time(k);
      for (int j = 0; j <= k; ++j) {
        double frozen = driver(t, cur.y.at(k, j), cur.z.at(k, j));
        double yv = cond_expect(ynext, k, j) + frozen * dt;
        if (!std::isfinite(yv)) {
          throw NumericError("picard sweep produced a non-finite value");
        }
        znext.at(k, j) = martingale_coeff(model, ynext, k, j);
        ynext.at(k, j) = yv;
      }
    }
    gap = 0.0;
    for (int k = 0; k <= n; ++k) {
      auto a = cur.y.slice(k);
      auto b = ynext.slice(k);
      for (int j = 0; j <= k; ++j) gap = std::max(gap, std::abs(a[j] - b[j]));
    }
    cur.y = std::move(ynext);
    cur.z = std::move(znext);
  }
  cur.meta.picard_gap = gap;
  return cur;
}

namespace {

std::vector<SolutionField> envelope_sequence(const Lattice& model, const Driver& base,
                                             const TerminalValue& xi,
                                             std::span<const double> m_schedule,
                                             EnvelopeKind kind, Scheme scheme) {
  if (m_schedule.empty()) throw std::invalid_argument("m schedule is empty");
  for (std::size_t i = 1; i < m_schedule.size(); ++i) {
    if (!(m_schedule[i] > m_schedule[i - 1])) {
      throw std::invalid_argument("m schedule must be strictly increasing");
    }
  }
  if (!base.flags().h1 || !base.flags().h3) {
    throw std::invalid_argument("envelope scheme needs a driver declaring (H1) and (H3)");
  }
  std::vector<SolutionField> out;
  out.reserve(m_schedule.size());
  for (double m : m_schedule) {
    EnvelopeDriver env(base, kind, m, model.dt());
    SolutionField f = solve_generator(model, as_generator(env), xi, scheme);
    f.meta.m = m;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

std::vector<SolutionField> minimal_solution(const Lattice& model, const Driver& base,
                                            const TerminalValue& xi,
                                            std::span<const double> m_schedule, Scheme scheme) {
  return envelope_sequence(model, base, xi, m_schedule, EnvelopeKind::Lower, scheme);
}

std::vector<SolutionField> maximal_solution(const Lattice& model, const Driver& base,
                                            const TerminalValue& xi,
                                            std::span<const double> m_schedule, Scheme scheme) {
  return envelope_sequence(model, base, xi, m_schedule, EnvelopeKind::Upper, scheme);
}

std::vector<double> default_m_schedule(double growth_a, int count) {
  std::vector<double> out;
  double m = growth_a + 1.0;
  for (int i = 0; i < count; ++i) {
    out.push_back(m);
    m *= 2.0;
  }
  return out;
}

std::vector<double> admissible_m_schedule(double growth_a, double dt, Scheme scheme) {
  double cap = scheme == Scheme::Explicit ? 0.5 / dt : (1.0 - 1e-9) / dt;
  std::vector<double> out;
  for (double m : default_m_schedule(growth_a)) {
    if (m <= cap + kCflSlack) out.push_back(m);
  }
  return out;
}

int default_steps(double m_max, double horizon) {
  int n = 1;
  while (m_max * horizon / n > 0.5 && n < (1 << 28)) n *= 2;
  return n;
}

std::vector<double> solve_deterministic(const Lattice& model, const Generator& g, double xi0,
                                        Scheme scheme) {
  const int n = model.steps();
  const double dt = model.dt();
  check_step_condition(g.lipschitz, dt, scheme);
  std::vector<double> y(n + 1);
  y[n] = xi0;
  for (int k = n - 1; k >= 0; --k) {
    y[k] = one_step(g, scheme, model.time(k), y[k + 1], 0.0, dt);
  }
  return y;
}

}  // namespace bsdelab
