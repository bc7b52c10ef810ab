#include "bsdelab/envelope.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <unordered_map>
#include <utility>

#include "bsdelab/errors.hpp"

namespace bsdelab {

double search_radius(double growth_a, double m, double y, std::span<const double> z) {
  if (!(growth_a >= 0.0)) throw std::invalid_argument("growth constant A must be nonnegative");
  if (!(m > growth_a)) {
    throw std::invalid_argument("envelope index m = " + dsl::format_double(m) +
                                " must exceed the growth constant A = " +
                                dsl::format_double(growth_a));
  }
  double zn = 0.0;
  for (double v : z) zn += v * v;
  zn = std::sqrt(zn);
  return 2.0 * growth_a * (1.0 + std::abs(y) + zn) / (m - growth_a);
}

namespace {

constexpr int kGoldenIters = 40;
constexpr double kInvPhi = 0.6180339887498949;
constexpr std::size_t kMaxGridPoints = 50'000'000;

// golden-section minimization on [a,b]; returns the best probed (x, f(x))
template <class F>
std::pair<double, double> golden_min(F&& f, double a, double b) {
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  double bx = f1 <= f2 ? x1 : x2;
  double bf = std::min(f1, f2);
  for (int i = 0; i < kGoldenIters; ++i) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    }
    if (f1 < bf) {
      bf = f1;
      bx = x1;
    }
    if (f2 < bf) {
      bf = f2;
      bx = x2;
    }
  }
  return {bx, bf};
}

// Minimize sign*g + m*rho over the grid, then polish. sign = +1 gives the
// lower envelope directly; sign = -1 gives -(upper envelope).
template <class G>
double envelope_core(G&& g, double growth_a, bool opt_y, bool opt_z, double sign, double m,
                     double t, double y, std::span<const double> z, double h) {
  const int d = static_cast<int>(z.size());
  if (d < 1 || d > 3) throw std::invalid_argument("envelope supports z dimension 1..3");
  if (!(h > 0.0)) throw std::invalid_argument("grid step h must be positive");
  const double r = search_radius(growth_a, m, y, z);
  const double slack = h * (1 + d);

  double vbuf[3] = {0, 0, 0};
  auto phi_at = [&](double u, const double* v) {
    double sq = 0.0;
    for (int i = 0; i < d; ++i) sq += (v[i] - z[i]) * (v[i] - z[i]);
    double rho = std::abs(u - y) + std::sqrt(sq);
    double val = g(t, u, std::span<const double>(v, static_cast<std::size_t>(d)));
    return sign * val + m * rho;
  };

  const double axis_points = std::ceil(r / h);
  {
    double estimate = opt_y ? 2.0 * axis_points + 1.0 : 1.0;
    for (int i = 0; i < d && opt_z; ++i) estimate *= 2.0 * axis_points + 1.0;
    if (!(estimate <= static_cast<double>(kMaxGridPoints))) {
      throw std::invalid_argument("envelope grid would need ~" +
                                  std::to_string(static_cast<long long>(
                                      std::min(estimate, 1e18))) +
                                  " points; increase h or m");
    }
  }
  const int nu = opt_y ? static_cast<int>(axis_points) : 0;

  double best = std::numeric_limits<double>::infinity();
  double best_u = y;
  double best_v[3] = {0, 0, 0};
  for (int i = 0; i < d; ++i) best_v[i] = z[i];

  double u = y;
  double du = 0.0;
  auto scan_z = [&](auto&& self, int axis, double sq) -> void {
    if (axis == d) {
      double rho = du + std::sqrt(sq);
      if (rho > r + slack) return;
      double val = sign * g(t, u, std::span<const double>(vbuf, static_cast<std::size_t>(d))) +
                   m * rho;
      if (val < best) {
        best = val;
        best_u = u;
        for (int i = 0; i < d; ++i) best_v[i] = vbuf[i];
      }
      return;
    }
    if (!opt_z) {
      vbuf[axis] = z[axis];
      self(self, axis + 1, sq);
      return;
    }
    double remaining = r + slack - du;
    double axis_span = std::sqrt(std::max(0.0, remaining * remaining - sq));
    int nv = static_cast<int>(std::ceil(axis_span / h));
    for (int iv = -nv; iv <= nv; ++iv) {
      vbuf[axis] = z[axis] + iv * h;  // iv = 0 pins the query point exactly
      self(self, axis + 1, sq + (iv * h) * (iv * h));
    }
  };

  for (int iu = -nu; iu <= nu; ++iu) {
    u = y + iu * h;
    du = std::abs(static_cast<double>(iu)) * h;
    if (du > r + slack) continue;
    scan_z(scan_z, 0, 0.0);
  }

  // One golden-section pass per active coordinate, refining each side of the
  // best grid point separately (the objective has a kink at the grid point,
  // and sub-grid spikes sit on one side of it).
  if (opt_y) {
    auto f = [&](double uu) { return phi_at(uu, best_v); };
    for (auto [lo, hi] : {std::pair{best_u - h, best_u}, std::pair{best_u, best_u + h}}) {
      auto [x, fx] = golden_min(f, lo, hi);
      if (fx < best) {
        best = fx;
        best_u = x;
      }
    }
  }
  if (opt_z) {
    for (int axis = 0; axis < d; ++axis) {
      double probe[3] = {best_v[0], best_v[1], best_v[2]};
      auto f = [&](double vv) {
        probe[axis] = vv;
        return phi_at(best_u, probe);
      };
      double center = best_v[axis];
      for (auto [lo, hi] : {std::pair{center - h, center}, std::pair{center, center + h}}) {
        auto [x, fx] = golden_min(f, lo, hi);
        if (fx < best) {
          best = fx;
          best_v[axis] = x;
        }
      }
    }
  }
  return sign * best;
}

double checked_call(const EnvelopeBase& base, double t, double y, std::span<const double> z) {
  double v = base.fn(t, y, z);
  if (!std::isfinite(v)) {
    throw NumericError("envelope base generator returned a non-finite value at t=" +
                       dsl::format_double(t) + ", y=" + dsl::format_double(y));
  }
  return v;
}

}  // namespace

double lower_envelope(const EnvelopeBase& base, double m, double t, double y,
                      std::span<const double> z, double h) {
  auto g = [&](double tt, double yy, std::span<const double> zz) {
    return checked_call(base, tt, yy, zz);
  };
  return envelope_core(g, base.growth_a, base.optimize_y, base.optimize_z, +1.0, m, t, y, z, h);
}

double upper_envelope(const EnvelopeBase& base, double m, double t, double y,
                      std::span<const double> z, double h) {
  auto g = [&](double tt, double yy, std::span<const double> zz) {
    return checked_call(base, tt, yy, zz);
  };
  return envelope_core(g, base.growth_a, base.optimize_y, base.optimize_z, -1.0, m, t, y, z, h);
}

double lower_envelope(const Driver& base, double m, double t, double y, double z, double h) {
  auto g = [&](double tt, double yy, std::span<const double> zz) { return base(tt, yy, zz[0]); };
  return envelope_core(g, base.growth_a(), base.uses_y(), base.uses_z(), +1.0, m, t, y,
                       std::span<const double>(&z, 1), h);
}

double upper_envelope(const Driver& base, double m, double t, double y, double z, double h) {
  auto g = [&](double tt, double yy, std::span<const double> zz) { return base(tt, yy, zz[0]); };
  return envelope_core(g, base.growth_a(), base.uses_y(), base.uses_z(), -1.0, m, t, y,
                       std::span<const double>(&z, 1), h);
}

// ---------------------------------------------------------------------------
// EnvelopeDriver

namespace {

struct TripleKey {
  std::uint64_t t, y, z;
  bool operator==(const TripleKey&) const = default;
};

struct TripleHash {
  std::size_t operator()(const TripleKey& k) const {
    std::uint64_t h = k.t * 0x9e3779b97f4a7c15ull;
    h ^= k.y + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= k.z + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

struct EnvelopeDriver::Memo {
  std::mutex mu;
  std::unordered_map<TripleKey, double, TripleHash> values;
};

EnvelopeDriver::EnvelopeDriver(Driver base, EnvelopeKind kind, double m, double grid_step)
    : base_(std::move(base)),
      kind_(kind),
      m_(m),
      grid_step_(grid_step),
      memo_(std::make_shared<Memo>()) {
  if (!(m_ > base_.growth_a())) {
    throw std::invalid_argument("envelope index m = " + dsl::format_double(m_) +
                                " must exceed the base growth constant A = " +
                                dsl::format_double(base_.growth_a()));
  }
  if (!(grid_step_ > 0.0)) throw std::invalid_argument("grid step must be positive");
}

double EnvelopeDriver::operator()(double t, double y, double z) const {
  TripleKey key{std::bit_cast<std::uint64_t>(t), std::bit_cast<std::uint64_t>(y),
                std::bit_cast<std::uint64_t>(z)};
  {
    std::lock_guard<std::mutex> lock(memo_->mu);
    auto it = memo_->values.find(key);
    if (it != memo_->values.end()) return it->second;
  }
  double v = kind_ == EnvelopeKind::Lower ? lower_envelope(base_, m_, t, y, z, grid_step_)
                                          : upper_envelope(base_, m_, t, y, z, grid_step_);
  std::lock_guard<std::mutex> lock(memo_->mu);
  memo_->values.emplace(key, v);  // deterministic value: races are benign
  return v;
}

std::string EnvelopeDriver::name() const {
  return (kind_ == EnvelopeKind::Lower ? "lower_env(" : "upper_env(") + base_.name() +
         ", m=" + dsl::format_double(m_) + ")";
}

EnvelopeFamily::EnvelopeFamily(DriverFamily family, EnvelopeKind kind, double m, double grid_step)
    : family_(std::move(family)), kind_(kind), m_(m), grid_step_(grid_step) {
  if (!(m_ > family_.growth_a())) {
    throw std::invalid_argument("envelope index m must exceed the family growth constant A");
  }
  if (!family_.flags().h4) {
    throw std::invalid_argument("family '" + family_.name() +
                                "' does not declare continuity in lambda (H4')");
  }
}

EnvelopeDriver EnvelopeFamily::at(double lam) const {
  return EnvelopeDriver(family_.slice(lam), kind_, m_, grid_step_);
}

EnvelopeFamily envelope_family(DriverFamily family, double m, EnvelopeKind kind,
                               double grid_step) {
  return EnvelopeFamily(std::move(family), kind, m, grid_step);
}

}  // namespace bsdelab
