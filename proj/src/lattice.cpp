#include "bsdelab/lattice.hpp"

#include <cmath>
#include <random>

namespace bsdelab {

Lattice::Lattice(double horizon, int steps) : horizon_(horizon), steps_(steps) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon T must be positive");
  if (steps < 1) throw std::invalid_argument("step count N must be >= 1");
  dt_ = horizon_ / steps_;
  sqrt_dt_ = std::sqrt(dt_);
}

std::vector<double> Lattice::node_weights(int k) const {
  if (k < 0 || k > steps_) throw std::out_of_range("step out of range");
  std::vector<double> w(k + 1);
  w[0] = std::ldexp(1.0, -k);  // 2^-k
  for (int j = 0; j < k; ++j) w[j + 1] = w[j] * double(k - j) / double(j + 1);
  return w;
}

AdaptedField::AdaptedField(int last_step) : last_step_(last_step) {
  if (last_step < 0) throw std::invalid_argument("field needs at least step 0");
  data_.assign(static_cast<std::size_t>(last_step + 1) * (last_step + 2) / 2, 0.0);
}

bool AdaptedField::slice_constant(int k) const {
  auto s = slice(k);
  for (double v : s) {
    if (v != s[0]) return false;
  }
  return true;
}

bool AdaptedField::deterministic() const {
  for (int k = 0; k <= last_step_; ++k) {
    if (!slice_constant(k)) return false;
  }
  return true;
}

double cond_expect(const AdaptedField& f, int k, int j) {
  return 0.5 * f.at(k + 1, j) + 0.5 * f.at(k + 1, j + 1);
}

double martingale_coeff(const Lattice& model, const AdaptedField& f, int k, int j) {
  return (f.at(k + 1, j + 1) - f.at(k + 1, j)) / (2.0 * model.sqrt_dt());
}

void for_each_path(const Lattice& model, const std::function<void(const PathVisit&)>& visit,
                   int max_steps) {
  const int n = model.steps();
  if (n > max_steps) {
    throw std::invalid_argument("N = " + std::to_string(n) + " exceeds enumeration limit " +
                                std::to_string(max_steps) + "; use sample_paths");
  }
  std::vector<int> levels(n + 1, 0);
  std::vector<int> signs(n, 0);
  // iterate over all sign words; recursion kept implicit via the counter
  const std::uint64_t total = std::uint64_t(1) << n;
  for (std::uint64_t word = 0; word < total; ++word) {
    int j = 0;
    for (int k = 0; k < n; ++k) {
      const bool up = (word >> k) & 1u;
      signs[k] = up ? 1 : -1;
      if (up) ++j;
      levels[k + 1] = j;
    }
    visit(PathVisit{levels, signs});
  }
}

void sample_paths(const Lattice& model, int count, std::uint64_t seed,
                  const std::function<void(const PathVisit&)>& visit) {
  const int n = model.steps();
  std::mt19937_64 rng(seed);
  std::vector<int> levels(n + 1, 0);
  std::vector<int> signs(n, 0);
  for (int i = 0; i < count; ++i) {
    int j = 0;
    std::uint64_t bits = 0;
    int have = 0;
    for (int k = 0; k < n; ++k) {
      if (have == 0) {
        bits = rng();
        have = 64;
      }
      const bool up = bits & 1u;
      bits >>= 1;
      --have;
      signs[k] = up ? 1 : -1;
      if (up) ++j;
      levels[k + 1] = j;
    }
    visit(PathVisit{levels, signs});
  }
}

}  // namespace bsdelab
