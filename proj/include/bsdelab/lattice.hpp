#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace bsdelab {

// Recombining Bernoulli random walk approximating 1-d Brownian motion on
// [0,T]: N steps of +-sqrt(dt) with probability 1/2 each. Node (k,j) for step
// k in 0..N and level j in 0..k carries w(k,j) = (2j-k)*sqrt(dt). Children of
// (k,j) are (k+1,j) (down) and (k+1,j+1) (up). Immutable after construction.
class Lattice {
 public:
  Lattice(double horizon, int steps);

  double horizon() const { return horizon_; }
  int steps() const { return steps_; }
  double dt() const { return dt_; }
  double sqrt_dt() const { return sqrt_dt_; }
  double time(int k) const { return k * dt_; }
  double w(int k, int j) const { return (2.0 * j - k) * sqrt_dt_; }
  int nodes_at(int k) const { return k + 1; }

  bool same_as(const Lattice& other) const {
    return steps_ == other.steps_ && horizon_ == other.horizon_;
  }

  // P(node (k,j)) = C(k,j) 2^-k, computed by recurrence
  std::vector<double> node_weights(int k) const;

 private:
  double horizon_;
  int steps_;
  double dt_;
  double sqrt_dt_;
};

// An F-adapted process sampled on the lattice: one value per node for steps
// 0..last_step. Triangular storage, written once during backward induction
// and immutable afterwards.
class AdaptedField {
 public:
  explicit AdaptedField(int last_step);

  int last_step() const { return last_step_; }

  double& at(int k, int j) { return data_[index(k, j)]; }
  double at(int k, int j) const { return data_[index(k, j)]; }

  std::span<double> slice(int k) { return {data_.data() + offset(k), static_cast<std::size_t>(k + 1)}; }
  std::span<const double> slice(int k) const {
    return {data_.data() + offset(k), static_cast<std::size_t>(k + 1)};
  }

  // all values of slice k identical (bitwise); deterministic processes are
  // slice-constant and several metrics collapse for them
  bool slice_constant(int k) const;
  bool deterministic() const;  // every slice constant

 private:
  std::size_t offset(int k) const { return static_cast<std::size_t>(k) * (k + 1) / 2; }
  std::size_t index(int k, int j) const {
    if (k < 0 || k > last_step_ || j < 0 || j > k) throw std::out_of_range("lattice node out of range");
    return offset(k) + j;
  }

  int last_step_;
  std::vector<double> data_;
};

// E[f_{k+1} | node (k,j)] = (f(k+1,j) + f(k+1,j+1)) / 2. f must be defined at
// step k+1 (out_of_range otherwise).
double cond_expect(const AdaptedField& f, int k, int j);

// The unique z with f(k+1,.) = E[f] + z * dW on the two branches:
// (f(k+1,j+1) - f(k+1,j)) / (2 sqrt(dt)).
double martingale_coeff(const Lattice& model, const AdaptedField& f, int k, int j);

inline constexpr int kDefaultMaxEnumSteps = 20;

// One realized trajectory: levels[k] is the node level after k steps
// (levels[0] = 0), signs[k] in {-1,+1} is the k-th increment sign.
struct PathVisit {
  std::span<const int> levels;      // size N+1
  std::span<const int> signs;       // size N
};

// Exhaustive enumeration of all 2^N paths, each with probability 2^-N.
// Throws std::invalid_argument when N exceeds max_steps (use sampling then).
void for_each_path(const Lattice& model, const std::function<void(const PathVisit&)>& visit,
                   int max_steps = kDefaultMaxEnumSteps);

// Seeded uniform path sampling for lattices too deep to enumerate.
void sample_paths(const Lattice& model, int count, std::uint64_t seed,
                  const std::function<void(const PathVisit&)>& visit);

}  // namespace bsdelab
