#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bsdelab/errors.hpp"

namespace bsdelab {

struct SamplingSpec {
  int max_enum_n = 20;
  int sample_count = 4096;
  std::uint64_t seed = 1;
};

// One experiment, as read from a config file (JSON or key = value lines) or
// assembled from CLI flags. Flat on purpose: every field maps 1:1 onto a
// config key / flag.
struct ExperimentConfig {
  std::string command;  // solve | envelope | dependence | counterexample | uniqueness

  // driver and terminal value
  std::string driver = "remark33";  // catalog name (with optional args) or DSL source
  std::optional<double> driver_a;   // growth constant for raw DSL drivers
  std::optional<double> driver_k;   // Lipschitz constant for raw DSL drivers
  std::string terminal = "0";       // DSL in w, or a constant

  // discretization
  double horizon = 1.0;
  int steps = 64;
  std::vector<double> m_schedule;  // empty -> default doubling schedule from A
  std::string scheme = "explicit";
  std::optional<double> h;  // envelope grid step (defaults: dt in solves, 0.01 for `envelope`)

  // envelope command grid
  double grid_y_min = -1.0;
  double grid_y_max = 1.0;
  double grid_y_step = 0.01;
  double grid_t = 0.0;
  double grid_z = 0.0;

  // dependence / uniqueness
  std::string selector = "max";            // min | max
  std::vector<std::string> perturbations;  // xi^n sources (DSL in w)
  std::vector<double> lambdas;             // parameter curve, with family below
  std::string family;                      // DSL over {t,y,z,lam} or catalog family name
  std::optional<double> family_a;
  std::optional<double> lam0;
  std::string terminal_family;  // DSL over {w, lam}; defaults to `terminal` if lam-free
  double converge_threshold = 1e-2;

  // counterexample
  std::vector<long long> n_list;  // empty -> 1,2,4,...,1024

  SamplingSpec sampling;
  std::string out_dir;  // empty -> $BSDELAB_OUT or ./out
};

// Parse a config file; format chosen by content ('{' starts JSON, otherwise
// key = value lines, '#' comments, ';'-separated string lists).
ExperimentConfig load_config_file(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);

// Set one field by config key; throws ConfigError on unknown keys or
// malformed values.
void apply_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Structural pre-flight checks. Empty result means run() will pass its
// preconditions; each diagnostic names the offending field and rule.
std::vector<std::string> validate(const ExperimentConfig& cfg);

// Canonical JSON echo (also what run records embed).
std::string config_to_json(const ExperimentConfig& cfg);

std::string default_out_dir();

}  // namespace bsdelab
