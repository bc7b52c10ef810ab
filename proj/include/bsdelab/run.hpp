#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bsdelab/config.hpp"

namespace bsdelab {

struct OutputFile {
  std::string path;
  std::uint64_t bytes = 0;
};

struct RunRecord {
  std::string config_echo;  // canonical JSON
  std::string version;
  double wall_ms = 0.0;
  std::optional<double> scheme_error_estimate;
  std::vector<OutputFile> outputs;  // data products, excluding the record itself
  std::string record_path;
};

// Validate, dispatch to the experiment modules, persist CSV/JSON outputs and
// a run record under the configured output directory. Throws ConfigError on
// validation failures and NumericError (or module exceptions) on runtime
// failures.
RunRecord run(const ExperimentConfig& cfg);

}  // namespace bsdelab
