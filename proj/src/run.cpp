#include "bsdelab/run.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "bsdelab/dependence.hpp"
#include "bsdelab/version.hpp"

namespace bsdelab {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using dsl::format_double;

namespace {

OutputFile write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  out.close();
  return OutputFile{path.string(), static_cast<std::uint64_t>(fs::file_size(path))};
}

std::string csv_row(const std::vector<std::string>& cells) {
  std::string row;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) row += ',';
    row += cells[i];
  }
  row += '\n';
  return row;
}

// default doubling schedule from A, capped by the step condition
std::vector<double> admissible_schedule(double growth_a, double dt, Scheme scheme) {
  std::vector<double> out = admissible_m_schedule(growth_a, dt, scheme);
  if (out.empty()) {
    throw ConfigError("no admissible envelope index: need m > A = " + format_double(growth_a) +
                      " with the step condition; increase N");
  }
  return out;
}

DriverFamily resolve_family(const ExperimentConfig& cfg) {
  if (!cfg.family.empty()) {
    bool catalogish = false;
    for (const auto& n : catalog_names()) {
      if (n == cfg.family) catalogish = true;
    }
    if (catalogish) {
      CatalogEntry entry = catalog_lookup(cfg.family);
      if (auto* fam = std::get_if<DriverFamily>(&entry)) return *fam;
      throw ConfigError("catalog entry '" + cfg.family + "' is a driver, not a family");
    }
    if (!cfg.family_a) {
      throw ConfigError("family '" + cfg.family + "' needs a declared growth constant family_a");
    }
    double lam0 = cfg.lam0.value_or(0.0);
    double lo = lam0, hi = lam0;
    for (double l : cfg.lambdas) {
      lo = std::min(lo, l);
      hi = std::max(hi, l);
    }
    return DriverFamily(dsl::parse(cfg.family), lo, hi, lam0, *cfg.family_a, std::nullopt, {},
                        cfg.family);
  }
  throw ConfigError("lambda curves need a family");
}

struct CommandOutput {
  std::vector<OutputFile> files;
  std::optional<double> scheme_error_estimate;
  std::string summary_line;
};

std::string report_json(const DependenceReport& r) {
  ordered_json j;
  j["perturbations"] = ordered_json::array();
  for (const auto& p : r.perturbations) {
    j["perturbations"].push_back({{"label", p.label}, {"size", p.size}});
  }
  j["distances"] = r.distances;
  j["verdict"] = verdict_string(r.verdict, r.diverges_to);
  j["ratios"] = r.ratios;
  return j.dump(2) + "\n";
}

std::string report_csv(const DependenceReport& r) {
  std::string csv = csv_row({"label", "size", "distance"});
  for (std::size_t i = 0; i < r.distances.size(); ++i) {
    csv += csv_row({r.perturbations[i].label, format_double(r.perturbations[i].size),
                    format_double(r.distances[i])});
  }
  return csv;
}

double field_gap(const AdaptedField& a, const AdaptedField& b) {
  double gap = 0.0;
  for (int k = 0; k <= a.last_step(); ++k) {
    auto sa = a.slice(k);
    auto sb = b.slice(k);
    for (int j = 0; j <= k; ++j) gap = std::max(gap, std::abs(sa[j] - sb[j]));
  }
  return gap;
}

CommandOutput run_solve(const ExperimentConfig& cfg, const fs::path& dir) {
  Lattice model(cfg.horizon, cfg.steps);
  Driver driver = resolve_driver(cfg.driver, cfg.driver_a, cfg.driver_k);
  TerminalValue xi = TerminalValue::parse(cfg.terminal);
  Scheme scheme = parse_scheme(cfg.scheme);
  Scheme other = scheme == Scheme::Explicit ? Scheme::Implicit : Scheme::Explicit;

  std::optional<double> estimate;
  // gap against the other one-step rule tracks the scheme error scale
  auto estimate_from = [&](const SolutionField& ref, const Generator& gen) {
    try {
      estimate = field_gap(ref.y, solve_generator(model, gen, xi, other).y);
    } catch (const std::invalid_argument&) {
      // other scheme inadmissible at this step size; leave the estimate unset
    }
  };

  SolutionField sol = [&] {
    if (driver.lipschitz()) {
      SolutionField s = solve_lipschitz(model, driver, xi, scheme);
      estimate_from(s, as_generator(driver));
      return s;
    }
    std::vector<double> ms = cfg.m_schedule.empty()
                                 ? admissible_schedule(driver.growth_a(), model.dt(), scheme)
                                 : cfg.m_schedule;
    Selector sel = parse_selector(cfg.selector);
    auto seq = sel == Selector::Minimal ? minimal_solution(model, driver, xi, ms, scheme)
                                        : maximal_solution(model, driver, xi, ms, scheme);
    EnvelopeDriver env(driver,
                       sel == Selector::Minimal ? EnvelopeKind::Lower : EnvelopeKind::Upper,
                       ms.back(), model.dt());
    estimate_from(seq.back(), as_generator(env));
    return std::move(seq.back());
  }();

  std::string csv = csv_row({"t", "y_root", "min_y", "max_y"});
  for (int k = 0; k <= model.steps(); ++k) {
    auto slice = sol.y.slice(k);
    double lo = slice[0], hi = slice[0];
    for (double v : slice) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    double center = slice[k / 2];  // node with w closest to 0
    csv += csv_row({format_double(model.time(k)), format_double(center), format_double(lo),
                    format_double(hi)});
  }

  ordered_json summary;
  summary["driver"] = driver.name();
  summary["scheme"] = std::string(scheme_name(scheme));
  summary["N"] = model.steps();
  if (sol.meta.m) {
    summary["m"] = *sol.meta.m;
  } else {
    summary["m"] = nullptr;
  }
  summary["y0"] = sol.y_root();

  CommandOutput out;
  out.files.push_back(write_text(dir / "solve.csv", csv));
  out.files.push_back(write_text(dir / "solve_summary.json", summary.dump(2) + "\n"));
  out.scheme_error_estimate = estimate;
  out.summary_line = "y0 = " + format_double(sol.y_root());
  return out;
}

CommandOutput run_envelope(const ExperimentConfig& cfg, const fs::path& dir) {
  Driver driver = resolve_driver(cfg.driver, cfg.driver_a, cfg.driver_k);
  std::vector<double> ms =
      cfg.m_schedule.empty() ? default_m_schedule(driver.growth_a()) : cfg.m_schedule;
  double h = cfg.h.value_or(0.01);
  double t = cfg.grid_t, z = cfg.grid_z;

  int count = static_cast<int>(std::llround((cfg.grid_y_max - cfg.grid_y_min) / cfg.grid_y_step));
  std::string csv = csv_row({"kind", "m", "t", "y", "z", "value"});
  for (const char* kind : {"lower", "upper"}) {
    bool low = std::string(kind) == "lower";
    for (double m : ms) {
      for (int i = 0; i <= count; ++i) {
        double y = cfg.grid_y_min + i * cfg.grid_y_step;
        double v = low ? lower_envelope(driver, m, t, y, z, h)
                       : upper_envelope(driver, m, t, y, z, h);
        csv += csv_row({kind, format_double(m), format_double(t), format_double(y),
                        format_double(z), format_double(v)});
      }
    }
  }
  CommandOutput out;
  out.files.push_back(write_text(dir / "envelope.csv", csv));
  out.summary_line = std::to_string((count + 1) * 2 * ms.size()) + " envelope values";
  return out;
}

CommandOutput run_dependence(const ExperimentConfig& cfg, const fs::path& dir) {
  Lattice model(cfg.horizon, cfg.steps);
  Scheme scheme = parse_scheme(cfg.scheme);
  Selector sel = parse_selector(cfg.selector);

  CurveOptions opts;
  opts.scheme = scheme;
  opts.converge_threshold = cfg.converge_threshold;
  opts.metric = SupDistanceOptions{cfg.sampling.max_enum_n, cfg.sampling.sample_count,
                                   cfg.sampling.seed};

  DependenceReport report;
  if (!cfg.lambdas.empty()) {
    DriverFamily family = resolve_family(cfg);
    opts.m_schedule = cfg.m_schedule.empty()
                          ? admissible_schedule(family.growth_a(), model.dt(), scheme)
                          : cfg.m_schedule;
    std::string tf = cfg.terminal_family.empty() ? cfg.terminal : cfg.terminal_family;
    TerminalFamily xi_family = TerminalFamily::parse(tf);
    report = lambda_dependence_curve(model, family, xi_family, cfg.lambdas, sel, opts);
  } else {
    Driver driver = resolve_driver(cfg.driver, cfg.driver_a, cfg.driver_k);
    opts.m_schedule = cfg.m_schedule.empty()
                          ? admissible_schedule(driver.growth_a(), model.dt(), scheme)
                          : cfg.m_schedule;
    TerminalValue xi = TerminalValue::parse(cfg.terminal);
    std::vector<TerminalValue> seq;
    for (const auto& p : cfg.perturbations) seq.push_back(TerminalValue::parse(p));
    report = xi_dependence_curve(model, driver, xi, seq, sel, opts);
  }

  CommandOutput out;
  out.files.push_back(write_text(dir / "dependence.json", report_json(report)));
  out.files.push_back(write_text(dir / "dependence.csv", report_csv(report)));
  out.scheme_error_estimate = report.scheme_error_estimate;
  out.summary_line = "verdict: " + verdict_string(report.verdict, report.diverges_to);
  return out;
}

CommandOutput run_counterexample(const ExperimentConfig& cfg, const fs::path& dir) {
  CounterexampleOptions opts;
  opts.n_list = cfg.n_list;
  opts.min_steps = std::max(1024, cfg.steps);
  opts.scheme = parse_scheme(cfg.scheme);
  opts.converge_threshold = cfg.converge_threshold;
  CounterexampleCurve curve = counterexample_curve(cfg.horizon, parse_selector(cfg.selector), opts);

  std::string csv = csv_row({"n", "terminal", "distance", "oracle_distance"});
  for (const auto& p : curve.points) {
    csv += csv_row({std::to_string(p.n), format_double(p.terminal), format_double(p.distance),
                    format_double(p.oracle_distance)});
  }

  CommandOutput out;
  out.files.push_back(write_text(dir / "counterexample.json", report_json(curve.report)));
  out.files.push_back(write_text(dir / "counterexample.csv", csv));
  out.scheme_error_estimate = curve.report.scheme_error_estimate;
  out.summary_line =
      "verdict: " + verdict_string(curve.report.verdict, curve.report.diverges_to) +
      ", last distance = " + format_double(curve.report.distances.back());
  return out;
}

CommandOutput run_uniqueness(const ExperimentConfig& cfg, const fs::path& dir) {
  Lattice model(cfg.horizon, cfg.steps);
  Scheme scheme = parse_scheme(cfg.scheme);
  Driver driver = resolve_driver(cfg.driver, cfg.driver_a, cfg.driver_k);
  TerminalValue xi = TerminalValue::parse(cfg.terminal);
  double m_max = cfg.m_schedule.empty()
                     ? admissible_schedule(driver.growth_a(), model.dt(), scheme).back()
                     : cfg.m_schedule.back();
  SupDistanceOptions metric{cfg.sampling.max_enum_n, cfg.sampling.sample_count, cfg.sampling.seed};
  UniquenessResult res = uniqueness_gap(model, driver, xi, m_max, scheme, metric);

  ordered_json j;
  j["gap"] = res.gap;
  j["m_schedule"] = res.m_schedule;
  j["per_m_gaps"] = res.per_m_gaps;
  j["scheme_error_estimate"] = res.scheme_error_estimate;

  std::string csv = csv_row({"m", "gap"});
  for (std::size_t i = 0; i < res.m_schedule.size(); ++i) {
    csv += csv_row({format_double(res.m_schedule[i]), format_double(res.per_m_gaps[i])});
  }

  CommandOutput out;
  out.files.push_back(write_text(dir / "uniqueness.json", j.dump(2) + "\n"));
  out.files.push_back(write_text(dir / "uniqueness.csv", csv));
  out.scheme_error_estimate = res.scheme_error_estimate;
  out.summary_line = "gap = " + format_double(res.gap);
  return out;
}

}  // namespace

RunRecord run(const ExperimentConfig& cfg) {
  std::vector<std::string> diags = validate(cfg);
  if (!diags.empty()) {
    std::string msg = "config validation failed:";
    for (const auto& d : diags) msg += "\n  " + d;
    throw ConfigError(msg);
  }

  fs::path dir = cfg.out_dir.empty() ? default_out_dir() : cfg.out_dir;
  fs::create_directories(dir);

  auto started = std::chrono::steady_clock::now();
  CommandOutput result;
  try {
    if (cfg.command == "solve") {
      result = run_solve(cfg, dir);
    } else if (cfg.command == "envelope") {
      result = run_envelope(cfg, dir);
    } else if (cfg.command == "dependence") {
      result = run_dependence(cfg, dir);
    } else if (cfg.command == "counterexample") {
      result = run_counterexample(cfg, dir);
    } else if (cfg.command == "uniqueness") {
      result = run_uniqueness(cfg, dir);
    } else {
      throw ConfigError("unknown command '" + cfg.command + "'");
    }
  } catch (const std::invalid_argument& e) {
    // module preconditions surface as config errors, prefixed with the command
    throw ConfigError(cfg.command + ": " + e.what());
  }
  auto elapsed = std::chrono::steady_clock::now() - started;

  RunRecord record;
  record.config_echo = config_to_json(cfg);
  record.version = kVersion;
  record.wall_ms = std::chrono::duration<double, std::milli>(elapsed).count();
  record.scheme_error_estimate = result.scheme_error_estimate;
  record.outputs = result.files;

  ordered_json j;
  j["version"] = record.version;
  j["wall_ms"] = record.wall_ms;
  if (record.scheme_error_estimate) {
    j["scheme_error_estimate"] = *record.scheme_error_estimate;
  } else {
    j["scheme_error_estimate"] = nullptr;
  }
  j["outputs"] = ordered_json::array();
  for (const auto& f : record.outputs) {
    j["outputs"].push_back({{"path", f.path}, {"bytes", f.bytes}});
  }
  j["summary"] = result.summary_line;
  j["config"] = ordered_json::parse(record.config_echo);
  fs::path record_path = dir / "run_record.json";
  write_text(record_path, j.dump(2) + "\n");
  record.record_path = record_path.string();
  return record;
}

}  // namespace bsdelab
