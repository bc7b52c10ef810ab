#include "bsdelab/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bsdelab/dependence.hpp"
#include "bsdelab/driver.hpp"
#include "bsdelab/solver.hpp"

namespace bsdelab {

namespace {

using nlohmann::ordered_json;

const std::set<std::string> kCommands = {"solve", "envelope", "dependence", "counterexample",
                                         "uniqueness"};

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_num(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": malformed number '" + value + "'");
  }
}

std::vector<double> parse_num_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_num(key, item));
  }
  return out;
}

std::vector<std::string> parse_str_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

std::string default_out_dir() {
  if (const char* env = std::getenv("BSDELAB_OUT"); env && *env) return env;
  return "out";
}

void apply_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "command") {
    cfg.command = value;
  } else if (key == "driver") {
    cfg.driver = value;
  } else if (key == "driver_a") {
    cfg.driver_a = parse_num(key, value);
  } else if (key == "driver_k") {
    cfg.driver_k = parse_num(key, value);
  } else if (key == "terminal") {
    cfg.terminal = value;
  } else if (key == "T") {
    cfg.horizon = parse_num(key, value);
  } else if (key == "N") {
    cfg.steps = static_cast<int>(parse_num(key, value));
  } else if (key == "m") {
    cfg.m_schedule = parse_num_list(key, value);
  } else if (key == "scheme") {
    cfg.scheme = value;
  } else if (key == "h") {
    cfg.h = parse_num(key, value);
  } else if (key == "grid_y_min") {
    cfg.grid_y_min = parse_num(key, value);
  } else if (key == "grid_y_max") {
    cfg.grid_y_max = parse_num(key, value);
  } else if (key == "grid_y_step") {
    cfg.grid_y_step = parse_num(key, value);
  } else if (key == "grid_t") {
    cfg.grid_t = parse_num(key, value);
  } else if (key == "grid_z") {
    cfg.grid_z = parse_num(key, value);
  } else if (key == "selector") {
    cfg.selector = value;
  } else if (key == "perturbations") {
    cfg.perturbations = parse_str_list(value);
  } else if (key == "lambdas") {
    cfg.lambdas = parse_num_list(key, value);
  } else if (key == "family") {
    cfg.family = value;
  } else if (key == "family_a") {
    cfg.family_a = parse_num(key, value);
  } else if (key == "lam0") {
    cfg.lam0 = parse_num(key, value);
  } else if (key == "terminal_family") {
    cfg.terminal_family = value;
  } else if (key == "converge_threshold") {
    cfg.converge_threshold = parse_num(key, value);
  } else if (key == "n_list") {
    cfg.n_list.clear();
    for (double v : parse_num_list(key, value)) cfg.n_list.push_back(static_cast<long long>(v));
  } else if (key == "max_enum_n") {
    cfg.sampling.max_enum_n = static_cast<int>(parse_num(key, value));
  } else if (key == "sample_count") {
    cfg.sampling.sample_count = static_cast<int>(parse_num(key, value));
  } else if (key == "seed") {
    cfg.sampling.seed = static_cast<std::uint64_t>(parse_num(key, value));
  } else if (key == "out") {
    cfg.out_dir = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig config_from_json_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("JSON parse failure: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  ExperimentConfig cfg;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    if (key == "sampling") {
      if (!v.is_object()) throw ConfigError("sampling: must be an object");
      for (auto s = v.begin(); s != v.end(); ++s) {
        apply_config_value(cfg, s.key(), s.value().dump());
      }
      continue;
    }
    if (v.is_string()) {
      apply_config_value(cfg, key, v.get<std::string>());
    } else if (v.is_array()) {
      if (key == "perturbations") {
        cfg.perturbations.clear();
        for (const auto& e : v) cfg.perturbations.push_back(e.get<std::string>());
      } else if (key == "n_list") {
        cfg.n_list.clear();
        for (const auto& e : v) cfg.n_list.push_back(e.get<long long>());
      } else if (key == "m") {
        cfg.m_schedule.clear();
        for (const auto& e : v) cfg.m_schedule.push_back(e.get<double>());
      } else if (key == "lambdas") {
        cfg.lambdas.clear();
        for (const auto& e : v) cfg.lambdas.push_back(e.get<double>());
      } else {
        throw ConfigError(key + ": unexpected array value");
      }
    } else {
      apply_config_value(cfg, key, v.dump());
    }
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();

  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return config_from_json_text(text);

  ExperimentConfig cfg;
  std::stringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    apply_config_value(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["command"] = cfg.command;
  j["driver"] = cfg.driver;
  if (cfg.driver_a) j["driver_a"] = *cfg.driver_a;
  if (cfg.driver_k) j["driver_k"] = *cfg.driver_k;
  j["terminal"] = cfg.terminal;
  j["T"] = cfg.horizon;
  j["N"] = cfg.steps;
  if (!cfg.m_schedule.empty()) j["m"] = cfg.m_schedule;
  j["scheme"] = cfg.scheme;
  if (cfg.h) j["h"] = *cfg.h;
  if (cfg.command == "envelope") {
    j["grid_y_min"] = cfg.grid_y_min;
    j["grid_y_max"] = cfg.grid_y_max;
    j["grid_y_step"] = cfg.grid_y_step;
    j["grid_t"] = cfg.grid_t;
    j["grid_z"] = cfg.grid_z;
  }
  j["selector"] = cfg.selector;
  if (!cfg.perturbations.empty()) j["perturbations"] = cfg.perturbations;
  if (!cfg.lambdas.empty()) j["lambdas"] = cfg.lambdas;
  if (!cfg.family.empty()) j["family"] = cfg.family;
  if (cfg.family_a) j["family_a"] = *cfg.family_a;
  if (cfg.lam0) j["lam0"] = *cfg.lam0;
  if (!cfg.terminal_family.empty()) j["terminal_family"] = cfg.terminal_family;
  j["converge_threshold"] = cfg.converge_threshold;
  if (!cfg.n_list.empty()) j["n_list"] = cfg.n_list;
  j["sampling"] = {{"max_enum_n", cfg.sampling.max_enum_n},
                   {"sample_count", cfg.sampling.sample_count},
                   {"seed", cfg.sampling.seed}};
  j["out"] = cfg.out_dir.empty() ? default_out_dir() : cfg.out_dir;
  return j.dump(2) + "\n";
}

std::vector<std::string> validate(const ExperimentConfig& cfg) {
  std::vector<std::string> diags;
  auto bad = [&](const std::string& field, const std::string& rule) {
    diags.push_back(field + ": " + rule);
  };

  if (!kCommands.count(cfg.command)) {
    bad("command", "must be one of solve|envelope|dependence|counterexample|uniqueness (got '" +
                       cfg.command + "')");
  }
  if (!(cfg.horizon > 0.0)) bad("T", "must be positive (got " + dsl::format_double(cfg.horizon) + ")");
  if (cfg.steps < 1) bad("N", "must be >= 1 (got " + std::to_string(cfg.steps) + ")");
  if (cfg.scheme != "explicit" && cfg.scheme != "implicit") {
    bad("scheme", "must be explicit|implicit (got '" + cfg.scheme + "')");
  }
  if (cfg.selector != "min" && cfg.selector != "max") {
    bad("selector", "must be min|max (got '" + cfg.selector + "')");
  }
  if (cfg.h && !(*cfg.h > 0.0)) bad("h", "must be positive");
  if (cfg.sampling.max_enum_n < 1) bad("max_enum_n", "must be >= 1");
  if (cfg.sampling.sample_count < 1) bad("sample_count", "must be >= 1");
  if (cfg.converge_threshold <= 0.0) bad("converge_threshold", "must be positive");

  std::optional<Driver> driver;
  if (cfg.command != "counterexample" && (cfg.command != "dependence" || cfg.lambdas.empty())) {
    try {
      driver = resolve_driver(cfg.driver, cfg.driver_a, cfg.driver_k);
    } catch (const std::exception& e) {
      bad("driver", e.what());
    }
  }
  try {
    TerminalValue::parse(cfg.terminal);
  } catch (const std::exception& e) {
    bad("terminal", e.what());
  }

  double dt = cfg.horizon > 0.0 && cfg.steps >= 1 ? cfg.horizon / cfg.steps : 0.0;
  bool solver_command =
      cfg.command == "solve" || cfg.command == "dependence" || cfg.command == "uniqueness";

  // direct Lipschitz solves have their own step condition
  if (driver && driver->lipschitz() && cfg.command == "solve" && dt > 0.0) {
    double k = *driver->lipschitz();
    if (cfg.scheme == "explicit" && k * dt > 0.5 + 1e-12) {
      bad("N", "K*dt = " + dsl::format_double(k * dt) + " > 0.5 for the explicit scheme");
    } else if (cfg.scheme == "implicit" && k * dt >= 1.0) {
      bad("N", "K*dt = " + dsl::format_double(k * dt) + " >= 1 for the implicit scheme");
    }
  }

  // a defaulted m schedule must have at least one admissible index
  if (driver && !driver->lipschitz() && solver_command && cfg.m_schedule.empty() && dt > 0.0 &&
      (cfg.scheme == "explicit" || cfg.scheme == "implicit")) {
    if (admissible_m_schedule(driver->growth_a(), dt, parse_scheme(cfg.scheme)).empty()) {
      bad("m", "no admissible default index: even m = A+1 = " +
                   dsl::format_double(driver->growth_a() + 1.0) +
                   " violates the step condition; increase N or pass m");
    }
  }

  // step condition for every command that runs the monotone scheme
  if (cfg.steps >= 1 && cfg.horizon > 0.0 && !cfg.m_schedule.empty()) {
    for (std::size_t i = 1; i < cfg.m_schedule.size(); ++i) {
      if (!(cfg.m_schedule[i] > cfg.m_schedule[i - 1])) {
        bad("m", "schedule must be strictly increasing");
        break;
      }
    }
    double dt = cfg.horizon / cfg.steps;
    double m_max = cfg.m_schedule.back();
    if (cfg.scheme == "explicit" && m_max * dt > 0.5 + 1e-12 && cfg.command != "counterexample" &&
        cfg.command != "envelope") {
      bad("m", "m*dt = " + dsl::format_double(m_max * dt) + " > 0.5");
    }
    if (driver && m_max <= driver->growth_a() && cfg.command != "solve") {
      bad("m", "largest m must exceed the driver growth constant A = " +
                   dsl::format_double(driver->growth_a()));
    }
  }

  if (cfg.command == "envelope") {
    if (!(cfg.grid_y_step > 0.0)) bad("grid_y_step", "must be positive");
    if (!(cfg.grid_y_min <= cfg.grid_y_max)) bad("grid_y_min", "grid is empty");
  }
  if (cfg.command == "dependence") {
    if (cfg.perturbations.empty() && cfg.lambdas.empty()) {
      bad("perturbations", "dependence needs perturbations or lambdas+family");
    }
    for (const auto& p : cfg.perturbations) {
      try {
        TerminalValue::parse(p);
      } catch (const std::exception& e) {
        bad("perturbations", std::string(e.what()) + " in '" + p + "'");
      }
    }
    if (!cfg.lambdas.empty() && cfg.family.empty()) {
      bad("family", "lambda curves need a driver family");
    }
  }
  if (cfg.command == "counterexample") {
    for (long long n : cfg.n_list) {
      if (n < 1) {
        bad("n_list", "indices must be >= 1");
        break;
      }
    }
  }
  return diags;
}

}  // namespace bsdelab
