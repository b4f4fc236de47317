#include "enkfmc/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace enkfmc {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double to_double(int line, const std::string& key, const std::string& value) {
  double v = 0.0;
  const char* last = value.data() + value.size();
  const auto res = std::from_chars(value.data(), last, v);
  if (res.ec != std::errc() || res.ptr != last)
    fail(line, key + ": '" + value + "' is not a number");
  return v;
}

std::int64_t to_count(int line, const std::string& key, const std::string& value) {
  std::int64_t v = 0;
  const char* last = value.data() + value.size();
  const auto res = std::from_chars(value.data(), last, v);
  if (res.ec != std::errc() || res.ptr != last)
    fail(line, key + ": '" + value + "' is not an integer");
  return v;
}

std::uint64_t to_seed(int line, const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const char* last = value.data() + value.size();
  const auto res = std::from_chars(value.data(), last, v);
  if (res.ec != std::errc() || res.ptr != last)
    fail(line, key + ": '" + value + "' is not an unsigned integer");
  return v;
}

bool to_bool(int line, const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  fail(line, key + ": expected true or false, got '" + value + "'");
}

std::vector<std::string> split_ws(const std::string& value) {
  std::vector<std::string> parts;
  std::istringstream is(value);
  std::string p;
  while (is >> p) parts.push_back(p);
  return parts;
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void apply_key(ExperimentConfig& cfg, bool& inflation_seen, int line,
               const std::string& section, const std::string& key,
               const std::string& value) {
  const auto require = [&](bool ok, const std::string& range) {
    if (!ok) fail(line, key + " must be " + range + " (got '" + value + "')");
  };

  if (section == "model") {
    if (key == "nstate") {
      cfg.model.nstate = to_count(line, key, value);
      require(cfg.model.nstate >= 4, ">= 4");
    } else if (key == "forcing") {
      cfg.model.forcing = to_double(line, key, value);
      require(std::isfinite(cfg.model.forcing), "finite");
    } else if (key == "dt") {
      cfg.model.dt = to_double(line, key, value);
      require(cfg.model.dt > 0.0, "> 0");
    } else if (key == "steps_per_cycle") {
      cfg.model.steps_per_cycle = to_count(line, key, value);
      require(cfg.model.steps_per_cycle >= 1, ">= 1");
    } else {
      fail(line, "unknown key '" + key + "' in section [model]");
    }
  } else if (section == "network") {
    if (key == "fraction") {
      cfg.obs_fraction = to_double(line, key, value);
      require(cfg.obs_fraction >= 0.0 && cfg.obs_fraction <= 1.0,
              "in [0,1] (0 disables observations)");
    } else if (key == "pattern") {
      if (value == "every-kth")
        cfg.pattern = NetworkPattern::Kind::EveryKth;
      else if (value == "random")
        cfg.pattern = NetworkPattern::Kind::RandomSeeded;
      else
        fail(line, "pattern must be every-kth or random, got '" + value + "'");
    } else if (key == "rel_sigma") {
      cfg.rel_sigma = to_double(line, key, value);
      require(cfg.rel_sigma > 0.0, "> 0");
    } else {
      fail(line, "unknown key '" + key + "' in section [network]");
    }
  } else if (section == "filter") {
    if (key == "method") {
      if (value == "enkf-mc")
        cfg.filter.method = FilterSpec::Method::EnkfMc;
      else if (value == "letkf")
        cfg.filter.method = FilterSpec::Method::Letkf;
      else if (value == "enkf-schur")
        cfg.filter.method = FilterSpec::Method::EnkfSchur;
      else
        fail(line, "method must be enkf-mc, letkf or enkf-schur, got '" + value + "'");
    } else if (key == "zeta") {
      cfg.filter.zeta = to_count(line, key, value);
      require(cfg.filter.zeta >= 0, ">= 0");
    } else if (key == "regression") {
      if (value == "normal")
        cfg.filter.regression_kind = RegressionMethod::Kind::NormalEquations;
      else if (value == "tikhonov")
        cfg.filter.regression_kind = RegressionMethod::Kind::Tikhonov;
      else if (value == "truncated-svd")
        cfg.filter.regression_kind = RegressionMethod::Kind::TruncatedSVD;
      else
        fail(line, "regression must be normal, tikhonov or truncated-svd, got '" + value + "'");
    } else if (key == "sigma_r") {
      cfg.filter.sigma_r = to_double(line, key, value);
      require(cfg.filter.sigma_r > 0.0 && cfg.filter.sigma_r < 1.0, "in (0,1)");
    } else if (key == "lambda") {
      cfg.filter.lambda = to_double(line, key, value);
      require(cfg.filter.lambda >= 0.0, ">= 0");
    } else if (key == "formulation") {
      if (value == "incremental")
        cfg.filter.formulation = Formulation::Incremental;
      else if (value == "primal")
        cfg.filter.formulation = Formulation::Primal;
      else if (value == "dual")
        cfg.filter.formulation = Formulation::Dual;
      else
        fail(line, "formulation must be incremental, primal or dual, got '" + value + "'");
    } else if (key == "inflation") {
      cfg.filter.inflation = to_double(line, key, value);
      require(cfg.filter.inflation >= 1.0, ">= 1");
      inflation_seen = true;
    } else {
      fail(line, "unknown key '" + key + "' in section [filter]");
    }
  } else if (section == "ensemble") {
    if (key == "nens") {
      cfg.nens = to_count(line, key, value);
      require(cfg.nens >= 2, ">= 2");
    } else if (key == "cycles") {
      cfg.cycles = to_count(line, key, value);
      require(cfg.cycles >= 1, ">= 1");
    } else {
      fail(line, "unknown key '" + key + "' in section [ensemble]");
    }
  } else if (section == "seeds") {
    if (key == "reference")
      cfg.seeds.reference = to_seed(line, key, value);
    else if (key == "ensemble")
      cfg.seeds.ensemble = to_seed(line, key, value);
    else if (key == "observation")
      cfg.seeds.observation = to_seed(line, key, value);
    else if (key == "perturbation")
      cfg.seeds.perturbation = to_seed(line, key, value);
    else
      fail(line, "unknown key '" + key + "' in section [seeds]");
  } else if (section == "spinup") {
    if (key == "reference_units") {
      cfg.spinup.reference_units = to_double(line, key, value);
      require(cfg.spinup.reference_units >= 0.0, ">= 0");
    } else if (key == "background_units") {
      cfg.spinup.background_units = to_double(line, key, value);
      require(cfg.spinup.background_units >= 0.0, ">= 0");
    } else if (key == "ensemble_units") {
      cfg.spinup.ensemble_units = to_double(line, key, value);
      require(cfg.spinup.ensemble_units >= 0.0, ">= 0");
    } else if (key == "perturbation") {
      cfg.spinup.perturbation = to_double(line, key, value);
      require(cfg.spinup.perturbation >= 0.0, ">= 0");
    } else {
      fail(line, "unknown key '" + key + "' in section [spinup]");
    }
  } else if (section == "estimate") {
    if (key == "source") {
      if (value != "synthetic" && value != "csv")
        fail(line, "source must be synthetic or csv, got '" + value + "'");
      cfg.estimate.source = value;
    } else if (key == "csv_path") {
      cfg.estimate.csv_path = value;
    } else if (key == "rho") {
      cfg.estimate.rho = to_double(line, key, value);
      require(std::isfinite(cfg.estimate.rho), "finite");
    } else if (key == "trials") {
      cfg.estimate.trials = to_count(line, key, value);
      require(cfg.estimate.trials >= 1, ">= 1");
    } else if (key == "nens_sweep") {
      cfg.estimate.nens_sweep.clear();
      for (const std::string& part : split_ws(value)) {
        const Index nens = to_count(line, key, part);
        if (nens < 2) fail(line, key + " entries must be >= 2");
        cfg.estimate.nens_sweep.push_back(nens);
      }
    } else if (key == "report_error_norm") {
      cfg.estimate.report_error_norm = to_bool(line, key, value);
    } else {
      fail(line, "unknown key '" + key + "' in section [estimate]");
    }
  } else if (section == "sweep") {
    if (key == "thresholds") {
      cfg.sweep_thresholds.clear();
      for (const std::string& part : split_ws(value)) {
        const double s = to_double(line, key, part);
        if (!(s > 0.0 && s < 1.0)) fail(line, key + " entries must lie in (0,1)");
        cfg.sweep_thresholds.push_back(s);
      }
      if (cfg.sweep_thresholds.empty()) fail(line, key + " must list at least one value");
    } else if (key == "alpha_component") {
      cfg.sweep_alpha_component = to_count(line, key, value);
      require(cfg.sweep_alpha_component >= 1, ">= 1 (components are 1-based here)");
    } else {
      fail(line, "unknown key '" + key + "' in section [sweep]");
    }
  } else if (section == "run") {
    if (key == "subdomains") {
      cfg.subdomains = to_count(line, key, value);
      require(cfg.subdomains >= 1, ">= 1");
    } else if (key == "workers") {
      cfg.workers = int(to_count(line, key, value));
      require(cfg.workers >= 0, ">= 0");
    } else if (key == "out") {
      cfg.out_dir = value;
    } else {
      fail(line, "unknown key '" + key + "' in section [run]");
    }
  } else {
    fail(line, "unknown section [" + section + "]");
  }
}

}  // namespace

ExperimentConfig default_config() { return ExperimentConfig{}; }

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  bool inflation_seen = false;
  std::string section;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s.front() == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) fail(line, "malformed section header '" + s + "'");
      section = s.substr(1, s.size() - 2);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value', got '" + s + "'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail(line, "missing key before '='");
    if (section.empty()) fail(line, "key '" + key + "' appears before any [section]");
    apply_key(cfg, inflation_seen, line, section, key, value);
  }

  if (!inflation_seen)
    cfg.filter.inflation = cfg.filter.method == FilterSpec::Method::Letkf ? 1.04 : 1.0;
  cfg.filter.inflation_explicit = inflation_seen;

  if (cfg.sweep_alpha_component > cfg.model.nstate)
    throw ConfigError("sweep alpha_component exceeds nstate");
  if (cfg.filter.zeta > cfg.model.nstate)
    throw ConfigError("zeta exceeds nstate");
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "[model]\n";
  os << "nstate = " << cfg.model.nstate << "\n";
  os << "forcing = " << fmt(cfg.model.forcing) << "\n";
  os << "dt = " << fmt(cfg.model.dt) << "\n";
  os << "steps_per_cycle = " << cfg.model.steps_per_cycle << "\n";
  os << "\n[network]\n";
  os << "fraction = " << fmt(cfg.obs_fraction) << "\n";
  os << "pattern = "
     << (cfg.pattern == NetworkPattern::Kind::EveryKth ? "every-kth" : "random") << "\n";
  os << "rel_sigma = " << fmt(cfg.rel_sigma) << "\n";
  os << "\n[filter]\n";
  os << "method = ";
  switch (cfg.filter.method) {
    case FilterSpec::Method::EnkfMc: os << "enkf-mc"; break;
    case FilterSpec::Method::Letkf: os << "letkf"; break;
    case FilterSpec::Method::EnkfSchur: os << "enkf-schur"; break;
  }
  os << "\n";
  os << "zeta = " << cfg.filter.zeta << "\n";
  os << "regression = ";
  switch (cfg.filter.regression_kind) {
    case RegressionMethod::Kind::NormalEquations: os << "normal"; break;
    case RegressionMethod::Kind::Tikhonov: os << "tikhonov"; break;
    case RegressionMethod::Kind::TruncatedSVD: os << "truncated-svd"; break;
  }
  os << "\n";
  os << "sigma_r = " << fmt(cfg.filter.sigma_r) << "\n";
  os << "lambda = " << fmt(cfg.filter.lambda) << "\n";
  os << "formulation = ";
  switch (cfg.filter.formulation) {
    case Formulation::Incremental: os << "incremental"; break;
    case Formulation::Primal: os << "primal"; break;
    case Formulation::Dual: os << "dual"; break;
  }
  os << "\n";
  os << "inflation = " << fmt(cfg.filter.inflation) << "\n";
  os << "\n[ensemble]\n";
  os << "nens = " << cfg.nens << "\n";
  os << "cycles = " << cfg.cycles << "\n";
  os << "\n[seeds]\n";
  os << "reference = " << cfg.seeds.reference << "\n";
  os << "ensemble = " << cfg.seeds.ensemble << "\n";
  os << "observation = " << cfg.seeds.observation << "\n";
  os << "perturbation = " << cfg.seeds.perturbation << "\n";
  os << "\n[spinup]\n";
  os << "reference_units = " << fmt(cfg.spinup.reference_units) << "\n";
  os << "background_units = " << fmt(cfg.spinup.background_units) << "\n";
  os << "ensemble_units = " << fmt(cfg.spinup.ensemble_units) << "\n";
  os << "perturbation = " << fmt(cfg.spinup.perturbation) << "\n";
  os << "\n[estimate]\n";
  os << "source = " << cfg.estimate.source << "\n";
  os << "csv_path =";
  if (!cfg.estimate.csv_path.empty()) os << " " << cfg.estimate.csv_path;
  os << "\n";
  os << "rho = " << fmt(cfg.estimate.rho) << "\n";
  os << "trials = " << cfg.estimate.trials << "\n";
  os << "nens_sweep =";
  for (Index nens : cfg.estimate.nens_sweep) os << " " << nens;
  os << "\n";
  os << "report_error_norm = " << (cfg.estimate.report_error_norm ? "true" : "false") << "\n";
  os << "\n[sweep]\n";
  os << "thresholds =";
  for (double s : cfg.sweep_thresholds) os << " " << fmt(s);
  os << "\n";
  os << "alpha_component = " << cfg.sweep_alpha_component << "\n";
  os << "\n[run]\n";
  os << "subdomains = " << cfg.subdomains << "\n";
  os << "workers = " << cfg.workers << "\n";
  os << "out = " << cfg.out_dir << "\n";
  return os.str();
}

}  // namespace enkfmc
