#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "enkfmc/config.hpp"
#include "enkfmc/rng.hpp"

namespace fs = std::filesystem;
using namespace enkfmc;

namespace {

struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::string> out_dir;
  std::optional<int> workers;
  std::optional<long long> zeta;
  std::optional<long long> nens;
  std::optional<double> sigma_r;
  std::optional<std::string> filter;
  std::optional<std::string> formulation;
  std::optional<long long> subdomains;
};

void add_common_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config_path, "config file; documented defaults when omitted");
  cmd->add_option("--out", ov.out_dir, "output directory");
  cmd->add_option("--workers", ov.workers, "worker threads, 0 = all hardware threads");
  cmd->add_option("--zeta", ov.zeta, "radius of influence");
  cmd->add_option("--nens", ov.nens, "ensemble size");
  cmd->add_option("--sigma-r", ov.sigma_r, "truncated-svd threshold");
  cmd->add_option("--filter", ov.filter, "enkf-mc | letkf | enkf-schur");
  cmd->add_option("--formulation", ov.formulation, "incremental | primal | dual");
  cmd->add_option("--subdomains", ov.subdomains, "contiguous ring arcs analyzed concurrently");
}

ExperimentConfig resolve_config(const Overrides& ov) {
  ExperimentConfig cfg =
      ov.config_path ? parse_config_file(*ov.config_path) : default_config();
  if (ov.out_dir) cfg.out_dir = *ov.out_dir;
  if (ov.workers) {
    if (*ov.workers < 0) throw ConfigError("--workers must be >= 0");
    cfg.workers = *ov.workers;
  }
  if (ov.zeta) {
    if (*ov.zeta < 0) throw ConfigError("--zeta must be >= 0");
    cfg.filter.zeta = *ov.zeta;
  }
  if (ov.nens) {
    if (*ov.nens < 2) throw ConfigError("--nens must be >= 2");
    cfg.nens = *ov.nens;
  }
  if (ov.sigma_r) {
    if (!(*ov.sigma_r > 0.0 && *ov.sigma_r < 1.0))
      throw ConfigError("--sigma-r must lie in (0,1)");
    cfg.filter.sigma_r = *ov.sigma_r;
  }
  if (ov.filter) {
    if (*ov.filter == "enkf-mc")
      cfg.filter.method = FilterSpec::Method::EnkfMc;
    else if (*ov.filter == "letkf")
      cfg.filter.method = FilterSpec::Method::Letkf;
    else if (*ov.filter == "enkf-schur")
      cfg.filter.method = FilterSpec::Method::EnkfSchur;
    else
      throw ConfigError("--filter must be enkf-mc, letkf or enkf-schur");
    // switching methods re-applies the per-method inflation default unless the
    // config pinned one explicitly
    if (!cfg.filter.inflation_explicit)
      cfg.filter.inflation =
          cfg.filter.method == FilterSpec::Method::Letkf ? 1.04 : 1.0;
  }
  if (ov.formulation) {
    if (*ov.formulation == "incremental")
      cfg.filter.formulation = Formulation::Incremental;
    else if (*ov.formulation == "primal")
      cfg.filter.formulation = Formulation::Primal;
    else if (*ov.formulation == "dual")
      cfg.filter.formulation = Formulation::Dual;
    else
      throw ConfigError("--formulation must be incremental, primal or dual");
  }
  if (ov.subdomains) {
    if (*ov.subdomains < 1) throw ConfigError("--subdomains must be >= 1");
    cfg.subdomains = *ov.subdomains;
  }
  if (cfg.filter.zeta > cfg.model.nstate) throw ConfigError("zeta exceeds nstate");
  return cfg;
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// build content fully, then write in one go, so a failed open leaves nothing
void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

fs::path prepare_out_dir(const ExperimentConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " +
                                   ec.message());
  return dir;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

std::string filter_name(FilterSpec::Method m) {
  switch (m) {
    case FilterSpec::Method::EnkfMc: return "enkf-mc";
    case FilterSpec::Method::Letkf: return "letkf";
    case FilterSpec::Method::EnkfSchur: return "enkf-schur";
  }
  return "enkf-mc";
}

int cmd_run(const ExperimentConfig& cfg) {
  const ExperimentRecord rec = cfg.subdomains > 1
                                   ? run_decomposed(cfg, cfg.subdomains, cfg.filter.zeta)
                                   : run_twin_experiment(cfg);
  const fs::path dir = prepare_out_dir(cfg);

  std::ostringstream csv, ranks, summary, members;
  write_record_csv(rec, csv);
  write_rank_csv(rec, ranks);
  write_summary_json(render_config(cfg), rec, summary);
  write_states_csv(rec.final_ensemble, members);
  write_file(dir / "run.csv", csv.str());
  write_file(dir / "ranks.csv", ranks.str());
  write_file(dir / "summary.json", summary.str());
  write_file(dir / "analysis_ensemble.csv", members.str());
  std::cout << "wrote " << (dir / "run.csv").string() << " (" << rec.cycles()
            << " cycles); analysis rmse mean " << fmt(mean_of(rec.rmse_analysis)) << "\n";
  return 0;
}

// true factors for the synthetic estimate runs: -rho at every in-radius
// predecessor, unit residual variances
CholeskyFactors synthetic_truth(const GridGeometry& g, double rho) {
  std::vector<std::vector<TriEntry>> rows(std::size_t(g.nstate()));
  for (Index i = 0; i < g.nstate(); ++i)
    for (Index p : g.predecessors(i)) rows[std::size_t(i)].push_back({p, -rho});
  return {SparseUnitLowerTriangular(g.nstate(), std::move(rows)),
          PositiveDiagonal(Vector::Ones(g.nstate()))};
}

Matrix sample_from_truth(const CholeskyFactors& truth, Index nens, std::uint64_t seed) {
  const Index n = truth.dim();
  Matrix z(n, nens);
  Rng rng(seed);
  for (Index j = 0; j < nens; ++j)
    for (Index i = 0; i < n; ++i) z(i, j) = rng.gaussian();
  Matrix members(n, nens);
  for (Index j = 0; j < nens; ++j) members.col(j) = truth.T.solve(Vector(z.col(j)));
  return members;
}

int cmd_estimate(const ExperimentConfig& cfg, const std::string& dump_name) {
  const GridGeometry g = GridGeometry::ring(cfg.model.nstate, cfg.filter.zeta);
  const fs::path dir = prepare_out_dir(cfg);
  const WarningSink warn = [](const std::string& msg) {
    std::cerr << "warning: " << msg << "\n";
  };

  if (cfg.estimate.source == "csv") {
    if (cfg.estimate.csv_path.empty())
      throw ConfigError("estimate source csv needs csv_path");
    std::ifstream in(cfg.estimate.csv_path);
    if (!in) throw std::runtime_error("cannot open ensemble csv: " + cfg.estimate.csv_path);
    const EnsembleMatrix ens{read_states_csv(in)};
    const CholeskyFactors factors =
        estimate_factors(ens, g, cfg.filter.regression(), cfg.workers, warn);
    std::ostringstream dump;
    dump_factors(factors, dump);
    write_file(dir / dump_name, dump.str());
    if (cfg.estimate.report_error_norm)
      throw ConfigError(
          "error norm requested but a csv ensemble has no reference precision; "
          "set report_error_norm = false");
    std::cout << "wrote " << (dir / dump_name).string() << "\n";
    return 0;
  }

  const CholeskyFactors truth = synthetic_truth(g, cfg.estimate.rho);
  const bool norms = cfg.estimate.report_error_norm && g.nstate() <= kSchurDenseLimit;
  if (cfg.estimate.report_error_norm && !norms)
    std::cerr << "note: state too large for the dense error norm; skipping it\n";
  const Matrix truth_dense = norms ? truth.dense() : Matrix();

  std::vector<Index> nens_list = cfg.estimate.nens_sweep;
  if (nens_list.empty()) nens_list.push_back(cfg.nens);

  std::ostringstream csv;
  csv << "nens,median_error_norm\n";
  for (Index nens : nens_list) {
    std::vector<double> errs;
    for (Index trial = 0; trial < cfg.estimate.trials; ++trial) {
      const std::uint64_t seed =
          derive_seed(derive_seed(cfg.seeds.ensemble, std::uint64_t(nens)),
                      std::uint64_t(trial));
      const EnsembleMatrix ens{sample_from_truth(truth, nens, seed)};
      const CholeskyFactors factors =
          estimate_factors(ens, g, cfg.filter.regression(), cfg.workers, warn);
      if (norms) errs.push_back(precision_error_norm(factors, truth_dense));
    }
    if (norms) {
      std::sort(errs.begin(), errs.end());
      const std::size_t m = errs.size();
      const double median =
          m % 2 ? errs[m / 2] : 0.5 * (errs[m / 2 - 1] + errs[m / 2]);
      csv << nens << "," << fmt(median) << "\n";
    }
  }

  // the dump itself: configured nens, first trial seed
  const std::uint64_t dump_seed = derive_seed(
      derive_seed(cfg.seeds.ensemble, std::uint64_t(cfg.nens)), std::uint64_t(0));
  const EnsembleMatrix ens{sample_from_truth(truth, cfg.nens, dump_seed)};
  const CholeskyFactors factors =
      estimate_factors(ens, g, cfg.filter.regression(), cfg.workers, warn);
  std::ostringstream dump;
  dump_factors(factors, dump);
  write_file(dir / dump_name, dump.str());
  if (norms) write_file(dir / "estimate.csv", csv.str());
  std::cout << "wrote " << (dir / dump_name).string() << "\n";
  return 0;
}

int cmd_sweep(const ExperimentConfig& cfg) {
  const SweepResult res =
      svd_threshold_sweep(cfg, cfg.sweep_thresholds, cfg.sweep_alpha_component - 1);
  const fs::path dir = prepare_out_dir(cfg);

  std::ostringstream summary_csv, alpha_csv;
  summary_csv << "sigma_r,rmse_background_mean,rmse_analysis_mean\n";
  alpha_csv << "sigma_r,cycle,direction,alpha\n";
  for (std::size_t t = 0; t < res.thresholds.size(); ++t) {
    const ExperimentRecord& rec = res.records[t];
    summary_csv << fmt(res.thresholds[t]) << "," << fmt(mean_of(rec.rmse_background)) << ","
                << fmt(mean_of(rec.rmse_analysis)) << "\n";
    std::ostringstream run_csv;
    write_record_csv(rec, run_csv);
    write_file(dir / ("run_sigma_" + fmt(res.thresholds[t]) + ".csv"), run_csv.str());
    for (std::size_t c = 0; c < res.alpha[t].size(); ++c)
      for (Index j = 0; j < res.alpha[t][c].size(); ++j)
        alpha_csv << fmt(res.thresholds[t]) << "," << (c + 1) << "," << (j + 1) << ","
                  << fmt(res.alpha[t][c](j)) << "\n";
  }
  write_file(dir / "sweep.csv", summary_csv.str());
  write_file(dir / "alpha.csv", alpha_csv.str());

  nlohmann::json j;
  j["config"] = render_config(cfg);
  j["thresholds"] = res.thresholds;
  j["alpha_component"] = res.alpha_component + 1;
  write_file(dir / "summary.json", j.dump(2) + "\n");
  std::cout << "wrote " << (dir / "sweep.csv").string() << " (" << res.thresholds.size()
            << " thresholds)\n";
  return 0;
}

int cmd_compare(const ExperimentConfig& cfg) {
  const std::vector<FilterSpec::Method> methods{
      FilterSpec::Method::EnkfMc, FilterSpec::Method::Letkf, FilterSpec::Method::EnkfSchur};
  const fs::path dir = prepare_out_dir(cfg);

  std::vector<ExperimentRecord> records;
  for (const FilterSpec::Method m : methods) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.filter.method = m;
    if (!cfg.filter.inflation_explicit)
      run_cfg.filter.inflation = m == FilterSpec::Method::Letkf ? 1.04 : 1.0;
    records.push_back(run_twin_experiment(run_cfg));
    std::ostringstream run_csv;
    write_record_csv(records.back(), run_csv);
    write_file(dir / ("run_" + filter_name(m) + ".csv"), run_csv.str());
  }

  std::ostringstream joined;
  joined << "cycle";
  for (const FilterSpec::Method m : methods)
    joined << ",rmse_bg_" << filter_name(m) << ",rmse_an_" << filter_name(m);
  joined << "\n";
  for (Index c = 0; c < records.front().cycles(); ++c) {
    joined << (c + 1);
    for (const ExperimentRecord& rec : records)
      joined << "," << fmt(rec.rmse_background[std::size_t(c)]) << ","
             << fmt(rec.rmse_analysis[std::size_t(c)]);
    joined << "\n";
  }
  write_file(dir / "compare.csv", joined.str());

  nlohmann::json j;
  j["config"] = render_config(cfg);
  for (std::size_t i = 0; i < methods.size(); ++i) {
    j["filters"][filter_name(methods[i])] = {
        {"rmse_background_mean", mean_of(records[i].rmse_background)},
        {"rmse_analysis_mean", mean_of(records[i].rmse_analysis)}};
  }
  write_file(dir / "summary.json", j.dump(2) + "\n");
  std::cout << "wrote " << (dir / "compare.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sequential ensemble assimilation with an estimated sparse precision"};
  app.require_subcommand(1);
  Overrides ov;
  std::string dump_name = "factors.txt";

  CLI::App* run = app.add_subcommand("run", "twin experiment with the configured filter");
  add_common_flags(run, ov);
  CLI::App* estimate =
      app.add_subcommand("estimate", "estimate precision factors from an ensemble");
  add_common_flags(estimate, ov);
  estimate->add_option("--dump-factors", dump_name, "output file name for the factor dump");
  CLI::App* sweep =
      app.add_subcommand("sweep", "rerun the experiment across truncated-svd thresholds");
  add_common_flags(sweep, ov);
  CLI::App* compare = app.add_subcommand("compare", "run every filter with shared seeds");
  add_common_flags(compare, ov);

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = resolve_config(ov);
    if (run->parsed()) return cmd_run(cfg);
    if (estimate->parsed()) return cmd_estimate(cfg, dump_name);
    if (sweep->parsed()) return cmd_sweep(cfg);
    if (compare->parsed()) return cmd_compare(cfg);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
