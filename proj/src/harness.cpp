#include "enkfmc/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "enkfmc/parallel.hpp"
#include "enkfmc/rng.hpp"

namespace enkfmc {

namespace {

void check_config(const ExperimentConfig& cfg) {
  if (cfg.cycles < 1) throw std::invalid_argument("cycles must be >= 1");
  if (cfg.nens < 2) throw std::invalid_argument("nens must be >= 2");
  if (cfg.filter.zeta < 0) throw std::invalid_argument("zeta must be >= 0");
  if (!(cfg.obs_fraction >= 0.0 && cfg.obs_fraction <= 1.0))
    throw std::invalid_argument("observation fraction must lie in [0,1]");
  if (!(cfg.rel_sigma > 0.0)) throw std::invalid_argument("rel_sigma must be positive");
}

ObservationBundle empty_observation() { return {Vector(), {}, PositiveDiagonal(Vector())}; }

struct Arc {
  Index start = 0;
  Index len = 0;
};

std::vector<Arc> split_ring(Index n, Index subdomains, Index halo) {
  if (subdomains < 1) throw std::invalid_argument("subdomains must be >= 1");
  if (halo < 0) throw std::invalid_argument("halo must be >= 0");
  std::vector<Arc> arcs;
  const Index base = n / subdomains;
  const Index rem = n % subdomains;
  Index start = 0;
  for (Index s = 0; s < subdomains; ++s) {
    const Index len = base + (s < rem ? 1 : 0);
    if (len < 2 * halo + 1)
      throw std::invalid_argument("sub-domain of " + std::to_string(len) +
                                  " components is narrower than 2*halo+1");
    if (len + 2 * halo > n)
      throw std::invalid_argument("halo wraps a sub-domain around the whole ring");
    arcs.push_back({start, len});
    start += len;
  }
  return arcs;
}

EnsembleMatrix forecast_ensemble(const Lorenz96Config& model, const EnsembleMatrix& ens,
                                 int workers) {
  Matrix members = ens.members();
  parallel_for(ens.nens(), workers, [&](Index e) {
    members.col(e) = advance_steps(model, members.col(e), model.steps_per_cycle);
  });
  return EnsembleMatrix(std::move(members));
}

// full (untruncated) per-direction weights for one component's regression
Vector component_alpha(const EnsembleMatrix& ens, const GridGeometry& g, Index component) {
  const std::vector<Index> preds = g.predecessors(component);
  if (preds.empty()) return Vector();
  const Matrix dev = deviations(ens);
  Matrix z(Index(preds.size()), ens.nens());
  for (std::size_t r = 0; r < preds.size(); ++r) z.row(Index(r)) = dev.row(preds[r]);
  return svd_direction_weights(z, dev.row(component).transpose(), 0.0);
}

AnalysisResult analyze_enkf_mc_decomposed(const ExperimentConfig& cfg,
                                          const std::vector<Arc>& arcs, Index halo,
                                          const EnsembleMatrix& ens,
                                          const ObservationBundle& obs,
                                          const PerturbedObservations& perturbed) {
  const Index n = ens.nstate();
  Matrix xa = ens.members();
  parallel_for(Index(arcs.size()), cfg.workers, [&](Index s) {
    const Arc arc = arcs[std::size_t(s)];
    const Index wlen = arc.len + 2 * halo;
    std::vector<Index> window(static_cast<std::size_t>(wlen));
    for (Index t = 0; t < wlen; ++t)
      window[std::size_t(t)] = ((arc.start - halo + t) % n + n) % n;

    Matrix local(wlen, ens.nens());
    for (Index t = 0; t < wlen; ++t) local.row(t) = ens.members().row(window[std::size_t(t)]);
    const EnsembleMatrix local_ens(std::move(local));

    // observations whose component falls in the window, in window order so
    // the local index list stays sorted
    std::vector<Index> local_idx;
    std::vector<Index> obs_pos;
    for (Index t = 0; t < wlen; ++t) {
      const auto it = std::lower_bound(obs.indices.begin(), obs.indices.end(),
                                       window[std::size_t(t)]);
      if (it != obs.indices.end() && *it == window[std::size_t(t)]) {
        local_idx.push_back(t);
        obs_pos.push_back(Index(it - obs.indices.begin()));
      }
    }
    const Index m = Index(local_idx.size());
    Vector y_loc(m), r_loc(m);
    Matrix ys_loc(m, ens.nens());
    for (Index t = 0; t < m; ++t) {
      y_loc(t) = obs.y(obs_pos[std::size_t(t)]);
      r_loc(t) = obs.R.values()(obs_pos[std::size_t(t)]);
      ys_loc.row(t) = perturbed.Ys.row(obs_pos[std::size_t(t)]);
    }
    const ObservationBundle local_obs(std::move(y_loc), std::move(local_idx),
                                      PositiveDiagonal(std::move(r_loc)));

    const GridGeometry line = GridGeometry::rect(wlen, 1, Ordering::RowMajor, halo);
    const CholeskyFactors factors =
        estimate_factors(local_ens, line, cfg.filter.regression(), 1);
    const AnalysisResult local_result = analyze_enkf_mc(
        local_ens, local_obs, factors, cfg.filter.formulation, {ys_loc, perturbed.seed}, 1);

    for (Index t = 0; t < arc.len; ++t)
      xa.row((arc.start + t) % n) = local_result.ensemble.members().row(halo + t);
  });
  std::map<std::string, double> diag{{"observations", double(obs.nobs())},
                                     {"subdomains", double(arcs.size())}};
  return {EnsembleMatrix(std::move(xa)), std::move(diag)};
}

ExperimentRecord run_core(const ExperimentConfig& cfg, Index subdomains, Index halo,
                          Index alpha_component, std::vector<Vector>* alpha_out) {
  check_config(cfg);
  const Index n = cfg.model.nstate;
  const GridGeometry g = GridGeometry::ring(n, cfg.filter.zeta);
  if (subdomains > 1 && cfg.filter.method != FilterSpec::Method::EnkfMc)
    throw std::invalid_argument("domain decomposition is implemented for enkf-mc only");
  const std::vector<Arc> arcs =
      subdomains > 1 ? split_ring(n, subdomains, halo) : std::vector<Arc>();

  const SpinUpState init = spin_up(cfg.model, cfg.spinup, cfg.nens, cfg.seeds.reference,
                                   cfg.seeds.ensemble, cfg.workers);

  ObservationNetwork net;
  if (cfg.obs_fraction > 0.0) {
    const NetworkPattern pattern =
        cfg.pattern == NetworkPattern::Kind::EveryKth
            ? NetworkPattern::every_kth()
            : NetworkPattern::random_seeded(derive_seed(cfg.seeds.observation, 0));
    net = build_network(n, cfg.obs_fraction, pattern);
  } else {
    net.fraction = 0.0;  // explicit empty network
  }
  net.rel_sigma = cfg.rel_sigma;

  Vector x_ref = init.reference;
  EnsembleMatrix ens = init.ensemble;
  ExperimentRecord rec;
  std::vector<Vector> ref_traj;
  std::vector<Matrix> ens_traj;
  ref_traj.reserve(std::size_t(cfg.cycles));
  ens_traj.reserve(std::size_t(cfg.cycles));

  for (Index c = 0; c < cfg.cycles; ++c) {
    const auto tic = std::chrono::steady_clock::now();

    x_ref = advance_steps(cfg.model, x_ref, cfg.model.steps_per_cycle);
    const EnsembleMatrix background = forecast_ensemble(cfg.model, ens, cfg.workers);
    const ObservationBundle obs =
        net.indices.empty()
            ? empty_observation()
            : synthesize_observation(x_ref, net, cfg.rel_sigma,
                                     derive_seed(cfg.seeds.observation, std::uint64_t(c) + 1));
    rec.rmse_background.push_back((x_ref - ensemble_mean(background)).norm());

    AnalysisResult result = [&] {
      switch (cfg.filter.method) {
        case FilterSpec::Method::Letkf:
          return analyze_letkf(background, obs, g, cfg.filter.inflation, cfg.workers);
        case FilterSpec::Method::EnkfSchur: {
          const EnsembleMatrix inflated = inflate(background, cfg.filter.inflation);
          const PerturbedObservations perturbed = perturb_observations(
              obs, cfg.nens, derive_seed(cfg.seeds.perturbation, std::uint64_t(c) + 1));
          return analyze_enkf_schur(inflated, obs, g, perturbed);
        }
        case FilterSpec::Method::EnkfMc:
        default: {
          const EnsembleMatrix inflated = inflate(background, cfg.filter.inflation);
          const PerturbedObservations perturbed = perturb_observations(
              obs, cfg.nens, derive_seed(cfg.seeds.perturbation, std::uint64_t(c) + 1));
          if (alpha_out) alpha_out->push_back(component_alpha(inflated, g, alpha_component));
          if (!arcs.empty())
            return analyze_enkf_mc_decomposed(cfg, arcs, halo, inflated, obs, perturbed);
          const CholeskyFactors factors =
              estimate_factors(inflated, g, cfg.filter.regression(), cfg.workers);
          return analyze_enkf_mc(inflated, obs, factors, cfg.filter.formulation, perturbed,
                                 cfg.workers);
        }
      }
    }();

    rec.rmse_analysis.push_back((x_ref - ensemble_mean(result.ensemble)).norm());
    rec.diagnostics.push_back(result.diagnostics);
    ref_traj.push_back(x_ref);
    ens_traj.push_back(result.ensemble.members());
    ens = std::move(result.ensemble);

    const auto toc = std::chrono::steady_clock::now();
    rec.wall_ms.push_back(std::chrono::duration<double, std::milli>(toc - tic).count());
  }

  std::vector<Index> all_components(static_cast<std::size_t>(n));
  std::iota(all_components.begin(), all_components.end(), Index(0));
  rec.rank_counts = rank_histogram(ref_traj, ens_traj, all_components,
                                   derive_seed(cfg.seeds.perturbation, 0));
  rec.final_ensemble = ens.members();
  return rec;
}

}  // namespace

RegressionMethod FilterSpec::regression() const {
  switch (regression_kind) {
    case RegressionMethod::Kind::NormalEquations:
      return RegressionMethod::normal_equations();
    case RegressionMethod::Kind::Tikhonov:
      return RegressionMethod::tikhonov(lambda);
    case RegressionMethod::Kind::TruncatedSVD:
    default:
      return RegressionMethod::truncated_svd(sigma_r);
  }
}

bool records_equal(const ExperimentRecord& a, const ExperimentRecord& b) {
  return a.rmse_background == b.rmse_background && a.rmse_analysis == b.rmse_analysis &&
         a.diagnostics == b.diagnostics && a.rank_counts == b.rank_counts &&
         a.final_ensemble.rows() == b.final_ensemble.rows() &&
         a.final_ensemble.cols() == b.final_ensemble.cols() &&
         (a.final_ensemble.array() == b.final_ensemble.array()).all();
}

double rmse(const std::vector<Vector>& ref_traj, const std::vector<Vector>& traj) {
  if (ref_traj.size() != traj.size())
    throw std::invalid_argument("trajectory lengths differ");
  if (ref_traj.empty()) throw std::invalid_argument("rmse of empty trajectories");
  double sum = 0.0;
  for (std::size_t t = 0; t < ref_traj.size(); ++t) {
    if (ref_traj[t].size() != traj[t].size())
      throw std::invalid_argument("state dimensions differ at cycle " + std::to_string(t));
    sum += (ref_traj[t] - traj[t]).squaredNorm();
  }
  return std::sqrt(sum / double(ref_traj.size()));
}

double rmse_per_component(const std::vector<Vector>& ref_traj,
                          const std::vector<Vector>& traj) {
  if (ref_traj.empty()) throw std::invalid_argument("rmse of empty trajectories");
  const double aggregate = rmse(ref_traj, traj);
  return aggregate / std::sqrt(double(ref_traj.front().size()));
}

std::vector<std::int64_t> rank_histogram(const std::vector<Vector>& ref_traj,
                                         const std::vector<Matrix>& ens_traj,
                                         const std::vector<Index>& component_filter,
                                         std::uint64_t tie_seed) {
  if (ref_traj.size() != ens_traj.size())
    throw std::invalid_argument("trajectories are not aligned");
  if (ens_traj.empty()) throw std::invalid_argument("rank histogram of empty trajectories");
  const Index nens = ens_traj.front().cols();
  std::vector<std::int64_t> counts(std::size_t(nens) + 1, 0);
  Rng rng(tie_seed);
  for (std::size_t t = 0; t < ens_traj.size(); ++t) {
    const Matrix& members = ens_traj[t];
    if (members.cols() != nens || ref_traj[t].size() != members.rows())
      throw std::invalid_argument("trajectory shapes differ at cycle " + std::to_string(t));
    for (Index k : component_filter) {
      const double v = ref_traj[t](k);
      Index below = 0, ties = 0;
      for (Index e = 0; e < nens; ++e) {
        below += members(k, e) < v;
        ties += members(k, e) == v;
      }
      const Index rank =
          below + (ties > 0 ? Index(rng.uniform_int(std::uint64_t(ties) + 1)) : 0);
      ++counts[std::size_t(rank)];
    }
  }
  return counts;
}

ExperimentRecord run_twin_experiment(const ExperimentConfig& cfg) {
  return run_core(cfg, 1, cfg.filter.zeta, -1, nullptr);
}

ExperimentRecord run_decomposed(const ExperimentConfig& cfg, Index subdomains, Index halo) {
  if (subdomains == 1) return run_twin_experiment(cfg);  // no split, same path
  return run_core(cfg, subdomains, halo, -1, nullptr);
}

SweepResult svd_threshold_sweep(const ExperimentConfig& cfg,
                                const std::vector<double>& thresholds,
                                Index alpha_component) {
  if (thresholds.empty()) throw std::invalid_argument("threshold list is empty");
  for (double s : thresholds)
    if (!(s > 0.0 && s < 1.0))
      throw std::invalid_argument("thresholds must lie in (0,1)");
  if (alpha_component < 0 || alpha_component >= cfg.model.nstate)
    throw std::invalid_argument("alpha component outside the state");
  if (cfg.filter.method != FilterSpec::Method::EnkfMc)
    throw std::invalid_argument("the threshold sweep applies to enkf-mc only");

  SweepResult out;
  out.thresholds = thresholds;
  out.alpha_component = alpha_component;
  for (double sigma_r : thresholds) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.filter.regression_kind = RegressionMethod::Kind::TruncatedSVD;
    run_cfg.filter.sigma_r = sigma_r;
    std::vector<Vector> alpha;
    out.records.push_back(
        run_core(run_cfg, 1, run_cfg.filter.zeta, alpha_component, &alpha));
    out.alpha.push_back(std::move(alpha));
  }
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> diagnostic_keys(const ExperimentRecord& rec) {
  std::vector<std::string> keys;
  for (const auto& cycle : rec.diagnostics)
    for (const auto& [key, value] : cycle)
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

void write_record_csv(const ExperimentRecord& rec, std::ostream& os) {
  const std::vector<std::string> keys = diagnostic_keys(rec);
  os << "cycle,rmse_bg,rmse_an,wall_ms";
  for (const auto& key : keys) os << "," << key;
  os << "\n";
  for (Index c = 0; c < rec.cycles(); ++c) {
    os << (c + 1) << "," << fmt_double(rec.rmse_background[std::size_t(c)]) << ","
       << fmt_double(rec.rmse_analysis[std::size_t(c)]) << ","
       << fmt_double(rec.wall_ms[std::size_t(c)]);
    for (const auto& key : keys) {
      const auto& diag = rec.diagnostics[std::size_t(c)];
      const auto it = diag.find(key);
      os << ",";
      if (it != diag.end()) os << fmt_double(it->second);
    }
    os << "\n";
  }
}

void write_rank_csv(const ExperimentRecord& rec, std::ostream& os) {
  os << "bin,count\n";
  for (std::size_t b = 0; b < rec.rank_counts.size(); ++b)
    os << b << "," << rec.rank_counts[b] << "\n";
}

void write_summary_json(const std::string& config_echo, const ExperimentRecord& rec,
                        std::ostream& os) {
  const auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  };
  const auto aggregate = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return v.empty() ? 0.0 : std::sqrt(s / double(v.size()));
  };
  nlohmann::json j;
  j["config"] = config_echo;
  j["cycles"] = rec.cycles();
  j["rmse_background_mean"] = mean(rec.rmse_background);
  j["rmse_analysis_mean"] = mean(rec.rmse_analysis);
  j["rmse_background_aggregate"] = aggregate(rec.rmse_background);
  j["rmse_analysis_aggregate"] = aggregate(rec.rmse_analysis);
  j["wall_ms_total"] = std::accumulate(rec.wall_ms.begin(), rec.wall_ms.end(), 0.0);
  j["rank_counts"] = rec.rank_counts;
  os << j.dump(2) << "\n";
}

void write_states_csv(const Matrix& states_in_columns, std::ostream& os) {
  const auto old_precision = os.precision(17);
  for (Index c = 0; c < states_in_columns.cols(); ++c) {
    for (Index i = 0; i < states_in_columns.rows(); ++i)
      os << (i ? "," : "") << states_in_columns(i, c);
    os << "\n";
  }
  os.precision(old_precision);
}

Matrix read_states_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged state csv");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("state csv is empty");
  Matrix m(Index(rows.front().size()), Index(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c)
    for (std::size_t i = 0; i < rows[c].size(); ++i) m(Index(i), Index(c)) = rows[c][i];
  return m;
}

}  // namespace enkfmc
