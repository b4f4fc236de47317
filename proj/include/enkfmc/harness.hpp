#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "enkfmc/estimator.hpp"
#include "enkfmc/filters.hpp"
#include "enkfmc/models.hpp"

namespace enkfmc {

struct FilterSpec {
  enum class Method { EnkfMc, Letkf, EnkfSchur };

  Method method = Method::EnkfMc;
  Index zeta = 5;
  RegressionMethod::Kind regression_kind = RegressionMethod::Kind::TruncatedSVD;
  double sigma_r = 0.10;  // truncated-svd cutoff
  double lambda = 0.0;    // tikhonov weight
  Formulation formulation = Formulation::Incremental;
  double inflation = 1.0;
  bool inflation_explicit = false;  // set by the config parser; per-method default otherwise

  RegressionMethod regression() const;  // kind plus its active knob
};

// Every random draw in a run stems from these four. Derived streams:
// observation seed -> network draw (stream 0) and per-cycle measurement noise
// (stream cycle+1); perturbation seed -> rank-histogram ties (stream 0) and
// per-cycle observation perturbations (stream cycle+1).
struct Seeds {
  std::uint64_t reference = 1;
  std::uint64_t ensemble = 2;
  std::uint64_t observation = 3;
  std::uint64_t perturbation = 4;
};

// Knobs for the `estimate` command's synthetic-ensemble runs.
struct EstimateSpec {
  std::string source = "synthetic";  // synthetic | csv
  std::string csv_path;
  double rho = 0.5;     // off-diagonal weight of the synthetic true factors
  Index trials = 10;    // seeds per nens for the median error norm
  std::vector<Index> nens_sweep;  // empty: single run at the configured nens
  bool report_error_norm = true;
};

struct ExperimentConfig {
  Lorenz96Config model;
  SpinUpPreset spinup;
  double obs_fraction = 1.0;  // 0 turns observations off entirely
  NetworkPattern::Kind pattern = NetworkPattern::Kind::EveryKth;
  double rel_sigma = 0.01;
  FilterSpec filter;
  Index nens = 30;
  Index cycles = 30;
  Seeds seeds;
  EstimateSpec estimate;
  std::vector<double> sweep_thresholds{0.05, 0.10, 0.15, 0.20, 0.25, 0.30};
  Index sweep_alpha_component = 20;  // 1-based in config and outputs
  Index subdomains = 1;
  int workers = 0;  // 0: all hardware threads
  std::string out_dir = "out";
};

struct ExperimentRecord {
  std::vector<double> rmse_background;  // per-cycle error norms
  std::vector<double> rmse_analysis;
  std::vector<double> wall_ms;  // measured; excluded from the determinism contract
  std::vector<std::map<std::string, double>> diagnostics;
  std::vector<std::int64_t> rank_counts;  // nens+1 bins over all cycles and components
  Matrix final_ensemble;                  // analysis members after the last cycle

  Index cycles() const { return Index(rmse_analysis.size()); }
};

// Everything except wall_ms, which is the one measured (non-seeded) field.
bool records_equal(const ExperimentRecord& a, const ExperimentRecord& b);

// sqrt((1/N) sum_k |ref_k - traj_k|^2), the squared-norm-per-cycle aggregate.
double rmse(const std::vector<Vector>& ref_traj, const std::vector<Vector>& traj);
// Same, normalized per component as well: sqrt((1/(N n)) sum |.|^2).
double rmse_per_component(const std::vector<Vector>& ref_traj, const std::vector<Vector>& traj);

// Rank of the reference among the sorted member values, per cycle and
// selected component; ties broken uniformly with the dedicated seed.
std::vector<std::int64_t> rank_histogram(const std::vector<Vector>& ref_traj,
                                         const std::vector<Matrix>& ens_traj,
                                         const std::vector<Index>& component_filter,
                                         std::uint64_t tie_seed);

ExperimentRecord run_twin_experiment(const ExperimentConfig& cfg);

// Ring split into contiguous arcs analyzed concurrently with halo-wide
// overlap; interiors are written back. subdomains = 1 is exactly the
// monolithic path. EnKF-MC only.
ExperimentRecord run_decomposed(const ExperimentConfig& cfg, Index subdomains, Index halo);

struct SweepResult {
  std::vector<double> thresholds;
  std::vector<ExperimentRecord> records;
  // [threshold][cycle]: full per-direction regression weights for the
  // configured component (empty when it has no predecessors)
  std::vector<std::vector<Vector>> alpha;
  Index alpha_component = 0;  // 0-based here
};

SweepResult svd_threshold_sweep(const ExperimentConfig& cfg,
                                const std::vector<double>& thresholds,
                                Index alpha_component);

void write_record_csv(const ExperimentRecord& rec, std::ostream& os);
void write_rank_csv(const ExperimentRecord& rec, std::ostream& os);
// config_echo is embedded verbatim so the run is reproducible from the artifact
void write_summary_json(const std::string& config_echo, const ExperimentRecord& rec,
                        std::ostream& os);
// one row per state vector (members or trajectory states)
void write_states_csv(const Matrix& states_in_columns, std::ostream& os);
Matrix read_states_csv(std::istream& is);

}  // namespace enkfmc
