#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "enkfmc/config.hpp"

namespace py = pybind11;
using namespace enkfmc;

namespace {

ObservationBundle make_bundle(Vector y, std::vector<Index> indices, Vector r_diag) {
  return ObservationBundle(std::move(y), std::move(indices), PositiveDiagonal(std::move(r_diag)));
}

RegressionMethod make_method(const std::string& name, double sigma_r, double lambda) {
  if (name == "normal") return RegressionMethod::normal_equations();
  if (name == "tikhonov") return RegressionMethod::tikhonov(lambda);
  if (name == "truncated-svd") return RegressionMethod::truncated_svd(sigma_r);
  throw std::invalid_argument("unknown regression method: " + name);
}

Formulation make_formulation(const std::string& name) {
  if (name == "incremental") return Formulation::Incremental;
  if (name == "primal") return Formulation::Primal;
  if (name == "dual") return Formulation::Dual;
  throw std::invalid_argument("unknown formulation: " + name);
}

}  // namespace

PYBIND11_MODULE(enkfmc, m) {
  m.doc() = "ensemble assimilation with a sparsity-constrained estimated precision";

  m.def(
      "integrate",
      [](const Vector& x0, Index cycles, double forcing, double dt, Index steps_per_cycle) {
        Lorenz96Config cfg;
        cfg.nstate = x0.size();
        cfg.forcing = forcing;
        cfg.dt = dt;
        cfg.steps_per_cycle = steps_per_cycle;
        return integrate(cfg, x0, cycles);
      },
      py::arg("x0"), py::arg("cycles"), py::arg("forcing") = 8.0, py::arg("dt") = 0.05,
      py::arg("steps_per_cycle") = 8,
      "Lorenz-96 trajectory; column c is the state after c cycles.");

  m.def(
      "estimate_precision",
      [](const Matrix& members, Index zeta, const std::string& method, double sigma_r,
         double lambda, int workers) {
        const EnsembleMatrix ens{members};
        const GridGeometry g = GridGeometry::ring(ens.nstate(), zeta);
        return estimate_factors(ens, g, make_method(method, sigma_r, lambda), workers).dense();
      },
      py::arg("members"), py::arg("zeta"), py::arg("method") = "truncated-svd",
      py::arg("sigma_r") = 0.10, py::arg("lambda") = 0.0, py::arg("workers") = 1,
      "Dense estimated background precision for a ring of the member dimension.");

  m.def(
      "analyze_enkf_mc",
      [](const Matrix& members, const Vector& y, std::vector<Index> indices,
         const Vector& r_diag, Index zeta, const std::string& formulation,
         const std::string& method, double sigma_r, double lambda, std::uint64_t seed,
         int workers) {
        const EnsembleMatrix ens{members};
        const GridGeometry g = GridGeometry::ring(ens.nstate(), zeta);
        const ObservationBundle obs = make_bundle(y, std::move(indices), r_diag);
        const CholeskyFactors factors =
            estimate_factors(ens, g, make_method(method, sigma_r, lambda), workers);
        const PerturbedObservations perturbed = perturb_observations(obs, ens.nens(), seed);
        return analyze_enkf_mc(ens, obs, factors, make_formulation(formulation), perturbed,
                               workers)
            .ensemble.members();
      },
      py::arg("members"), py::arg("y"), py::arg("indices"), py::arg("r_diag"), py::arg("zeta"),
      py::arg("formulation") = "incremental", py::arg("method") = "truncated-svd",
      py::arg("sigma_r") = 0.10, py::arg("lambda") = 0.0, py::arg("seed") = 0,
      py::arg("workers") = 1, "One analysis step with the estimated-precision filter.");

  m.def(
      "analyze_letkf",
      [](const Matrix& members, const Vector& y, std::vector<Index> indices,
         const Vector& r_diag, Index zeta, double inflation, int workers) {
        const EnsembleMatrix ens{members};
        const GridGeometry g = GridGeometry::ring(ens.nstate(), zeta);
        return analyze_letkf(ens, make_bundle(y, std::move(indices), r_diag), g, inflation,
                             workers)
            .ensemble.members();
      },
      py::arg("members"), py::arg("y"), py::arg("indices"), py::arg("r_diag"), py::arg("zeta"),
      py::arg("inflation") = 1.0, py::arg("workers") = 1, "One local-transform analysis step.");

  m.def(
      "analyze_enkf_schur",
      [](const Matrix& members, const Vector& y, std::vector<Index> indices,
         const Vector& r_diag, Index zeta, std::uint64_t seed) {
        const EnsembleMatrix ens{members};
        const GridGeometry g = GridGeometry::ring(ens.nstate(), zeta);
        const ObservationBundle obs = make_bundle(y, std::move(indices), r_diag);
        const PerturbedObservations perturbed = perturb_observations(obs, ens.nens(), seed);
        return analyze_enkf_schur(ens, obs, g, perturbed).ensemble.members();
      },
      py::arg("members"), py::arg("y"), py::arg("indices"), py::arg("r_diag"), py::arg("zeta"),
      py::arg("seed") = 0, "One tapered-covariance stochastic analysis step.");

  m.def(
      "run_experiment",
      [](const std::string& config_text) {
        const ExperimentConfig cfg = parse_config_text(config_text);
        const ExperimentRecord rec = cfg.subdomains > 1
                                         ? run_decomposed(cfg, cfg.subdomains, cfg.filter.zeta)
                                         : run_twin_experiment(cfg);
        py::dict out;
        out["rmse_background"] = rec.rmse_background;
        out["rmse_analysis"] = rec.rmse_analysis;
        out["rank_counts"] = rec.rank_counts;
        out["final_ensemble"] = rec.final_ensemble;
        out["config"] = render_config(cfg);
        return out;
      },
      py::arg("config_text"),
      "Full twin experiment from config text; observation files are not written.");

  m.def(
      "rmse",
      [](const Matrix& reference, const Matrix& trajectory) {
        if (reference.cols() != trajectory.cols() || reference.rows() != trajectory.rows())
          throw std::invalid_argument("trajectories must agree in shape");
        std::vector<Vector> ref, traj;
        for (Index c = 0; c < reference.cols(); ++c) {
          ref.emplace_back(reference.col(c));
          traj.emplace_back(trajectory.col(c));
        }
        return rmse(ref, traj);
      },
      py::arg("reference"), py::arg("trajectory"),
      "Root mean squared state-error norm over trajectory columns.");

  m.def("default_config_text", [] { return render_config(default_config()); },
        "Canonical rendering of the documented defaults.");
}
