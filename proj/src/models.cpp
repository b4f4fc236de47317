#include "enkfmc/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "enkfmc/parallel.hpp"
#include "enkfmc/rng.hpp"

namespace enkfmc {

namespace {

void check_model(const Lorenz96Config& cfg) {
  if (cfg.nstate < 4)
    throw std::invalid_argument("lorenz-96 needs nstate >= 4 for distinct neighbors");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (cfg.steps_per_cycle < 1)
    throw std::invalid_argument("steps_per_cycle must be >= 1");
}

Index units_to_steps(const Lorenz96Config& cfg, double units) {
  return Index(std::llround(units / cfg.dt));
}

}  // namespace

Vector lorenz96_tendency(const Lorenz96Config& cfg, const Vector& x) {
  check_model(cfg);
  const Index n = cfg.nstate;
  if (x.size() != n) throw std::invalid_argument("state size does not match nstate");
  Vector dx(n);
  for (Index j = 0; j < n; ++j) {
    const double xp1 = x((j + 1) % n);
    const double xm1 = x((j - 1 + n) % n);
    const double xm2 = x((j - 2 + n) % n);
    dx(j) = (xp1 - xm2) * xm1 - x(j) + cfg.forcing;
  }
  return dx;
}

Vector rk4_step(const Lorenz96Config& cfg, const Vector& x) {
  const double dt = cfg.dt;
  const Vector k1 = lorenz96_tendency(cfg, x);
  const Vector k2 = lorenz96_tendency(cfg, x + 0.5 * dt * k1);
  const Vector k3 = lorenz96_tendency(cfg, x + 0.5 * dt * k2);
  const Vector k4 = lorenz96_tendency(cfg, x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vector advance_steps(const Lorenz96Config& cfg, Vector x, Index nsteps) {
  for (Index s = 0; s < nsteps; ++s) {
    x = rk4_step(cfg, x);
    if (!x.allFinite())
      throw std::runtime_error("lorenz-96 state became non-finite at step " +
                               std::to_string(s + 1));
  }
  return x;
}

Matrix integrate(const Lorenz96Config& cfg, const Vector& x0, Index cycles) {
  check_model(cfg);
  if (!x0.allFinite()) throw std::invalid_argument("initial state must be finite");
  if (cycles < 0) throw std::invalid_argument("cycles must be nonnegative");
  Matrix traj(x0.size(), cycles + 1);
  traj.col(0) = x0;
  for (Index c = 0; c < cycles; ++c)
    traj.col(c + 1) = advance_steps(cfg, traj.col(c), cfg.steps_per_cycle);
  return traj;
}

ObservationNetwork build_network(Index nstate, double p, NetworkPattern pattern) {
  if (nstate < 1) throw std::invalid_argument("nstate must be >= 1");
  if (!(p > 0.0 && p <= 1.0))
    throw std::invalid_argument("observation fraction must lie in (0,1]");
  const Index target = Index(std::llround(p * double(nstate)));
  if (target < 1)
    throw std::invalid_argument("observation fraction yields zero observations");

  ObservationNetwork net;
  net.fraction = p;
  if (pattern.kind == NetworkPattern::Kind::EveryKth) {
    const Index stride = std::max<Index>(1, Index(std::llround(1.0 / p)));
    for (Index k = 0; k < nstate; k += stride) net.indices.push_back(k);
  } else {
    // partial Fisher-Yates, then sort: reproducible draw without replacement
    std::vector<Index> pool(static_cast<std::size_t>(nstate));
    std::iota(pool.begin(), pool.end(), Index(0));
    Rng rng(pattern.seed);
    for (Index i = 0; i < target; ++i) {
      const Index j = i + Index(rng.uniform_int(std::uint64_t(nstate - i)));
      std::swap(pool[std::size_t(i)], pool[std::size_t(j)]);
    }
    net.indices.assign(pool.begin(), pool.begin() + target);
    std::sort(net.indices.begin(), net.indices.end());
  }
  return net;
}

ObservationBundle synthesize_observation(const Vector& x_ref, const ObservationNetwork& net,
                                         double rel_sigma, std::uint64_t seed) {
  if (!(rel_sigma > 0.0)) throw std::invalid_argument("rel_sigma must be positive");
  const Index n = x_ref.size();
  const Index nobs = Index(net.indices.size());
  for (Index k : net.indices)
    if (k < 0 || k >= n) throw std::invalid_argument("network index outside the state");

  const double rms = n > 0 ? std::sqrt(x_ref.squaredNorm() / double(n)) : 0.0;
  const double sigma_floor = rel_sigma * 1e-3 * rms;
  Vector y(nobs), r(nobs);
  Rng rng(seed);
  for (Index i = 0; i < nobs; ++i) {
    const double value = x_ref(net.indices[std::size_t(i)]);
    const double sigma = std::max(std::abs(rel_sigma * value), sigma_floor);
    r(i) = sigma * sigma;
    y(i) = value + sigma * rng.gaussian();
  }
  return {std::move(y), net.indices, PositiveDiagonal(std::move(r))};
}

SpinUpState spin_up(const Lorenz96Config& cfg, const SpinUpPreset& preset, Index nens,
                    std::uint64_t reference_seed, std::uint64_t ensemble_seed,
                    int workers) {
  check_model(cfg);
  if (nens < 2) throw std::invalid_argument("spin-up needs nens >= 2");
  const Index n = cfg.nstate;

  Rng ref_rng(reference_seed);
  Vector x0(n);
  for (Index i = 0; i < n; ++i) x0(i) = cfg.forcing + ref_rng.gaussian();
  const Vector reference = advance_steps(cfg, x0, units_to_steps(cfg, preset.reference_units));

  Rng ens_rng(ensemble_seed);
  Vector perturbed = reference;
  for (Index i = 0; i < n; ++i)
    perturbed(i) += preset.perturbation * reference(i) * ens_rng.gaussian();
  const Vector background =
      advance_steps(cfg, perturbed, units_to_steps(cfg, preset.background_units));

  // draw every member perturbation serially, then propagate in parallel so
  // the result does not depend on the worker count
  Matrix members(n, nens);
  for (Index e = 0; e < nens; ++e)
    for (Index i = 0; i < n; ++i)
      members(i, e) =
          background(i) + preset.perturbation * background(i) * ens_rng.gaussian();
  const Index steps = units_to_steps(cfg, preset.ensemble_units);
  parallel_for(nens, workers, [&](Index e) {
    members.col(e) = advance_steps(cfg, members.col(e), steps);
  });

  return {reference, EnsembleMatrix(std::move(members))};
}

}  // namespace enkfmc
