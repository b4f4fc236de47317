#pragma once

#include <cstdint>
#include <vector>

#include "enkfmc/linalg.hpp"
#include "enkfmc/observation.hpp"

namespace enkfmc {

struct Lorenz96Config {
  Index nstate = 40;
  double forcing = 8.0;
  double dt = 0.05;
  Index steps_per_cycle = 8;
};

// Cyclic Lorenz-96 right-hand side: dx_j = (x_{j+1} - x_{j-2}) x_{j-1} - x_j + F.
Vector lorenz96_tendency(const Lorenz96Config& cfg, const Vector& x);

// One classical RK4 step of size dt.
Vector rk4_step(const Lorenz96Config& cfg, const Vector& x);

// nsteps RK4 steps; a non-finite state reports the offending step index.
Vector advance_steps(const Lorenz96Config& cfg, Vector x, Index nsteps);

// Trajectory over assimilation cycles, steps_per_cycle RK4 steps each:
// nstate x (cycles+1) with column 0 = x0.
Matrix integrate(const Lorenz96Config& cfg, const Vector& x0, Index cycles);

struct NetworkPattern {
  enum class Kind { EveryKth, RandomSeeded };
  Kind kind = Kind::EveryKth;
  std::uint64_t seed = 0;

  static NetworkPattern every_kth() { return {Kind::EveryKth, 0}; }
  static NetworkPattern random_seeded(std::uint64_t seed) {
    return {Kind::RandomSeeded, seed};
  }
};

// Which components get observed, at what relative noise level.
struct ObservationNetwork {
  double fraction = 1.0;       // p, fraction of observed components
  std::vector<Index> indices;  // sorted observed components
  double rel_sigma = 0.01;     // noise sigma relative to the observed value
};

ObservationNetwork build_network(Index nstate, double p, NetworkPattern pattern);

// y = H x_ref + noise with per-component variance (rel_sigma * value)^2,
// floored at (rel_sigma * 1e-3 * RMS(x_ref))^2 so zero crossings keep R > 0.
ObservationBundle synthesize_observation(const Vector& x_ref, const ObservationNetwork& net,
                                         double rel_sigma, std::uint64_t seed);

// Twin-experiment initialization: settle a random state onto the attractor
// for the reference, then derive a decorrelated initial ensemble from a
// perturbed copy. Durations are in model time units.
struct SpinUpPreset {
  double reference_units = 10.0;
  double background_units = 5.0;
  double ensemble_units = 2.5;
  double perturbation = 0.05;  // relative size of both perturbation stages
};

struct SpinUpState {
  Vector reference;
  EnsembleMatrix ensemble;
};

SpinUpState spin_up(const Lorenz96Config& cfg, const SpinUpPreset& preset, Index nens,
                    std::uint64_t reference_seed, std::uint64_t ensemble_seed,
                    int workers = 1);

}  // namespace enkfmc
