#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gibbs/energy.hpp"
#include "gibbs/random.hpp"
#include "gibbs/sampler.hpp"
#include "gibbs/stats.hpp"
#include "gibbs/window.hpp"

namespace gibbs {

using ModelPtr = std::shared_ptr<const EnergyModel>;

/// Poisson process of intensity z' > 0.
struct PoissonLaw {
  double intensity = 1.0;
};
/// The free-boundary Gibbs law Q_n of the model under study.
struct GibbsLaw {};
using LawSpec = std::variant<PoissonLaw, GibbsLaw>;

std::string describe(const LawSpec& law);

/// Knobs shared by the estimators. `mcmc` applies to every chain run.
struct ThermoOptions {
  McmcParams mcmc;
  /// Thermodynamic-integration nodes; empty selects 11 equally spaced nodes.
  std::vector<double> theta_grid;
  /// Simpson weights; trapezoid otherwise.
  bool simpson = true;
  /// Grid doublings allowed when |Simpson - trapezoid| exceeds the MC error.
  int max_refinements = 2;
  /// R-hat above this at any node is an error.
  double max_rhat = 1.1;
  /// Independent draws per window for Poisson laws.
  int poisson_draws = 400;
  /// Mean-energy routes must agree within this many joint standard errors.
  double route_tolerance = 3.0;
  int jobs = 1;
};

// --- partition function --------------------------------------------------

struct BruteForceResult {
  Estimate log_z;  ///< std_error is the truncation bound
  /// T_k = (1/k!) int_{W^k} exp(-H), so Z = exp(-|W|) sum_k T_k.
  std::vector<double> terms;
  /// E[N] under the Gibbs law on the window.
  double mean_count = 0.0;
};

/// ln Z of the window with empty exterior by its Poisson expansion. T_0 and
/// T_1 are exact; T_2 integrates the rectangle pair-distance density by
/// Gauss-Legendre; T_k, k >= 3, uses a product midpoint rule over multisets
/// of cells with at most `nodes_per_axis` cells per axis. Throws
/// EstimatorError if the stability tail beyond n_max exceeds 1e-6.
BruteForceResult brute_force_log_partition(const EnergyModel& model, const Window& window, int n_max,
                                           int nodes_per_axis);

/// Distribution function of the distance between two independent uniform
/// points of an a x b rectangle.
double rectangle_distance_cdf(double a, double b, double t);
double rectangle_distance_density(double a, double b, double t);

/// Integral of samples f(x) over increasing nodes x: composite Simpson on
/// pairs of intervals (trapezoid on a leftover one), or the trapezoid rule.
double node_quadrature(const std::vector<double>& x, const std::vector<double>& f, bool simpson);

struct TiNode {
  double theta;
  Estimate mean_energy;  ///< E_theta[H]
  double rhat;
  ChainDiagnostics diagnostics;
};

struct TiResult {
  Estimate log_z;  ///< ln Z of the window
  std::vector<TiNode> nodes;
  double quadrature_error = 0.0;  ///< |Simpson - trapezoid| on the final grid
  int refinements = 0;
  /// ln pi(no pair closer than the core), 0 without a hard core.
  Estimate log_admissible;
};

/// Diameter below which pairs are forbidden, 0 if none.
double core_diameter(const EnergyModel& model);

/// ln Z = ln pi(admissible) - int_0^1 E_theta[H] dtheta on `window` with
/// empty exterior. Throws EstimatorError naming theta if R-hat exceeds the
/// limit.
TiResult ti_log_partition(ModelPtr model, const Window& window, const ThermoOptions& options, Seed seed);

/// ln pi(every pair farther apart than `core`) on `window`, by staging the
/// core through restricted Poisson processes.
Estimate log_admissible_probability(const Window& window, double core, const ThermoOptions& options,
                                    Seed seed);

struct PressurePoint {
  double n;
  Estimate pressure;  ///< ln Z_n / |Lambda_n|
  TiResult ti;
};

struct PressureResult {
  Estimate pressure;  ///< at the largest n
  std::vector<PressurePoint> trend;
  double lower = -1.0;  ///< bracket [-1, e^A - 1]
  double upper = 0.0;
};

/// Pressure estimates over increasing n. Throws InvariantViolation if any
/// estimate leaves [-1 - 3 SE, e^A - 1 + 3 SE].
PressureResult estimate_pressure(ModelPtr model, const std::vector<double>& n_list, const ThermoOptions& options,
                                 Seed seed);

// --- mean energy -----------------------------------------------------------

/// Closed-form mean energy under a Poisson law, +inf under a hard core,
/// nullopt when no closed form is implemented.
std::optional<double> mean_energy_poisson(const EnergyModel& model, double intensity);

struct MeanEnergyResult {
  Estimate value;  ///< the preferred route
  /// (a) H(omega_{Lambda_n}) / |Lambda_n|, Richardson-extrapolated over n/2, n.
  std::optional<Estimate> direct;
  /// (b) pairwise models: sum over x in the interior of z + phi-sum / 2.
  std::optional<Estimate> palm;
  /// (c) Quermass: mean cube share over interior unit cubes.
  std::optional<Estimate> cube;
};

/// Mean energy per unit volume of `law` under `model`, by every applicable
/// route. Throws EstimatorError if two routes disagree beyond the tolerance
/// or the energy is infinite.
MeanEnergyResult mean_energy(ModelPtr model, const LawSpec& law, double n, const ThermoOptions& options, Seed seed);

// --- entropy, gap, boundary -------------------------------------------------

/// 1 - z' + z' ln z'.
double entropy_poisson(double intensity);

struct EntropyResult {
  Estimate entropy;       ///< (-E[H] - ln Z_n) / |Lambda_n|
  Estimate energy;        ///< E_{Q_n}[H] / |Lambda_n|, independent chains
  Estimate log_z_per_volume;
};

/// Specific entropy of Q_n relative to the unit Poisson process. `pressure`
/// may supply ln Z_n already computed at this n.
EntropyResult entropy_gibbs(ModelPtr model, double n, const ThermoOptions& options, Seed seed,
                            const PressurePoint* pressure = nullptr);

struct GapResult {
  Estimate gap;  ///< I(P) + H(P) + p_H
  Estimate entropy;
  Estimate energy;
  Estimate pressure;
};

/// Delta(P) for P = `law` with p_H taken from `pressure`. Mean energy is the
/// closed form for Poisson laws when `analytic_energy` is set and one
/// exists, else estimated.
GapResult variational_gap(ModelPtr model, const LawSpec& law, double n, const PressureResult& pressure,
                          const ThermoOptions& options, Seed seed, bool analytic_energy = false);

struct BoundaryPoint {
  int n;
  Estimate value;  ///< E[boundary term of Lambda_n] / |Lambda_n|
};

/// E[H_{Lambda_n} - H(omega_{Lambda_n})] / |Lambda_n| under Q_{n + R0},
/// R0 = floor(R) + 1.
std::vector<BoundaryPoint> boundary_effect_curve(ModelPtr model, const std::vector<int>& n_list,
                                                 const ThermoOptions& options, Seed seed);

/// floor(R) + 1.
int halo_width(const EnergyModel& model);

}  // namespace gibbs
