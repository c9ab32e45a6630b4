#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "gibbs/configuration.hpp"
#include "gibbs/energy.hpp"
#include "gibbs/random.hpp"
#include "gibbs/stats.hpp"
#include "gibbs/window.hpp"

namespace gibbs {

/// Conditional Gibbs law on a window: density exp(-theta H_Lambda(omega u
/// boundary)) against the unit Poisson process. An empty boundary is the
/// free (empty exterior) condition.
struct Target {
  std::shared_ptr<const EnergyModel> model;
  Window window;
  Configuration boundary;
  double theta = 1.0;

  /// Free boundary on cube(n).
  static Target free(std::shared_ptr<const EnergyModel> model, double n, double theta = 1.0);
  /// Fixed exterior; points farther than the range from the window are
  /// dropped. Throws if a point lies inside the window or if the exterior
  /// has infinite energy.
  static Target fixed(std::shared_ptr<const EnergyModel> model, const Window& window,
                      const Configuration& exterior, double theta = 1.0);
};

struct McmcParams {
  /// Steps before the first retained sample; negative selects the default
  /// of 1e5 steps per unit volume (half that for theta < 0.5).
  std::int64_t burn_in = -1;
  std::int64_t samples = 1000;  ///< retained samples per chain
  std::int64_t thin = 100;      ///< steps between retained samples
  int chains = 4;
  double kick_scale = 0.0;  ///< MOVE proposal sd; 0 selects range / 2
  /// Recompute the energy from scratch every this many steps.
  std::int64_t revalidate_every = 20000;
  /// Added to every birth log-acceptance. Nonzero values corrupt the chain;
  /// used only to check that the GNZ diagnostic notices.
  double birth_log_bias = 0.0;
};

std::int64_t default_burn_in(const Target& target);

enum class MoveKind { birth = 0, death = 1, move = 2 };

struct MoveTally {
  std::int64_t proposed = 0;
  std::int64_t accepted = 0;
  double rate() const { return proposed ? static_cast<double>(accepted) / proposed : 0.0; }
};

/// One birth-death-move Metropolis-Hastings chain.
class Chain {
 public:
  Chain(Target target, Seed seed, const McmcParams& params = {},
        const Configuration& initial = Configuration());
  Chain(const Chain&) = delete;
  Chain& operator=(const Chain&) = delete;
  Chain(Chain&&) noexcept;
  ~Chain();

  void step();
  void advance(std::int64_t steps);

  /// Current points in the window, canonical order.
  Configuration current() const;
  std::span<const Point> points() const;
  std::size_t size() const;
  /// Cached H_Lambda(current u boundary), without the theta factor.
  double energy() const;
  std::int64_t step_count() const;
  const Target& target() const;
  const std::array<MoveTally, 3>& tallies() const;

  /// Recomputes the energy from scratch and compares with the cache.
  /// Throws InvariantViolation beyond 1e-9 relative; resets the cache.
  void revalidate();

  /// h(x | current u boundary); x must not be a current point.
  double conditional_energy(const Point& x) const;
  /// Points of current u boundary within `radius` <= range of x.
  void neighbours(const Point& x, double radius, std::vector<Point>& out) const;

  /// Log acceptance ratio -theta (H(after) - H(before)) for moving point i to
  /// x; -inf if x leaves the window or hits a hard core.
  double move_log_ratio(std::size_t i, const Point& x) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ChainDiagnostics {
  /// Per chain: N and H at each retained sample, and the step index.
  std::vector<std::vector<double>> n_trace;
  std::vector<std::vector<double>> h_trace;
  std::vector<std::vector<std::int64_t>> step_trace;
  /// Per chain, indexed by MoveKind.
  std::vector<std::array<MoveTally, 3>> tallies;
  std::int64_t burn_in = 0;
  double ess_n = 0.0;
  double ess_h = 0.0;
  double rhat_n = 1.0;
  double rhat_h = 1.0;

  /// Pooled acceptance rate of one move type.
  double acceptance(MoveKind kind) const;
};

struct RunResult {
  std::vector<Configuration> samples;  ///< chain-major order
  std::vector<int> sample_chain;
  ChainDiagnostics diagnostics;
};

/// Called at every retained sample with the chain index. Each chain runs on
/// one thread, so per-chain accumulators need no locking.
using SampleVisitor = std::function<void(int chain, const Chain& state)>;

/// Runs params.chains independent chains with seeds seed.child(c) on up to
/// `jobs` threads and returns diagnostics; `visit` sees every retained state.
ChainDiagnostics run_visit(const Target& target, const McmcParams& params, Seed seed, int jobs,
                           const SampleVisitor& visit);

/// As run_visit, also storing every retained configuration.
RunResult run(const Target& target, const McmcParams& params, Seed seed, int jobs = 1);

/// Samples of the free-boundary Gibbs law Q_n on cube(n).
RunResult sample_free_boundary(std::shared_ptr<const EnergyModel> model, double n,
                               const McmcParams& params, Seed seed, int jobs = 1);

/// Test function g(x, omega) of the GNZ identity, given x and the points of
/// omega \ {x} within the model range of x.
using GnzTestFunction = std::function<double(const Point& x, std::span<const Point> near)>;

struct GnzResult {
  Estimate residual;
  /// Mean of the point sum, the scale against which the residual is judged.
  Estimate leading;
};

/// E[sum_{x in omega} g(x, omega \ x)] - E[int_Lambda g(x, omega) exp(-theta
/// h(x | omega)) dx], the integral by stratified uniform nodes
/// (`nodes_per_axis`^d per sample). Standard error by batch means.
GnzResult gnz_residual(const Target& target, std::span<const Configuration> samples,
                       const GnzTestFunction& g, int nodes_per_axis, Seed seed);

/// The two test functions used throughout: g = 1 and g = number of
/// neighbours within `radius`.
GnzTestFunction gnz_constant();
GnzTestFunction gnz_neighbour_count(double radius);

}  // namespace gibbs
