#include "gibbs/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "gibbs/cell_list.hpp"
#include "gibbs/errors.hpp"

namespace gibbs {

Target Target::free(std::shared_ptr<const EnergyModel> model, double n, double theta) {
  const int dim = model->dim();
  return Target{std::move(model), Window::cube(n, dim), Configuration(dim), theta};
}

Target Target::fixed(std::shared_ptr<const EnergyModel> model, const Window& window,
                     const Configuration& exterior, double theta) {
  const Window halo = window.dilate(model->range());
  std::vector<Point> kept;
  for (const auto& p : exterior) {
    if (window.contains(p)) throw std::invalid_argument("fixed boundary point lies inside the window");
    if (halo.contains_closed(p)) kept.push_back(p);
  }
  Configuration boundary(window.dim(), std::move(kept));
  if (std::isinf(model->total_energy(boundary))) {
    throw std::invalid_argument("fixed boundary configuration has infinite energy");
  }
  return Target{std::move(model), window, std::move(boundary), theta};
}

std::int64_t default_burn_in(const Target& target) {
  const double per_volume = target.theta < 0.5 ? 5e4 : 1e5;
  return static_cast<std::int64_t>(std::ceil(per_volume * target.window.volume()));
}

double ChainDiagnostics::acceptance(MoveKind kind) const {
  MoveTally total;
  for (const auto& t : tallies) {
    total.proposed += t[static_cast<int>(kind)].proposed;
    total.accepted += t[static_cast<int>(kind)].accepted;
  }
  return total.rate();
}

// ---------------------------------------------------------------------------

// Boundary points carry negative ids, so "skip nothing" must be out of range.
constexpr int kNoSkip = std::numeric_limits<int>::min();

struct Chain::Impl {
  Target target;
  McmcParams params;
  Rng rng;
  const EnergyModel& model;
  int dim;
  double range;
  double kick;
  double volume;
  double log_volume;

  // Uniform grid over the window dilated by the range. Cell entries are
  // mobile indices (>= 0) or boundary indices encoded as -(k + 1).
  Point origin;
  std::array<int, 3> shape{1, 1, 1};
  double cell = 1.0;
  std::vector<std::vector<int>> cells;
  std::vector<Point> pts;
  std::vector<int> cell_of;
  std::vector<int> slot;
  std::vector<Point> bpts;

  double energy = 0.0;
  std::int64_t steps = 0;
  std::array<MoveTally, 3> tallies{};
  mutable std::vector<Point> scratch;

  Impl(Target t, Seed seed, const McmcParams& p)
      : target(std::move(t)),
        params(p),
        rng(seed),
        model(*target.model),
        dim(target.window.dim()),
        range(target.model->range()),
        kick(p.kick_scale > 0.0 ? p.kick_scale : 0.5 * target.model->range()),
        volume(target.window.volume()),
        log_volume(std::log(target.window.volume())) {
    if (target.model->dim() != dim) throw std::invalid_argument("target window and model dimensions differ");
    if (!(target.theta >= 0.0 && target.theta <= 1.0)) throw std::invalid_argument("theta must lie in [0, 1]");
    const Window grid = target.window.dilate(range);
    origin = grid.lower();
    cell = std::max(range, 1e-12);
    while (true) {
      double total = 1.0;
      for (int a = 0; a < dim; ++a) total *= std::floor(grid.side(a) / cell) + 1.0;
      if (total <= 4e6) break;
      cell *= 1.5;
    }
    for (int a = 0; a < dim; ++a) shape[a] = static_cast<int>(std::floor(grid.side(a) / cell)) + 1;
    cells.assign(static_cast<std::size_t>(shape[0]) * shape[1] * shape[2], {});
    for (const auto& b : target.boundary) {
      bpts.push_back(b);
      cells[cell_index(b)].push_back(-static_cast<int>(bpts.size()));
    }
  }

  int axis_cell(double v, int a) const {
    const int c = static_cast<int>(std::floor((v - origin[a]) / cell));
    return std::clamp(c, 0, shape[a] - 1);
  }

  int cell_index(const Point& p) const {
    int c = 0;
    for (int a = dim - 1; a >= 0; --a) c = c * shape[a] + axis_cell(p[a], a);
    return c;
  }

  const Point& point_of(int id) const { return id >= 0 ? pts[id] : bpts[-id - 1]; }

  // Points within `radius` of x, skipping mobile index `skip`.
  void gather(const Point& x, double radius, int skip, std::vector<Point>& out) const {
    out.clear();
    const double r2 = radius * radius;
    std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < dim; ++a) {
      const int c = axis_cell(x[a], a);
      lo[a] = std::max(c - 1, 0);
      hi[a] = std::min(c + 1, shape[a] - 1);
    }
    for (int i2 = lo[2]; i2 <= hi[2]; ++i2) {
      for (int i1 = lo[1]; i1 <= hi[1]; ++i1) {
        for (int i0 = lo[0]; i0 <= hi[0]; ++i0) {
          for (int id : cells[(static_cast<std::size_t>(i2) * shape[1] + i1) * shape[0] + i0]) {
            if (id == skip) continue;
            const Point& p = point_of(id);
            if (squared_distance(p, x) <= r2) out.push_back(p);
          }
        }
      }
    }
  }

  // h(x | points other than `skip`); +inf also when x duplicates a point.
  double cond(const Point& x, int skip) const {
    gather(x, range, skip, scratch);
    for (const auto& p : scratch) {
      if (p == x) return kInf;
    }
    return model.conditional_energy(x, scratch);
  }

  void insert(const Point& x) {
    const int id = static_cast<int>(pts.size());
    const int c = cell_index(x);
    pts.push_back(x);
    cell_of.push_back(c);
    slot.push_back(static_cast<int>(cells[c].size()));
    cells[c].push_back(id);
  }

  void erase(int id) {
    auto& home = cells[cell_of[id]];
    const int s = slot[id];
    home[s] = home.back();
    slot[home[s]] = s;
    home.pop_back();
    const int last = static_cast<int>(pts.size()) - 1;
    if (id != last) {
      pts[id] = pts[last];
      cell_of[id] = cell_of[last];
      slot[id] = slot[last];
      cells[cell_of[id]][slot[id]] = id;
    }
    pts.pop_back();
    cell_of.pop_back();
    slot.pop_back();
  }

  void relocate(int id, const Point& x) {
    const int c = cell_index(x);
    if (c != cell_of[id]) {
      auto& home = cells[cell_of[id]];
      const int s = slot[id];
      home[s] = home.back();
      slot[home[s]] = s;
      home.pop_back();
      cell_of[id] = c;
      slot[id] = static_cast<int>(cells[c].size());
      cells[c].push_back(id);
    }
    pts[id] = x;
  }

  bool accept(double log_ratio) {
    if (log_ratio >= 0.0) return true;
    if (std::isnan(log_ratio) || log_ratio == -kInf) return false;
    return std::log(rng.uniform_pos()) < log_ratio;
  }

  Point uniform_point() {
    const Window& w = target.window;
    Point x;
    for (int a = 0; a < dim; ++a) {
      x[a] = w.lower()[a] + w.side(a) * rng.uniform();
      if (x[a] >= w.upper()[a]) x[a] = w.lower()[a];
    }
    return x;
  }

  double fresh_energy() const {
    const Configuration cur(dim, pts);
    if (bpts.empty()) return model.total_energy(cur);
    return local_energy(model, cur.merged(target.boundary), target.window);
  }

  void revalidate() {
    const double fresh = fresh_energy();
    const double tol = 1e-9 * std::max(1.0, std::fabs(fresh));
    if (!(std::fabs(fresh - energy) <= tol)) {
      std::ostringstream msg;
      msg << "cached energy " << format_double(energy) << " differs from recomputed "
          << format_double(fresh) << " at step " << steps << " (N=" << pts.size() << ")";
      throw InvariantViolation(msg.str());
    }
    energy = fresh;
  }

  void on_accept() {
    if (!std::isfinite(energy) || std::fabs(energy) > 1e300) {
      std::ostringstream msg;
      msg << "energy diverged at step " << steps << " (N=" << pts.size() << ", H="
          << format_double(energy) << ", " << target.model->describe() << ")";
      throw EstimatorError(msg.str());
    }
#ifndef NDEBUG
    revalidate();
#endif
  }

  void step() {
    const double theta = target.theta;
    const auto kind = static_cast<MoveKind>(rng.uniform_index(3));
    auto& tally = tallies[static_cast<int>(kind)];
    ++tally.proposed;
    const std::size_t n = pts.size();
    if (kind == MoveKind::birth) {
      const Point x = uniform_point();
      const double h = cond(x, kNoSkip);
      if (!std::isinf(h)) {
        const double lr = log_volume - std::log(static_cast<double>(n + 1)) - theta * h + params.birth_log_bias;
        if (accept(lr)) {
          insert(x);
          energy += h;
          ++tally.accepted;
          on_accept();
        }
      }
    } else if (kind == MoveKind::death) {
      if (n > 0) {
        const int id = static_cast<int>(rng.uniform_index(n));
        const double h = cond(pts[id], id);
        const double lr = std::log(static_cast<double>(n)) - log_volume + theta * h;
        if (accept(lr)) {
          erase(id);
          energy -= h;
          ++tally.accepted;
          on_accept();
        }
      }
    } else if (n > 0) {
      const int id = static_cast<int>(rng.uniform_index(n));
      Point x = pts[id];
      for (int a = 0; a < dim; ++a) x[a] += kick * rng.normal();
      if (target.window.contains(x)) {
        const double h_new = cond(x, id);
        if (!std::isinf(h_new)) {
          const double delta = h_new - cond(pts[id], id);
          if (accept(-theta * delta)) {
            relocate(id, x);
            energy += delta;
            ++tally.accepted;
            on_accept();
          }
        }
      }
    }
    ++steps;
    if (params.revalidate_every > 0 && steps % params.revalidate_every == 0) revalidate();
  }
};

Chain::Chain(Target target, Seed seed, const McmcParams& params, const Configuration& initial)
    : impl_(std::make_unique<Impl>(std::move(target), seed, params)) {
  for (const auto& p : initial) {
    if (!impl_->target.window.contains(p)) throw std::invalid_argument("initial point outside the window");
    impl_->insert(p);
  }
  impl_->energy = impl_->fresh_energy();
  if (std::isinf(impl_->energy)) throw std::invalid_argument("initial configuration has infinite energy");
}

Chain::Chain(Chain&&) noexcept = default;
Chain::~Chain() = default;

void Chain::step() { impl_->step(); }

void Chain::advance(std::int64_t steps) {
  for (std::int64_t s = 0; s < steps; ++s) impl_->step();
}

Configuration Chain::current() const { return Configuration(impl_->dim, impl_->pts); }
std::span<const Point> Chain::points() const { return impl_->pts; }
std::size_t Chain::size() const { return impl_->pts.size(); }
double Chain::energy() const { return impl_->energy; }
std::int64_t Chain::step_count() const { return impl_->steps; }
const Target& Chain::target() const { return impl_->target; }
const std::array<MoveTally, 3>& Chain::tallies() const { return impl_->tallies; }
void Chain::revalidate() { impl_->revalidate(); }

double Chain::conditional_energy(const Point& x) const { return impl_->cond(x, kNoSkip); }

void Chain::neighbours(const Point& x, double radius, std::vector<Point>& out) const {
  if (radius > impl_->cell) throw std::invalid_argument("neighbour radius exceeds the grid cell");
  impl_->gather(x, radius, kNoSkip, out);
}

double Chain::move_log_ratio(std::size_t i, const Point& x) const {
  if (!impl_->target.window.contains(x)) return -kInf;
  const int id = static_cast<int>(i);
  const double h_new = impl_->cond(x, id);
  if (std::isinf(h_new)) return -kInf;
  return -impl_->target.theta * (h_new - impl_->cond(impl_->pts[id], id));
}

// ---------------------------------------------------------------------------

ChainDiagnostics run_visit(const Target& target, const McmcParams& params, Seed seed, int jobs,
                           const SampleVisitor& visit) {
  if (params.samples < 1 || params.thin < 1 || params.chains < 1) {
    throw std::invalid_argument("mcmc: samples, thin and chains must be >= 1");
  }
  const std::int64_t burn = params.burn_in < 0 ? default_burn_in(target) : params.burn_in;
  ChainDiagnostics diag;
  diag.burn_in = burn;
  const int chains = params.chains;
  diag.n_trace.assign(chains, {});
  diag.h_trace.assign(chains, {});
  diag.step_trace.assign(chains, {});
  diag.tallies.assign(chains, {});
  parallel_for(chains, jobs, [&](int c) {
    Chain chain(target, seed.child(static_cast<std::uint64_t>(c)), params);
    chain.advance(burn);
    auto& nt = diag.n_trace[c];
    auto& ht = diag.h_trace[c];
    auto& st = diag.step_trace[c];
    nt.reserve(params.samples);
    ht.reserve(params.samples);
    for (std::int64_t s = 0; s < params.samples; ++s) {
      chain.advance(params.thin);
      nt.push_back(static_cast<double>(chain.size()));
      ht.push_back(chain.energy());
      st.push_back(chain.step_count());
      if (visit) visit(c, chain);
    }
    diag.tallies[c] = chain.tallies();
  });
  for (int c = 0; c < chains; ++c) {
    diag.ess_n += effective_sample_size(diag.n_trace[c]);
    diag.ess_h += effective_sample_size(diag.h_trace[c]);
  }
  diag.rhat_n = split_rhat(diag.n_trace);
  diag.rhat_h = split_rhat(diag.h_trace);
  return diag;
}

RunResult run(const Target& target, const McmcParams& params, Seed seed, int jobs) {
  std::vector<std::vector<Configuration>> per_chain(params.chains);
  RunResult out;
  out.diagnostics = run_visit(target, params, seed, jobs, [&](int c, const Chain& chain) {
    per_chain[c].push_back(chain.current());
  });
  for (int c = 0; c < params.chains; ++c) {
    for (auto& s : per_chain[c]) {
      out.samples.push_back(std::move(s));
      out.sample_chain.push_back(c);
    }
  }
  return out;
}

RunResult sample_free_boundary(std::shared_ptr<const EnergyModel> model, double n,
                               const McmcParams& params, Seed seed, int jobs) {
  if (n < 1) throw std::invalid_argument("sample_free_boundary: n must be >= 1");
  return run(Target::free(std::move(model), n, 1.0), params, seed, jobs);
}

// ---------------------------------------------------------------------------

GnzTestFunction gnz_constant() {
  return [](const Point&, std::span<const Point>) { return 1.0; };
}

GnzTestFunction gnz_neighbour_count(double radius) {
  const double r2 = radius * radius;
  return [r2](const Point& x, std::span<const Point> near) {
    double k = 0.0;
    for (const auto& y : near) k += squared_distance(x, y) <= r2 ? 1.0 : 0.0;
    return k;
  };
}

GnzResult gnz_residual(const Target& target, std::span<const Configuration> samples,
                       const GnzTestFunction& g, int nodes_per_axis, Seed seed) {
  if (samples.empty()) throw EstimatorError("gnz_residual: no samples");
  if (nodes_per_axis < 1) throw std::invalid_argument("gnz_residual: nodes_per_axis must be >= 1");
  const EnergyModel& model = *target.model;
  const Window& w = target.window;
  const int dim = w.dim();
  const double range = model.range();
  Rng rng(seed);
  int strata = 1;
  for (int a = 0; a < dim; ++a) strata *= nodes_per_axis;

  std::vector<double> residuals, sums;
  residuals.reserve(samples.size());
  std::vector<Point> near;
  for (const auto& omega : samples) {
    const Configuration all = target.boundary.empty() ? omega : omega.merged(target.boundary);
    const CellList cells(all.points(), dim, range);
    auto collect = [&](const Point& x, bool skip_self) {
      near.clear();
      cells.for_each_near(x, range, [&](int j) {
        if (skip_self && all[j] == x) return;
        near.push_back(all[j]);
      });
    };
    double sum = 0.0;
    for (const auto& x : omega) {
      if (!w.contains(x)) continue;
      collect(x, true);
      sum += g(x, near);
    }
    double integral = 0.0;
    for (int s = 0; s < strata; ++s) {
      Point x;
      int rest = s;
      for (int a = 0; a < dim; ++a) {
        const int k = rest % nodes_per_axis;
        rest /= nodes_per_axis;
        x[a] = w.lower()[a] + w.side(a) * (k + rng.uniform()) / nodes_per_axis;
      }
      collect(x, false);
      const double h = model.conditional_energy(x, near);
      if (std::isinf(h)) continue;
      integral += g(x, near) * std::exp(-target.theta * h);
    }
    integral *= w.volume() / strata;
    sums.push_back(sum);
    residuals.push_back(sum - integral);
  }
  GnzResult out;
  out.residual.value = mean(residuals);
  out.residual.std_error = batch_means_se(residuals, 20);
  out.residual.n_samples = static_cast<std::int64_t>(residuals.size());
  out.residual.method = "gnz";
  out.leading = Estimate{mean(sums), batch_means_se(sums, 20), static_cast<std::int64_t>(sums.size()), "point-sum"};
  return out;
}

}  // namespace gibbs
