#include "gibbs/thermo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gibbs/cell_list.hpp"
#include "gibbs/errors.hpp"

namespace gibbs {

namespace {

constexpr double kTruncationLimit = 1e-6;
constexpr double kMultisetBudget = 3e6;

struct Rule {
  std::vector<double> x, w;  // on [-1, 1]
};

// Gauss-Legendre nodes by Newton iteration on P_n.
Rule gauss_legendre(int n) {
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    r.x[i] = x;
    r.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

const Rule& rule48() {
  static const Rule r = gauss_legendre(48);
  return r;
}

template <class F>
double integrate(F&& f, double a, double b) {
  if (!(b > a)) return 0.0;
  const Rule& r = rule48();
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  double s = 0.0;
  for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * f(mid + half * r.x[i]);
  return s * half;
}

// Integral over [a, b] split at the interior breakpoints.
template <class F>
double integrate_pieces(F&& f, double a, double b, std::vector<double> breaks) {
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = std::max(a, breaks[i]), hi = std::min(b, breaks[i + 1]);
    if (hi > lo) s += integrate(f, lo, hi);
  }
  return s;
}

Window window_of(double n, int dim) { return Window::cube(n, dim); }

Target free_target(ModelPtr model, const Window& w, double theta) {
  return Target{std::move(model), w, Configuration(w.dim()), theta};
}

std::uint64_t seed_key(double v) { return std::bit_cast<std::uint64_t>(v); }

Estimate combine(double value, std::initializer_list<double> ses, std::int64_t n, std::string method) {
  double v = 0.0;
  for (double s : ses) v += s * s;
  return Estimate{value, std::sqrt(v), n, std::move(method)};
}

void require_finite(const Estimate& e, const std::string& what) {
  if (!std::isfinite(e.value) || !std::isfinite(e.std_error)) {
    throw EstimatorError(what + " is not finite (value " + format_double(e.value) + ")");
  }
}

// Mean of a per-sample statistic over retained states of chains on `target`.
template <class F>
Estimate chain_statistic(const Target& target, const ThermoOptions& opt, Seed seed, F&& stat,
                         const std::string& method, ChainDiagnostics* diag_out = nullptr) {
  std::vector<std::vector<double>> traces(opt.mcmc.chains);
  auto diag = run_visit(target, opt.mcmc, seed, opt.jobs,
                        [&](int c, const Chain& chain) { traces[c].push_back(stat(chain)); });
  if (diag_out) *diag_out = std::move(diag);
  return chain_mean(traces, method);
}

template <class F>
Estimate poisson_statistic(const Window& w, double intensity, int draws, Seed seed, F&& stat,
                           const std::string& method) {
  std::vector<double> xs;
  xs.reserve(draws);
  for (int i = 0; i < draws; ++i) xs.push_back(stat(sample_poisson(w, intensity, seed.child(i))));
  return Estimate{mean(xs), std::sqrt(variance(xs) / static_cast<double>(xs.size())),
                  static_cast<std::int64_t>(xs.size()), method};
}

}  // namespace

std::string describe(const LawSpec& law) {
  if (const auto* p = std::get_if<PoissonLaw>(&law)) return "poisson(z=" + format_double(p->intensity) + ")";
  return "gibbs";
}

int halo_width(const EnergyModel& model) { return static_cast<int>(std::floor(model.range())) + 1; }

// ---------------------------------------------------------------------------
// Brute-force partition function.

double rectangle_distance_density(double a, double b, double t) {
  if (!(t > 0.0) || t >= std::hypot(a, b)) return 0.0;
  const double lo = t > a ? std::acos(a / t) : 0.0;
  const double hi = t > b ? std::asin(b / t) : 0.5 * M_PI;
  auto f = [&](double phi) {
    const double u = t * std::cos(phi), v = t * std::sin(phi);
    return (2.0 * (a - u) / (a * a)) * (2.0 * (b - v) / (b * b));
  };
  return t * integrate(f, lo, hi);
}

double rectangle_distance_cdf(double a, double b, double t) {
  if (!(t > 0.0)) return 0.0;
  if (t >= std::hypot(a, b)) return 1.0;
  // u = t sin(psi) is the x-offset; G is the CDF of the y-offset.
  auto G = [&](double v) { return v >= b ? 1.0 : (2.0 * b * v - v * v) / (b * b); };
  auto f = [&](double psi) {
    const double u = t * std::sin(psi), v = t * std::cos(psi);
    return (2.0 * (a - u) / (a * a)) * G(v) * t * std::cos(psi);
  };
  const double psi_max = t > a ? std::asin(a / t) : 0.5 * M_PI;
  std::vector<double> breaks;
  if (t > b) breaks.push_back(std::acos(b / t));
  return std::min(1.0, integrate_pieces(f, 0.0, psi_max, breaks));
}

namespace {

double radical_inverse(std::uint64_t j, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (j > 0) {
    r += static_cast<double>(j % base) * f;
    j /= base;
    f *= inv;
  }
  return r;
}

// (1/k!) int_{W^k} exp(-H) by a midpoint rule over multisets of cells.
// Repeated cells place their points at distinct low-discrepancy offsets.
double multiset_term(const EnergyModel& model, const Window& w, int k, int m) {
  const int dim = w.dim();
  int cells = 1;
  for (int a = 0; a < dim; ++a) cells *= m;
  double cell_volume = 1.0;
  for (int a = 0; a < dim; ++a) cell_volume *= w.side(a) / m;
  static const std::uint64_t bases[3] = {2, 3, 5};
  auto point = [&](int cell, int repeat) {
    Point p;
    int rest = cell;
    for (int a = 0; a < dim; ++a) {
      const int i = rest % m;
      rest /= m;
      const double frac = std::fmod(radical_inverse(static_cast<std::uint64_t>(repeat), bases[a]) + 0.5, 1.0);
      p[a] = w.lower()[a] + (i + frac) * w.side(a) / m;
    }
    return p;
  };
  std::vector<Point> pts;
  double total = 0.0;
  // Depth-first over nondecreasing cell sequences. Prefix energies are
  // accumulated by conditional energies and infinite prefixes are pruned;
  // the j-th copy of a cell contributes 1/j, so a multiset gets 1/prod(mult!).
  auto rec = [&](auto&& self, int depth, int prev, int repeat, double energy, double weight) -> void {
    if (depth == k) {
      total += std::exp(-energy) * weight;
      return;
    }
    for (int c = depth == 0 ? 0 : prev; c < cells; ++c) {
      const int rep = depth > 0 && c == prev ? repeat + 1 : 0;
      const Point x = point(c, rep);
      const double h = model.conditional_energy(x, pts);
      if (std::isinf(h) && h > 0) continue;
      pts.push_back(x);
      self(self, depth + 1, c, rep, energy + h, weight / (rep + 1));
      pts.pop_back();
    }
  };
  rec(rec, 0, 0, 0, 0.0, 1.0);
  return total * std::pow(cell_volume, k);
}

double binomial(double n, double k) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

}  // namespace

BruteForceResult brute_force_log_partition(const EnergyModel& model, const Window& window, int n_max,
                                           int nodes_per_axis) {
  if (n_max < 1) throw std::invalid_argument("brute_force_log_partition: n_max must be >= 1");
  if (nodes_per_axis < 1) throw std::invalid_argument("brute_force_log_partition: nodes_per_axis must be >= 1");
  if (window.dim() != model.dim()) throw std::invalid_argument("brute_force_log_partition: dimension mismatch");
  const double vol = window.volume();
  const int dim = window.dim();

  // Stability tail: T_k <= (e^A |W|)^k / k!.
  const double q = std::exp(model.stability_constant()) * vol;
  double tail = 0.0;
  {
    double term = std::exp(n_max * std::log(q) - std::lgamma(n_max + 1.0));
    for (int k = n_max + 1; k < n_max + 400; ++k) {
      term *= q / k;
      tail += term;
      if (term < 1e-18 * std::max(tail, 1e-300)) break;
    }
  }
  if (!(tail <= kTruncationLimit)) {
    std::ostringstream msg;
    msg << "brute_force_log_partition: truncation tail " << tail << " exceeds " << kTruncationLimit
        << "; raise n_max above " << n_max;
    throw EstimatorError(msg.str());
  }

  BruteForceResult out;
  out.terms.push_back(1.0);
  const Point origin{};
  const double e1 = model.total_energy(Configuration(dim, {origin}));
  out.terms.push_back(std::isinf(e1) ? 0.0 : vol * std::exp(-e1));
  for (int k = 2; k <= n_max; ++k) {
    if (k == 2 && dim == 2) {
      const double a = window.side(0), b = window.side(1);
      auto integrand = [&](double t) {
        Point p{};
        p[0] = t;
        const double e2 = model.total_energy(Configuration(dim, {origin, p}));
        return std::isinf(e2) ? 0.0 : std::exp(-e2) * rectangle_distance_density(a, b, t);
      };
      std::vector<double> breaks{a, b, model.range()};
      if (const double core = core_diameter(model); core > 0.0) breaks.push_back(core);
      out.terms.push_back(0.5 * vol * vol * integrate_pieces(integrand, 0.0, std::hypot(a, b), breaks));
      continue;
    }
    int m = nodes_per_axis;
    while (m > 1 && binomial(std::pow(m, dim) + k - 1.0, k) > kMultisetBudget) --m;
    out.terms.push_back(multiset_term(model, window, k, m));
  }
  double s = 0.0, sk = 0.0;
  for (std::size_t k = 0; k < out.terms.size(); ++k) {
    s += out.terms[k];
    sk += static_cast<double>(k) * out.terms[k];
  }
  out.log_z = Estimate{-vol + std::log(s), tail / s, 0, "brute-force"};
  out.mean_count = sk / s;
  return out;
}

// ---------------------------------------------------------------------------
// Thermodynamic integration.

double core_diameter(const EnergyModel& model) {
  const auto* pw = dynamic_cast<const PairwiseModel*>(&model);
  if (!pw) return 0.0;
  if (const auto* s = std::get_if<Strauss>(&pw->potential())) return std::isinf(s->beta) ? s->radius : 0.0;
  if (const auto* h = std::get_if<HardCore>(&pw->potential())) return h->delta;
  return std::get<LennardJones>(pw->potential()).core;
}

Estimate log_admissible_probability(const Window& window, double core, const ThermoOptions& options, Seed seed) {
  if (!(core > 0.0)) return Estimate{0.0, 0.0, 0, "staging"};
  const int dim = window.dim();
  const double ball = dim == 1 ? 2.0 * core : dim == 2 ? M_PI * core * core : 4.0 / 3.0 * M_PI * std::pow(core, 3);
  // Expected number of close pairs at unit intensity, split so that each
  // stage removes about 0.3 of them.
  const double pairs = 0.5 * window.volume() * ball;
  const int stages = std::max(1, static_cast<int>(std::ceil(pairs / 0.3)));
  auto core_at = [&](int k) { return core * std::pow(static_cast<double>(k) / stages, 1.0 / dim); };
  auto admissible = [&](std::span<const Point> pts, double delta) {
    if (pts.size() < 2) return 1.0;
    const CellList cells(pts, dim, delta);
    for (const auto& [i, j] : cells.pairs_within(delta)) {
      if (distance(pts[i], pts[j]) <= delta) return 0.0;
    }
    return 1.0;
  };
  double log_p = 0.0, var = 0.0;
  std::int64_t n = 0;
  for (int k = 0; k < stages; ++k) {
    const double next = core_at(k + 1);
    Estimate p;
    if (k == 0) {
      const int draws = std::max<int>(options.poisson_draws, static_cast<int>(options.mcmc.samples * options.mcmc.chains));
      p = poisson_statistic(window, 1.0, draws, seed.child(0),
                            [&](const Configuration& w) { return admissible(w.points(), next); }, "staging");
    } else {
      ModelPtr hc(make_model("hardcore", dim, {{"z", 1.0}, {"delta", core_at(k)}}));
      p = chain_statistic(free_target(hc, window, 0.0), options, seed.child(static_cast<std::uint64_t>(k)),
                          [&](const Chain& c) { return admissible(c.points(), next); }, "staging");
    }
    if (!(p.value > 0.0)) {
      throw EstimatorError("staging probability vanished at core " + format_double(next) + "; increase samples");
    }
    log_p += std::log(p.value);
    // Zero observed variance still carries binomial uncertainty.
    const double se = std::max(p.std_error, 1.0 / static_cast<double>(std::max<std::int64_t>(p.n_samples, 1)));
    var += (se / p.value) * (se / p.value);
    n += p.n_samples;
  }
  return Estimate{log_p, std::sqrt(var), n, "staging"};
}

namespace {

struct Quadrature {
  double simpson, trapezoid;
  std::vector<double> w_simpson, w_trapezoid;
};

Quadrature quadrature_weights(const std::vector<double>& x) {
  const std::size_t n = x.size();
  Quadrature q;
  q.w_trapezoid.assign(n, 0.0);
  q.w_simpson.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = x[i + 1] - x[i];
    q.w_trapezoid[i] += 0.5 * h;
    q.w_trapezoid[i + 1] += 0.5 * h;
  }
  // Composite Simpson on pairs of (possibly unequal) intervals; a leftover
  // last interval uses the trapezoid.
  std::size_t i = 0;
  for (; i + 2 < n; i += 2) {
    const double h0 = x[i + 1] - x[i], h1 = x[i + 2] - x[i + 1], s = h0 + h1;
    q.w_simpson[i] += s / 6.0 * (2.0 - h1 / h0);
    q.w_simpson[i + 1] += s / 6.0 * (s * s / (h0 * h1));
    q.w_simpson[i + 2] += s / 6.0 * (2.0 - h0 / h1);
  }
  if (i + 1 < n) {
    const double h = x[i + 1] - x[i];
    q.w_simpson[i] += 0.5 * h;
    q.w_simpson[i + 1] += 0.5 * h;
  }
  return q;
}

}  // namespace

double node_quadrature(const std::vector<double>& x, const std::vector<double>& f, bool simpson) {
  if (x.size() != f.size() || x.size() < 2) throw std::invalid_argument("node_quadrature: need >= 2 matching nodes");
  const Quadrature q = quadrature_weights(x);
  const auto& w = simpson ? q.w_simpson : q.w_trapezoid;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f[i];
  return s;
}

TiResult ti_log_partition(ModelPtr model, const Window& window, const ThermoOptions& options, Seed seed) {
  if (window.dim() != model->dim()) throw std::invalid_argument("ti_log_partition: dimension mismatch");
  std::vector<double> grid = options.theta_grid;
  if (grid.empty()) {
    for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
  }
  if (!std::is_sorted(grid.begin(), grid.end()) || grid.front() != 0.0 || grid.back() != 1.0 ||
      std::adjacent_find(grid.begin(), grid.end()) != grid.end()) {
    throw std::invalid_argument("theta grid must be strictly increasing from 0 to 1");
  }

  TiResult out;
  auto node_at = [&](double theta) {
    TiNode node;
    node.theta = theta;
    const Target target = free_target(model, window, theta);
    node.diagnostics = run_visit(target, options.mcmc, seed.child(seed_key(theta)), options.jobs, nullptr);
    node.mean_energy = chain_mean(node.diagnostics.h_trace, "mean-energy");
    node.rhat = std::max(std::isnan(node.diagnostics.rhat_h) ? 1.0 : node.diagnostics.rhat_h,
                         std::isnan(node.diagnostics.rhat_n) ? 1.0 : node.diagnostics.rhat_n);
    if (node.rhat > options.max_rhat) {
      std::ostringstream msg;
      msg << "R-hat " << node.rhat << " exceeds " << options.max_rhat << " at theta=" << format_double(theta)
          << " (" << model->describe() << ")";
      throw EstimatorError(msg.str());
    }
    require_finite(node.mean_energy, "mean energy at theta=" + format_double(theta));
    return node;
  };
  for (double t : grid) out.nodes.push_back(node_at(t));

  double integral = 0.0, mc_se = 0.0;
  while (true) {
    std::vector<double> x;
    for (const auto& n : out.nodes) x.push_back(n.theta);
    const Quadrature q = quadrature_weights(x);
    double s = 0.0, t = 0.0, var = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto& e = out.nodes[i].mean_energy;
      s += q.w_simpson[i] * e.value;
      t += q.w_trapezoid[i] * e.value;
      const double w = options.simpson ? q.w_simpson[i] : q.w_trapezoid[i];
      var += w * w * e.std_error * e.std_error;
    }
    integral = options.simpson ? s : t;
    mc_se = std::sqrt(var);
    out.quadrature_error = std::fabs(s - t);
    if (!options.simpson || out.quadrature_error <= mc_se || out.refinements >= options.max_refinements) break;
    std::vector<TiNode> refined;
    for (std::size_t i = 0; i < out.nodes.size(); ++i) {
      refined.push_back(std::move(out.nodes[i]));
      if (i + 1 < out.nodes.size()) refined.push_back(node_at(0.5 * (x[i] + x[i + 1])));
    }
    out.nodes = std::move(refined);
    ++out.refinements;
  }

  out.log_admissible = log_admissible_probability(window, core_diameter(*model), options, seed.child(~0ULL));
  std::int64_t n = out.log_admissible.n_samples;
  for (const auto& node : out.nodes) n += node.mean_energy.n_samples;
  out.log_z = combine(out.log_admissible.value - integral, {mc_se, out.quadrature_error, out.log_admissible.std_error},
                      n, options.simpson ? "ti-simpson" : "ti-trapezoid");
  return out;
}

PressureResult estimate_pressure(ModelPtr model, const std::vector<double>& n_list, const ThermoOptions& options,
                                 Seed seed) {
  if (n_list.empty() || !std::is_sorted(n_list.begin(), n_list.end())) {
    throw std::invalid_argument("pressure: n_list must be non-empty and increasing");
  }
  PressureResult out;
  out.upper = std::exp(model->stability_constant()) - 1.0;
  for (double n : n_list) {
    const Window w = window_of(n, model->dim());
    PressurePoint pt;
    pt.n = n;
    pt.ti = ti_log_partition(model, w, options, seed.child(seed_key(n)));
    const double vol = w.volume();
    pt.pressure = Estimate{pt.ti.log_z.value / vol, pt.ti.log_z.std_error / vol, pt.ti.log_z.n_samples, "pressure"};
    const double tol = 3.0 * pt.pressure.std_error;
    if (pt.pressure.value < out.lower - tol || pt.pressure.value > out.upper + tol) {
      std::ostringstream msg;
      msg << "pressure " << format_double(pt.pressure.value) << " +- " << pt.pressure.std_error << " at n=" << n
          << " lies outside the stability bracket [-1, " << format_double(out.upper) << "] for "
          << model->describe();
      throw InvariantViolation(msg.str());
    }
    out.trend.push_back(std::move(pt));
  }
  out.pressure = out.trend.back().pressure;
  return out;
}

// ---------------------------------------------------------------------------
// Mean energy.

std::optional<double> mean_energy_poisson(const EnergyModel& model, double intensity) {
  if (!(intensity > 0.0)) throw std::invalid_argument("mean_energy_poisson: intensity must be > 0");
  if (const auto* pw = dynamic_cast<const PairwiseModel*>(&model)) {
    const double integral = pw->phi_integral();
    if (std::isinf(integral)) return kInf;
    return pw->activity() * intensity + 0.5 * intensity * intensity * integral;
  }
  if (const auto* qm = dynamic_cast<const QuermassModel*>(&model)) {
    const double r = qm->disc_radius(), lam = intensity;
    const double e = std::exp(-lam * M_PI * r * r);
    return qm->theta1() * (1.0 - e) + qm->theta2() * 2.0 * M_PI * r * lam * e +
           qm->theta3() * e * (lam - lam * lam * M_PI * r * r);
  }
  return std::nullopt;
}

namespace {

// Sum over x in `inner` of z + (1/2) sum_{y != x} phi(|x - y|), per volume.
double palm_average(const PairwiseModel& m, const Configuration& omega, const Window& inner) {
  const CellList cells(omega.points(), omega.dim(), m.range());
  double s = 0.0;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const Point& x = omega[i];
    if (!inner.contains(x)) continue;
    double pair = 0.0;
    cells.for_each_near(x, m.range(), [&](int j) {
      if (static_cast<std::size_t>(j) != i) pair += m.phi(distance(x, omega[j]));
    });
    s += m.activity() + 0.5 * pair;
  }
  return s / inner.volume();
}

// Mean share of the unit cubes inside `inner` (integer half-side).
double cube_average(const QuermassModel& m, const Configuration& omega, int inner) {
  if (inner < 1) throw std::invalid_argument("cube route needs an interior of half-side >= 1");
  double s = 0.0;
  int count = 0;
  std::vector<Point> near;
  for (int i = -inner; i < inner; ++i) {
    for (int j = -inner; j < inner; ++j) {
      const Window c = Window(2, Point{double(i), double(j)}, Point{double(i + 1), double(j + 1)}).dilate(m.range());
      near.clear();
      for (const auto& p : omega)
        if (c.contains_closed(p)) near.push_back(p);
      s += cube_energy_contribution(m, Configuration(2, near), {i, j});
      ++count;
    }
  }
  return s / count;
}

double direct_average(const EnergyModel& m, const Configuration& omega, const Window& w) {
  return m.total_energy(restrict(omega, w)) / w.volume();
}

}  // namespace

MeanEnergyResult mean_energy(ModelPtr model, const LawSpec& law, double n, const ThermoOptions& options, Seed seed) {
  if (!(n > 0.0)) throw std::invalid_argument("mean_energy: n must be > 0");
  const int dim = model->dim();
  const auto* pw = dynamic_cast<const PairwiseModel*>(model.get());
  const auto* qm = dynamic_cast<const QuermassModel*>(model.get());
  const int r0 = halo_width(*model);
  const Window outer = window_of(n, dim), half = window_of(0.5 * n, dim);
  MeanEnergyResult out;

  if (const auto* pl = std::get_if<PoissonLaw>(&law)) {
    const double z = pl->intensity;
    if (!(z > 0.0)) throw std::invalid_argument("poisson law intensity must be > 0");
    if (auto closed = mean_energy_poisson(*model, z); closed && std::isinf(*closed)) {
      throw EstimatorError("mean energy is infinite under " + describe(law) + " for " + model->describe());
    }
    // Richardson over n/2 and n on the same draws cancels the 1/n edge deficit.
    out.direct = poisson_statistic(
        outer, z, options.poisson_draws, seed.child(1),
        [&](const Configuration& w) { return 2.0 * direct_average(*model, w, outer) - direct_average(*model, w, half); },
        "direct");
    const Window dilated = window_of(n + r0, dim);
    if (pw) {
      out.palm = poisson_statistic(dilated, z, options.poisson_draws, seed.child(2),
                                   [&](const Configuration& w) { return palm_average(*pw, w, outer); }, "palm");
    }
    if (qm) {
      const int inner = static_cast<int>(std::floor(n));
      out.cube = poisson_statistic(dilated, z, options.poisson_draws, seed.child(3),
                                   [&](const Configuration& w) { return cube_average(*qm, w, inner); }, "cube");
    }
  } else {
    const Target full = free_target(model, outer, 1.0), small = free_target(model, half, 1.0);
    const Estimate a_n = chain_statistic(full, options, seed.child(1),
                                         [&](const Chain& c) { return c.energy() / outer.volume(); }, "direct");
    const Estimate a_half = chain_statistic(small, options, seed.child(2),
                                            [&](const Chain& c) { return c.energy() / half.volume(); }, "direct");
    out.direct = combine(2.0 * a_n.value - a_half.value, {2.0 * a_n.std_error, a_half.std_error},
                         a_n.n_samples + a_half.n_samples, "direct");
    const double inner_n = n - r0;
    if (inner_n >= 1.0 && (pw || qm)) {
      const Window inner = window_of(inner_n, dim);
      const int inner_cubes = static_cast<int>(std::floor(inner_n));
      std::vector<std::vector<double>> palm(options.mcmc.chains), cube(options.mcmc.chains);
      run_visit(full, options.mcmc, seed.child(3), options.jobs, [&](int c, const Chain& chain) {
        const Configuration omega = chain.current();
        if (pw) palm[c].push_back(palm_average(*pw, omega, inner));
        if (qm) cube[c].push_back(cube_average(*qm, omega, inner_cubes));
      });
      if (pw) out.palm = chain_mean(palm, "palm");
      if (qm) out.cube = chain_mean(cube, "cube");
    }
  }

  std::vector<const Estimate*> routes;
  for (const auto* e : {&out.direct, &out.palm, &out.cube}) {
    if (*e) {
      require_finite(**e, "mean energy (" + (*e)->method + ")");
      routes.push_back(&**e);
    }
  }
  for (std::size_t i = 0; i < routes.size(); ++i) {
    for (std::size_t j = i + 1; j < routes.size(); ++j) {
      const double joint = std::hypot(routes[i]->std_error, routes[j]->std_error);
      const double diff = std::fabs(routes[i]->value - routes[j]->value);
      if (diff > options.route_tolerance * joint + 1e-12) {
        std::ostringstream msg;
        msg << "mean-energy routes disagree for " << model->describe() << " under " << describe(law) << ": "
            << routes[i]->method << "=" << format_double(routes[i]->value) << " vs " << routes[j]->method << "="
            << format_double(routes[j]->value) << " (joint SE " << joint << ")";
        throw EstimatorError(msg.str());
      }
    }
  }
  out.value = out.palm ? *out.palm : out.cube ? *out.cube : *out.direct;
  return out;
}

// ---------------------------------------------------------------------------
// Entropy, gap and boundary effects.

double entropy_poisson(double intensity) {
  if (!(intensity > 0.0)) throw std::invalid_argument("entropy_poisson: intensity must be > 0");
  return 1.0 - intensity + intensity * std::log(intensity);
}

EntropyResult entropy_gibbs(ModelPtr model, double n, const ThermoOptions& options, Seed seed,
                            const PressurePoint* pressure) {
  const Window w = window_of(n, model->dim());
  const double vol = w.volume();
  EntropyResult out;
  if (pressure && pressure->n == n) {
    out.log_z_per_volume = pressure->pressure;
  } else {
    const TiResult ti = ti_log_partition(model, w, options, seed.child(1));
    out.log_z_per_volume = Estimate{ti.log_z.value / vol, ti.log_z.std_error / vol, ti.log_z.n_samples, "pressure"};
  }
  out.energy = chain_statistic(free_target(model, w, 1.0), options, seed.child(2),
                               [&](const Chain& c) { return c.energy() / vol; }, "energy");
  out.entropy = combine(-out.energy.value - out.log_z_per_volume.value,
                        {out.energy.std_error, out.log_z_per_volume.std_error},
                        out.energy.n_samples + out.log_z_per_volume.n_samples, "entropy");
  require_finite(out.entropy, "entropy");
  return out;
}

GapResult variational_gap(ModelPtr model, const LawSpec& law, double n, const PressureResult& pressure,
                          const ThermoOptions& options, Seed seed, bool analytic_energy) {
  if (pressure.trend.empty()) throw std::invalid_argument("variational_gap: empty pressure result");
  GapResult out;
  out.pressure = pressure.pressure;
  if (const auto* pl = std::get_if<PoissonLaw>(&law)) {
    out.entropy = Estimate{entropy_poisson(pl->intensity), 0.0, 0, "entropy-closed-form"};
    const auto closed = analytic_energy ? mean_energy_poisson(*model, pl->intensity) : std::nullopt;
    if (closed) {
      if (std::isinf(*closed)) throw EstimatorError("mean energy is infinite under " + describe(law));
      out.energy = Estimate{*closed, 0.0, 0, "energy-closed-form"};
    } else {
      out.energy = mean_energy(model, law, n, options, seed.child(2)).value;
    }
    out.gap = combine(out.entropy.value + out.energy.value + out.pressure.value,
                      {out.energy.std_error, out.pressure.std_error},
                      out.energy.n_samples + out.pressure.n_samples, "gap");
    return out;
  }
  const PressurePoint* at_n = nullptr;
  for (const auto& p : pressure.trend)
    if (p.n == n) at_n = &p;
  const EntropyResult ent = entropy_gibbs(model, n, options, seed.child(1), at_n);
  out.entropy = ent.entropy;
  out.energy = mean_energy(model, law, n, options, seed.child(2)).value;
  const std::int64_t samples = ent.entropy.n_samples + out.energy.n_samples;
  if (at_n == &pressure.trend.back()) {
    // ln Z_n enters the entropy and the pressure with opposite signs and
    // cancels, together with its error.
    out.gap = combine(out.energy.value - ent.energy.value, {out.energy.std_error, ent.energy.std_error}, samples,
                      "gap");
  } else {
    out.gap = combine(out.entropy.value + out.energy.value + out.pressure.value,
                      {out.entropy.std_error, out.energy.std_error, out.pressure.std_error}, samples, "gap");
  }
  return out;
}

std::vector<BoundaryPoint> boundary_effect_curve(ModelPtr model, const std::vector<int>& n_list,
                                                 const ThermoOptions& options, Seed seed) {
  const int r0 = halo_width(*model);
  std::vector<BoundaryPoint> out;
  for (int n : n_list) {
    if (n < 1) throw std::invalid_argument("boundary_effect_curve: n must be >= 1");
    const double vol = Window::cube(n, model->dim()).volume();
    const Target target = free_target(model, window_of(n + r0, model->dim()), 1.0);
    const Estimate e = chain_statistic(target, options, seed.child(static_cast<std::uint64_t>(n)),
                                       [&](const Chain& c) { return boundary_term(*model, c.current(), n) / vol; },
                                       "boundary");
    require_finite(e, "boundary term");
    out.push_back(BoundaryPoint{n, e});
  }
  return out;
}

}  // namespace gibbs
