// Reduced-size invariant matrix behind the `validate` verb.

#include <chrono>
#include <cmath>
#include <ostream>
#include <set>
#include <sstream>

#include "gibbs/errors.hpp"
#include "gibbs/harness.hpp"
#include "gibbs/minkowski.hpp"

namespace gibbs {

namespace {

class Suite {
 public:
  explicit Suite(std::string name, std::ostream& log) : log_(log) { result_.name = std::move(name); }

  void check(bool ok, const std::string& what) {
    result_.checks.push_back((ok ? "PASS " : "FAIL ") + what);
    if (!ok) {
      result_.passed = false;
      result_.failures.push_back(what);
    }
    log_ << "  " << (ok ? "PASS " : "FAIL ") << what << "\n";
  }

  SuiteResult finish(double seconds) {
    result_.seconds = seconds;
    return result_;
  }

 private:
  std::ostream& log_;
  SuiteResult result_;
};

std::string f(double v) { return format_double(v); }

ModelPtr build(const GalleryModel& g) { return ModelPtr(make_model(g.id, 2, g.params)); }

// Dyadic coordinates keep integer translations exact.
Configuration random_config(Rng& rng, int n, double side) {
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i)
    pts.emplace_back(std::ldexp(std::floor(rng.uniform(0, side) * 1048576.0), -20),
                     std::ldexp(std::floor(rng.uniform(0, side) * 1048576.0), -20));
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return Configuration(2, pts);
}

DiscUnion random_union(Rng& rng, int n, double side, double r) {
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(rng.uniform(0, side), rng.uniform(0, side));
  return DiscUnion(Configuration(2, pts), r);
}

double lens(double d, double r) {
  return 2.0 * r * r * std::acos(d / (2.0 * r)) - 0.5 * d * std::sqrt(4.0 * r * r - d * d);
}

ThermoOptions chains(std::int64_t samples, std::int64_t thin, std::int64_t burn, int jobs) {
  ThermoOptions o;
  o.mcmc.samples = samples;
  o.mcmc.thin = thin;
  o.mcmc.burn_in = burn;
  o.mcmc.chains = 4;
  o.jobs = jobs;
  return o;
}

bool within(const Estimate& e, double truth, double k = 3.0) {
  return std::fabs(e.value - truth) <= k * e.std_error + 1e-12;
}

void energy_suite(Suite& s, Seed seed) {
  Rng rng(seed);
  for (const auto& g : model_gallery()) {
    const ModelPtr m = build(g);
    int stable = 0, stationary = 0, insertion = 0, hereditary = 0, trials = 1000;
    for (int t = 0; t < trials; ++t) {
      const Configuration omega = random_config(rng, 1 + t % 25, 1.5 + t % 3);
      const double h = m->total_energy(omega);
      stable += h >= -m->stability_constant() * static_cast<double>(omega.size()) - 1e-9;
      const Point u(static_cast<double>(rng.uniform_index(21)) - 10.0, static_cast<double>(rng.uniform_index(21)) - 10.0);
      const double shifted = m->total_energy(omega.translated(u));
      stationary += shifted == h || std::fabs(shifted - h) <= 1e-9 * std::max(1.0, std::fabs(h));
      const Point x(rng.uniform(0, 2.5), rng.uniform(0, 2.5));
      if (std::isfinite(h)) {
        const double d = m->total_energy(omega.with(x)) - h;
        const double c = insertion_energy(*m, omega, x);
        insertion += (std::isinf(d) && std::isinf(c)) || std::fabs(d - c) <= 1e-9 * std::max(1.0, std::fabs(d));
        hereditary += 1;
      } else {
        insertion += 1;
        hereditary += std::isinf(m->total_energy(omega.with(x)));
      }
    }
    s.check(stable == trials, g.name + ": H >= -A N on " + std::to_string(trials) + " configurations");
    s.check(stationary == trials, g.name + ": invariance under integer translations");
    s.check(insertion == trials, g.name + ": insertion energy equals the energy difference");
    s.check(hereditary == trials, g.name + ": infinite energy is inherited by supersets");
  }
}

void minkowski_suite(Suite& s, Seed seed) {
  const auto one = minkowski_functionals(DiscUnion(Configuration(2, {Point(0.3, -0.2)}), 1.0));
  s.check(std::fabs(one.area - M_PI) < 1e-9 && std::fabs(one.perimeter - 2 * M_PI) < 1e-9 && one.euler == 1,
          "single disc closed form");
  bool pairs = true;
  for (double d : {0.1, 0.7, 1.3, 1.99}) {
    const auto two = minkowski_functionals(DiscUnion(Configuration(2, {Point(0, 0), Point(d, 0)}), 1.0));
    pairs = pairs && std::fabs(two.area - (2 * M_PI - lens(d, 1.0))) < 1e-9 &&
            std::fabs(two.perimeter - 4.0 * (M_PI - std::acos(d / 2.0))) < 1e-9 && two.euler == 1;
  }
  s.check(pairs, "two-disc closed forms");

  Rng rng(seed);
  int agree = 0, n_scan = 60;
  for (int t = 0; t < n_scan; ++t) {
    const DiscUnion du = random_union(rng, 10, 4.0, 0.5);
    const auto exact = minkowski_functionals(du);
    const auto scan = scanline_topology(du, 1e-5);
    agree += exact.euler == scan.euler && exact.n_components == scan.n_components;
  }
  s.check(agree >= n_scan - 1, "euler matches the scanline oracle on " + std::to_string(agree) + "/" +
                                   std::to_string(n_scan) + " random unions");
  int gb = 0, bounded = 0, n_rand = 2000;
  for (int t = 0; t < n_rand; ++t) {
    const int n = 1 + t % 30;
    const DiscUnion du = random_union(rng, n, 3.0, 0.2 + 0.4 * rng.uniform());
    const auto m = minkowski_functionals(du);
    bounded += std::labs(m.euler) <= 3L * n;
    if (t < 300) gb += euler_gauss_bonnet(du) == m.euler;
  }
  s.check(gb == 300, "nerve and Gauss-Bonnet euler agree on 300 unions");
  s.check(bounded == n_rand, "|euler| <= 3 N on " + std::to_string(n_rand) + " unions");
}

// |sum of cube shares over Lambda_n - H(omega)| against the number of points
// within R0 of the boundary, omega inside Lambda_n.
void decomposition_suite(Suite& s, Seed seed) {
  const auto gallery = model_gallery();
  const auto model = make_model(gallery[6].id, 2, gallery[6].params);
  const auto& q = dynamic_cast<const QuermassModel&>(*model);
  const int r0 = halo_width(q);
  std::vector<double> ratio;
  bool empty_strip_exact = true;
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + t % 3;
    const Window w = Window::cube(n, 2);
    const Configuration omega = sample_poisson(w, 0.3 + 0.2 * (t % 7), seed.child(t));
    double shares = 0.0;
    for (int i = -n; i < n; ++i)
      for (int j = -n; j < n; ++j) shares += cube_energy_contribution(q, omega, {i, j});
    const double rem = std::fabs(shares - q.total_energy(omega));
    std::size_t strip = 0;
    for (const auto& p : omega) strip += !Window::cube(n - r0, 2).contains(p);
    if (strip == 0) empty_strip_exact = empty_strip_exact && rem < 1e-9;
    ratio.push_back(strip ? rem / static_cast<double>(strip) : 0.0);
  }
  const double c_fit = *std::max_element(ratio.begin(), ratio.begin() + 50);
  const double c_all = *std::max_element(ratio.begin(), ratio.end());
  s.check(empty_strip_exact, "remainder vanishes when the boundary strip is empty");
  s.check(c_all <= 2.0 * c_fit, "c fitted on 50 configurations (" + f(c_fit) + ") bounds the held-out 50 within 2x (max " +
                                    f(c_all) + ")");
}

void poisson_suite(Suite& s, Seed seed, int jobs) {
  const auto gallery = model_gallery();
  const ModelPtr strauss = build(gallery[1]);
  const ModelPtr area = build(gallery[4]);

  // Mecke: at theta = 0 the GNZ identity holds for the unit Poisson process.
  const Target t0 = Target::free(strauss, 3.0, 0.0);
  McmcParams mp;
  mp.samples = 500;
  mp.thin = 200;
  mp.burn_in = 2000;
  const RunResult run = gibbs::run(t0, mp, seed.child(0), jobs);
  const GnzResult mecke = gnz_residual(t0, run.samples, gnz_constant(), 4, seed.child(1));
  s.check(std::fabs(mecke.residual.value) <= 3 * mecke.residual.std_error,
          "theta=0 GNZ residual " + f(mecke.residual.value) + " +- " + f(mecke.residual.std_error));

  ThermoOptions po;
  po.poisson_draws = 300;
  po.jobs = jobs;
  const auto e = mean_energy(strauss, PoissonLaw{1.0}, 3.0, po, seed.child(2));
  s.check(within(e.value, 1.0 + M_PI / 8.0), "Strauss mean energy under Poisson(1): " + f(e.value.value) + " +- " +
                                                 f(e.value.std_error) + " vs " + f(1.0 + M_PI / 8.0));
  po.poisson_draws = 100;
  const auto q = mean_energy(area, PoissonLaw{1.0}, 2.0, po, seed.child(3));
  const double q_exact = *mean_energy_poisson(*area, 1.0);
  s.check(within(q.value, q_exact),
          "Quermass mean energy under Poisson(1): " + f(q.value.value) + " +- " + f(q.value.std_error));

  // Boolean coverage of cube(2) by radius-0.4 discs.
  const double r = 0.4;
  const Window box = Window::cube(2.0, 2);
  std::vector<double> cover, logd;
  for (int i = 0; i < 200; ++i) {
    const Configuration omega = sample_poisson(box.dilate(r), 1.0, seed.child(100 + i));
    cover.push_back(clipped_functionals(DiscUnion(omega, r), box).area / box.volume());
    const Configuration p = sample_poisson(box, 0.4, seed.child(1000 + i));
    logd.push_back(((1.0 - 0.4) * box.volume() + p.size() * std::log(0.4)) / box.volume());
  }
  const double cov_se = std::sqrt(variance(cover) / cover.size());
  s.check(std::fabs(mean(cover) - (1 - std::exp(-M_PI * r * r))) <= 3 * cov_se,
          "Boolean coverage " + f(mean(cover)) + " vs " + f(1 - std::exp(-M_PI * r * r)));
  const double ent_se = std::sqrt(variance(logd) / logd.size());
  s.check(std::fabs(mean(logd) - entropy_poisson(0.4)) <= 3 * ent_se, "Poisson(0.4) entropy by its log-density");
}

void gnz_suite(Suite& s, Seed seed, int jobs) {
  const auto gallery = model_gallery();
  for (int idx : {1, 6}) {
    const ModelPtr m = build(gallery[idx]);
    McmcParams mp;
    mp.samples = 500;
    mp.thin = 400;
    mp.burn_in = 20000;
    const Target target = Target::free(m, 3.0);
    const RunResult run = gibbs::run(target, mp, seed.child(idx), jobs);
    for (const auto& [name, g] : std::vector<std::pair<std::string, GnzTestFunction>>{
             {"g=1", gnz_constant()}, {"g=neighbours", gnz_neighbour_count(m->range())}}) {
      const GnzResult r = gnz_residual(target, run.samples, g, 6, seed.child(100 + idx));
      s.check(std::fabs(r.residual.value) <= 3 * r.residual.std_error,
              gallery[idx].name + " " + name + ": residual " + f(r.residual.value) + " +- " +
                  f(r.residual.std_error));
    }
  }
  // Mutation: a biased birth acceptance must be caught.
  const ModelPtr m = build(gallery[1]);
  McmcParams bad;
  bad.samples = 500;
  bad.thin = 400;
  bad.burn_in = 20000;
  bad.birth_log_bias = 0.5;
  const Target target = Target::free(m, 3.0);
  const RunResult run = gibbs::run(target, bad, seed.child(50), jobs);
  const GnzResult r = gnz_residual(target, run.samples, gnz_constant(), 6, seed.child(51));
  s.check(std::fabs(r.residual.value) > 3 * r.residual.std_error,
          "corrupted birth acceptance detected: residual " + f(r.residual.value) + " +- " + f(r.residual.std_error));
}

void oracle_suite(Suite& s, Seed seed, int jobs) {
  const auto gallery = model_gallery();
  const Window w = Window::cube(0.25, 2);
  for (int idx : {1, 2}) {
    const ModelPtr m = build(gallery[idx]);
    const auto bf = brute_force_log_partition(*m, w, 10, 10);
    const auto ti = ti_log_partition(m, w, chains(2000, 20, 1000, jobs), seed.child(idx));
    s.check(within(ti.log_z, bf.log_z.value), gallery[idx].name + ": TI " + f(ti.log_z.value) + " +- " +
                                                  f(ti.log_z.std_error) + " vs brute force " + f(bf.log_z.value));
  }
  const ModelPtr ideal = build(gallery[0]);
  const auto ti = ti_log_partition(ideal, Window::cube(1.5, 2), chains(1000, 50, 2000, jobs), seed.child(9));
  s.check(within(ti.log_z, 9.0 * (std::exp(-1.0) - 1.0)), "ideal gas TI on cube(1.5)");
}

void bracket_suite(Suite& s, Seed seed, int jobs) {
  const auto gallery = model_gallery();
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    const ModelPtr m = build(gallery[i]);
    const bool slow = gallery[i].id == "quermass";
    const ThermoOptions o = chains(slow ? 150 : 300, slow ? 40 : 100, slow ? 2000 : 5000, jobs);
    try {
      const PressureResult p = estimate_pressure(m, {1.5}, o, seed.child(i));
      s.check(true, gallery[i].name + ": pressure " + f(p.pressure.value) + " +- " + f(p.pressure.std_error) +
                        " in [" + f(p.lower) + ", " + f(p.upper) + "]");
    } catch (const InvariantViolation& e) {
      s.check(false, gallery[i].name + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<SuiteResult> run_validation(const ExperimentConfig& config, std::ostream& log) {
  static const std::vector<std::string> all = {"energy", "minkowski", "decomposition", "poisson",
                                               "gnz",    "oracle",    "bracket"};
  static const std::set<std::string> theta_zero = {"energy", "minkowski", "decomposition", "poisson"};
  std::vector<std::string> names = config.suites.empty() ? all : config.suites;
  if (config.theta_zero_only) std::erase_if(names, [](const std::string& n) { return !theta_zero.count(n); });

  const Seed root{config.seed, 0};
  std::vector<SuiteResult> out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const std::string& name = all[i];
    if (std::find(names.begin(), names.end(), name) == names.end()) continue;
    log << "suite " << name << "\n";
    Suite s(name, log);
    const Seed seed = root.child(i);
    const auto start = std::chrono::steady_clock::now();
    try {
      if (name == "energy") energy_suite(s, seed);
      else if (name == "minkowski") minkowski_suite(s, seed);
      else if (name == "decomposition") decomposition_suite(s, seed);
      else if (name == "poisson") poisson_suite(s, seed, config.jobs);
      else if (name == "gnz") gnz_suite(s, seed, config.jobs);
      else if (name == "oracle") oracle_suite(s, seed, config.jobs);
      else if (name == "bracket") bracket_suite(s, seed, config.jobs);
    } catch (const std::exception& e) {
      s.check(false, std::string("aborted: ") + e.what());
    }
    out.push_back(s.finish(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()));
  }
  return out;
}

}  // namespace gibbs
