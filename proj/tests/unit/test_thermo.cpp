#include <cmath>
#include <memory>

#include "doctest.h"
#include "gibbs/cell_list.hpp"
#include "gibbs/errors.hpp"
#include "gibbs/thermo.hpp"

using namespace gibbs;

namespace {

ModelPtr model(const std::string& id, std::map<std::string, double> p, int dim = 2) {
  return ModelPtr(make_model(id, dim, p));
}

ModelPtr ideal(double z = 1.0) { return model("strauss", {{"z", z}, {"beta", 0.0}, {"R", 0.5}}); }
ModelPtr strauss() { return model("strauss", {{"z", 1.0}, {"beta", 1.0}, {"R", 0.5}}); }

ThermoOptions fast(std::int64_t samples, std::int64_t thin, std::int64_t burn, int chains = 4) {
  ThermoOptions o;
  o.mcmc.samples = samples;
  o.mcmc.thin = thin;
  o.mcmc.burn_in = burn;
  o.mcmc.chains = chains;
  return o;
}

bool within(const Estimate& e, double truth, double k = 3.0) {
  return std::fabs(e.value - truth) <= k * e.std_error + 1e-12;
}

}  // namespace

TEST_CASE("rectangle distance law") {
  // Mean distance in the unit square is (2 + sqrt2 + 5 asinh(1)) / 15.
  double mean_d = 0.0;
  const int steps = 4000;
  for (int i = 0; i < steps; ++i) {
    const double t = (i + 0.5) * std::sqrt(2.0) / steps;
    mean_d += t * rectangle_distance_density(1.0, 1.0, t) * std::sqrt(2.0) / steps;
  }
  CHECK(mean_d == doctest::Approx((2 + std::sqrt(2.0) + 5 * std::asinh(1.0)) / 15).epsilon(1e-5));
  CHECK(rectangle_distance_cdf(1.0, 1.0, 2.0) == 1.0);
  CHECK(rectangle_distance_cdf(1.0, 1.0, 0.0) == 0.0);
  // Small t: P(D <= t) ~ pi t^2 / (a b).
  CHECK(rectangle_distance_cdf(2.0, 0.5, 1e-4) == doctest::Approx(M_PI * 1e-8).epsilon(1e-3));
  // Against sampled pairs in a 0.7 x 0.3 rectangle.
  Rng rng(Seed{1, 2});
  const int draws = 400000;
  for (double t : {0.1, 0.25, 0.5, 0.72}) {
    int hit = 0;
    for (int i = 0; i < draws; ++i) {
      const double dx = 0.7 * (rng.uniform() - rng.uniform()), dy = 0.3 * (rng.uniform() - rng.uniform());
      hit += std::hypot(dx, dy) <= t;
    }
    const double p = static_cast<double>(hit) / draws, se = std::sqrt(p * (1 - p) / draws);
    CHECK(std::fabs(rectangle_distance_cdf(0.7, 0.3, t) - p) < 4 * se + 1e-12);
    // The density integrates to the CDF.
    double s = 0.0;
    for (int i = 0; i < steps; ++i) s += rectangle_distance_density(0.7, 0.3, (i + 0.5) * t / steps) * t / steps;
    CHECK(s == doctest::Approx(rectangle_distance_cdf(0.7, 0.3, t)).epsilon(1e-5));
  }
}

TEST_CASE("brute-force partition function closed forms") {
  // Ideal gas: ln Z = |W| (e^{-z} - 1).
  const Window unit = Window::cube(0.5, 2);
  const auto bf = brute_force_log_partition(*ideal(), unit, 12, 6);
  CHECK(std::fabs(bf.log_z.value - (std::exp(-1.0) - 1.0)) < 1e-9);
  CHECK(bf.mean_count == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
  CHECK(bf.log_z.std_error < 1e-6);

  // Hard core wider than the window: at most one point.
  const Window w(2, Point(0, 0), Point(0.6, 0.4));
  const auto hc = brute_force_log_partition(*model("hardcore", {{"z", 0.7}, {"delta", 0.8}}), w, 8, 6);
  CHECK(std::fabs(hc.log_z.value - (-w.volume() + std::log(1 + std::exp(-0.7) * w.volume()))) < 1e-12);

  CHECK_THROWS_AS(brute_force_log_partition(*strauss(), Window::cube(2.0, 2), 5, 4), EstimatorError);
}

TEST_CASE("brute-force partition function matches plain Monte Carlo") {
  // Z = E_pi[exp(-H)] on [0, 0.5]^2.
  const Window w(2, Point(0, 0), Point(0.5, 0.5));
  for (const auto& m : {strauss(), model("hardcore", {{"z", 0.5}, {"delta", 0.2}}),
                        model("quermass", {{"theta1", 1.0}, {"theta2", 0.2}, {"theta3", -0.5}, {"r", 0.2}})}) {
    const auto bf = brute_force_log_partition(*m, w, 12, 12);
    Rng rng(Seed{2024, 0});
    const int draws = 2000000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double e = std::exp(-m->total_energy(sample_poisson(w, 1.0, rng)));
      s += e;
      s2 += e * e;
    }
    const double mz = s / draws, se = std::sqrt((s2 / draws - mz * mz) / draws);
    INFO(m->describe() << " brute " << std::exp(bf.log_z.value) << " mc " << mz << " se " << se);
    CHECK(std::fabs(std::exp(bf.log_z.value) - mz) < 3 * se);
  }
}

TEST_CASE("node quadrature order") {
  // Trapezoid error on exp(-theta) falls 4x per grid doubling; Simpson on
  // unequal pairs is exact on quadratics.
  auto grid = [](int k) {
    std::vector<double> x;
    for (int i = 0; i <= k; ++i) x.push_back(static_cast<double>(i) / k);
    return x;
  };
  const double exact = 1.0 - std::exp(-1.0);
  double prev = 0.0;
  for (int k : {2, 4, 8, 16}) {
    const auto x = grid(k);
    std::vector<double> f;
    for (double t : x) f.push_back(std::exp(-t));
    const double gap = std::fabs(node_quadrature(x, f, true) - node_quadrature(x, f, false));
    if (prev > 0) CHECK(prev / gap == doctest::Approx(4.0).epsilon(0.02));
    prev = gap;
    CHECK(std::fabs(node_quadrature(x, f, true) - exact) < 4e-3 / (k * k * k * k));
  }
  const std::vector<double> x{0.0, 0.1, 0.5, 0.6, 1.0};
  std::vector<double> f;
  for (double t : x) f.push_back(t * t - 2 * t);
  CHECK(node_quadrature(x, f, true) == doctest::Approx(1.0 / 3.0 - 1.0).epsilon(1e-12));
  CHECK_THROWS_AS(node_quadrature({0.0}, {1.0}, true), std::invalid_argument);
}

TEST_CASE("thermodynamic integration on small windows") {
  auto opt = fast(4000, 20, 2000);
  SUBCASE("ideal gas") {
    const auto ti = ti_log_partition(ideal(), Window::cube(1.0, 2), opt, Seed{1, 0});
    CHECK(within(ti.log_z, 4.0 * (std::exp(-1.0) - 1.0)));
    CHECK(ti.log_admissible.value == 0.0);
    CHECK(ti.nodes.size() >= 11);
  }
  SUBCASE("Strauss and hard core against the brute-force oracle") {
    const Window w = Window::cube(0.25, 2);
    for (const auto& m : {strauss(), model("hardcore", {{"z", 1.0}, {"delta", 0.3}})}) {
      const auto bf = brute_force_log_partition(*m, w, 10, 12);
      const auto ti = ti_log_partition(m, w, opt, Seed{2, 0});
      INFO(m->describe() << " ti " << ti.log_z.value << " +- " << ti.log_z.std_error << " brute " << bf.log_z.value);
      CHECK(within(ti.log_z, bf.log_z.value));
      CHECK(ti.log_z.std_error < 0.02);
    }
  }
  SUBCASE("invalid grids and poor mixing") {
    opt.theta_grid = {0.0, 0.5};
    CHECK_THROWS_AS(ti_log_partition(ideal(), Window::cube(1.0, 2), opt, Seed{}), std::invalid_argument);
    auto bad = fast(20, 1, 0, 4);
    bad.theta_grid = {0.0, 1.0};
    CHECK_THROWS_WITH_AS(ti_log_partition(strauss(), Window::cube(6.0, 2), bad, Seed{}),
                         doctest::Contains("theta="), EstimatorError);
  }
}

TEST_CASE("hard-core staging") {
  // Two-point window: pi(admissible) from the closed-form pair-distance law.
  const Window w(2, Point(0, 0), Point(0.5, 0.5));
  const double delta = 0.2;
  const auto bf = brute_force_log_partition(*model("hardcore", {{"z", 1e-300}, {"delta", delta}}), w, 10, 12);
  // With z -> 0 the brute-force sum is E_pi[admissible] times e^{|W|}.
  const double exact = bf.log_z.value;
  const auto est = log_admissible_probability(w, delta, fast(5000, 20, 1000), Seed{3, 0});
  CHECK(within(est, exact));
  CHECK(core_diameter(*model("hardcore", {{"z", 1.0}, {"delta", 0.3}})) == 0.3);
  CHECK(core_diameter(*strauss()) == 0.0);
  CHECK(core_diameter(*model("strauss", {{"z", 1.0}, {"beta", kInf}, {"R", 0.4}})) == 0.4);
}

TEST_CASE("pressure respects the stability bracket") {
  const auto opt = fast(1000, 50, 5000);
  const auto ig = estimate_pressure(ideal(), {1.0, 2.0}, opt, Seed{4, 0});
  CHECK(within(ig.pressure, std::exp(-1.0) - 1.0));
  CHECK(ig.trend.size() == 2);
  CHECK(ig.upper == 0.0);
  const auto st = estimate_pressure(strauss(), {2.0}, opt, Seed{5, 0});
  CHECK(st.pressure.value >= -1.0 - 3 * st.pressure.std_error);
  CHECK(st.pressure.value <= 0.0 + 3 * st.pressure.std_error);
  CHECK(st.pressure.value < std::exp(-1.0) - 1.0);
  const auto q = model("quermass", {{"theta1", 0.5}, {"theta2", 0.0}, {"theta3", 0.0}, {"r", 0.5}});
  const auto qp = estimate_pressure(q, {1.5}, fast(400, 50, 2000), Seed{6, 0});
  CHECK(qp.upper == doctest::Approx(std::exp(0.5 * M_PI * 0.25) - 1.0));
  CHECK(qp.pressure.value <= qp.upper + 3 * qp.pressure.std_error);
  CHECK_THROWS_AS(estimate_pressure(ideal(), {2.0, 1.0}, opt, Seed{}), std::invalid_argument);
}

TEST_CASE("mean energy under Poisson laws") {
  ThermoOptions opt;
  opt.poisson_draws = 2000;
  SUBCASE("ideal gas") {
    const auto r = mean_energy(ideal(2.0), PoissonLaw{1.5}, 3.0, opt, Seed{7, 0});
    CHECK(within(r.value, 3.0));
    REQUIRE(r.direct);
    CHECK(within(*r.direct, 3.0));
    CHECK(*mean_energy_poisson(*ideal(2.0), 1.5) == 3.0);
  }
  SUBCASE("Strauss") {
    const double truth = 1.0 + M_PI / 8.0;
    CHECK(*mean_energy_poisson(*strauss(), 1.0) == doctest::Approx(truth).epsilon(1e-14));
    const auto r = mean_energy(strauss(), PoissonLaw{1.0}, 3.0, opt, Seed{8, 0});
    REQUIRE(r.palm);
    CHECK(within(*r.palm, truth));
    CHECK(within(*r.direct, truth));
  }
  SUBCASE("Quermass area") {
    const auto q = model("quermass", {{"theta1", 1.0}, {"theta2", 0.0}, {"theta3", 0.0}, {"r", 0.5}});
    const double truth = 1.0 - std::exp(-M_PI / 4.0);
    CHECK(*mean_energy_poisson(*q, 1.0) == doctest::Approx(truth).epsilon(1e-14));
    opt.poisson_draws = 300;
    const auto r = mean_energy(q, PoissonLaw{1.0}, 2.0, opt, Seed{9, 0});
    REQUIRE(r.cube);
    CHECK(within(*r.cube, truth));
    CHECK(within(*r.direct, truth));
  }
  SUBCASE("Quermass perimeter and Euler terms") {
    const auto q = model("quermass", {{"theta1", 0.0}, {"theta2", 0.5}, {"theta3", 1.0}, {"r", 0.4}});
    opt.poisson_draws = 300;
    const auto r = mean_energy(q, PoissonLaw{0.8}, 2.0, opt, Seed{10, 0});
    CHECK(within(*r.cube, *mean_energy_poisson(*q, 0.8)));
  }
  SUBCASE("hard core has infinite mean energy") {
    const auto hc = model("hardcore", {{"z", 1.0}, {"delta", 0.2}});
    CHECK(std::isinf(*mean_energy_poisson(*hc, 1.0)));
    CHECK_THROWS_AS(mean_energy(hc, PoissonLaw{1.0}, 2.0, opt, Seed{}), EstimatorError);
  }
}

TEST_CASE("mean energy routes agree under the Gibbs law") {
  const auto opt = fast(300, 400, 20000);
  const auto r = mean_energy(strauss(), GibbsLaw{}, 4.0, opt, Seed{11, 0});
  REQUIRE(r.palm);
  REQUIRE(r.direct);
  CHECK(r.value.value > 0.0);
  CHECK(r.value.method == "palm");
}

TEST_CASE("entropy") {
  CHECK(entropy_poisson(1.0) == 0.0);
  CHECK(entropy_poisson(std::exp(-1.0)) == doctest::Approx(1.0 - 2.0 * std::exp(-1.0)).epsilon(1e-14));
  for (double z : {0.1, 0.5, 2.0, 7.0}) CHECK(entropy_poisson(z) > 0.0);
  CHECK_THROWS_AS(entropy_poisson(0.0), std::invalid_argument);

  // Average log-density of Poisson(z') against the unit process on cube(5).
  const double zp = 0.4;
  const Window w = Window::cube(5.0, 2);
  std::vector<double> logs;
  for (int i = 0; i < 400; ++i) {
    const auto omega = sample_poisson(w, zp, Seed{static_cast<std::uint64_t>(i), 3});
    logs.push_back(((1.0 - zp) * w.volume() + omega.size() * std::log(zp)) / w.volume());
  }
  CHECK(std::fabs(mean(logs) - entropy_poisson(zp)) < 3.0 * std::sqrt(variance(logs) / logs.size()));

  const auto opt = fast(2000, 40, 4000);
  // Q_n of the ideal gas is Poisson(e^{-z}) at every n.
  const auto ig = entropy_gibbs(ideal(), 1.5, opt, Seed{12, 0});
  CHECK(within(ig.entropy, 1.0 - 2.0 * std::exp(-1.0)));
  // H = 0: Q_n is the reference process.
  const auto zero = model("quermass", {{"theta1", 0.0}, {"theta2", 0.0}, {"theta3", 0.0}, {"r", 0.5}});
  const auto z0 = entropy_gibbs(zero, 1.0, fast(200, 20, 100), Seed{13, 0});
  CHECK(z0.entropy.value == 0.0);
  // Strauss: above the bound from the law of N alone.
  const auto st = entropy_gibbs(strauss(), 1.5, opt, Seed{14, 0});
  const auto counts = sample_free_boundary(strauss(), 1.5, opt.mcmc, Seed{15, 0});
  double n_mean = 0.0;
  for (const auto& s : counts.samples) n_mean += s.size();
  const double rho = n_mean / counts.samples.size() / 9.0;
  CHECK(st.entropy.value >= -3 * st.entropy.std_error);
  CHECK(st.entropy.value >= entropy_poisson(rho) - 3 * st.entropy.std_error);
}

TEST_CASE("variational gap for the ideal gas") {
  const auto opt = fast(1000, 50, 5000);
  const auto p = estimate_pressure(ideal(), {2.0}, opt, Seed{16, 0});
  ThermoOptions popt = opt;
  popt.poisson_draws = 1000;
  const auto at_min = variational_gap(ideal(), PoissonLaw{std::exp(-1.0)}, 3.0, p, popt, Seed{17, 0});
  CHECK(within(at_min.gap, 0.0));
  const auto at_one = variational_gap(ideal(), PoissonLaw{1.0}, 3.0, p, popt, Seed{18, 0}, true);
  CHECK(within(at_one.gap, std::exp(-1.0)));
  CHECK(at_one.energy.value == 1.0);
  const auto gibbs = variational_gap(ideal(), GibbsLaw{}, 2.0, p, opt, Seed{19, 0});
  CHECK(within(gibbs.gap, 0.0));
}

TEST_CASE("boundary effects") {
  const auto opt = fast(200, 200, 5000);
  for (const auto& b : boundary_effect_curve(ideal(), {1, 2, 3}, opt, Seed{20, 0})) {
    CHECK(b.value.value == 0.0);
    CHECK(b.value.std_error == 0.0);
  }
  const auto st = boundary_effect_curve(strauss(), {2, 4}, opt, Seed{21, 0});
  CHECK(st[0].value.value > 0.0);
  CHECK(st[1].value.value < st[0].value.value);
  CHECK(halo_width(*strauss()) == 1);
}

TEST_CASE("sampler agrees with the brute-force mean count") {
  const Window w = Window::cube(0.5, 2);
  const auto bf = brute_force_log_partition(*strauss(), w, 11, 8);
  auto opt = fast(20000, 10, 1000);
  const auto d = run_visit(Target::free(strauss(), 0.5), opt.mcmc, Seed{22, 0}, 1, nullptr);
  const Estimate n = chain_mean(d.n_trace, "N");
  CHECK(within(n, bf.mean_count));
}

TEST_CASE("Strauss intensity is stable across volumes") {
  auto opt = fast(300, 500, 30000);
  const auto d5 = run_visit(Target::free(strauss(), 5.0), opt.mcmc, Seed{23, 0}, 1, nullptr);
  const auto d8 = run_visit(Target::free(strauss(), 8.0), opt.mcmc, Seed{24, 0}, 1, nullptr);
  const Estimate a = chain_mean(d5.n_trace, "N"), b = chain_mean(d8.n_trace, "N");
  const double ra = a.value / 100.0, rb = b.value / 256.0;
  const double joint = std::hypot(a.std_error / 100.0, b.std_error / 256.0);
  INFO("intensity n=5 " << ra << " n=8 " << rb << " joint se " << joint);
  CHECK(std::fabs(ra - rb) < 3 * joint);
}
