#include <cmath>
#include <memory>

#include "doctest.h"
#include "gibbs/errors.hpp"
#include "gibbs/sampler.hpp"

using namespace gibbs;

namespace {

std::shared_ptr<const EnergyModel> model(const std::string& id, std::map<std::string, double> p, int dim = 2) {
  return std::shared_ptr<const EnergyModel>(make_model(id, dim, p));
}

std::shared_ptr<const EnergyModel> strauss(double z, double beta, double radius, int dim = 2) {
  return model("strauss", {{"z", z}, {"beta", beta}, {"R", radius}}, dim);
}

std::vector<double> pooled(const std::vector<std::vector<double>>& chains) {
  std::vector<double> out;
  for (const auto& c : chains) out.insert(out.end(), c.begin(), c.end());
  return out;
}

McmcParams quick(std::int64_t samples, std::int64_t thin, std::int64_t burn, int chains = 4) {
  McmcParams p;
  p.samples = samples;
  p.thin = thin;
  p.burn_in = burn;
  p.chains = chains;
  p.revalidate_every = 5000;
  return p;
}

}  // namespace

TEST_CASE("theta = 0 samples the unit Poisson process") {
  for (const auto& m : {strauss(1.0, 2.0, 0.5), model("quermass", {{"theta1", 1}, {"theta2", 1}, {"theta3", 1}, {"r", 0.4}})}) {
    const auto target = Target::free(m, 1.5, 0.0);
    const auto d = run_visit(target, quick(1000, 30, 2000), Seed{11, 0}, 1, nullptr);
    const Estimate n = chain_mean(d.n_trace, "N");
    INFO(m->describe() << " mean N " << n.value << " se " << n.std_error);
    CHECK(std::fabs(n.value - 9.0) < 4.0 * n.std_error + 1e-9);
    // Poisson: variance equals the mean.
    CHECK(variance(pooled(d.n_trace)) == doctest::Approx(9.0).epsilon(0.15));
  }
}

TEST_CASE("ideal gas intensity is exp(-z)") {
  const auto m = strauss(0.7, 0.0, 0.5);
  const auto d = run_visit(Target::free(m, 2.5), quick(1000, 50, 5000), Seed{3, 0}, 1, nullptr);
  const Estimate n = chain_mean(d.n_trace, "N");
  CHECK(std::fabs(n.value / 25.0 - std::exp(-0.7)) < 4.0 * n.std_error / 25.0);
}

TEST_CASE("hard-core samples respect the core") {
  const auto m = model("hardcore", {{"z", 0.05}, {"delta", 0.4}});
  const auto r = run(Target::free(m, 2.0), quick(200, 200, 20000, 2), Seed{5, 0});
  std::size_t total = 0;
  for (const auto& s : r.samples) {
    total += s.size();
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = i + 1; j < s.size(); ++j) REQUIRE(distance(s[i], s[j]) > 0.4);
  }
  CHECK(total > 0);
}

TEST_CASE("runs are reproducible and independent of the thread count") {
  const auto m = strauss(0.5, 0.8, 0.6);
  const auto params = quick(50, 100, 1000, 3);
  const auto a = run(Target::free(m, 1.5), params, Seed{42, 0}, 1);
  const auto b = run(Target::free(m, 1.5), params, Seed{42, 0}, 3);
  const auto c = run(Target::free(m, 1.5), params, Seed{43, 0}, 1);
  REQUIRE(a.samples.size() == 150);
  CHECK(a.samples == b.samples);
  CHECK(a.diagnostics.h_trace == b.diagnostics.h_trace);
  CHECK_FALSE(a.samples == c.samples);
}

TEST_CASE("cached energy matches a fresh recomputation") {
  const std::vector<std::shared_ptr<const EnergyModel>> models = {
      strauss(0.3, 1.7, 0.7), model("quermass", {{"theta1", 0.5}, {"theta2", -0.3}, {"theta3", 0.8}, {"r", 0.45}}),
      model("lj-trunc", {{"z", 0.2}, {"epsilon", 1.0}, {"sigma", 0.5}, {"cutoff", 1.2}, {"core", 0.3}}),
      strauss(0.1, 0.6, 0.5, 3), strauss(0.1, 1.0, 0.9, 1)};
  for (const auto& m : models) {
    McmcParams p;
    p.revalidate_every = 997;
    Chain chain(Target::free(m, 2.0), Seed{8, 1}, p);
    CHECK_NOTHROW(chain.advance(50000));
    CHECK_NOTHROW(chain.revalidate());
  }
}

TEST_CASE("fixed boundary conditions") {
  const auto m = strauss(0.5, 1.0, 0.5);
  const Window w = Window::cube(1.0, 2);
  CHECK_THROWS_AS(Target::fixed(m, w, Configuration(2, {Point{0.0, 0.0}})), std::invalid_argument);
  // Points beyond the range are dropped.
  const auto t = Target::fixed(m, w, Configuration(2, {Point{-1.2, 0.0}, Point{-4.0, 0.0}}));
  CHECK(t.boundary.size() == 1);
  const auto hc = model("hardcore", {{"z", 0.5}, {"delta", 0.5}});
  CHECK_THROWS_AS(Target::fixed(hc, w, Configuration(2, {Point{-1.2, 0.0}, Point{-1.3, 0.0}})), std::invalid_argument);

  // A wall of boundary points just left of the window keeps interior points
  // clear of the core.
  std::vector<Point> wall;
  for (int k = 0; k < 6; ++k) wall.push_back(Point{-1.1, -1.5 + 0.6 * k});
  Chain chain(Target::fixed(hc, w, Configuration(2, wall)), Seed{1, 0});
  std::size_t near_wall = 0;
  for (int rep = 0; rep < 2000; ++rep) {
    chain.advance(100);
    for (const auto& p : chain.points()) {
      REQUIRE(p[0] > -0.69);
      for (const auto& b : wall) REQUIRE(distance(p, b) > 0.5);
      near_wall += p[0] < -0.5 ? 1 : 0;
    }
  }
  CHECK(near_wall > 0);
}

TEST_CASE("move proposals are reversible") {
  const auto m = model("quermass", {{"theta1", 1.0}, {"theta2", 0.5}, {"theta3", -1.0}, {"r", 0.5}});
  Rng rng(Seed{9, 0});
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Point> pts;
    for (int i = 0; i < 12; ++i) pts.push_back(Point{rng.uniform(0, 3), rng.uniform(0, 3)});
    const Configuration omega(2, pts);
    Point x{rng.uniform(0, 3), rng.uniform(0, 3)};
    Chain forward(Target::free(m, 3.0), Seed{1, 0}, {}, omega);
    const double there = forward.move_log_ratio(0, x);
    std::vector<Point> moved(omega.begin(), omega.end());
    const Point back = moved[0];
    moved[0] = x;
    Chain reverse(Target::free(m, 3.0), Seed{1, 0}, {}, Configuration(2, moved));
    std::size_t idx = 0;
    while (!(reverse.points()[idx] == x)) ++idx;
    const double home = reverse.move_log_ratio(idx, back);
    CHECK(there + home == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
    CHECK(there == doctest::Approx(forward.energy() - reverse.energy()).epsilon(1e-9).scale(1.0));
  }
  Chain chain(Target::free(m, 3.0), Seed{1, 0}, {}, Configuration(2, {Point{1, 1}}));
  CHECK(chain.move_log_ratio(0, Point{3.5, 1.0}) == -kInf);
}

TEST_CASE("detailed balance on a window smaller than the interaction range") {
  // Every pair interacts, so P(N = k) is proportional to
  // |W|^k exp(-k z - beta k (k - 1) / 2) / k!.
  const double side = std::sqrt(std::exp(1.0));
  const double z = 1.0, beta = 1.0;
  const auto m = strauss(z, beta, 3.0);
  const auto d = run_visit(Target::free(m, side / 2.0), quick(100000, 7, 1000, 2), Seed{77, 0}, 1, nullptr);
  const auto ns = pooled(d.n_trace);
  std::vector<double> expect(8, 0.0);
  double norm = 0.0;
  for (int k = 0; k < 8; ++k) {
    expect[k] = std::exp(k - k * z - beta * k * (k - 1) / 2.0 - std::lgamma(k + 1.0));
    norm += expect[k];
  }
  for (int k = 0; k < 5; ++k) {
    std::vector<double> ind;
    for (double n : ns) ind.push_back(n == k ? 1.0 : 0.0);
    const double p = mean(ind);
    const double se = batch_means_se(ind, 50);
    INFO("k=" << k << " p=" << p << " expect=" << expect[k] / norm << " se=" << se);
    CHECK(std::fabs(p - expect[k] / norm) < 4.5 * se + 1e-4);
  }
}

TEST_CASE("chains converge and move types are exercised") {
  const auto m = strauss(0.2, 1.0, 0.5);
  const auto d = run_visit(Target::free(m, 2.5), quick(500, 200, 20000), Seed{21, 0}, 1, nullptr);
  CHECK(d.rhat_n <= 1.05);
  CHECK(d.rhat_h <= 1.05);
  CHECK(d.ess_n > 200);
  for (auto kind : {MoveKind::birth, MoveKind::death, MoveKind::move}) {
    CHECK(d.acceptance(kind) > 0.05);
    CHECK(d.acceptance(kind) < 1.0);
  }
  REQUIRE(d.step_trace[0].size() == 500);
  CHECK(d.step_trace[0].front() == 20200);
}

TEST_CASE("Boolean model coverage at theta = 0") {
  const double r = 0.5;
  const auto m = model("quermass", {{"theta1", 1}, {"theta2", 0}, {"theta3", 0}, {"r", r}});
  const auto target = Target::free(m, 3.0, 0.0);
  std::vector<double> cover;
  run_visit(target, quick(500, 100, 2000, 2), Seed{4, 0}, 1, [&](int, const Chain& chain) {
    // Probe points at least r from the window edge see the full process.
    int hit = 0, probes = 0;
    for (double x = -2.0; x <= 2.0; x += 0.5) {
      for (double y = -2.0; y <= 2.0; y += 0.5) {
        ++probes;
        for (const auto& p : chain.points()) {
          if (distance(p, Point{x, y}) < r) {
            ++hit;
            break;
          }
        }
      }
    }
    cover.push_back(static_cast<double>(hit) / probes);
  });
  const double expect = 1.0 - std::exp(-M_PI * r * r);
  CHECK(std::fabs(mean(cover) - expect) < 4.0 * batch_means_se(cover, 20));
}

TEST_CASE("GNZ residual vanishes for the correct chain and not for a biased one") {
  const auto m = strauss(0.3, 1.2, 0.6);
  const auto target = Target::free(m, 2.5);
  const auto params = quick(400, 150, 20000);
  const auto good = run(target, params, Seed{31, 0});
  for (const auto& g : {gnz_constant(), gnz_neighbour_count(0.6)}) {
    const auto res = gnz_residual(target, good.samples, g, 12, Seed{32, 0});
    INFO("residual " << res.residual.value << " se " << res.residual.std_error);
    CHECK(std::fabs(res.residual.value) < 4.0 * res.residual.std_error);
    CHECK(res.leading.value > 0.0);
  }
  auto biased = params;
  biased.birth_log_bias = 0.5;
  const auto bad = run(target, biased, Seed{31, 0});
  const auto res = gnz_residual(target, bad.samples, gnz_constant(), 12, Seed{32, 0});
  INFO("biased residual " << res.residual.value << " se " << res.residual.std_error);
  CHECK(std::fabs(res.residual.value) > 5.0 * res.residual.std_error);
}

TEST_CASE("GNZ residual with a fixed exterior") {
  const auto m = strauss(0.5, 1.0, 0.5);
  const Window w = Window::cube(1.5, 2);
  const Configuration outside = sample_poisson(w.dilate(0.5), 1.0, Seed{1, 7});
  std::vector<Point> ext;
  for (const auto& p : outside)
    if (!w.contains(p)) ext.push_back(p);
  const auto target = Target::fixed(m, w, Configuration(2, ext));
  const auto r = run(target, quick(400, 100, 5000), Seed{2, 0});
  const auto res = gnz_residual(target, r.samples, gnz_neighbour_count(0.5), 10, Seed{3, 0});
  CHECK(std::fabs(res.residual.value) < 4.0 * res.residual.std_error);
}

TEST_CASE("parameter validation") {
  const auto m = strauss(0.5, 1.0, 0.5);
  auto p = quick(0, 10, 0);
  CHECK_THROWS_AS(run(Target::free(m, 1.0), p, Seed{}), std::invalid_argument);
  CHECK_THROWS_AS(Chain(Target::free(m, 1.0, 1.5), Seed{}), std::invalid_argument);
  CHECK(default_burn_in(Target::free(m, 1.0)) == 400000);
  CHECK(default_burn_in(Target::free(m, 1.0, 0.25)) == 200000);
}
