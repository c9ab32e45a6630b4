#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gibbs/harness.hpp"

using namespace gibbs;
namespace fs = std::filesystem;

namespace {

const char* kStrauss = R"(; comment
[experiment]
kind = boundary
seed = 9

[model]
id = strauss
z = 1
beta = 1
R = 0.5

[windows]
n = 1 2

[mcmc]
burn_in = 2000
samples = 50
thin = 50
chains = 2
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gibbs-harness-" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(kStrauss, "t.ini");
  CHECK(c.kind == ExperimentKind::boundary);
  CHECK(c.seed == 9);
  CHECK(c.params.at("R") == 0.5);
  CHECK(c.n_list == std::vector<double>{1, 2});
  CHECK(c.thermo.mcmc.samples == 50);

  // The canonical text parses back to the same canonical text.
  const std::string canon = canonical_text(c);
  CHECK(canonical_text(parse_config(canon, "canon.ini")) == canon);
  CHECK(config_hash(c) == config_hash(parse_config(canon, "canon.ini")));
  auto other = c;
  other.seed = 10;
  CHECK(config_hash(other) != config_hash(c));
  other = c;
  other.jobs = 4;
  other.out = "elsewhere";
  CHECK(config_hash(other) == config_hash(c));
}

TEST_CASE("config errors name the line and field") {
  auto fails_with = [](std::string text, const std::string& from, const std::string& to, const std::string& msg) {
    text.replace(text.find(from), from.size(), to);
    CHECK_THROWS_WITH_AS(parse_config(text, "t.ini"), doctest::Contains(msg.c_str()), ConfigError);
  };
  fails_with(kStrauss, "R = 0.5", "R = -0.5", "t.ini:10: model.R");
  fails_with(kStrauss, "R = 0.5", "R = half", "t.ini:10: model.R: 'half' is not a number");
  fails_with(kStrauss, "beta = 1", "gamma = 1", "t.ini:6: model.beta: model.beta is required for strauss");
  fails_with(kStrauss, "R = 0.5", "R = 0.5\ngamma = 1", "t.ini:11: model.gamma: model.gamma is not a parameter");
  fails_with(kStrauss, "n = 1 2", "n = 2 1", "t.ini:13: windows.n: window sizes must increase");
  fails_with(kStrauss, "n = 1 2", "n = 1.5", "windows.n: this experiment needs integer window sizes");
  fails_with(kStrauss, "thin = 50", "thinning = 50", "t.ini:18: mcmc.thinning: unknown key");
  fails_with(kStrauss, "[windows]", "[window]", "window: unknown section");
  fails_with(kStrauss, "chains = 2", "chains = 0", "mcmc.chains: must be >= 1");
  fails_with(kStrauss, "kind = boundary", "kind = nope", "t.ini:3: experiment.kind: unknown kind");
  CHECK_THROWS_WITH_AS(parse_config(kStrauss, "t.ini", {}, ExperimentKind::gap), doctest::Contains("experiment.kind"),
                       ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/file.ini"), ConfigError);
}

TEST_CASE("invalid config writes nothing") {
  auto c = parse_config(kStrauss, "t.ini");
  c.out = scratch("invalid");
  c.params["R"] = -1.0;
  std::ostringstream log;
  CHECK(run_experiment(c, log) == kExitConfig);
  CHECK(!fs::exists(c.out));
  CHECK(log.str().find("model.R") != std::string::npos);
}

TEST_CASE("reruns are byte-identical and jobs-invariant") {
  auto c = parse_config(kStrauss, "t.ini");
  std::ostringstream log;
  c.out = scratch("a");
  REQUIRE(run_experiment(c, log) == kExitOk);
  const fs::path a = c.out;
  c.out = scratch("b");
  c.jobs = 2;
  REQUIRE(run_experiment(c, log) == kExitOk);
  const std::string csv = slurp(a / "boundary.csv");
  CHECK(csv == slurp(c.out / "boundary.csv"));
  CHECK(csv.rfind("# config_hash=", 0) == 0);
  CHECK(csv.find("model,params,law,n,theta,value,std_error,n_samples,seed\nstrauss,") != std::string::npos);
  CHECK(fs::exists(a / "report.md"));
}

TEST_CASE("estimator failures exit 3 and keep a report") {
  auto c = parse_config(kStrauss, "t.ini");
  c.kind = ExperimentKind::pressure;
  c.thermo.mcmc.samples = 4;
  c.thermo.mcmc.thin = 1;
  c.thermo.mcmc.burn_in = 0;
  c.thermo.theta_grid = {0.0, 0.5, 1.0};
  c.n_list = {6.0};
  c.out = scratch("fail");
  std::ostringstream log;
  CHECK(run_experiment(c, log) == kExitEstimator);
  CHECK(slurp(c.out / "report.md").find("theta=") != std::string::npos);
}

TEST_CASE("minkowski verb") {
  const fs::path dir = scratch("mink");
  fs::create_directories(dir);
  std::ofstream(dir / "two.txt") << "2 2\n0 0\n1 0\n";
  std::ofstream(dir / "m.ini") << "[experiment]\nkind = minkowski\n[minkowski]\ninput = two.txt\nradius = 1\n";
  auto c = load_config(dir / "m.ini");
  c.out = dir / "out";
  std::ostringstream log;
  REQUIRE(run_experiment(c, log) == kExitOk);
  const std::string csv = slurp(c.out / "minkowski.csv");
  CHECK(csv.find("n,area,perimeter,euler,n_cc,n_holes\n2,") != std::string::npos);
  CHECK(csv.find(",1,1,0\n") != std::string::npos);
}

TEST_CASE("sample verb writes samples and diagnostics") {
  auto c = parse_config(kStrauss, "t.ini");
  c.kind = ExperimentKind::sample;
  c.n_list = {1.0};
  c.out = scratch("sample");
  std::ostringstream log;
  REQUIRE(run_experiment(c, log) == kExitOk);
  CHECK(fs::exists(c.out / "samples" / "chain1_000049.txt"));
  const std::string d = slurp(c.out / "diagnostics.csv");
  CHECK(d.find("chain,step,N,H,accept_birth,accept_death,accept_move\n0,2050,") != std::string::npos);
}

TEST_CASE("theta-zero validation subset") {
  ExperimentConfig c;
  c.kind = ExperimentKind::validate;
  c.theta_zero_only = true;
  c.suites = {"energy", "gnz"};
  std::ostringstream log;
  const auto suites = run_validation(c, log);
  REQUIRE(suites.size() == 1);
  CHECK(suites[0].name == "energy");
  CHECK(suites[0].passed);
}
