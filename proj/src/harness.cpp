#include "gibbs/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gibbs/errors.hpp"
#include "gibbs/minkowski.hpp"
#include "json.hpp"

namespace gibbs {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

const std::vector<std::pair<ExperimentKind, std::string>> kKinds = {
    {ExperimentKind::sample, "sample"},   {ExperimentKind::minkowski, "minkowski"},
    {ExperimentKind::pressure, "pressure"}, {ExperimentKind::gap, "gap"},
    {ExperimentKind::mean_energy, "mean-energy"}, {ExperimentKind::entropy, "entropy"},
    {ExperimentKind::boundary, "boundary"}, {ExperimentKind::gnz, "gnz"},
    {ExperimentKind::validate, "validate"}};

const std::map<std::string, std::set<std::string>> kKeys = {
    {"experiment", {"kind", "seed", "out", "jobs"}},
    {"law", {"poisson", "gibbs", "analytic_energy"}},
    {"windows", {"n"}},
    {"ti", {"grid", "simpson", "max_refinements", "max_rhat"}},
    {"estimators", {"poisson_draws", "route_tolerance"}},
    {"mcmc", {"burn_in", "samples", "thin", "chains", "kick_scale", "revalidate_every", "birth_log_bias"}},
    {"sample", {"theta", "boundary_file"}},
    {"minkowski", {"input", "radius"}},
    {"gnz", {"nodes_per_axis", "radius"}},
    {"validate", {"suites", "theta_zero_only"}}};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Locates "section.key" in the raw text for error messages.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) {
    std::istringstream in(text);
    std::string line, section;
    for (int no = 1; std::getline(in, line); ++no) {
      const std::string t = trim(line);
      if (t.empty() || t[0] == ';' || t[0] == '#') continue;
      if (t.front() == '[' && t.back() == ']') {
        section = trim(t.substr(1, t.size() - 2));
        lines_[section] = no;
        continue;
      }
      const auto eq = t.find('=');
      if (eq != std::string::npos) lines_[section + "." + trim(t.substr(0, eq))] = no;
    }
  }
  int line(const std::string& field) const {
    const auto it = lines_.find(field);
    return it == lines_.end() ? 0 : it->second;
  }

 private:
  std::map<std::string, int> lines_;
};

class Reader {
 public:
  Reader(const pt::ptree& tree, const LineIndex& index, std::string name)
      : tree_(tree), index_(index), name_(std::move(name)) {}

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    std::ostringstream msg;
    msg << name_;
    int l = index_.line(field);
    if (!l) l = index_.line(field.substr(0, field.find('.')));
    if (l) msg << ":" << l;
    msg << ": " << field << ": " << what;
    throw ConfigError(msg.str());
  }

  std::optional<std::string> raw(const std::string& field) const {
    const auto v = tree_.get_optional<std::string>(pt::ptree::path_type(field, '.'));
    if (!v) return std::nullopt;
    return trim(*v);
  }

  double number(const std::string& field, const std::string& text) const {
    const std::string t = trim(text);
    if (t == "inf" || t == "+inf") return kInf;
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || std::isnan(v)) fail(field, "'" + t + "' is not a number");
    return v;
  }

  template <class T>
  void get(const std::string& field, T& out) const {
    const auto v = raw(field);
    if (!v) return;
    if constexpr (std::is_same_v<T, std::string>) {
      out = *v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (*v == "true" || *v == "yes" || *v == "1") out = true;
      else if (*v == "false" || *v == "no" || *v == "0") out = false;
      else fail(field, "'" + *v + "' is not a boolean");
    } else if constexpr (std::is_same_v<T, double>) {
      out = number(field, *v);
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      out.clear();
      std::string s = *v;
      std::replace(s.begin(), s.end(), ',', ' ');
      std::istringstream in(s);
      for (std::string tok; in >> tok;) out.push_back(number(field, tok));
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      out.clear();
      std::string s = *v;
      std::replace(s.begin(), s.end(), ',', ' ');
      std::istringstream in(s);
      for (std::string tok; in >> tok;) out.push_back(tok);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      char* end = nullptr;
      errno = 0;
      const unsigned long long x = std::strtoull(v->c_str(), &end, 10);
      if (v->empty() || (*v)[0] == '-' || end != v->c_str() + v->size() || errno)
        fail(field, "'" + *v + "' is not an unsigned integer");
      out = x;
    } else {
      static_assert(std::is_integral_v<T>);
      char* end = nullptr;
      errno = 0;
      const long long x = std::strtoll(v->c_str(), &end, 10);
      if (v->empty() || end != v->c_str() + v->size() || errno) fail(field, "'" + *v + "' is not an integer");
      out = static_cast<T>(x);
    }
  }

 private:
  const pt::ptree& tree_;
  const LineIndex& index_;
  std::string name_;
};

std::string fmt(double v) { return format_double(v); }

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? " " : "") + fmt(xs[i]);
  return s;
}

std::string params_text(const EnergyModel& model) {
  std::string s;
  for (const auto& [k, v] : model.params()) s += (s.empty() ? "" : ";") + k + "=" + fmt(v);
  return s;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << v;
  return o.str();
}

// --- output ----------------------------------------------------------------

struct Check {
  std::string what;
  bool passed;
};

class Output {
 public:
  Output(const ExperimentConfig& config) : config_(config), header_(header_text(config)) {
    fs::create_directories(config.out);
  }

  std::ofstream open(const std::string& file) const {
    std::ofstream f(config_.out / file, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (config_.out / file).string());
    f << header_;
    return f;
  }

  void report(const std::vector<std::string>& body, const std::vector<Check>& checks, double seconds,
              const std::string& error) const {
    std::ofstream f(config_.out / "report.md", std::ios::binary);
    const std::time_t now = std::time(nullptr);
    char stamp[64];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    f << "# " << to_string(config_.kind) << " run\n\n";
    f << "- finished: " << stamp << "\n";
    f << "- wall time: " << std::fixed << std::setprecision(1) << seconds << " s\n";
    f.unsetf(std::ios::floatfield);
    f << "- config hash: " << hex(config_hash(config_)) << "\n";
    f << "- seed: " << config_.seed << "\n- jobs: " << config_.jobs << "\n\n";
    if (!error.empty()) f << "## Error\n\n```\n" << error << "\n```\n\n";
    if (!checks.empty()) {
      f << "## Checks\n\n| check | result |\n|---|---|\n";
      for (const auto& c : checks) f << "| " << c.what << " | " << (c.passed ? "PASS" : "FAIL") << " |\n";
      f << "\n";
    }
    if (!body.empty()) {
      f << "## Results\n\n";
      for (const auto& l : body) f << l << "\n";
      f << "\n";
    }
    f << "## Configuration\n\n```ini\n" << canonical_text(config_) << "```\n";
  }

 private:
  static std::string header_text(const ExperimentConfig& config) {
    std::string h = "# config_hash=" + hex(config_hash(config)) + "\n";
    std::istringstream in(canonical_text(config));
    for (std::string line; std::getline(in, line);)
      if (!line.empty()) h += "# " + line + "\n";
    return h;
  }

  const ExperimentConfig& config_;
  std::string header_;
};

constexpr double kBruteForceVolume = 0.25;

const char* kCsvColumns = "model,params,law,n,theta,value,std_error,n_samples,seed\n";

struct Row {
  std::string law;
  std::optional<double> n;
  std::optional<double> theta;
  Estimate value;
};

void write_rows(const Output& out, const std::string& file, const ExperimentConfig& config,
                const EnergyModel& model, const std::vector<Row>& rows) {
  auto f = out.open(file);
  f << kCsvColumns;
  for (const auto& r : rows) {
    f << model.id() << "," << params_text(model) << "," << r.law << "," << (r.n ? fmt(*r.n) : "") << ","
      << (r.theta ? fmt(*r.theta) : "") << "," << fmt(r.value.value) << "," << fmt(r.value.std_error) << ","
      << r.value.n_samples << "," << config.seed << "\n";
  }
}

std::string pm(const Estimate& e) { return fmt(e.value) + " ± " + fmt(e.std_error); }

bool is_ideal(const EnergyModel& model) {
  const auto* p = dynamic_cast<const PairwiseModel*>(&model);
  return p && p->is_ideal();
}

double activity(const EnergyModel& model) {
  const auto* p = dynamic_cast<const PairwiseModel*>(&model);
  return p ? p->activity() : 0.0;
}

std::vector<int> integer_n(const ExperimentConfig& c) {
  std::vector<int> out;
  for (double n : c.n_list) out.push_back(static_cast<int>(n));
  return out;
}

// --- experiments -------------------------------------------------------------

struct Outcome {
  std::vector<std::string> body;
  std::vector<Check> checks;
};

void run_sample(const ExperimentConfig& c, const Output& out, Outcome& o) {
  const ModelPtr model = c.model();
  const Window w = Window::cube(c.n_list.front(), c.dim);
  Target target = Target::free(model, c.n_list.front(), c.theta);
  if (!c.boundary_file.empty()) {
    std::ifstream in(c.boundary_file);
    target = Target::fixed(model, w, read_configuration(in), c.theta);
  }
  struct Trace {
    std::vector<std::string> rows;
    std::vector<Configuration> samples;
  };
  std::vector<Trace> traces(static_cast<std::size_t>(c.thermo.mcmc.chains));
  const ChainDiagnostics d =
      run_visit(target, c.thermo.mcmc, Seed{c.seed, 0}, c.jobs, [&](int chain, const Chain& s) {
        const auto& t = s.tallies();
        std::ostringstream row;
        row << chain << "," << s.step_count() << "," << s.size() << "," << fmt(s.energy()) << ","
            << fmt(t[0].rate()) << "," << fmt(t[1].rate()) << "," << fmt(t[2].rate()) << "\n";
        traces[chain].rows.push_back(row.str());
        traces[chain].samples.push_back(s.current());
      });
  auto f = out.open("diagnostics.csv");
  f << "chain,step,N,H,accept_birth,accept_death,accept_move\n";
  fs::create_directories(c.out / "samples");
  for (std::size_t ch = 0; ch < traces.size(); ++ch) {
    for (std::size_t i = 0; i < traces[ch].rows.size(); ++i) {
      f << traces[ch].rows[i];
      std::ostringstream name;
      name << "chain" << ch << "_" << std::setw(6) << std::setfill('0') << i << ".txt";
      std::ofstream s(c.out / "samples" / name.str(), std::ios::binary);
      write_configuration(s, traces[ch].samples[i]);
    }
  }
  const Estimate n = chain_mean(d.n_trace, "N"), h = chain_mean(d.h_trace, "H");
  o.body.push_back("- mean N: " + pm(n));
  o.body.push_back("- mean H: " + pm(h));
  o.body.push_back("- acceptance birth/death/move: " + fmt(d.acceptance(MoveKind::birth)) + " / " +
                   fmt(d.acceptance(MoveKind::death)) + " / " + fmt(d.acceptance(MoveKind::move)));
  o.body.push_back("- ESS(N) " + fmt(d.ess_n) + ", R-hat(N) " + fmt(d.rhat_n) + ", R-hat(H) " + fmt(d.rhat_h));
  if (c.thermo.mcmc.chains > 1) o.checks.push_back({"R-hat(N) <= 1.1", d.rhat_n <= 1.1});
}

void run_minkowski(const ExperimentConfig& c, const Output& out, Outcome& o) {
  std::ifstream in(c.input);
  const Configuration centers = read_configuration(in);
  if (centers.dim() != 2) throw ConfigError(c.input.string() + ": minkowski needs planar points");
  const MinkowskiSummary m = minkowski_functionals(DiscUnion(centers, c.radius));
  auto f = out.open("minkowski.csv");
  f << "n,area,perimeter,euler,n_cc,n_holes\n";
  f << centers.size() << "," << fmt(m.area) << "," << fmt(m.perimeter) << "," << m.euler << "," << m.n_components
    << "," << m.n_holes << "\n";
  o.body.push_back("- discs: " + std::to_string(centers.size()) + ", radius " + fmt(c.radius));
  o.body.push_back("- area " + fmt(m.area) + ", perimeter " + fmt(m.perimeter) + ", euler " +
                   std::to_string(m.euler));
  o.body.push_back("- degeneracies resolved: " + std::to_string(m.degeneracies));
  o.checks.push_back({"|euler| <= 3 N", std::labs(m.euler) <= 3 * static_cast<long>(centers.size())});
}

void pressure_rows(const PressureResult& p, std::vector<Row>& rows, std::vector<Row>& nodes) {
  for (const auto& pt : p.trend) {
    rows.push_back(Row{"gibbs", pt.n, std::nullopt, pt.pressure});
    for (const auto& node : pt.ti.nodes) nodes.push_back(Row{"gibbs", pt.n, node.theta, node.mean_energy});
  }
}

void pressure_body(const EnergyModel& model, const PressureResult& p, Outcome& o) {
  o.body.push_back("| n | pressure | SE | TI nodes | refinements | quadrature error | min acceptance (move) |");
  o.body.push_back("|---|---|---|---|---|---|---|");
  for (const auto& pt : p.trend) {
    double acc = 1.0;
    for (const auto& node : pt.ti.nodes) acc = std::min(acc, node.diagnostics.acceptance(MoveKind::move));
    o.body.push_back("| " + fmt(pt.n) + " | " + fmt(pt.pressure.value) + " | " + fmt(pt.pressure.std_error) +
                     " | " + std::to_string(pt.ti.nodes.size()) + " | " + std::to_string(pt.ti.refinements) +
                     " | " + fmt(pt.ti.quadrature_error) + " | " + fmt(acc) + " |");
    o.checks.push_back({"stability bracket at n=" + fmt(pt.n),
                        pt.pressure.value >= p.lower - 3 * pt.pressure.std_error &&
                            pt.pressure.value <= p.upper + 3 * pt.pressure.std_error});
  }
  o.body.push_back("");
  o.body.push_back("Bracket [" + fmt(p.lower) + ", " + fmt(p.upper) + "] for " + model.describe() + ".");
  if (is_ideal(model)) {
    const double exact = std::exp(-activity(model)) - 1.0;
    o.checks.push_back({"ideal gas: pressure within 3 SE of e^{-z} - 1 = " + fmt(exact),
                        std::fabs(p.pressure.value - exact) <= 3 * p.pressure.std_error + 1e-12});
  }
}

void run_pressure(const ExperimentConfig& c, const Output& out, Outcome& o) {
  const ModelPtr model = c.model();
  const PressureResult p = estimate_pressure(model, c.n_list, c.thermo, Seed{c.seed, 0});
  std::vector<Row> rows, nodes;
  pressure_rows(p, rows, nodes);
  write_rows(out, "pressure.csv", c, *model, rows);
  write_rows(out, "ti_nodes.csv", c, *model, nodes);
  pressure_body(*model, p, o);
  // Small windows also get the brute-force expansion as an oracle.
  std::vector<Row> brute;
  for (const auto& pt : p.trend) {
    const Window w = Window::cube(pt.n, c.dim);
    if (w.volume() > kBruteForceVolume) continue;
    const BruteForceResult bf = brute_force_log_partition(*model, w, 12, 12);
    const Estimate v{bf.log_z.value / w.volume(), bf.log_z.std_error / w.volume(), 0, "brute-force"};
    brute.push_back(Row{"gibbs", pt.n, std::nullopt, v});
    o.body.push_back("- brute force at n=" + fmt(pt.n) + ": " + pm(v) + " (ln Z " + fmt(bf.log_z.value) + ")");
    o.checks.push_back({"TI within 3 SE of the brute-force value at n=" + fmt(pt.n),
                        std::fabs(pt.pressure.value - v.value) <= 3 * pt.pressure.std_error + v.std_error});
  }
  if (!brute.empty()) write_rows(out, "brute_force.csv", c, *model, brute);
}

void run_gap(const ExperimentConfig& c, const Output& out, Outcome& o) {
  const ModelPtr model = c.model();
  const Seed base{c.seed, 0};
  const PressureResult p = estimate_pressure(model, c.n_list, c.thermo, base.child(0));
  std::vector<Row> rows, prow, nodes;
  pressure_rows(p, prow, nodes);
  write_rows(out, "pressure.csv", c, *model, prow);
  const double n_max = c.n_list.back();
  o.body.push_back("| law | n | gap | SE | entropy | energy | pressure |");
  o.body.push_back("|---|---|---|---|---|---|---|");
  auto add = [&](const LawSpec& law, double n, const GapResult& g) {
    rows.push_back(Row{describe(law), n, std::nullopt, g.gap});
    o.body.push_back("| " + describe(law) + " | " + fmt(n) + " | " + fmt(g.gap.value) + " | " +
                     fmt(g.gap.std_error) + " | " + pm(g.entropy) + " | " + pm(g.energy) + " | " + pm(g.pressure) +
                     " |");
  };
  for (std::size_t i = 0; i < c.poisson.size(); ++i) {
    const LawSpec law = PoissonLaw{c.poisson[i]};
    const GapResult g = variational_gap(model, law, n_max, p, c.thermo, base.child(1 + i), c.analytic_energy);
    add(law, n_max, g);
    o.checks.push_back({"gap >= 0 for " + describe(law), g.gap.value >= -3 * g.gap.std_error});
    if (is_ideal(*model)) {
      const double z = activity(*model), zp = c.poisson[i];
      const double exact = 1 - zp + zp * std::log(zp) + z * zp + std::exp(-z) - 1;
      o.checks.push_back({"ideal gas: gap of " + describe(law) + " within max(3 SE, 2e-2) of " + fmt(exact),
                          std::fabs(g.gap.value - exact) <= std::max(3 * g.gap.std_error, 2e-2)});
    }
  }
  if (c.gibbs) {
    std::vector<GapResult> gibbs;
    for (std::size_t i = 0; i < c.n_list.size(); ++i) {
      const GapResult g =
          variational_gap(model, GibbsLaw{}, c.n_list[i], p, c.thermo, base.child(1000 + i), c.analytic_energy);
      add(GibbsLaw{}, c.n_list[i], g);
      gibbs.push_back(g);
    }
    const Estimate& last = gibbs.back().gap;
    o.checks.push_back({"gibbs: |gap| <= max(0.05, 3 SE) at n=" + fmt(n_max),
                        std::fabs(last.value) <= std::max(0.05, 3 * last.std_error)});
    for (std::size_t i = 1; i < gibbs.size(); ++i) {
      const Estimate &a = gibbs[i - 1].gap, &b = gibbs[i].gap;
      o.checks.push_back({"gibbs: |gap| non-increasing from n=" + fmt(c.n_list[i - 1]) + " to n=" + fmt(c.n_list[i]),
                          std::fabs(b.value) <= std::fabs(a.value) + 2 * std::hypot(a.std_error, b.std_error)});
    }
  }
  write_rows(out, "gap.csv", c, *model, rows);
}

std::vector<LawSpec> laws(const ExperimentConfig& c) {
  std::vector<LawSpec> out;
  for (double z : c.poisson) out.push_back(PoissonLaw{z});
  if (c.gibbs) out.push_back(GibbsLaw{});
  return out;
}

void run_mean_energy(const ExperimentConfig& c, const Output& out, Outcome& o) {
  const ModelPtr model = c.model();
  const Seed base{c.seed, 0};
  std::vector<Row> rows, routes;
  o.body.push_back("| law | n | value | direct | palm | cube |");
  o.body.push_back("|---|---|---|---|---|---|");
  const auto ls = laws(c);
  for (std::size_t li = 0; li < ls.size(); ++li) {
    for (std::size_t ni = 0; ni < c.n_list.size(); ++ni) {
      const double n = c.n_list[ni];
      const MeanEnergyResult r = mean_energy(model, ls[li], n, c.thermo, base.child(li * 1000 + ni));
      const std::string law = describe(ls[li]);
      rows.push_back(Row{law, n, std::nullopt, r.value});
      auto show = [&](const std::optional<Estimate>& e, const char* name) {
        if (!e) return std::string("-");
        routes.push_back(Row{law + "/" + name, n, std::nullopt, *e});
        return pm(*e);
      };
      const std::string d = show(r.direct, "direct"), p = show(r.palm, "palm"), q = show(r.cube, "cube");
      o.body.push_back("| " + law + " | " + fmt(n) + " | " + pm(r.value) + " | " + d + " | " + p + " | " + q + " |");
      if (const auto* pl = std::get_if<PoissonLaw>(&ls[li])) {
        if (const auto exact = mean_energy_poisson(*model, pl->intensity)) {
          o.checks.push_back({"closed form " + fmt(*exact) + " within 3 SE for " + law + " at n=" + fmt(n),
                              std::fabs(r.value.value - *exact) <= 3 * r.value.std_error + 1e-12});
        }
      }
    }
  }
  write_rows(out, "mean_energy.csv", c, *model, rows);
  write_rows(out, "mean_energy_routes.csv", c, *model, routes);
}

void run_entropy(const ExperimentConfig& c, const Output& out, Outcome& o) {
  const ModelPtr model = c.model();
  std::vector<Row> rows;
  for (double z : c.poisson) {
    const Estimate e{entropy_poisson(z), 0.0, 0, "entropy-closed-form"};
    rows.push_back(Row{describe(PoissonLaw{z}), std::nullopt, std::nullopt, e});
    o.body.push_back("- " + describe(PoissonLaw{z}) + ": " + fmt(e.value) + " (closed form)");
  }
  if (c.gibbs) {
    for (std::size_t i = 0; i < c.n_list.size(); ++i) {
      const EntropyResult e = entropy_gibbs(model, c.n_list[i], c.thermo, Seed{c.seed, 0}.child(i));
      rows.push_back(Row{"gibbs", c.n_list[i], std::nullopt, e.entropy});
      o.body.push_back("- gibbs n=" + fmt(c.n_list[i]) + ": " + pm(e.entropy) + " (energy " + pm(e.energy) +
                       ", ln Z/|W| " + pm(e.log_z_per_volume) + ")");
      o.checks.push_back({"entropy >= 0 at n=" + fmt(c.n_list[i]), e.entropy.value >= -3 * e.entropy.std_error});
    }
  }
  write_rows(out, "entropy.csv", c, *model, rows);
}

void run_boundary(const ExperimentConfig& c, const Output& out, Outcome& o) {
  const ModelPtr model = c.model();
  const auto curve = boundary_effect_curve(model, integer_n(c), c.thermo, Seed{c.seed, 0});
  std::vector<Row> rows;
  o.body.push_back("| n | boundary term / volume | n x value |");
  o.body.push_back("|---|---|---|");
  for (const auto& b : curve) {
    rows.push_back(Row{"gibbs", static_cast<double>(b.n), std::nullopt, b.value});
    o.body.push_back("| " + std::to_string(b.n) + " | " + pm(b.value) + " | " + fmt(b.n * b.value.value) + " |");
  }
  write_rows(out, "boundary.csv", c, *model, rows);
  if (is_ideal(*model)) {
    bool zero = true;
    for (const auto& b : curve) zero = zero && b.value.value == 0.0;
    o.checks.push_back({"ideal gas: boundary term identically 0", zero});
    return;
  }
  // Surface over volume: n times the value is constant up to a factor 2.
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double a = curve[i - 1].n * curve[i - 1].value.value, b = curve[i].n * curve[i].value.value;
    const bool ok = a != 0.0 && b / a >= 0.5 && b / a <= 2.0;
    o.checks.push_back({"surface/volume scaling from n=" + std::to_string(curve[i - 1].n) + " to n=" +
                            std::to_string(curve[i].n) + " (ratio " + fmt(b / a) + ")",
                        ok});
  }
}

void run_gnz(const ExperimentConfig& c, const Output& out, Outcome& o) {
  const ModelPtr model = c.model();
  const double radius = c.gnz_radius > 0 ? c.gnz_radius : model->range();
  std::vector<Row> rows;
  o.body.push_back("| n | test function | residual | SE | leading term |");
  o.body.push_back("|---|---|---|---|---|");
  for (std::size_t i = 0; i < c.n_list.size(); ++i) {
    const double n = c.n_list[i];
    const Seed s = Seed{c.seed, 0}.child(i);
    const RunResult run = sample_free_boundary(model, n, c.thermo.mcmc, s.child(0), c.jobs);
    const Target target = Target::free(model, n);
    const std::vector<std::pair<std::string, GnzTestFunction>> tests = {
        {"g=1", gnz_constant()}, {"g=neighbours(" + fmt(radius) + ")", gnz_neighbour_count(radius)}};
    for (std::size_t t = 0; t < tests.size(); ++t) {
      const GnzResult r = gnz_residual(target, run.samples, tests[t].second, c.gnz_nodes, s.child(1 + t));
      rows.push_back(Row{"gibbs|" + tests[t].first, n, std::nullopt, r.residual});
      rows.push_back(Row{"gibbs|" + tests[t].first + "|point-sum", n, std::nullopt, r.leading});
      o.body.push_back("| " + fmt(n) + " | " + tests[t].first + " | " + fmt(r.residual.value) + " | " +
                       fmt(r.residual.std_error) + " | " + pm(r.leading) + " |");
      o.checks.push_back({"GNZ " + tests[t].first + " residual within 3 SE at n=" + fmt(n),
                          std::fabs(r.residual.value) <= 3 * r.residual.std_error});
      o.checks.push_back({"GNZ " + tests[t].first + " SE <= 2% of leading term at n=" + fmt(n),
                          r.residual.std_error <= 0.02 * std::fabs(r.leading.value)});
    }
  }
  write_rows(out, "gnz.csv", c, *model, rows);
}

void run_validate(const ExperimentConfig& c, Outcome& o, std::ostream& log) {
  const auto suites = run_validation(c, log);
  nlohmann::json j;
  j["config_hash"] = hex(config_hash(c));
  j["seed"] = c.seed;
  bool all = true;
  for (const auto& s : suites) {
    j["suites"][s.name] = {{"passed", s.passed}, {"failures", s.failures}, {"checks", s.checks.size()}};
    all = all && s.passed;
    o.checks.push_back({"suite " + s.name, s.passed});
    for (const auto& line : s.checks) o.body.push_back("- " + s.name + ": " + line);
    o.body.push_back("- " + s.name + ": " + fmt(std::round(s.seconds * 10) / 10) + " s");
  }
  j["passed"] = all;
  std::ofstream f(c.out / "validate.json", std::ios::binary);
  f << j.dump(2) << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKinds)
    if (k == kind) return name;
  return "?";
}

std::optional<ExperimentKind> parse_kind(const std::string& name) {
  for (const auto& [k, n] : kKinds)
    if (n == name) return k;
  return std::nullopt;
}

ModelPtr ExperimentConfig::model() const { return ModelPtr(make_model(model_id, dim, params)); }

std::vector<GalleryModel> model_gallery() {
  return {
      {"ideal-gas", "strauss", {{"z", 1.0}, {"beta", 0.0}, {"R", 0.5}}},
      {"strauss", "strauss", {{"z", 1.0}, {"beta", 1.0}, {"R", 0.5}}},
      {"hard-core", "hardcore", {{"z", 1.0}, {"delta", 0.3}}},
      {"lennard-jones", "lj-trunc", {{"z", 1.0}, {"epsilon", 0.5}, {"sigma", 0.3}, {"cutoff", 0.75}, {"core", 0.2}}},
      {"quermass-area", "quermass", {{"theta1", 0.5}, {"theta2", 0.0}, {"theta3", 0.0}, {"r", 0.5}}},
      {"quermass-perimeter", "quermass", {{"theta1", 0.0}, {"theta2", 0.3}, {"theta3", 0.0}, {"r", 0.4}}},
      {"quermass-mixed", "quermass", {{"theta1", 0.3}, {"theta2", -0.1}, {"theta3", 0.5}, {"r", 0.4}}},
  };
}

ExperimentConfig parse_config(const std::string& text, const std::string& name, const fs::path& base_dir,
                              std::optional<ExperimentKind> verb) {
  // '#' comments are accepted alongside ';' ones.
  std::string cleaned;
  {
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
      const std::string t = trim(line);
      cleaned += (!t.empty() && t[0] == '#') ? ";" + t : line;
      cleaned += "\n";
    }
  }
  pt::ptree tree;
  try {
    std::istringstream in(cleaned);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(name + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  const LineIndex index(text);
  const Reader r(tree, index, name);

  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) r.fail(section, "keys must belong to a section");
    if (section == "model") continue;
    const auto it = kKeys.find(section);
    if (it == kKeys.end()) r.fail(section, "unknown section");
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) r.fail(section + "." + key, "unknown key");
  }

  ExperimentConfig c;
  std::string kind;
  r.get("experiment.kind", kind);
  if (!kind.empty()) {
    const auto k = parse_kind(kind);
    if (!k) r.fail("experiment.kind", "unknown kind '" + kind + "'");
    c.kind = *k;
    if (verb && *verb != c.kind) r.fail("experiment.kind", "is '" + kind + "' but the command is " + to_string(*verb));
  }
  if (verb) c.kind = *verb;
  r.get("experiment.seed", c.seed);
  std::string out;
  r.get("experiment.out", out);
  if (!out.empty()) c.out = out;
  r.get("experiment.jobs", c.jobs);

  if (const auto model = tree.get_child_optional("model")) {
    for (const auto& [key, value] : *model) {
      if (key == "id") c.model_id = trim(value.data());
      else if (key == "dim") r.get("model.dim", c.dim);
      else c.params[key] = r.number("model." + key, value.data());
    }
  }

  r.get("law.poisson", c.poisson);
  r.get("law.gibbs", c.gibbs);
  r.get("law.analytic_energy", c.analytic_energy);
  r.get("windows.n", c.n_list);

  ThermoOptions& t = c.thermo;
  r.get("ti.grid", t.theta_grid);
  r.get("ti.simpson", t.simpson);
  r.get("ti.max_refinements", t.max_refinements);
  r.get("ti.max_rhat", t.max_rhat);
  r.get("estimators.poisson_draws", t.poisson_draws);
  r.get("estimators.route_tolerance", t.route_tolerance);
  McmcParams& m = t.mcmc;
  r.get("mcmc.burn_in", m.burn_in);
  r.get("mcmc.samples", m.samples);
  r.get("mcmc.thin", m.thin);
  r.get("mcmc.chains", m.chains);
  r.get("mcmc.kick_scale", m.kick_scale);
  r.get("mcmc.revalidate_every", m.revalidate_every);
  r.get("mcmc.birth_log_bias", m.birth_log_bias);

  r.get("sample.theta", c.theta);
  std::string path;
  r.get("sample.boundary_file", path);
  if (!path.empty()) c.boundary_file = fs::path(path).is_absolute() ? fs::path(path) : base_dir / path;
  path.clear();
  r.get("minkowski.input", path);
  if (!path.empty()) c.input = fs::path(path).is_absolute() ? fs::path(path) : base_dir / path;
  r.get("minkowski.radius", c.radius);
  r.get("gnz.nodes_per_axis", c.gnz_nodes);
  r.get("gnz.radius", c.gnz_radius);
  r.get("validate.suites", c.suites);
  r.get("validate.theta_zero_only", c.theta_zero_only);

  // Checks that need a line number run here; the rest in check_config.
  try {
    check_config(c);
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    r.fail(msg.substr(0, colon), msg.substr(colon + 2));
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path, std::optional<ExperimentKind> verb) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string(), path.parent_path(), verb);
}

void check_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& field, const std::string& what) { throw ConfigError(field + ": " + what); };
  if (c.jobs < 1) fail("experiment.jobs", "must be >= 1");
  const bool needs_model = c.kind != ExperimentKind::minkowski && c.kind != ExperimentKind::validate;
  if (needs_model) {
    if (c.dim < 1 || c.dim > 3) fail("model.dim", "must be 1, 2 or 3");
    try {
      (void)c.model();
    } catch (const std::invalid_argument& e) {
      // make_model names the field as "model.<key>" or "model: ...".
      std::string msg = e.what();
      std::string field = "model.id";
      if (msg.rfind("model: ", 0) == 0) {
        msg = msg.substr(7);
        for (const auto& [k, v] : c.params) {
          if (msg.find(" " + k + " ") != std::string::npos) {
            field = "model." + k;
            break;
          }
        }
      } else if (msg.rfind("model.", 0) == 0) {
        field = msg.substr(0, msg.find(' '));
      }
      fail(field, msg);
    }
  }
  for (double z : c.poisson)
    if (!(z > 0) || std::isinf(z)) fail("law.poisson", "intensities must be finite and > 0");
  for (std::size_t i = 0; i < c.n_list.size(); ++i) {
    if (!(c.n_list[i] > 0) || std::isinf(c.n_list[i])) fail("windows.n", "window sizes must be finite and > 0");
    if (i && c.n_list[i] <= c.n_list[i - 1]) fail("windows.n", "window sizes must increase");
  }
  const McmcParams& m = c.thermo.mcmc;
  if (m.samples < 1) fail("mcmc.samples", "must be >= 1");
  if (m.thin < 1) fail("mcmc.thin", "must be >= 1");
  if (m.chains < 1) fail("mcmc.chains", "must be >= 1");
  if (m.kick_scale < 0) fail("mcmc.kick_scale", "must be >= 0");
  if (m.revalidate_every < 1) fail("mcmc.revalidate_every", "must be >= 1");
  if (c.thermo.max_refinements < 0) fail("ti.max_refinements", "must be >= 0");
  if (!(c.thermo.max_rhat >= 1.0)) fail("ti.max_rhat", "must be >= 1");
  if (c.thermo.poisson_draws < 2) fail("estimators.poisson_draws", "must be >= 2");
  if (!(c.thermo.route_tolerance > 0)) fail("estimators.route_tolerance", "must be > 0");
  const auto& g = c.thermo.theta_grid;
  if (!g.empty()) {
    if (g.size() < 3 || g.front() != 0.0 || g.back() != 1.0 || !std::is_sorted(g.begin(), g.end()) ||
        std::adjacent_find(g.begin(), g.end()) != g.end())
      fail("ti.grid", "must increase strictly from 0 to 1 with at least 3 nodes");
  }
  if (!(c.theta >= 0.0 && c.theta <= 1.0)) fail("sample.theta", "must lie in [0, 1]");
  if (c.gnz_nodes < 1) fail("gnz.nodes_per_axis", "must be >= 1");
  if (c.gnz_radius < 0) fail("gnz.radius", "must be >= 0");

  auto need_n = [&](bool integer) {
    if (c.n_list.empty()) fail("windows.n", "at least one window size is required");
    if (integer)
      for (double n : c.n_list)
        if (n != std::floor(n)) fail("windows.n", "this experiment needs integer window sizes");
  };
  switch (c.kind) {
    case ExperimentKind::sample:
      need_n(false);
      if (c.n_list.size() != 1) fail("windows.n", "sample takes exactly one window size");
      if (!c.boundary_file.empty() && !fs::exists(c.boundary_file))
        fail("sample.boundary_file", "no such file " + c.boundary_file.string());
      break;
    case ExperimentKind::minkowski:
      if (c.input.empty()) fail("minkowski.input", "is required");
      if (!fs::exists(c.input)) fail("minkowski.input", "no such file " + c.input.string());
      if (!(c.radius > 0) || std::isinf(c.radius)) fail("minkowski.radius", "must be finite and > 0");
      break;
    case ExperimentKind::pressure:
      need_n(false);
      break;
    case ExperimentKind::gap:
      need_n(false);
      if (c.poisson.empty() && !c.gibbs) fail("law", "gap needs law.poisson or law.gibbs");
      break;
    case ExperimentKind::mean_energy:
      need_n(false);
      if (c.poisson.empty() && !c.gibbs) fail("law", "mean-energy needs law.poisson or law.gibbs");
      break;
    case ExperimentKind::entropy:
      if (c.gibbs) need_n(false);
      if (c.poisson.empty() && !c.gibbs) fail("law", "entropy needs law.poisson or law.gibbs");
      break;
    case ExperimentKind::boundary:
    case ExperimentKind::gnz:
      need_n(true);
      break;
    case ExperimentKind::validate: {
      static const std::set<std::string> known = {"energy",  "minkowski", "decomposition",
                                                   "poisson", "gnz",       "oracle",
                                                   "bracket"};
      for (const auto& s : c.suites)
        if (!known.count(s)) fail("validate.suites", "unknown suite '" + s + "'");
      break;
    }
  }
}

std::string canonical_text(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "[experiment]\nkind = " << to_string(c.kind) << "\nseed = " << c.seed << "\n";
  o << "[model]\nid = " << c.model_id << "\ndim = " << c.dim << "\n";
  for (const auto& [k, v] : c.params) o << k << " = " << fmt(v) << "\n";
  o << "[law]\npoisson = " << join(c.poisson) << "\ngibbs = " << (c.gibbs ? "true" : "false")
    << "\nanalytic_energy = " << (c.analytic_energy ? "true" : "false") << "\n";
  o << "[windows]\nn = " << join(c.n_list) << "\n";
  const ThermoOptions& t = c.thermo;
  o << "[ti]\ngrid = " << join(t.theta_grid) << "\nsimpson = " << (t.simpson ? "true" : "false")
    << "\nmax_refinements = " << t.max_refinements << "\nmax_rhat = " << fmt(t.max_rhat) << "\n";
  o << "[estimators]\npoisson_draws = " << t.poisson_draws << "\nroute_tolerance = " << fmt(t.route_tolerance)
    << "\n";
  const McmcParams& m = t.mcmc;
  o << "[mcmc]\nburn_in = " << m.burn_in << "\nsamples = " << m.samples << "\nthin = " << m.thin
    << "\nchains = " << m.chains << "\nkick_scale = " << fmt(m.kick_scale)
    << "\nrevalidate_every = " << m.revalidate_every << "\nbirth_log_bias = " << fmt(m.birth_log_bias) << "\n";
  o << "[sample]\ntheta = " << fmt(c.theta) << "\nboundary_file = " << c.boundary_file.generic_string() << "\n";
  o << "[minkowski]\ninput = " << c.input.generic_string() << "\nradius = " << fmt(c.radius) << "\n";
  o << "[gnz]\nnodes_per_axis = " << c.gnz_nodes << "\nradius = " << fmt(c.gnz_radius) << "\n";
  o << "[validate]\nsuites = ";
  for (std::size_t i = 0; i < c.suites.size(); ++i) o << (i ? " " : "") << c.suites[i];
  o << "\ntheta_zero_only = " << (c.theta_zero_only ? "true" : "false") << "\n";
  return o.str();
}

std::uint64_t config_hash(const ExperimentConfig& config) { return fnv1a(canonical_text(config)); }

int run_experiment(const ExperimentConfig& config, std::ostream& log) {
  try {
    check_config(config);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const auto start = std::chrono::steady_clock::now();
  auto seconds = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  std::unique_ptr<Output> out;
  Outcome outcome;
  auto finish = [&](int code, const std::string& error) {
    if (out) out->report(outcome.body, outcome.checks, seconds(), error);
    if (!error.empty()) log << error << "\n";
    return code;
  };
  try {
    out = std::make_unique<Output>(config);
    switch (config.kind) {
      case ExperimentKind::sample: run_sample(config, *out, outcome); break;
      case ExperimentKind::minkowski: run_minkowski(config, *out, outcome); break;
      case ExperimentKind::pressure: run_pressure(config, *out, outcome); break;
      case ExperimentKind::gap: run_gap(config, *out, outcome); break;
      case ExperimentKind::mean_energy: run_mean_energy(config, *out, outcome); break;
      case ExperimentKind::entropy: run_entropy(config, *out, outcome); break;
      case ExperimentKind::boundary: run_boundary(config, *out, outcome); break;
      case ExperimentKind::gnz: run_gnz(config, *out, outcome); break;
      case ExperimentKind::validate: run_validate(config, outcome, log); break;
    }
  } catch (const ConfigError& e) {
    return finish(kExitConfig, std::string("config error: ") + e.what());
  } catch (const InvariantViolation& e) {
    return finish(kExitInvariant, std::string("invariant violation: ") + e.what());
  } catch (const EstimatorError& e) {
    return finish(kExitEstimator, std::string("estimator failure: ") + e.what());
  } catch (const std::exception& e) {
    return finish(kExitEstimator, std::string("error: ") + e.what());
  }
  bool ok = true;
  for (const auto& c : outcome.checks) {
    log << (c.passed ? "PASS " : "FAIL ") << c.what << "\n";
    ok = ok && c.passed;
  }
  return finish(ok ? kExitOk : kExitInvariant, ok ? "" : "one or more checks failed");
}

}  // namespace gibbs
