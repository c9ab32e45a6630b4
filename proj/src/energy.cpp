#include "gibbs/energy.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gibbs/cell_list.hpp"
#include "gibbs/minkowski.hpp"

namespace gibbs {
namespace {

double ball_volume(int dim, double r) {
  switch (dim) {
    case 1:
      return 2.0 * r;
    case 2:
      return M_PI * r * r;
    default:
      return 4.0 / 3.0 * M_PI * r * r * r;
  }
}

double lj_raw(double eps, double sigma, double r) {
  const double s6 = std::pow(sigma / r, 6);
  return 4.0 * eps * (s6 * s6 - s6);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_dim(const EnergyModel& m, const Configuration& omega) {
  if (omega.dim() != m.dim()) {
    throw std::invalid_argument("configuration dimension " + std::to_string(omega.dim()) +
                                " does not match model dimension " + std::to_string(m.dim()));
  }
}

}  // namespace

std::string EnergyModel::describe() const {
  std::string out = id() + "(";
  bool first = true;
  for (const auto& [k, v] : params()) {
    if (!first) out += ";";
    out += k + "=" + format_double(v);
    first = false;
  }
  return out + ")";
}

// ---------------------------------------------------------------------------

PairwiseModel::PairwiseModel(int dim, double activity, Potential potential)
    : dim_(dim), z_(activity), potential_(potential) {
  require(dim >= 1 && dim <= kMaxDim, "dimension must be 1, 2 or 3");
  require(std::isfinite(activity) && activity > 0.0, "activity z must be finite and > 0");
  if (const auto* s = std::get_if<Strauss>(&potential_)) {
    require(s->beta >= 0.0, "strauss beta must be >= 0 (inf allowed)");
    require(std::isfinite(s->radius) && s->radius > 0.0, "strauss R must be finite and > 0");
    range_ = s->radius;
    hard_core_ = std::isinf(s->beta);
    stability_ = 0.0;
  } else if (const auto* h = std::get_if<HardCore>(&potential_)) {
    require(std::isfinite(h->delta) && h->delta > 0.0, "hardcore delta must be finite and > 0");
    range_ = h->delta;
    hard_core_ = true;
    stability_ = 0.0;
  } else {
    const auto& lj = std::get<LennardJones>(potential_);
    require(std::isfinite(lj.epsilon) && lj.epsilon > 0.0, "lj epsilon must be finite and > 0");
    require(std::isfinite(lj.sigma) && lj.sigma > 0.0, "lj sigma must be finite and > 0");
    require(std::isfinite(lj.core) && lj.core > 0.0, "lj core must be finite and > 0");
    require(std::isfinite(lj.cutoff) && lj.cutoff > lj.core, "lj cutoff must be finite and > core");
    range_ = lj.cutoff;
    hard_core_ = true;
    lj_shift_ = lj_raw(lj.epsilon, lj.sigma, lj.cutoff);
    // Deepest value of the shifted potential on (core, cutoff].
    const double r_min = std::pow(2.0, 1.0 / 6.0) * lj.sigma;
    const double at = std::clamp(r_min, std::nextafter(lj.core, kInf), lj.cutoff);
    const double depth = std::max(0.0, -(lj_raw(lj.epsilon, lj.sigma, at) - lj_shift_));
    // Points pairwise farther apart than `core` put at most K of them
    // within the cutoff of any one point.
    const double k = std::pow(2.0 * lj.cutoff / lj.core + 1.0, dim_) - 1.0;
    stability_ = std::max(0.0, 0.5 * k * depth - z_);
  }
}

std::string PairwiseModel::id() const {
  if (std::holds_alternative<Strauss>(potential_)) return "strauss";
  if (std::holds_alternative<HardCore>(potential_)) return "hardcore";
  return "lj-trunc";
}

ParamList PairwiseModel::params() const {
  ParamList out{{"z", z_}};
  if (const auto* s = std::get_if<Strauss>(&potential_)) {
    out.emplace_back("beta", s->beta);
    out.emplace_back("R", s->radius);
  } else if (const auto* h = std::get_if<HardCore>(&potential_)) {
    out.emplace_back("delta", h->delta);
  } else {
    const auto& lj = std::get<LennardJones>(potential_);
    out.emplace_back("epsilon", lj.epsilon);
    out.emplace_back("sigma", lj.sigma);
    out.emplace_back("cutoff", lj.cutoff);
    out.emplace_back("core", lj.core);
  }
  out.emplace_back("d", dim_);
  return out;
}

bool PairwiseModel::is_ideal() const {
  const auto* s = std::get_if<Strauss>(&potential_);
  return s != nullptr && s->beta == 0.0;
}

double PairwiseModel::phi(double r) const {
  if (const auto* s = std::get_if<Strauss>(&potential_)) return r <= s->radius ? s->beta : 0.0;
  if (const auto* h = std::get_if<HardCore>(&potential_)) return r <= h->delta ? kInf : 0.0;
  const auto& lj = std::get<LennardJones>(potential_);
  if (r <= lj.core) return kInf;
  if (r > lj.cutoff) return 0.0;
  return lj_raw(lj.epsilon, lj.sigma, r) - lj_shift_;
}

double PairwiseModel::phi_integral() const {
  if (hard_core_) return kInf;
  const auto& s = std::get<Strauss>(potential_);
  return s.beta == 0.0 ? 0.0 : s.beta * ball_volume(dim_, s.radius);
}

double PairwiseModel::total_energy(const Configuration& omega) const {
  check_dim(*this, omega);
  const double n = static_cast<double>(omega.size());
  if (omega.size() < 2 || is_ideal()) return z_ * n;
  const CellList cells(omega.points(), dim_, range_);
  double pair_sum = 0.0;
  for (const auto& [i, j] : cells.pairs_within(range_)) {
    pair_sum += phi(distance(omega[i], omega[j]));
    if (std::isinf(pair_sum)) return kInf;
  }
  return z_ * n + pair_sum;
}

double PairwiseModel::conditional_energy(const Point& x, std::span<const Point> neighbours) const {
  double e = z_;
  if (is_ideal()) return e;
  for (const auto& y : neighbours) {
    const double d = distance(x, y);
    if (d > range_) continue;
    e += phi(d);
    if (std::isinf(e)) return kInf;
  }
  return e;
}

// ---------------------------------------------------------------------------

QuermassModel::QuermassModel(double theta1, double theta2, double theta3, double radius)
    : t1_(theta1), t2_(theta2), t3_(theta3), r_(radius) {
  require(std::isfinite(theta1), "quermass theta1 must be finite");
  require(std::isfinite(theta2), "quermass theta2 must be finite");
  require(std::isfinite(theta3), "quermass theta3 must be finite");
  require(std::isfinite(radius) && radius > 0.0, "quermass r must be finite and > 0");
}

ParamList QuermassModel::params() const {
  return {{"theta1", t1_}, {"theta2", t2_}, {"theta3", t3_}, {"r", r_}};
}

double QuermassModel::stability_constant() const {
  return std::fabs(t1_) * M_PI * r_ * r_ + std::fabs(t2_) * 2.0 * M_PI * r_ + 3.0 * std::fabs(t3_);
}

double QuermassModel::functional(std::span<const Point> centers) const {
  if (centers.empty() || (t1_ == 0.0 && t2_ == 0.0 && t3_ == 0.0)) return 0.0;
  const auto m = minkowski_functionals(centers, r_);
  return t1_ * m.area + t2_ * m.perimeter + t3_ * static_cast<double>(m.euler);
}

double QuermassModel::total_energy(const Configuration& omega) const {
  check_dim(*this, omega);
  return functional(omega.points());
}

double QuermassModel::conditional_energy(const Point& x, std::span<const Point> neighbours) const {
  // By additivity only discs meeting B(x, r) matter. A small slack keeps
  // near-tangent discs in; extra discs do not change the difference.
  const double reach = 2.0 * r_ * (1.0 + 1e-12);
  std::vector<Point> local;
  for (const auto& y : neighbours) {
    if (squared_distance(x, y) <= reach * reach) local.push_back(y);
  }
  const double without = functional(local);
  local.push_back(x);
  return functional(local) - without;
}

// ---------------------------------------------------------------------------

std::unique_ptr<EnergyModel> make_model(const std::string& id, int dim,
                                        const std::map<std::string, double>& params) {
  std::set<std::string> used;
  auto get = [&](const std::string& key) {
    const auto it = params.find(key);
    if (it == params.end()) throw std::invalid_argument("model." + key + " is required for " + id);
    used.insert(key);
    return it->second;
  };
  auto wrap = [&](auto&& build) -> std::unique_ptr<EnergyModel> {
    try {
      return build();
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("model: " + std::string(e.what()));
    }
  };
  std::unique_ptr<EnergyModel> model;
  if (id == "strauss") {
    const double z = get("z"), beta = get("beta"), r = get("R");
    model = wrap([&] { return std::make_unique<PairwiseModel>(dim, z, Strauss{beta, r}); });
  } else if (id == "hardcore") {
    const double z = get("z"), delta = get("delta");
    model = wrap([&] { return std::make_unique<PairwiseModel>(dim, z, HardCore{delta}); });
  } else if (id == "lj-trunc") {
    const double z = get("z");
    const LennardJones lj{get("epsilon"), get("sigma"), get("cutoff"), get("core")};
    model = wrap([&] { return std::make_unique<PairwiseModel>(dim, z, lj); });
  } else if (id == "quermass") {
    if (dim != 2) throw std::invalid_argument("model: quermass requires dimension 2");
    const double t1 = get("theta1"), t2 = get("theta2"), t3 = get("theta3"), r = get("r");
    model = wrap([&] { return std::make_unique<QuermassModel>(t1, t2, t3, r); });
  } else {
    throw std::invalid_argument("model.id: unknown model '" + id +
                                "' (expected strauss, hardcore, lj-trunc or quermass)");
  }
  for (const auto& [k, v] : params) {
    if (!used.count(k)) throw std::invalid_argument("model." + k + " is not a parameter of " + id);
  }
  return model;
}

double insertion_energy(const EnergyModel& model, const Configuration& omega, const Point& x) {
  check_dim(model, omega);
  if (omega.contains(x)) throw std::invalid_argument("insertion_energy: point already present");
  const double r2 = model.range() * model.range();
  std::vector<Point> near;
  for (const auto& y : omega) {
    if (squared_distance(x, y) <= r2) near.push_back(y);
  }
  return model.conditional_energy(x, near);
}

double local_energy(const EnergyModel& model, const Configuration& halo, const Window& window) {
  check_dim(model, halo);
  const Configuration inner = restrict_closed(halo, window.dilate(model.range()));
  std::vector<Point> outside;
  for (const auto& p : inner) {
    if (!window.contains(p)) outside.push_back(p);
  }
  const double all = model.total_energy(inner);
  const double ext = model.total_energy(Configuration(inner.dim(), std::move(outside)));
  if (std::isinf(all) && std::isinf(ext)) return 0.0;
  return all - ext;
}

double boundary_term(const EnergyModel& model, const Configuration& halo, int n) {
  const Window w = Window::cube(n, model.dim());
  const double local = local_energy(model, halo, w);
  const double inside = model.total_energy(restrict(halo, w));
  if (std::isinf(local) && std::isinf(inside)) return 0.0;
  return local - inside;
}

double cube_energy_contribution(const QuermassModel& model, const Configuration& halo,
                                std::array<int, 2> k) {
  const Window box(2, Point(k[0], k[1]), Point(k[0] + 1.0, k[1] + 1.0));
  const auto c = clipped_functionals(halo.points(), model.disc_radius(), box);
  return model.theta1() * c.area + model.theta2() * c.arc_length +
         model.theta3() * static_cast<double>(c.euler - c.n_cc_double_edge);
}

}  // namespace gibbs
