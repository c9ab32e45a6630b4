#pragma once

#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gibbs/configuration.hpp"
#include "gibbs/window.hpp"

namespace gibbs {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using ParamList = std::vector<std::pair<std::string, double>>;

/// A finite-range, stationary, hereditary, stable energy H on finite
/// configurations, with values in R u {+inf}.
class EnergyModel {
 public:
  virtual ~EnergyModel() = default;

  /// Stable identifier: strauss, hardcore, lj-trunc or quermass.
  virtual std::string id() const = 0;
  virtual ParamList params() const = 0;
  virtual int dim() const = 0;
  /// Interaction range R: points farther than R apart never interact.
  virtual double range() const = 0;
  /// A with H(omega) >= -A N(omega) for every omega.
  virtual double stability_constant() const = 0;
  /// Whether H can take the value +inf.
  virtual bool hard_core() const = 0;

  /// H(omega). Throws std::invalid_argument on a dimension mismatch.
  virtual double total_energy(const Configuration& omega) const = 0;

  /// h(x | omega) = H(omega u x) - H(omega). `neighbours` must contain every
  /// point of omega within range() of x and must not contain x; points
  /// farther away are ignored.
  virtual double conditional_energy(const Point& x, std::span<const Point> neighbours) const = 0;

  /// "id(k=v,...)" with `%.17g` values.
  std::string describe() const;
};

/// Pair potentials with compact support.
struct Strauss {
  double beta;  ///< >= 0, may be +inf (hard core at R)
  double radius;
};
struct HardCore {
  double delta;
};
/// 4 eps [(sigma/r)^12 - (sigma/r)^6] shifted to vanish at the cutoff, with
/// a hard core below `core`.
struct LennardJones {
  double epsilon;
  double sigma;
  double cutoff;
  double core;
};
using Potential = std::variant<Strauss, HardCore, LennardJones>;

/// H(omega) = z N(omega) + sum over pairs {x, y} of phi(|x - y|).
class PairwiseModel final : public EnergyModel {
 public:
  PairwiseModel(int dim, double activity, Potential potential);

  std::string id() const override;
  ParamList params() const override;
  int dim() const override { return dim_; }
  double range() const override { return range_; }
  double stability_constant() const override { return stability_; }
  bool hard_core() const override { return hard_core_; }
  double total_energy(const Configuration& omega) const override;
  double conditional_energy(const Point& x, std::span<const Point> neighbours) const override;

  double activity() const { return z_; }
  const Potential& potential() const { return potential_; }
  /// phi(r); zero beyond the range, +inf inside a hard core.
  double phi(double r) const;
  /// Integral of phi(|u|) over R^d; +inf with a hard core.
  double phi_integral() const;
  /// True when phi vanishes identically (the ideal gas H = zN).
  bool is_ideal() const;

 private:
  int dim_;
  double z_;
  Potential potential_;
  double range_ = 0.0;
  double stability_ = 0.0;
  bool hard_core_ = false;
  double lj_shift_ = 0.0;
};

/// H(omega) = t1 Area(L) + t2 Perimeter(L) + t3 Euler(L), L the union of
/// radius-r discs centred at omega. Planar only.
class QuermassModel final : public EnergyModel {
 public:
  QuermassModel(double theta1, double theta2, double theta3, double radius);

  std::string id() const override { return "quermass"; }
  ParamList params() const override;
  int dim() const override { return 2; }
  double range() const override { return 2.0 * r_; }
  double stability_constant() const override;
  bool hard_core() const override { return false; }
  double total_energy(const Configuration& omega) const override;
  double conditional_energy(const Point& x, std::span<const Point> neighbours) const override;

  double theta1() const { return t1_; }
  double theta2() const { return t2_; }
  double theta3() const { return t3_; }
  double disc_radius() const { return r_; }

 private:
  double functional(std::span<const Point> centers) const;

  double t1_, t2_, t3_, r_;
};

/// Builds a model from an identifier and named parameters. Throws
/// std::invalid_argument naming the offending parameter.
std::unique_ptr<EnergyModel> make_model(const std::string& id, int dim,
                                        const std::map<std::string, double>& params);

/// h(x | omega) for x not in omega. Throws std::invalid_argument if x is
/// already a point of omega.
double insertion_energy(const EnergyModel& model, const Configuration& omega, const Point& x);

/// H_Lambda(omega) = H(omega_{Lambda'}) - H(omega_{Lambda' \ Lambda}), with
/// Lambda' the window dilated by the range, and inf - inf = 0. `halo` must
/// hold every point of omega within the range of the window.
double local_energy(const EnergyModel& model, const Configuration& halo, const Window& window);

/// H_{Lambda_n}(omega) - H(omega_{Lambda_n}).
double boundary_term(const EnergyModel& model, const Configuration& halo, int n);

/// The share of cube C_k = k + [0,1]^2 in the grid decomposition of the
/// Quermass energy: t1 Area(L n C) + t2 [Perimeter(L n C) - Length(L n dC)]
/// + t3 [Euler(L n C) - components of L on the lower-left double edge].
double cube_energy_contribution(const QuermassModel& model, const Configuration& halo,
                                std::array<int, 2> k);

}  // namespace gibbs
