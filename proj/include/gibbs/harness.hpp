#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gibbs/thermo.hpp"

namespace gibbs {

/// Invalid configuration; the message names the file, line and field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitEstimator = 3;
inline constexpr int kExitInvariant = 4;

enum class ExperimentKind { sample, minkowski, pressure, gap, mean_energy, entropy, boundary, gnz, validate };

std::string to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_kind(const std::string& name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::validate;
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";
  int jobs = 1;

  std::string model_id = "strauss";
  int dim = 2;
  std::map<std::string, double> params;

  /// Poisson intensities to evaluate, and whether the Gibbs law Q_n is
  /// evaluated too.
  std::vector<double> poisson;
  bool gibbs = false;
  /// Use the closed-form mean energy of Poisson laws where one exists.
  bool analytic_energy = false;

  std::vector<double> n_list;
  ThermoOptions thermo;

  // sample
  double theta = 1.0;
  std::filesystem::path boundary_file;  ///< empty: free boundary

  // minkowski
  std::filesystem::path input;
  double radius = 0.0;

  // gnz
  int gnz_nodes = 8;
  double gnz_radius = 0.0;  ///< 0 selects the model range

  // validate
  std::vector<std::string> suites;
  bool theta_zero_only = false;

  ModelPtr model() const;
};

/// Parses an INI file (grammar in docs/config.md). Relative paths inside the
/// file resolve against its directory. `verb` sets the kind; a different
/// experiment.kind in the file is an error. Throws ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path, std::optional<ExperimentKind> verb = {});
ExperimentConfig parse_config(const std::string& text, const std::string& name,
                              const std::filesystem::path& base_dir = {},
                              std::optional<ExperimentKind> verb = {});

/// Range and compatibility checks beyond parsing. Throws ConfigError.
void check_config(const ExperimentConfig& config);

/// Canonical INI text of everything that determines output values; parses
/// back to an equivalent config. Excludes `out` and `jobs`.
std::string canonical_text(const ExperimentConfig& config);
/// FNV-1a of canonical_text.
std::uint64_t config_hash(const ExperimentConfig& config);

/// Runs one experiment, writing CSVs and report.md under config.out.
/// Returns an exit code; messages go to `log`. Invalid configs write nothing.
int run_experiment(const ExperimentConfig& config, std::ostream& log);

struct SuiteResult {
  std::string name;
  bool passed = true;
  std::vector<std::string> failures;
  std::vector<std::string> checks;  ///< one line per check, PASS or FAIL
  double seconds = 0.0;
};

/// The validation suites: energy, minkowski, decomposition, poisson, gnz,
/// oracle, bracket.
/// `suites` empty selects all (only the theta = 0 ones if theta_zero_only).
std::vector<SuiteResult> run_validation(const ExperimentConfig& config, std::ostream& log);

/// Gallery used by the bracket suite and the shipped configs.
struct GalleryModel {
  std::string name;
  std::string id;
  std::map<std::string, double> params;
};
std::vector<GalleryModel> model_gallery();

}  // namespace gibbs
