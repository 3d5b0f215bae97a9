#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratchet/dimer.hpp"
#include "ratchet/husimi.hpp"
#include "ratchet/model.hpp"
#include "ratchet/transport.hpp"

namespace ratchet {

// Every problem found while reading a config, one "key: message" per entry.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

// A list of values, an inclusive linspace {start, stop, count}, or {periodic: n}
// meaning k T / n for k < n.
struct GridSpec {
  std::vector<double> values;
  std::optional<double> start, stop;
  int count = 0;
  int periodic = 0;

  std::vector<double> resolve(double period) const;
};

// Picks a linear Floquet state: either a band index into the sorted spectrum,
// or by kind among states within `window` of `near_quasienergy` (chaotic_layer
// = largest weight on |0>, transporting = largest <p>).
struct StateSelector {
  std::optional<int> band;
  std::string kind;
  double near_quasienergy = 0.0;
  double window = 0.02;
};

struct SpectrumSection {
  GridSpec theta_grid;
  double t0 = 0.0;
  bool dump_states = false;
};

struct ContinueSection {
  double theta = -1.6;
  double t0 = 0.0;
  StateSelector seed;
  std::optional<StateSelector> partner;
  double g_max = 0.006;
  double dg = 1e-4;
};

struct ScanSection {
  std::string axis = "theta";
  GridSpec grid;
  double t0 = 0.0;  // initial time when t0 is not the scanned axis
  int initial_n = 0;
  long n_periods = 4096;
  double plateau_tol = 0.05;
};

struct DimerSection {
  DimerParams params;
  double g_max = 4.0;
  double dg = 0.05;
  double kick = 1e-3;
};

struct RunConfig {
  ModelParams model;
  DrivingField field;
  SpectrumSection floquet_spectrum;
  ContinueSection continuation;  // JSON key "continue"
  ScanSection current_scan;
  DimerSection dimer;
  HusimiSpec husimi;
  ClassificationThresholds classification;
};

// Parses and validates the whole document; throws ConfigError listing every
// offending key, unknown keys included.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
// Canonical JSON of the resolved config (defaults filled in, sorted keys).
std::string resolved_config_json(const RunConfig& config);

}  // namespace ratchet
