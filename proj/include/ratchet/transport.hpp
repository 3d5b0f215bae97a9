#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ratchet/model.hpp"
#include "ratchet/spectral_propagator.hpp"

namespace ratchet {

// Running average momentum P(t) = (1 / (t - t0)) int_t0^t <p>(s) ds from a
// direct simulation, with a dyadic plateau test on P.
struct CurrentEstimate {
  double value = 0.0;                 // P at the final time
  std::vector<double> window_values;  // P(t0 + n_periods T / 2^k), k = K..0 (longest last)
  bool converged = false;             // |P(end) - P(end / 2)| < tol * max(|P(end)|, 0.01)
  long total_periods = 0;
  bool failed = false;
  std::string error;
};

struct TransportOptions {
  long n_periods = 4096;
  double plateau_tol = 0.05;
  // At g = 0, iterate the one-period map and a one-period momentum form built
  // from the same split steps. Same trajectory up to roundoff, and cheap enough
  // for the 10^5-10^6 periods a narrow avoided crossing needs.
  bool stroboscopic_linear = true;
};

inline constexpr long kMinTransportPeriods = 64;

CurrentEstimate running_average_momentum(const WaveFunction& initial, double t0, const ModelParams& params,
                                         const DrivingField& field, const TransportOptions& options = {});

enum class ScanAxis { theta, g, t0 };
std::string to_string(ScanAxis axis);
ScanAxis parse_scan_axis(const std::string& name);

struct ScanRow {
  std::size_t index = 0;
  double axis_value = 0.0;
  CurrentEstimate estimate;
  double wall_time = 0.0;  // seconds
};

// Fixed parameters of a scan; the scanned axis overrides theta, g or t0.
struct ScanSetup {
  ModelParams params;
  DrivingField field;
  double t0 = 0.0;
  WaveFunction initial;
  TransportOptions transport;
};

// One estimate per grid point, computed on up to `workers` threads. emit(row)
// is called in grid order as soon as every earlier row is done, so a partial
// table is always a prefix of the full one. Point failures are recorded in the
// row and the scan continues. Rows whose index is in `skip` are not computed.
std::vector<ScanRow> scan(ScanAxis axis, std::span<const double> grid, const ScanSetup& setup, int workers = 1,
                          const std::function<void(const ScanRow&)>& emit = {},
                          std::span<const std::size_t> skip = {});

// The n equally spaced initial times k T / n, k = 0..n-1.
std::vector<double> t0_grid(const DrivingField& field, int n = 16);

}  // namespace ratchet
