#include "ratchet/transport.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>

#include "ratchet/parallel.hpp"

namespace ratchet {

namespace {

// Dyadic checkpoints n_periods / 2^k in periods, ascending, at most 13 of them.
std::vector<long> dyadic_checkpoints(long n_periods) {
  std::vector<long> out;
  for (long periods = n_periods; out.size() < 13; periods /= 2) {
    out.push_back(periods);
    if (periods % 2 != 0) break;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

void finish(CurrentEstimate& est, const TransportOptions& options) {
  est.value = est.window_values.back();
  if (est.window_values.size() >= 2) {
    const double half = est.window_values[est.window_values.size() - 2];
    est.converged = std::abs(est.value - half) < options.plateau_tol * std::max(std::abs(est.value), 0.01);
  }
}

void fail(CurrentEstimate& est, const std::string& what) {
  est.failed = true;
  est.error = what;
  est.value = std::numeric_limits<double>::quiet_NaN();
  est.window_values.clear();
}

// Every step of the trajectory, trapezoid in time.
void stepwise(CurrentEstimate& est, const WaveFunction& initial, double t0, const ModelParams& params,
              const DrivingField& field, const std::vector<long>& checkpoints) {
  SplitStepPropagator prop(params, field);
  const long steps_per_period = prop.steps_per_period();
  double integral = 0.0;  // in units of dt
  double previous = 0.0;
  std::size_t next = 0;
  Eigen::VectorXcd c = initial.coeffs();
  prop.advance_sampled(c, t0, checkpoints.back() * steps_per_period, [&](long k, const Eigen::VectorXcd& cur) {
    const double p = mean_momentum(cur, params.mu);
    if (k > 0) integral += 0.5 * (previous + p);
    previous = p;
    if (next < checkpoints.size() && k == checkpoints[next] * steps_per_period) {
      est.window_values.push_back(integral / static_cast<double>(k));
      ++next;
    }
  });
}

// Linear case: the same split-step trajectory sampled period by period. With
// C_k the step-k propagator of one period, U = C_S and the trapezoid sum over a
// period starting from psi is psi^dag M psi, M = sum_k w_k C_k^dag p C_k.
void stroboscopic(CurrentEstimate& est, const WaveFunction& initial, double t0, const ModelParams& params,
                  const DrivingField& field, const std::vector<long>& checkpoints) {
  SplitStepPropagator prop(params, field);
  const int d = params.dim();
  const long steps = prop.steps_per_period();
  Eigen::VectorXd p(d);
  for (int i = 0; i < d; ++i) p[i] = params.mu * (i - params.n_max);
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(d, d);
  Eigen::MatrixXcd m = 0.5 * p.cast<cplx>().asDiagonal().toDenseMatrix();
  for (long k = 0; k < steps; ++k) {
    prop.step_columns(u, t0 + static_cast<double>(k) * prop.dt());
    m += (k + 1 < steps ? 1.0 : 0.5) * (u.adjoint() * p.asDiagonal() * u);
  }
  if (!std::isfinite(m.squaredNorm())) throw PropagationError("non-finite one-period propagator");

  double integral = 0.0;
  std::size_t next = 0;
  Eigen::VectorXcd c = initial.coeffs(), tmp(d);
  for (long n = 1; n <= checkpoints.back(); ++n) {
    tmp.noalias() = m * c;
    integral += c.dot(tmp).real();
    tmp.noalias() = u * c;
    c.swap(tmp);
    if (n == checkpoints[next]) {
      if (!std::isfinite(c.squaredNorm())) throw PropagationError("non-finite state in stroboscopic propagation");
      est.window_values.push_back(integral / static_cast<double>(n * steps));
      ++next;
    }
  }
}

}  // namespace

CurrentEstimate running_average_momentum(const WaveFunction& initial, double t0, const ModelParams& params,
                                         const DrivingField& field, const TransportOptions& options) {
  if (options.n_periods < kMinTransportPeriods) throw std::invalid_argument("running average needs at least 64 periods");
  if (initial.n_max() != params.n_max) throw std::invalid_argument("initial state cutoff differs from params.n_max");
  if (std::abs(initial.norm2() - 1.0) > 1e-8) throw std::invalid_argument("initial state must be normalized");

  CurrentEstimate est;
  est.total_periods = options.n_periods;
  const std::vector<long> checkpoints = dyadic_checkpoints(options.n_periods);
  try {
    if (params.g == 0.0 && options.stroboscopic_linear) {
      stroboscopic(est, initial, t0, params, field, checkpoints);
    } else {
      stepwise(est, initial, t0, params, field, checkpoints);
    }
  } catch (const PropagationError& e) {
    fail(est, e.what());
    return est;
  }
  finish(est, options);
  return est;
}

std::string to_string(ScanAxis axis) {
  switch (axis) {
    case ScanAxis::theta: return "theta";
    case ScanAxis::g: return "g";
    case ScanAxis::t0: return "t0";
  }
  return "unknown";
}

ScanAxis parse_scan_axis(const std::string& name) {
  if (name == "theta") return ScanAxis::theta;
  if (name == "g") return ScanAxis::g;
  if (name == "t0") return ScanAxis::t0;
  throw std::invalid_argument("unknown scan axis '" + name + "' (expected theta, g or t0)");
}

std::vector<ScanRow> scan(ScanAxis axis, std::span<const double> grid, const ScanSetup& setup, int workers,
                          const std::function<void(const ScanRow&)>& emit, std::span<const std::size_t> skip) {
  if (grid.empty()) throw std::invalid_argument("scan grid is empty");
  std::vector<ScanRow> rows(grid.size());
  std::vector<bool> done(grid.size(), false);
  std::mutex mutex;
  std::size_t emitted = 0;

  auto publish = [&](std::size_t index) {
    std::lock_guard lock(mutex);
    done[index] = true;
    while (emitted < rows.size() && done[emitted]) {
      if (emit && std::find(skip.begin(), skip.end(), emitted) == skip.end()) emit(rows[emitted]);
      ++emitted;
    }
  };

  parallel_for(grid.size(), workers, [&](std::size_t i, int) {
    ScanRow& row = rows[i];
    row.index = i;
    row.axis_value = grid[i];
    if (std::find(skip.begin(), skip.end(), i) != skip.end()) {
      publish(i);
      return;
    }
    const auto start = std::chrono::steady_clock::now();
    ModelParams params = setup.params;
    DrivingField field = setup.field;
    double t0 = setup.t0;
    switch (axis) {
      case ScanAxis::theta: field.theta = grid[i]; break;
      case ScanAxis::g: params.g = grid[i]; break;
      case ScanAxis::t0: t0 = grid[i]; break;
    }
    try {
      row.estimate = running_average_momentum(setup.initial, t0, params, field, setup.transport);
    } catch (const std::exception& e) {
      row.estimate.failed = true;
      row.estimate.error = e.what();
      row.estimate.value = std::numeric_limits<double>::quiet_NaN();
      row.estimate.total_periods = setup.transport.n_periods;
    }
    row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    publish(i);
  });
  return rows;
}

std::vector<double> t0_grid(const DrivingField& field, int n) {
  if (n < 1) throw std::invalid_argument("t0 grid needs at least one point");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = field.period() * k / n;
  return out;
}

}  // namespace ratchet
