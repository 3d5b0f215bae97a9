#pragma once

#include <complex>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ratchet/model.hpp"

namespace ratchet {

using cplx = std::complex<double>;

// Plane-wave coefficients c_n, n = -n_max..n_max, of a state on the ring
// [0, 2pi): psi(x) = sum_n c_n e^{inx} / sqrt(2 pi). Index i holds n = i - n_max.
class WaveFunction {
 public:
  WaveFunction() = default;
  explicit WaveFunction(int n_max);
  WaveFunction(int n_max, Eigen::VectorXcd coeffs);

  int n_max() const { return n_max_; }
  int dim() const { return 2 * n_max_ + 1; }
  const Eigen::VectorXcd& coeffs() const { return coeffs_; }
  cplx coeff(int n) const { return coeffs_[n + n_max_]; }

  double norm2() const { return coeffs_.squaredNorm(); }
  WaveFunction normalized() const;
  // <this|other>
  cplx overlap(const WaveFunction& other) const;

  // psi(x_j) on x_j = 2 pi j / m; m must be >= dim().
  std::vector<cplx> to_position(int m) const;
  static WaveFunction from_position(const std::vector<cplx>& values, int n_max);

 private:
  int n_max_ = 0;
  Eigen::VectorXcd coeffs_;
};

struct PropagationLog {
  std::vector<double> times;
  std::vector<double> norms;
  std::vector<double> momenta;
};

class PropagationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// |n>, the normalized plane wave e^{inx}/sqrt(2 pi).
WaveFunction plane_wave_state(int n, int n_max);

// sum_n mu n |c_n|^2
double mean_momentum(const WaveFunction& psi, double mu);
double mean_momentum(const Eigen::VectorXcd& coeffs, double mu);

// Position grid used for the nonlinear term: 4 n_max + 1 rounded up to a power of two.
int dealiased_grid_size(int n_max);

// Strang split-step integrator for
//   i mu psi_t = [ (p - A(t))^2 / 2 + v0 cos x + g |psi|^2 ] psi
// in the truncated plane-wave basis. One step from t is
//   N(dt/2) V(dt/2) K(t + dt/2) V(dt/2) N(dt/2)
// where V is the exact exponential of the lattice term projected on the basis,
// N the exponential of the projected potential P g|psi|^2 P (|psi|^2 frozen at
// the start of the substep, products formed on the dealiased grid), and K
// the diagonal kinetic phase exp[-i dt (mu n^2 / 2 - n A)]. The A^2 term is a
// global phase and is omitted. advance() merges the adjacent N half-steps of
// consecutive steps.
//
// Holds FFT plans and scratch buffers: one instance per thread.
class SplitStepPropagator {
 public:
  SplitStepPropagator(const ModelParams& params, const DrivingField& field);
  ~SplitStepPropagator();
  SplitStepPropagator(const SplitStepPropagator&) = delete;
  SplitStepPropagator& operator=(const SplitStepPropagator&) = delete;
  SplitStepPropagator(SplitStepPropagator&&) noexcept;
  SplitStepPropagator& operator=(SplitStepPropagator&&) noexcept;

  const ModelParams& params() const { return params_; }
  const DrivingField& field() const { return field_; }
  double dt() const { return dt_; }
  int steps_per_period() const { return steps_per_period_; }
  int dim() const { return params_.dim(); }

  // Advances coeffs in place by one step starting at time t.
  void step(Eigen::VectorXcd& coeffs, double t);
  // Advances n_steps steps starting at t_start; a finite-check runs every 256 steps.
  void advance(Eigen::VectorXcd& coeffs, double t_start, long n_steps);
  // Linear (g = 0) propagation of every column of a matrix at once.
  void advance_columns(Eigen::MatrixXcd& columns, double t_start, long n_steps) const;
  // One linear Strang step of every column, ending on the step boundary.
  void step_columns(Eigen::MatrixXcd& columns, double t) const;

  // Stepwise callback form: visit(k, t, coeffs) is called before the first step
  // and after every step (k = 0..n_steps).
  // Like advance() with the adjacent nonlinear half-steps merged; sample(k, c)
  // sees the state just before the merged substep k (k = 0..n_steps, the last
  // one after the final half-step). The nonlinear substep conserves <p> to
  // second order in its length, so momentum averages over these samples match
  // step-boundary sampling.
  template <typename Sampler>
  void advance_sampled(Eigen::VectorXcd& coeffs, double t_start, long n_steps, Sampler&& sample) {
    if (n_steps <= 0) {
      sample(0L, static_cast<const Eigen::VectorXcd&>(coeffs));
      return;
    }
    sample(0L, static_cast<const Eigen::VectorXcd&>(coeffs));
    nonlinear_phase(coeffs, 0.5 * dt_);
    Eigen::VectorXcd tmp(coeffs.size());
    for (long k = 0; k < n_steps; ++k) {
      const double t = t_start + static_cast<double>(k) * dt_;
      tmp.noalias() = lattice_half_ * coeffs;
      kinetic(tmp, t + 0.5 * dt_);
      coeffs.noalias() = lattice_half_ * tmp;
      if (k + 1 < n_steps) {
        sample(k + 1, static_cast<const Eigen::VectorXcd&>(coeffs));
        nonlinear_phase(coeffs, dt_);
      } else {
        nonlinear_phase(coeffs, 0.5 * dt_);
        sample(k + 1, static_cast<const Eigen::VectorXcd&>(coeffs));
      }
      if ((k + 1) % kFiniteCheckInterval == 0) check_finite(coeffs, t + dt_);
    }
    check_finite(coeffs, t_start + static_cast<double>(n_steps) * dt_);
  }

  template <typename Visitor>
  void advance_visit(Eigen::VectorXcd& coeffs, double t_start, long n_steps, Visitor&& visit) {
    visit(0L, t_start, static_cast<const Eigen::VectorXcd&>(coeffs));
    for (long k = 0; k < n_steps; ++k) {
      const double t = t_start + static_cast<double>(k) * dt_;
      step(coeffs, t);
      if ((k + 1) % kFiniteCheckInterval == 0) check_finite(coeffs, t + dt_);
      visit(k + 1, t_start + static_cast<double>(k + 1) * dt_,
            static_cast<const Eigen::VectorXcd&>(coeffs));
    }
    check_finite(coeffs, t_start + static_cast<double>(n_steps) * dt_);
  }

  static constexpr int kFiniteCheckInterval = 256;

 private:
  void kinetic(Eigen::VectorXcd& coeffs, double t_mid) const;
  void nonlinear_phase(Eigen::VectorXcd& coeffs, double duration);
  static void check_finite(const Eigen::VectorXcd& coeffs, double t);

  struct FftPlans;

  ModelParams params_;
  DrivingField field_;
  double dt_ = 0.0;
  int steps_per_period_ = 0;
  Eigen::MatrixXcd lattice_half_;  // exp(-i dt/2 v0 P cos x P / mu)
  Eigen::MatrixXcd lattice_full_;  // lattice_half_^2
  Eigen::VectorXd kinetic_free_;   // mu n^2 / 2
  std::unique_ptr<FftPlans> fft_;
};

// One Strang step of psi from time t.
WaveFunction step(const WaveFunction& psi, double t, const ModelParams& params,
                  const DrivingField& field);

struct Propagation {
  WaveFunction state;
  PropagationLog log;
};

// Propagates from t_start to t_end; the log samples every sample_every steps
// (and always includes both endpoints).
Propagation propagate(const WaveFunction& psi, double t_start, double t_end,
                      const ModelParams& params, const DrivingField& field, int sample_every = 1);

// Serialized state: header (n_max, mu, t) then interleaved re/im coefficients.
struct StateRecord {
  WaveFunction state;
  double mu = 0.0;
  double t = 0.0;
};

void write_state_binary(std::ostream& out, const StateRecord& record);
StateRecord read_state_binary(std::istream& in);
void write_state_text(std::ostream& out, const StateRecord& record);
StateRecord read_state_text(std::istream& in);
// Dispatches on extension: ".txt" is text, anything else binary.
void save_state(const std::string& path, const StateRecord& record);
StateRecord load_state(const std::string& path);

}  // namespace ratchet
