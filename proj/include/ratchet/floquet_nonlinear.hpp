#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ratchet/model.hpp"
#include "ratchet/spectral_propagator.hpp"

namespace ratchet {

// ---------------------------------------------------------------------------
// Generic periodic-orbit machinery shared by the lattice and the dimer.

// One-period map psi -> U_g psi at nonlinearity g. Instances need not be thread safe.
using ParamPeriodMap = std::function<Eigen::VectorXcd(const Eigen::VectorXcd& psi, double g)>;
// Produces independent map instances, one per worker thread.
using PeriodMapFactory = std::function<ParamPeriodMap()>;

struct NewtonOptions {
  double tol = 1e-9;          // per-component bound on the residual
  int max_iterations = 50;
  double fd_step = 1e-7;      // forward-difference step per component
  double target_norm2 = 1.0;
  int workers = 1;            // parallel Jacobian columns
  // Reject Jacobians whose singular values beyond the gauge direction are
  // this small relative to the largest.
  double rank_tolerance = 1e-13;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

class RankDeficiencyError : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};

struct OrbitSolution {
  Eigen::VectorXcd state;
  double quasienergy = 0.0;
  double g = 0.0;
  double residual = 0.0;  // max-norm of the fixed-point defect and norm constraint
  int iterations = 0;
  double sigma_min = 0.0;  // smallest relative singular value of the last Jacobian
};

// Solves exp(i eps) U_g psi = psi with |psi|^2 = target at fixed g by damped
// Gauss-Newton. The global phase is fixed by holding the largest component of
// the seed real and nonnegative.
OrbitSolution solve_orbit(const PeriodMapFactory& factory, const Eigen::VectorXcd& seed, double eps_seed, double g,
                          const NewtonOptions& options = {});

// Same system with g free plus the pseudo-arclength condition
//   <(psi, eps, g) - predictor, tangent> = 0.
// Tangent and predictor components are (Re psi, Im psi, eps, g).
OrbitSolution solve_orbit_arclength(const PeriodMapFactory& factory, const Eigen::VectorXd& predictor,
                                    const Eigen::VectorXd& tangent, const NewtonOptions& options = {});

// (Re psi, Im psi, eps, g) packing used by the arclength solver.
Eigen::VectorXd pack_point(const Eigen::VectorXcd& psi, double eps, double g);

enum class Termination { max_g_reached, fold_detected, convergence_failure };
std::string to_string(Termination t);

struct ContinuationOptions {
  NewtonOptions newton;
  int max_halvings = 6;       // dg refined down to dg / 64
  double overlap_floor = 0.5; // consecutive points must overlap more than this
  bool check_fold = true;     // try to pass a failure point by pseudo-arclength
  int max_fold_steps = 40;    // arclength steps taken past the turning point
};

struct OrbitBranch {
  std::vector<OrbitSolution> points;  // increasing g
  Termination terminated_by = Termination::max_g_reached;
  std::optional<double> fold_g;
  // Solutions on the continuation beyond the turning point (g decreasing).
  std::vector<OrbitSolution> beyond_fold;
  std::string diagnostic;
};

// Pseudo-arclength path in (psi, eps, g) continuing the direction a -> b with a
// fixed step ds in packed coordinates. Returns the new solutions in order and
// stops after the first solution for which stop() is true, after max_steps, or
// at a Newton failure.
std::vector<OrbitSolution> trace_arclength(const PeriodMapFactory& factory, const OrbitSolution& a,
                                           const OrbitSolution& b, double ds, int max_steps,
                                           const std::function<bool(const OrbitSolution&)>& stop,
                                           const NewtonOptions& options = {});

OrbitBranch continue_orbit(const PeriodMapFactory& factory, const OrbitSolution& start, double g_max, double dg,
                           const ContinuationOptions& options = {});

// ---------------------------------------------------------------------------
// Nonlinear Floquet states of the driven lattice.

struct NonlinearFloquetState {
  WaveFunction state;  // at t = t0
  double quasienergy = 0.0;
  double g = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

struct Branch {
  std::vector<NonlinearFloquetState> points;
  std::vector<double> momenta;  // period-averaged <p> per point
  Termination terminated_by = Termination::max_g_reached;
  std::optional<double> fold_g;
  std::vector<NonlinearFloquetState> beyond_fold;
  std::vector<double> beyond_fold_momenta;
  std::string diagnostic;
};

// One-period nonlinear evolution from t0 with params.g active.
WaveFunction period_map(const WaveFunction& psi, const ModelParams& params, const DrivingField& field, double t0);

// Y = (Re c, Im c, eps) with 2D + 1 entries. Returns the fixed-point defect
// exp(i eps) U psi - psi (real parts, then imaginary parts) followed by the norm
// change |U psi|^2 - |psi|^2. Newton replaces that last row by |psi|^2 - 1.
Eigen::VectorXd residual(const Eigen::VectorXd& y, const ModelParams& params, const DrivingField& field, double t0);

PeriodMapFactory lattice_map_factory(const ModelParams& params, const DrivingField& field, double t0);

NonlinearFloquetState newton_solve(const WaveFunction& seed, double eps_seed, const ModelParams& params,
                                   const DrivingField& field, double t0, const NewtonOptions& options = {});

Branch continue_in_g(const NonlinearFloquetState& start, double g_max, double dg, const ModelParams& params,
                     const DrivingField& field, double t0, const ContinuationOptions& options = {});

// Period-averaged <p> of a (nonlinear) state with params.g active.
double period_mean_momentum(const WaveFunction& psi, const ModelParams& params, const DrivingField& field, double t0);

// ---------------------------------------------------------------------------
// Quasienergy estimates from orbit integrals.

// States along one period, samples[k] at t0 + k T / (samples.size() - 1).
struct Orbit {
  std::vector<WaveFunction> samples;
  double period = 0.0;
};

inline constexpr int kOrbitSamples = 128;

// Propagates psi over one period with params.g active, sampling n_intervals + 1
// states. n_intervals must divide the steps per period.
Orbit sample_orbit(const WaveFunction& psi, const ModelParams& params, const DrivingField& field, double t0,
                   int n_intervals = kOrbitSamples);

// int_0^{2 pi} |psi|^4 dx, exact for the band-limited state.
double quartic_density_integral(const WaveFunction& psi);

// int_0^T dt int |phi|^4 dx, trapezoidal in t.
double orbit_quartic_integral(const Orbit& orbit);

// eps~ + (g / mu) int_0^T dt int |phi|^4 dx
double quasienergy_perturbative(const Orbit& orbit, double g, double mu, double base_eps);

struct TwoStateWeights {
  double a2 = 0.0;       // |<phi1|phi>|^2
  double b2 = 0.0;       // |<phi2|phi>|^2
  double outside = 0.0;  // 1 - a2 - b2
};

TwoStateWeights project_two_state(const WaveFunction& phi, const WaveFunction& phi1_lin, const WaveFunction& phi2_lin);

// |a|^2 eps1 + |b|^2 eps2 + (g / mu) int int |phi|^4, with eps2 taken on the
// branch nearest eps1. The weights are renormalized to the two-state subspace.
double quasienergy_two_state(const TwoStateWeights& weights, double eps1, double eps2, const Orbit& orbit, double g,
                             double mu);

class DegeneratePairError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// g* = mu (eps2 - eps1) / (I1 - I2), I = int_0^T int |phi~|^4.
double critical_g(const Orbit& phi1_lin, const Orbit& phi2_lin, double eps1, double eps2, double mu);

}  // namespace ratchet
