#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ratchet/floquet_nonlinear.hpp"
#include "ratchet/model.hpp"

namespace ratchet {

// Driven two-mode model
//   i mu psi1' = C psi2 + g N1 psi1 + f(t) psi1
//   i mu psi2' = C psi1 + g N2 psi2 - f(t) psi2
// with f(t) = f1 sin(omega t) + f2 sin(2 omega t + theta).
struct DimerParams {
  double c = 1.0;
  double mu = 1.0;
  double f1 = 1.0;
  double f2 = 1.0;
  double omega = kTwoPi;
  double theta = 0.0;
  int steps_per_period = 2048;

  double period() const { return kTwoPi / omega; }
  double drive(double t) const;
  void validate() const;
};

struct DimerState {
  std::complex<double> psi1;
  std::complex<double> psi2;

  double n1() const { return std::norm(psi1); }
  double n2() const { return std::norm(psi2); }
};

DimerState dimer_rhs(const DimerState& s, double t, double g, const DimerParams& p);

// Fixed-step RK4 over n_steps steps of length T / steps_per_period from t_start.
// Throws PropagationError on a non-finite state.
DimerState dimer_propagate(const DimerState& s, double t_start, long n_steps, double g, const DimerParams& p);

PeriodMapFactory dimer_map_factory(const DimerParams& p);

struct DimerOrbit {
  DimerState state;  // at t = 0
  double quasienergy = 0.0;  // U psi = exp(-i eps) psi, eps in (-pi, pi]
  double g = 0.0;
  double imbalance = 0.0;  // period average of N1 - N2
  double residual = 0.0;
  int iterations = 0;
};

// Period average of N1 - N2, trapezoidal on 128 samples.
double imbalance(const DimerState& s, double g, const DimerParams& p);

// Newton on (Re psi, Im psi, eps) with unit norm. Throws ConvergenceError.
DimerOrbit dimer_orbit_solve(const DimerState& seed, double eps_seed, double g, const DimerParams& p,
                             const NewtonOptions& options = {});

// The two Floquet modes at g = 0, ordered by quasienergy.
std::vector<DimerOrbit> dimer_linear_modes(const DimerParams& p);

enum class Bifurcation { none, pitchfork, saddle_node };
std::string to_string(Bifurcation b);

struct DimerContinuationOptions {
  ContinuationOptions continuation;
  double kick = 1e-3;        // imbalance offset of the symmetry-breaking seeds
  double arclength_step = 0.02;
  int max_arclength_steps = 2000;
};

struct DimerBranch {
  std::vector<DimerOrbit> points;  // followed from the start orbit, g increasing
  Termination terminated_by = Termination::max_g_reached;
  std::vector<DimerOrbit> beyond_fold;
  std::optional<double> fold_g;
  Bifurcation classification = Bifurcation::none;
  std::optional<double> critical_g;  // pitchfork point or fold
  // Symmetry-broken daughters, from the bifurcation point up to g_max.
  std::vector<DimerOrbit> daughter_plus;
  std::vector<DimerOrbit> daughter_minus;
  // Branch not connected to the start orbit, traced from g_max down through its
  // turning point (non-symmetric drive only).
  std::vector<DimerOrbit> isolated;
  std::string diagnostic;
};

// Follows the orbit in g up to g_max. With a time-reversal symmetric drive the
// pitchfork is found by solving with g free at imbalance offsets +-kick from
// the symmetric orbit; otherwise a turning point of the continuation (or of a
// branch grown from the opposite-imbalance side) marks a saddle-node.
DimerBranch dimer_continue(const DimerOrbit& start, double g_max, double dg, const DimerParams& p,
                           const DimerContinuationOptions& options = {});

// Self-trapping threshold of the undriven dimer from the in-phase mode: the
// g at which an imbalanced stationary state splits off (2C analytically).
double self_trapping_threshold(const DimerParams& p, double kick = 1e-4);

}  // namespace ratchet
