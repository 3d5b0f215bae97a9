#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ratchet/model.hpp"
#include "ratchet/spectral_propagator.hpp"

namespace ratchet {

// Eigen-decomposition U |psi_a> = exp(-i eps_a) |psi_a> of a one-period
// Floquet operator, with eps_a in (-pi, pi] and states taken at t = t0.
struct FloquetSpectrum {
  std::vector<double> quasienergies;
  std::vector<WaveFunction> states;
  std::vector<double> momenta;  // period-averaged <p>_a; empty until computed
  double theta = 0.0;
  double t0 = 0.0;

  std::size_t size() const { return quasienergies.size(); }
};

class NonUnitaryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Column a is the one-period image of |a - n_max>, starting at t0. Requires g = 0.
// Throws NonUnitaryError when max|U^dag U - I| exceeds 1e-6.
Eigen::MatrixXcd build_floquet_operator(const ModelParams& params, const DrivingField& field, double t0);

// max_ij |(U^dag U - I)_ij|
double unitarity_defect(const Eigen::MatrixXcd& u);

// U^x_{mn} = U_{-n,-m}: transposition along the codiagonal.
Eigen::MatrixXcd codiagonal_transpose(const Eigen::MatrixXcd& u);

// Eigenpairs of a unitary matrix through its complex Schur form. For a normal
// matrix the Schur vectors are orthonormal eigenvectors, degenerate clusters
// included. Throws NonUnitaryError when the input is not unitary within 1e-6.
FloquetSpectrum diagonalize_unitary(const Eigen::MatrixXcd& u, int n_max);

// Period average of <psi_a(t)|p|psi_a(t)> for every state, trapezoidal over
// all time steps of one period starting at spectrum.t0.
std::vector<double> floquet_mean_momenta(const FloquetSpectrum& spectrum, const ModelParams& params,
                                         const DrivingField& field);

// build + diagonalize + momenta.
FloquetSpectrum floquet_spectrum(const ModelParams& params, const DrivingField& field, double t0);

struct LinearCurrent {
  double current = 0.0;
  std::vector<double> occupations;  // |C_a|^2
};

// J = sum_a <p>_a |<psi_a|initial>|^2. Throws std::invalid_argument when the
// occupations do not sum to one within 1e-6.
LinearCurrent asymptotic_current_linear(const WaveFunction& initial, const FloquetSpectrum& spectrum);

// Mean of the asymptotic current over n_samples initial times t0_k = k T / n_samples.
// The field phase is taken from field_template with theta replaced. All Floquet
// operators U(T + t0_k, t0_k) share one diagonalization: their eigenstates are the
// t0 = 0 eigenstates propagated to t0_k. n_samples must be >= 8 and divide the
// number of steps per period.
struct AveragedCurrent {
  double mean = 0.0;
  std::vector<double> per_t0;
  std::vector<double> t0_grid;
};
AveragedCurrent t0_average_current(double theta, const ModelParams& params, const DrivingField& field_template,
                                   int n_samples, const WaveFunction& initial);
AveragedCurrent t0_average_current(double theta, const ModelParams& params, const DrivingField& field_template,
                                   int n_samples = 16);

// Quasienergy bands versus theta, matched between neighbouring grid points by
// greedy maximal eigenvector overlap.
struct Band {
  std::vector<double> quasienergies;
  std::vector<double> momenta;
  std::vector<WaveFunction> states;
};

struct BandSet {
  std::vector<double> theta_grid;
  std::vector<Band> bands;
  // Grid indices where the assignment was weak (best overlap <= 0.5) or ambiguous
  // (runner-up within 0.05 of the best): the grid is too coarse there.
  std::vector<std::size_t> coarse_points;

  struct Gap {
    double gap = 0.0;
    double theta = 0.0;
    std::size_t index = 0;
  };
  // Minimal circular quasienergy distance between two bands over the grid.
  Gap minimal_gap(std::size_t band_a, std::size_t band_b) const;
};

struct BandTrackingOptions {
  bool compute_momenta = true;
  bool keep_states = true;
  double overlap_floor = 0.5;
  double ambiguity_margin = 0.05;
};

BandSet track_bands(std::span<const double> theta_grid, const ModelParams& params, const DrivingField& field,
                    double t0, const BandTrackingOptions& options = {});

enum class StateKind { chaotic_layer, transporting };

// Among the states whose quasienergy lies within `window` of near_eps: the
// chaotic-layer member of a resonant pair has the largest weight on |0>, the
// transporting member the largest <p>. Needs spectrum.momenta for the latter.
// Throws std::out_of_range when no state is in the window.
std::size_t select_resonant_state(const FloquetSpectrum& spectrum, StateKind kind, double near_eps, double window);

// Circular distance between two phases.
double phase_distance(double a, double b);

}  // namespace ratchet
