#pragma once

#include <numbers>

namespace ratchet {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Two-harmonic ac force
//   E(t) = e1 cos[omega (t - t0)] + e2 cos[2 omega (t - t0) + theta]
// and its vector potential A(t) with dA/dt = -E(t). The initial time of a
// propagation is passed separately to the propagators; t0 here only fixes
// the phase reference of the drive.
struct DrivingField {
  double e1 = 0.0;
  double e2 = 0.0;
  double omega = 1.0;
  double theta = 0.0;  // stored unreduced
  double t0 = 0.0;

  double period() const { return kTwoPi / omega; }
  void validate() const;
};

struct ModelParams {
  double mu = 0.2;  // effective Planck constant
  double v0 = 1.0;  // lattice depth
  double g = 0.0;   // nonlinearity strength, signed
  int n_max = 24;   // plane waves n = -n_max..n_max
  double dt = 0.0;  // 0 selects period / kDefaultStepsPerPeriod

  static constexpr int kDefaultStepsPerPeriod = 1024;

  int dim() const { return 2 * n_max + 1; }
  // Throws std::invalid_argument on any violated invariant.
  void validate(const DrivingField& field) const;
  double time_step(const DrivingField& field) const;
  int steps_per_period(const DrivingField& field) const;
};

// SI inputs of the one-dimensional GP equation before rescaling.
struct PhysicalParams {
  double atomic_mass = 0.0;         // kg
  double lattice_wavenumber = 0.0;  // k_L, 1/m
  double lattice_depth = 0.0;       // V0, J
  double scattering_length = 0.0;   // a_s, m (signed, 0 = ideal gas)
  double mean_density = 0.0;        // n0, 1/m^3
  double time_scale = 0.0;          // t_s, s
};

// Physical drive e(tau) = e1 cos(w tau) + e2 cos(2 w tau + theta), forces in N.
struct PhysicalDrive {
  double e1 = 0.0;
  double e2 = 0.0;
  double angular_frequency = 0.0;  // rad/s
  double theta = 0.0;
};

struct RescaledModel {
  ModelParams params;
  DrivingField field;
};

double eval_field(const DrivingField& field, double t);
double eval_vector_potential(const DrivingField& field, double t);

// E(t) = -E(t + T/2) for all t.
bool is_shift_symmetric(const DrivingField& field);
// E(t0 + s) = E(t0 - s) for all s.
bool is_time_reversal_symmetric(const DrivingField& field);

RescaledModel rescale_physical(const PhysicalParams& phys, const PhysicalDrive& drive);

// Maps an angle onto (-pi, pi].
double wrap_phase(double angle);

}  // namespace ratchet
