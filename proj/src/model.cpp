#include "ratchet/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ratchet {

namespace {

constexpr double kHbar = 1.054571817e-34;  // J s
constexpr double kSymmetryTol = 1e-12;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void DrivingField::validate() const {
  require(std::isfinite(e1) && std::isfinite(e2), "field amplitudes must be finite");
  require(std::isfinite(theta) && std::isfinite(t0), "theta and t0 must be finite");
  require(std::isfinite(omega) && omega > 0.0, "omega must be positive");
}

double ModelParams::time_step(const DrivingField& field) const {
  return dt > 0.0 ? dt : field.period() / kDefaultStepsPerPeriod;
}

int ModelParams::steps_per_period(const DrivingField& field) const {
  const double ratio = field.period() / time_step(field);
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-12 * ratio) {
    throw std::invalid_argument("dt must divide the driving period into an integer number of steps");
  }
  return static_cast<int>(rounded);
}

void ModelParams::validate(const DrivingField& field) const {
  field.validate();
  require(std::isfinite(mu) && mu > 0.0, "mu must be positive");
  require(std::isfinite(v0), "v0 must be finite");
  require(std::isfinite(g), "g must be finite");
  require(n_max >= 1, "n_max must be >= 1");
  require(dt >= 0.0 && std::isfinite(dt), "dt must be positive (or 0 for the default)");
  (void)steps_per_period(field);
}

double eval_field(const DrivingField& field, double t) {
  const double s = field.omega * (t - field.t0);
  return field.e1 * std::cos(s) + field.e2 * std::cos(2.0 * s + field.theta);
}

double eval_vector_potential(const DrivingField& field, double t) {
  const double s = field.omega * (t - field.t0);
  return -field.e1 * std::sin(s) / field.omega -
         field.e2 * std::sin(2.0 * s + field.theta) / (2.0 * field.omega);
}

bool is_shift_symmetric(const DrivingField& field) {
  // The first harmonic flips sign under t -> t + T/2, the second does not.
  return std::abs(field.e2) <= kSymmetryTol * std::max(1.0, std::abs(field.e1));
}

bool is_time_reversal_symmetric(const DrivingField& field) {
  if (std::abs(field.e2) <= kSymmetryTol * std::max(1.0, std::abs(field.e1))) return true;
  return std::abs(std::sin(field.theta)) < kSymmetryTol;
}

RescaledModel rescale_physical(const PhysicalParams& phys, const PhysicalDrive& drive) {
  require(phys.atomic_mass > 0.0, "atomic_mass must be positive");
  require(phys.lattice_wavenumber > 0.0, "lattice_wavenumber must be positive");
  require(phys.lattice_depth > 0.0, "lattice_depth must be positive");
  require(phys.mean_density > 0.0, "mean_density must be positive");
  require(phys.time_scale > 0.0, "time_scale must be positive");
  require(std::isfinite(phys.scattering_length), "scattering_length must be finite");
  require(drive.angular_frequency > 0.0, "drive angular_frequency must be positive");

  const double m = phys.atomic_mass;
  const double k = phys.lattice_wavenumber;
  const double k2 = k * k;

  RescaledModel out;
  const double mu = 4.0 * kHbar * k2 * phys.time_scale / m;
  out.params.mu = mu;
  out.params.v0 = mu * mu * m * phys.lattice_depth / (4.0 * kHbar * kHbar * k2);
  const double coupling = kPi * phys.mean_density * phys.scattering_length / k2;
  out.params.g = mu * mu * coupling;

  const double force_scale = mu * mu * m / (8.0 * kHbar * kHbar * k2 * k);
  out.field.e1 = force_scale * drive.e1;
  out.field.e2 = force_scale * drive.e2;
  out.field.omega = drive.angular_frequency * phys.time_scale;
  out.field.theta = drive.theta;
  out.field.t0 = 0.0;
  return out;
}

double wrap_phase(double angle) {
  double r = std::remainder(angle, kTwoPi);  // [-pi, pi]
  if (r <= -kPi) r += kTwoPi;
  return r;
}

}  // namespace ratchet
