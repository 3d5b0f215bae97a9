#pragma once

#include <string>
#include <vector>

#include "ratchet/spectral_propagator.hpp"

namespace ratchet {

struct HusimiSpec {
  int nx = 64;
  int np = 64;
  double p_min = -3.0;
  double p_max = 3.0;

  void validate() const;
};

// H(x, p) on x_j = 2 pi j / nx and p_k = p_min + k (p_max - p_min) / (np - 1),
// stored row-major in p: values[k * nx + j].
struct HusimiGrid {
  std::vector<double> x_grid;
  std::vector<double> p_grid;
  std::vector<double> values;
  double mu = 0.0;
  double sigma_x = 0.0;
  double sigma_p = 0.0;

  double at(int ip, int ix) const { return values[static_cast<std::size_t>(ip) * x_grid.size() + ix]; }
  // sum H dx dp
  double normalization() const;
  // cells * sum H^2 / (sum H)^2: 1 for a uniform grid, larger when concentrated.
  double participation_ratio() const;
};

// |<x0, p0|psi>|^2 / (2 pi mu) with coherent states of width sigma_x = sqrt(mu / 2):
// the Gaussian exp[-(x - x0)^2 / (4 sigma_x^2) + i p0 (x - x0) / mu] is sampled
// with its images x + 2 pi m, |m| <= 3, expanded in the plane-wave basis of psi
// and normalized there.
HusimiGrid husimi(const WaveFunction& psi, const HusimiSpec& spec, double mu, int workers = 1);

// The coherent states of a grid, built once and reused for many states.
class HusimiBasis {
 public:
  HusimiBasis(const HusimiSpec& spec, double mu, int n_max, int workers = 1);
  HusimiGrid operator()(const WaveFunction& psi) const;

 private:
  HusimiSpec spec_;
  double mu_;
  int n_max_;
  Eigen::MatrixXcd bra_;  // row k * nx + j holds <x_j, p_k|
};

// Plane-wave coefficients of the normalized coherent state at (x0, p0).
WaveFunction coherent_state(double x0, double p0, double mu, int n_max);

enum class StateClass { transporting, chaotic_layer, localized };
std::string to_string(StateClass c);

struct ClassificationThresholds {
  double transport_momentum = 0.5;   // |<p>| above this is transporting
  double localization_ratio = 8.0;   // Husimi participation ratio above this is localized
};

StateClass classify_state(double mean_momentum, const HusimiGrid& husimi,
                          const ClassificationThresholds& thresholds = {});

}  // namespace ratchet
