#include "ratchet/husimi.hpp"

#include <cmath>
#include <stdexcept>

#include "ratchet/parallel.hpp"

namespace ratchet {

void HusimiSpec::validate() const {
  if (nx < 32 || np < 32) throw std::invalid_argument("Husimi grid must be at least 32 x 32");
  if (!(p_max > p_min)) throw std::invalid_argument("Husimi momentum range is empty");
}

double HusimiGrid::normalization() const {
  const double dx = kTwoPi / static_cast<double>(x_grid.size());
  const double dp = (p_grid.back() - p_grid.front()) / static_cast<double>(p_grid.size() - 1);
  double sum = 0.0;
  for (double h : values) sum += h;
  return sum * dx * dp;
}

double HusimiGrid::participation_ratio() const {
  double sum = 0.0, sum2 = 0.0;
  for (double h : values) {
    sum += h;
    sum2 += h * h;
  }
  if (sum <= 0.0) return 0.0;
  return static_cast<double>(values.size()) * sum2 / (sum * sum);
}

WaveFunction coherent_state(double x0, double p0, double mu, int n_max) {
  const double sigma_x = std::sqrt(mu / 2.0);
  // Fine enough to resolve both the Gaussian and the basis.
  int m = 256;
  while (m < 4 * (2 * n_max + 1)) m *= 2;
  std::vector<cplx> values(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const double x = kTwoPi * j / m;
    cplx sum = 0.0;
    for (int image = -3; image <= 3; ++image) {
      const double u = x + kTwoPi * image - x0;
      sum += std::exp(cplx(-u * u / (4.0 * sigma_x * sigma_x), p0 * u / mu));
    }
    values[static_cast<std::size_t>(j)] = sum;
  }
  return WaveFunction::from_position(values, n_max).normalized();
}

namespace {

HusimiGrid empty_grid(const HusimiSpec& spec, double mu) {
  spec.validate();
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
  HusimiGrid grid;
  grid.mu = mu;
  grid.sigma_x = std::sqrt(mu / 2.0);
  grid.sigma_p = mu / (2.0 * grid.sigma_x);
  for (int j = 0; j < spec.nx; ++j) grid.x_grid.push_back(kTwoPi * j / spec.nx);
  for (int k = 0; k < spec.np; ++k) grid.p_grid.push_back(spec.p_min + (spec.p_max - spec.p_min) * k / (spec.np - 1));
  return grid;
}

}  // namespace

HusimiBasis::HusimiBasis(const HusimiSpec& spec, double mu, int n_max, int workers)
    : spec_(spec), mu_(mu), n_max_(n_max) {
  const HusimiGrid grid = empty_grid(spec, mu);
  bra_.resize(static_cast<Eigen::Index>(spec.nx) * spec.np, 2 * n_max + 1);
  parallel_for(static_cast<std::size_t>(spec.np), workers, [&](std::size_t k, int) {
    for (int j = 0; j < spec.nx; ++j) {
      const WaveFunction alpha = coherent_state(grid.x_grid[static_cast<std::size_t>(j)], grid.p_grid[k], mu, n_max);
      bra_.row(static_cast<Eigen::Index>(k) * spec.nx + j) = alpha.coeffs().adjoint();
    }
  });
}

HusimiGrid HusimiBasis::operator()(const WaveFunction& psi) const {
  if (psi.n_max() != n_max_) throw std::invalid_argument("state cutoff differs from the Husimi basis");
  HusimiGrid grid = empty_grid(spec_, mu_);
  const Eigen::VectorXcd amplitudes = bra_ * psi.coeffs();
  const double scale = 1.0 / (kTwoPi * mu_);
  grid.values.resize(static_cast<std::size_t>(amplitudes.size()));
  for (Eigen::Index i = 0; i < amplitudes.size(); ++i) grid.values[static_cast<std::size_t>(i)] = std::norm(amplitudes[i]) * scale;
  return grid;
}

HusimiGrid husimi(const WaveFunction& psi, const HusimiSpec& spec, double mu, int workers) {
  return HusimiBasis(spec, mu, psi.n_max(), workers)(psi);
}

std::string to_string(StateClass c) {
  switch (c) {
    case StateClass::transporting: return "transporting";
    case StateClass::chaotic_layer: return "chaotic_layer";
    case StateClass::localized: return "localized";
  }
  return "unknown";
}

StateClass classify_state(double mean_momentum, const HusimiGrid& husimi, const ClassificationThresholds& thresholds) {
  if (std::abs(mean_momentum) > thresholds.transport_momentum) return StateClass::transporting;
  if (husimi.participation_ratio() > thresholds.localization_ratio) return StateClass::localized;
  return StateClass::chaotic_layer;
}

}  // namespace ratchet
