#include "ratchet/spectral_propagator.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>

#include <fftw3.h>

namespace ratchet {

namespace {

// FFTW planning is not thread safe; execution on distinct plans is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

const double kSqrtTwoPi = std::sqrt(kTwoPi);

}  // namespace

// ---------------------------------------------------------------------------
// WaveFunction

WaveFunction::WaveFunction(int n_max) : n_max_(n_max), coeffs_(Eigen::VectorXcd::Zero(2 * n_max + 1)) {
  if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
}

WaveFunction::WaveFunction(int n_max, Eigen::VectorXcd coeffs) : n_max_(n_max), coeffs_(std::move(coeffs)) {
  if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  if (coeffs_.size() != 2 * n_max + 1) {
    throw std::invalid_argument("coefficient count must equal 2 n_max + 1");
  }
}

WaveFunction WaveFunction::normalized() const {
  const double n = std::sqrt(norm2());
  if (!(n > 0.0)) throw std::invalid_argument("cannot normalize a zero state");
  return WaveFunction(n_max_, coeffs_ / n);
}

cplx WaveFunction::overlap(const WaveFunction& other) const {
  if (other.n_max_ != n_max_) throw std::invalid_argument("overlap of states with different cutoffs");
  return coeffs_.dot(other.coeffs_);  // conjugates the left operand
}

std::vector<cplx> WaveFunction::to_position(int m) const {
  if (m < dim()) throw std::invalid_argument("position grid smaller than the basis");
  std::vector<cplx> values(static_cast<std::size_t>(m), cplx{});
  for (int n = -n_max_; n <= n_max_; ++n) {
    values[static_cast<std::size_t>(((n % m) + m) % m)] = coeff(n);
  }
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(m, reinterpret_cast<fftw_complex*>(values.data()),
                            reinterpret_cast<fftw_complex*>(values.data()), FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  for (auto& v : values) v /= kSqrtTwoPi;
  return values;
}

WaveFunction WaveFunction::from_position(const std::vector<cplx>& values, int n_max) {
  const int m = static_cast<int>(values.size());
  if (m < 2 * n_max + 1) throw std::invalid_argument("position grid smaller than the basis");
  std::vector<cplx> work(values);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(m, reinterpret_cast<fftw_complex*>(work.data()),
                            reinterpret_cast<fftw_complex*>(work.data()), FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  Eigen::VectorXcd c(2 * n_max + 1);
  const double scale = kSqrtTwoPi / m;
  for (int n = -n_max; n <= n_max; ++n) {
    c[n + n_max] = work[static_cast<std::size_t>(((n % m) + m) % m)] * scale;
  }
  return WaveFunction(n_max, std::move(c));
}

WaveFunction plane_wave_state(int n, int n_max) {
  if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  if (n < -n_max || n > n_max) {
    throw std::out_of_range("plane wave index " + std::to_string(n) + " outside cutoff " +
                            std::to_string(n_max));
  }
  WaveFunction psi(n_max);
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(2 * n_max + 1);
  c[n + n_max] = 1.0;
  return WaveFunction(n_max, std::move(c));
}

double mean_momentum(const Eigen::VectorXcd& coeffs, double mu) {
  const int n_max = static_cast<int>(coeffs.size() - 1) / 2;
  double acc = 0.0;
  for (int i = 0; i < coeffs.size(); ++i) acc += static_cast<double>(i - n_max) * std::norm(coeffs[i]);
  return mu * acc;
}

double mean_momentum(const WaveFunction& psi, double mu) { return mean_momentum(psi.coeffs(), mu); }

int dealiased_grid_size(int n_max) {
  // |psi|^2 spans |n| <= 2 n_max and |psi|^2 psi spans 3 n_max, so more than
  // 4 n_max points keep the projection of the product free of aliasing.
  const auto target = static_cast<unsigned>(4 * n_max + 1);
  return static_cast<int>(std::bit_ceil(target));
}

// ---------------------------------------------------------------------------
// SplitStepPropagator

struct SplitStepPropagator::FftPlans {
  int m = 0;
  fftw_complex* buffer = nullptr;
  fftw_plan to_position = nullptr;
  fftw_plan to_momentum = nullptr;
  std::vector<double> potential;

  explicit FftPlans(int size) : m(size), potential(static_cast<std::size_t>(size)) {
    std::lock_guard lock(fftw_planner_mutex());
    buffer = fftw_alloc_complex(static_cast<std::size_t>(m));
    to_position = fftw_plan_dft_1d(m, buffer, buffer, FFTW_BACKWARD, FFTW_ESTIMATE);
    to_momentum = fftw_plan_dft_1d(m, buffer, buffer, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  ~FftPlans() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(to_position);
    fftw_destroy_plan(to_momentum);
    fftw_free(buffer);
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;
};

SplitStepPropagator::SplitStepPropagator(const ModelParams& params, const DrivingField& field)
    : params_(params), field_(field) {
  params_.validate(field_);
  dt_ = params_.time_step(field_);
  steps_per_period_ = params_.steps_per_period(field_);
  const int d = params_.dim();

  // P cos x P is tridiagonal with 1/2 on both off-diagonals; its exponential is
  // built from the real symmetric eigendecomposition, so it is unitary to roundoff.
  Eigen::MatrixXd cosine = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i + 1 < d; ++i) cosine(i, i + 1) = cosine(i + 1, i) = 0.5;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cosine);
  const Eigen::MatrixXd& q = eig.eigenvectors();
  const double scale = 0.5 * dt_ * params_.v0 / params_.mu;
  Eigen::VectorXcd phases(d);
  for (int k = 0; k < d; ++k) phases[k] = std::polar(1.0, -scale * eig.eigenvalues()[k]);
  lattice_half_ = q.cast<cplx>() * phases.asDiagonal() * q.transpose().cast<cplx>();
  Eigen::VectorXcd phases2(d);
  for (int k = 0; k < d; ++k) phases2[k] = phases[k] * phases[k];
  lattice_full_ = q.cast<cplx>() * phases2.asDiagonal() * q.transpose().cast<cplx>();

  kinetic_free_.resize(d);
  for (int i = 0; i < d; ++i) {
    const double n = i - params_.n_max;
    kinetic_free_[i] = 0.5 * params_.mu * n * n;
  }
  if (params_.g != 0.0) fft_ = std::make_unique<FftPlans>(dealiased_grid_size(params_.n_max));
}

SplitStepPropagator::~SplitStepPropagator() = default;
SplitStepPropagator::SplitStepPropagator(SplitStepPropagator&&) noexcept = default;
SplitStepPropagator& SplitStepPropagator::operator=(SplitStepPropagator&&) noexcept = default;

void SplitStepPropagator::kinetic(Eigen::VectorXcd& coeffs, double t_mid) const {
  const double a = eval_vector_potential(field_, t_mid);
  const int n_max = params_.n_max;
  for (int i = 0; i < coeffs.size(); ++i) {
    const double n = i - n_max;
    coeffs[i] *= std::polar(1.0, -dt_ * (kinetic_free_[i] - n * a));
  }
}

void SplitStepPropagator::nonlinear_phase(Eigen::VectorXcd& coeffs, double duration) {
  if (params_.g == 0.0) return;
  const int m = fft_->m;
  const int n_max = params_.n_max;
  auto* buf = reinterpret_cast<cplx*>(fft_->buffer);
  std::vector<double>& potential = fft_->potential;
  const double inv_m = 1.0 / m;

  std::fill(buf, buf + m, cplx{});
  for (int n = -n_max; n <= n_max; ++n) buf[(n + m) % m] = coeffs[n + n_max];
  fftw_execute(fft_->to_position);
  // buf now holds sqrt(2 pi) psi(x_j).
  const double rate = duration * params_.g / (params_.mu * kTwoPi);
  for (int j = 0; j < m; ++j) potential[static_cast<std::size_t>(j)] = rate * std::norm(buf[j]);

  // exp(-i P V P) by its Taylor series. P V P is Hermitian and the grid resolves
  // V times a band-limited state without aliasing, so the result is unitary up
  // to the truncation of the series, which runs to roundoff.
  Eigen::VectorXcd term = coeffs;
  const double floor = 1e-34 * coeffs.squaredNorm();
  for (int k = 1; k <= 64; ++k) {
    if (k > 1) {
      std::fill(buf, buf + m, cplx{});
      for (int n = -n_max; n <= n_max; ++n) buf[(n + m) % m] = term[n + n_max];
      fftw_execute(fft_->to_position);
    }
    for (int j = 0; j < m; ++j) buf[j] *= potential[static_cast<std::size_t>(j)];
    fftw_execute(fft_->to_momentum);
    const cplx factor(0.0, -inv_m / k);
    for (int n = -n_max; n <= n_max; ++n) term[n + n_max] = factor * buf[(n + m) % m];
    coeffs += term;
    if (term.squaredNorm() <= floor) break;
  }
}

void SplitStepPropagator::check_finite(const Eigen::VectorXcd& coeffs, double t) {
  const double n2 = coeffs.squaredNorm();
  if (!std::isfinite(n2)) {
    std::ostringstream msg;
    msg << "non-finite wavefunction coefficients at t = " << std::setprecision(17) << t;
    throw PropagationError(msg.str());
  }
}

void SplitStepPropagator::step(Eigen::VectorXcd& coeffs, double t) {
  nonlinear_phase(coeffs, 0.5 * dt_);
  coeffs = lattice_half_ * coeffs;
  kinetic(coeffs, t + 0.5 * dt_);
  coeffs = lattice_half_ * coeffs;
  nonlinear_phase(coeffs, 0.5 * dt_);
}

void SplitStepPropagator::advance(Eigen::VectorXcd& coeffs, double t_start, long n_steps) {
  if (n_steps <= 0) return;
  Eigen::VectorXcd tmp(coeffs.size());
  nonlinear_phase(coeffs, 0.5 * dt_);
  for (long k = 0; k < n_steps; ++k) {
    const double t = t_start + static_cast<double>(k) * dt_;
    tmp.noalias() = lattice_half_ * coeffs;
    kinetic(tmp, t + 0.5 * dt_);
    coeffs.noalias() = lattice_half_ * tmp;
    nonlinear_phase(coeffs, k + 1 < n_steps ? dt_ : 0.5 * dt_);
    if ((k + 1) % kFiniteCheckInterval == 0) check_finite(coeffs, t + dt_);
  }
  check_finite(coeffs, t_start + static_cast<double>(n_steps) * dt_);
}

void SplitStepPropagator::advance_columns(Eigen::MatrixXcd& columns, double t_start, long n_steps) const {
  if (params_.g != 0.0) throw std::logic_error("advance_columns requires g = 0");
  if (n_steps <= 0) return;
  Eigen::MatrixXcd tmp = lattice_half_ * columns;
  const int n_max = params_.n_max;
  const int d = params_.dim();
  Eigen::VectorXcd phase(d);
  for (long k = 0; k < n_steps; ++k) {
    const double a = eval_vector_potential(field_, t_start + (static_cast<double>(k) + 0.5) * dt_);
    for (int i = 0; i < d; ++i) phase[i] = std::polar(1.0, -dt_ * (kinetic_free_[i] - (i - n_max) * a));
    tmp = phase.asDiagonal() * tmp;
    if (k + 1 < n_steps) {
      columns.noalias() = lattice_full_ * tmp;
      tmp.swap(columns);
    }
  }
  columns.noalias() = lattice_half_ * tmp;
  if (!std::isfinite(columns.squaredNorm())) throw PropagationError("non-finite Floquet columns");
}

void SplitStepPropagator::step_columns(Eigen::MatrixXcd& columns, double t) const {
  if (params_.g != 0.0) throw std::logic_error("step_columns requires g = 0");
  Eigen::MatrixXcd tmp = lattice_half_ * columns;
  const double a = eval_vector_potential(field_, t + 0.5 * dt_);
  const int n_max = params_.n_max;
  for (int i = 0; i < tmp.rows(); ++i) {
    tmp.row(i) *= std::polar(1.0, -dt_ * (kinetic_free_[i] - (i - n_max) * a));
  }
  columns.noalias() = lattice_half_ * tmp;
}

WaveFunction step(const WaveFunction& psi, double t, const ModelParams& params, const DrivingField& field) {
  ModelParams p = params;
  p.n_max = psi.n_max();
  SplitStepPropagator prop(p, field);
  Eigen::VectorXcd c = psi.coeffs();
  prop.step(c, t);
  return WaveFunction(psi.n_max(), std::move(c));
}

Propagation propagate(const WaveFunction& psi, double t_start, double t_end, const ModelParams& params,
                      const DrivingField& field, int sample_every) {
  if (!(t_end > t_start)) throw std::invalid_argument("propagate requires t_end > t_start");
  if (sample_every < 1) throw std::invalid_argument("sample_every must be >= 1");
  ModelParams p = params;
  p.n_max = psi.n_max();
  SplitStepPropagator prop(p, field);
  const double ratio = (t_end - t_start) / prop.dt();
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw std::invalid_argument("propagation interval is not an integer number of time steps");
  }
  const auto n_steps = static_cast<long>(rounded);
  Propagation out;
  Eigen::VectorXcd c = psi.coeffs();
  prop.advance_visit(c, t_start, n_steps, [&](long k, double t, const Eigen::VectorXcd& cur) {
    if (k % sample_every == 0 || k == n_steps) {
      out.log.times.push_back(t);
      out.log.norms.push_back(std::sqrt(cur.squaredNorm()));
      out.log.momenta.push_back(mean_momentum(cur, p.mu));
    }
  });
  out.state = WaveFunction(psi.n_max(), std::move(c));
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    out.write(bytes.data(), sizeof(T));
  } else {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
}

template <typename T>
T read_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes{};
  in.read(bytes.data(), sizeof(T));
  if (!in) throw std::runtime_error("truncated state file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

constexpr int kMaxSerializedCutoff = 1 << 20;

}  // namespace

void write_state_binary(std::ostream& out, const StateRecord& record) {
  write_le<std::int32_t>(out, record.state.n_max());
  write_le<double>(out, record.mu);
  write_le<double>(out, record.t);
  for (const cplx& c : record.state.coeffs()) {
    write_le<double>(out, c.real());
    write_le<double>(out, c.imag());
  }
}

StateRecord read_state_binary(std::istream& in) {
  const auto n_max = read_le<std::int32_t>(in);
  if (n_max < 1 || n_max > kMaxSerializedCutoff) throw std::runtime_error("corrupt state header");
  StateRecord rec;
  rec.mu = read_le<double>(in);
  rec.t = read_le<double>(in);
  Eigen::VectorXcd c(2 * n_max + 1);
  for (auto& v : c) {
    const double re = read_le<double>(in);
    const double im = read_le<double>(in);
    v = cplx(re, im);
  }
  rec.state = WaveFunction(n_max, std::move(c));
  return rec;
}

void write_state_text(std::ostream& out, const StateRecord& record) {
  out << std::setprecision(17) << record.state.n_max() << ' ' << record.mu << ' ' << record.t << '\n';
  for (const cplx& c : record.state.coeffs()) out << c.real() << ' ' << c.imag() << '\n';
}

StateRecord read_state_text(std::istream& in) {
  int n_max = 0;
  StateRecord rec;
  if (!(in >> n_max >> rec.mu >> rec.t) || n_max < 1 || n_max > kMaxSerializedCutoff) {
    throw std::runtime_error("corrupt state header");
  }
  Eigen::VectorXcd c(2 * n_max + 1);
  for (auto& v : c) {
    double re = 0.0, im = 0.0;
    if (!(in >> re >> im)) throw std::runtime_error("truncated state file");
    v = cplx(re, im);
  }
  rec.state = WaveFunction(n_max, std::move(c));
  return rec;
}

namespace {
bool is_text_path(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".txt") == 0;
}
}  // namespace

void save_state(const std::string& path, const StateRecord& record) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  if (is_text_path(path)) {
    write_state_text(out, record);
  } else {
    write_state_binary(out, record);
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

StateRecord load_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open state file " + path);
  try {
    return is_text_path(path) ? read_state_text(in) : read_state_binary(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace ratchet
