#include "ratchet/floquet_nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SVD>

#include "ratchet/parallel.hpp"

namespace ratchet {

namespace {

// Point in packed coordinates (Re psi, Im psi, eps, g).
struct Point {
  Eigen::VectorXcd psi;
  double eps = 0.0;
  double g = 0.0;
};

Point unpack(const Eigen::VectorXd& v, int d) {
  Point p;
  p.psi.resize(d);
  for (int i = 0; i < d; ++i) p.psi[i] = cplx(v[i], v[d + i]);
  p.eps = v[2 * d];
  p.g = v[2 * d + 1];
  return p;
}

// Newton system around the fixed-point equations. Unknowns are all packed
// coordinates except Im psi[pin] (held fixed) and, unless free_g, g.
class OrbitSystem {
 public:
  OrbitSystem(const PeriodMapFactory& factory, int d, int pin, bool free_g, const NewtonOptions& options)
      : d_(d), pin_(pin), free_g_(free_g), options_(options) {
    const int workers = std::max(1, options.workers);
    maps_.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) maps_.push_back(factory());
    for (int i = 0; i < 2 * d_; ++i) {
      if (i != d_ + pin_) state_unknowns_.push_back(i);
    }
  }

  void set_arclength(Eigen::VectorXd predictor, Eigen::VectorXd tangent) {
    predictor_ = std::move(predictor);
    tangent_ = std::move(tangent);
  }

  int equations() const { return 2 * d_ + 1 + (free_g_ ? 1 : 0); }
  int unknowns() const { return static_cast<int>(state_unknowns_.size()) + 1 + (free_g_ ? 1 : 0); }

  // Residual at packed point v; also returns the mapped state.
  Eigen::VectorXd residual(const Eigen::VectorXd& v, Eigen::VectorXcd* mapped_out, int worker = 0) const {
    const Point p = unpack(v, d_);
    const Eigen::VectorXcd mapped = maps_[static_cast<std::size_t>(worker)](p.psi, p.g);
    Eigen::VectorXd f(equations());
    const Eigen::VectorXcd r = std::polar(1.0, p.eps) * mapped - p.psi;
    f.head(d_) = r.real();
    f.segment(d_, d_) = r.imag();
    f[2 * d_] = p.psi.squaredNorm() - options_.target_norm2;
    if (free_g_) f[2 * d_ + 1] = tangent_.dot(v - predictor_);
    if (mapped_out) *mapped_out = mapped;
    return f;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& v, const Eigen::VectorXd& f, const Eigen::VectorXcd& mapped) const {
    Eigen::MatrixXd jac(equations(), unknowns());
    const double h = options_.fd_step;
    const auto n_state = state_unknowns_.size();
    const std::size_t n_fd = n_state + (free_g_ ? 1 : 0);
    parallel_for(n_fd, static_cast<int>(maps_.size()), [&](std::size_t j, int worker) {
      Eigen::VectorXd vp = v;
      int coord = 0;
      double step = h;
      if (j < n_state) {
        coord = state_unknowns_[j];
      } else {
        coord = 2 * d_ + 1;
        step = h * std::max(1e-3, std::abs(v[coord]));
      }
      vp[coord] += step;
      const Eigen::VectorXd fp = residual(vp, nullptr, worker);
      const int col = j < n_state ? static_cast<int>(j) : unknowns() - 1;
      jac.col(col) = (fp - f) / step;
      // The norm and arclength rows are linear in v; use exact derivatives.
      jac(2 * d_, col) = coord < 2 * d_ ? 2.0 * v[coord] : 0.0;
      if (free_g_) jac(2 * d_ + 1, col) = tangent_[coord];
    });
    // d/d eps of exp(i eps) U psi is i exp(i eps) U psi.
    const int eps_col = static_cast<int>(n_state);
    const Eigen::VectorXcd de = cplx(0.0, 1.0) * std::polar(1.0, v[2 * d_]) * mapped;
    jac.col(eps_col).head(d_) = de.real();
    jac.col(eps_col).segment(d_, d_) = de.imag();
    jac(2 * d_, eps_col) = 0.0;
    if (free_g_) jac(2 * d_ + 1, eps_col) = tangent_[2 * d_];
    return jac;
  }

  void apply_update(Eigen::VectorXd& v, const Eigen::VectorXd& delta, double lambda) const {
    for (std::size_t j = 0; j < state_unknowns_.size(); ++j) v[state_unknowns_[j]] += lambda * delta[static_cast<Eigen::Index>(j)];
    v[2 * d_] += lambda * delta[static_cast<Eigen::Index>(state_unknowns_.size())];
    if (free_g_) v[2 * d_ + 1] += lambda * delta[unknowns() - 1];
  }

 private:
  int d_;
  int pin_;
  bool free_g_;
  NewtonOptions options_;
  std::vector<ParamPeriodMap> maps_;
  std::vector<int> state_unknowns_;
  Eigen::VectorXd predictor_, tangent_;
};

double max_abs(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

OrbitSolution run_newton(OrbitSystem& system, Eigen::VectorXd v, int d, const NewtonOptions& options) {
  Eigen::VectorXcd mapped;
  Eigen::VectorXd f = system.residual(v, &mapped);
  if (!f.allFinite()) throw ConvergenceError("non-finite residual at the seed", std::numeric_limits<double>::infinity(), 0);
  double sigma_rel = 1.0;
  int it = 0;
  for (;; ++it) {
    const double res = max_abs(f);
    if (res < options.tol) {
      const Point p = unpack(v, d);
      return {p.psi, p.eps, p.g, res, it, sigma_rel};
    }
    if (it >= options.max_iterations) {
      std::ostringstream msg;
      msg << "Newton did not converge in " << options.max_iterations << " iterations (residual " << res << ")";
      throw ConvergenceError(msg.str(), res, it);
    }
    const Eigen::MatrixXd jac = system.jacobian(v, f, mapped);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    sigma_rel = sv[sv.size() - 1] / sv[0];
    if (!(sigma_rel > options.rank_tolerance)) {
      std::ostringstream msg;
      msg << "Jacobian rank deficient (sigma_min / sigma_max = " << sigma_rel << "): near a bifurcation";
      throw RankDeficiencyError(msg.str(), res, it);
    }
    const Eigen::VectorXd delta = svd.solve(-f);

    // Backtracking on the Euclidean residual norm.
    const double f_norm = f.norm();
    double lambda = 1.0;
    bool accepted = false;
    for (int k = 0; k < 12; ++k, lambda *= 0.5) {
      Eigen::VectorXd trial = v;
      system.apply_update(trial, delta, lambda);
      Eigen::VectorXcd trial_mapped;
      Eigen::VectorXd trial_f;
      try {
        trial_f = system.residual(trial, &trial_mapped);
      } catch (const PropagationError&) {
        continue;
      }
      if (trial_f.allFinite() && trial_f.norm() < f_norm) {
        v = std::move(trial);
        f = std::move(trial_f);
        mapped = std::move(trial_mapped);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      std::ostringstream msg;
      msg << "Newton line search failed to reduce the residual (" << res << ")";
      throw ConvergenceError(msg.str(), res, it + 1);
    }
  }
}

int largest_component(const Eigen::VectorXcd& psi) {
  Eigen::Index i = 0;
  psi.cwiseAbs2().maxCoeff(&i);
  return static_cast<int>(i);
}

Eigen::VectorXcd phase_aligned(const Eigen::VectorXcd& psi, int pin) {
  return psi * std::polar(1.0, -std::arg(psi[pin]));
}

}  // namespace

Eigen::VectorXd pack_point(const Eigen::VectorXcd& psi, double eps, double g) {
  const auto d = psi.size();
  Eigen::VectorXd v(2 * d + 2);
  v.head(d) = psi.real();
  v.segment(d, d) = psi.imag();
  v[2 * d] = eps;
  v[2 * d + 1] = g;
  return v;
}

OrbitSolution solve_orbit(const PeriodMapFactory& factory, const Eigen::VectorXcd& seed, double eps_seed, double g,
                          const NewtonOptions& options) {
  const int d = static_cast<int>(seed.size());
  const int pin = largest_component(seed);
  OrbitSystem system(factory, d, pin, false, options);
  return run_newton(system, pack_point(phase_aligned(seed, pin), eps_seed, g), d, options);
}

OrbitSolution solve_orbit_arclength(const PeriodMapFactory& factory, const Eigen::VectorXd& predictor,
                                    const Eigen::VectorXd& tangent, const NewtonOptions& options) {
  const int d = static_cast<int>(predictor.size() - 2) / 2;
  const Point p = unpack(predictor, d);
  const int pin = largest_component(p.psi);
  OrbitSystem system(factory, d, pin, true, options);
  system.set_arclength(predictor, tangent);
  return run_newton(system, predictor, d, options);
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::max_g_reached: return "max_g_reached";
    case Termination::fold_detected: return "fold_detected";
    case Termination::convergence_failure: return "convergence_failure";
  }
  return "unknown";
}

namespace {

double overlap_modulus(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  return std::abs(a.dot(b)) / std::sqrt(a.squaredNorm() * b.squaredNorm());
}

Eigen::VectorXd packed(const OrbitSolution& s, int pin) { return pack_point(phase_aligned(s.state, pin), s.quasienergy, s.g); }

// Pseudo-arclength continuation from the last two branch points. Points with
// increasing g are appended to branch.points until g turns around; after the
// turn they go to branch.beyond_fold.
void arclength_past_failure(const PeriodMapFactory& factory, OrbitBranch& branch, const ContinuationOptions& options) {
  const auto& pts = branch.points;
  if (pts.size() < 2) {
    branch.terminated_by = Termination::convergence_failure;
    branch.diagnostic = "continuation failed before two points were available";
    return;
  }
  const int pin = largest_component(pts.back().state);
  Eigen::VectorXd prev = packed(pts[pts.size() - 2], pin);
  Eigen::VectorXd last = packed(pts.back(), pin);
  const double deps_dg_before = (last[last.size() - 2] - prev[prev.size() - 2]) / (last[last.size() - 1] - prev[prev.size() - 1]);
  const double ds = (last - prev).norm();
  bool turned = false;
  double g_peak = last[last.size() - 1];
  int steps_after = 0;

  for (int step = 0; step < 400; ++step) {
    Eigen::VectorXd tangent = (last - prev).normalized();
    const Eigen::VectorXd predictor = last + ds * tangent;
    OrbitSolution sol;
    try {
      sol = solve_orbit_arclength(factory, predictor, tangent, options.newton);
    } catch (const ConvergenceError& e) {
      if (!turned) {
        branch.terminated_by = Termination::convergence_failure;
        branch.diagnostic = std::string("arclength continuation failed: ") + e.what();
      }
      return;
    }
    const Eigen::VectorXd next = packed(sol, pin);
    if (overlap_modulus(sol.state, unpack(last, static_cast<int>(sol.state.size())).psi) <= options.overlap_floor) {
      if (!turned) {
        branch.terminated_by = Termination::convergence_failure;
        branch.diagnostic = "arclength step jumped to a distant solution";
      }
      return;
    }
    const double g_next = sol.g;
    const double g_last = last[last.size() - 1];
    if (!turned && g_next < g_last) {
      const double deps_dg_after = (next[next.size() - 2] - last[last.size() - 2]) / (g_next - g_last);
      turned = true;
      branch.fold_g = g_peak;
      branch.terminated_by = Termination::fold_detected;
      std::ostringstream msg;
      msg << "g turned at " << g_peak << "; d eps/d g " << deps_dg_before << " -> " << deps_dg_after;
      branch.diagnostic = msg.str();
    }
    if (turned) {
      branch.beyond_fold.push_back(sol);
      if (++steps_after >= options.max_fold_steps || sol.g <= branch.points.front().g) return;
    } else {
      branch.points.push_back(sol);
      g_peak = std::max(g_peak, g_next);
    }
    prev = std::move(last);
    last = next;
  }
}

}  // namespace

std::vector<OrbitSolution> trace_arclength(const PeriodMapFactory& factory, const OrbitSolution& a,
                                           const OrbitSolution& b, double ds, int max_steps,
                                           const std::function<bool(const OrbitSolution&)>& stop,
                                           const NewtonOptions& options) {
  if (!(ds > 0.0)) throw std::invalid_argument("arclength step must be positive");
  const int pin = largest_component(b.state);
  Eigen::VectorXd prev = packed(a, pin);
  Eigen::VectorXd last = packed(b, pin);
  std::vector<OrbitSolution> out;
  for (int step = 0; step < max_steps; ++step) {
    const Eigen::VectorXd tangent = (last - prev).normalized();
    OrbitSolution sol;
    try {
      sol = solve_orbit_arclength(factory, last + ds * tangent, tangent, options);
    } catch (const ConvergenceError&) {
      break;
    }
    prev = std::move(last);
    last = packed(sol, pin);
    out.push_back(sol);
    if (stop(sol)) break;
  }
  return out;
}

OrbitBranch continue_orbit(const PeriodMapFactory& factory, const OrbitSolution& start, double g_max, double dg,
                           const ContinuationOptions& options) {
  if (!(dg > 0.0)) throw std::invalid_argument("continuation step dg must be positive");
  OrbitBranch branch;
  branch.points.push_back(start);
  double step = dg;
  int halvings = 0;
  const double g_eps = 1e-12 * std::max(1.0, std::abs(g_max));

  while (branch.points.back().g < g_max - g_eps) {
    const OrbitSolution& last = branch.points.back();
    const double g_try = std::min(last.g + step, g_max);
    const int pin = largest_component(last.state);
    Eigen::VectorXcd seed = phase_aligned(last.state, pin);
    double eps_seed = last.quasienergy;
    if (branch.points.size() >= 2) {
      const OrbitSolution& prev = branch.points[branch.points.size() - 2];
      const double ratio = (g_try - last.g) / (last.g - prev.g);
      seed += ratio * (seed - phase_aligned(prev.state, pin));
      seed.normalize();
      seed *= std::sqrt(options.newton.target_norm2);
      eps_seed += ratio * (last.quasienergy - prev.quasienergy);
    }

    bool ok = false;
    try {
      OrbitSolution sol = solve_orbit(factory, seed, eps_seed, g_try, options.newton);
      if (overlap_modulus(sol.state, last.state) > options.overlap_floor) {
        branch.points.push_back(std::move(sol));
        ok = true;
      }
    } catch (const ConvergenceError&) {
    }

    if (ok) {
      if (halvings > 0) {
        --halvings;
        step *= 2.0;
      }
      continue;
    }
    if (halvings < options.max_halvings) {
      ++halvings;
      step *= 0.5;
      continue;
    }
    if (options.check_fold) {
      arclength_past_failure(factory, branch, options);
    } else {
      branch.terminated_by = Termination::convergence_failure;
      branch.diagnostic = "Newton failed after step refinement";
    }
    return branch;
  }
  branch.terminated_by = Termination::max_g_reached;
  return branch;
}

// ---------------------------------------------------------------------------
// Lattice

namespace {

class LatticeMap {
 public:
  LatticeMap(const ModelParams& params, const DrivingField& field, double t0)
      : params_(params), field_(field), t0_(t0) {}

  Eigen::VectorXcd operator()(const Eigen::VectorXcd& psi, double g) {
    if (!prop_ || cached_g_ != g) {
      ModelParams p = params_;
      p.g = g;
      prop_ = std::make_shared<SplitStepPropagator>(p, field_);
      cached_g_ = g;
    }
    Eigen::VectorXcd c = psi;
    prop_->advance(c, t0_, prop_->steps_per_period());
    return c;
  }

 private:
  ModelParams params_;
  DrivingField field_;
  double t0_;
  std::shared_ptr<SplitStepPropagator> prop_;
  double cached_g_ = 0.0;
};

NonlinearFloquetState to_state(const OrbitSolution& s, int n_max) {
  return {WaveFunction(n_max, s.state), s.quasienergy, s.g, s.residual, s.iterations};
}

void check_cutoff(const WaveFunction& psi, const ModelParams& params) {
  if (psi.n_max() != params.n_max) throw std::invalid_argument("state cutoff differs from params.n_max");
}

}  // namespace

PeriodMapFactory lattice_map_factory(const ModelParams& params, const DrivingField& field, double t0) {
  params.validate(field);
  return [params, field, t0]() -> ParamPeriodMap { return LatticeMap(params, field, t0); };
}

WaveFunction period_map(const WaveFunction& psi, const ModelParams& params, const DrivingField& field, double t0) {
  check_cutoff(psi, params);
  SplitStepPropagator prop(params, field);
  Eigen::VectorXcd c = psi.coeffs();
  prop.advance(c, t0, prop.steps_per_period());
  return WaveFunction(psi.n_max(), std::move(c));
}

Eigen::VectorXd residual(const Eigen::VectorXd& y, const ModelParams& params, const DrivingField& field, double t0) {
  const int d = params.dim();
  if (y.size() != 2 * d + 1) throw std::invalid_argument("extended vector must have 2D + 1 entries");
  Eigen::VectorXcd psi(d);
  for (int i = 0; i < d; ++i) psi[i] = cplx(y[i], y[d + i]);
  const WaveFunction mapped = period_map(WaveFunction(params.n_max, psi), params, field, t0);
  const Eigen::VectorXcd r = std::polar(1.0, y[2 * d]) * mapped.coeffs() - psi;
  Eigen::VectorXd f(2 * d + 1);
  f.head(d) = r.real();
  f.segment(d, d) = r.imag();
  // Norm change over one period. It vanishes for the norm-conserving flow, so
  // the Newton solver replaces this row by |psi|^2 - 1.
  f[2 * d] = mapped.norm2() - psi.squaredNorm();
  return f;
}

NonlinearFloquetState newton_solve(const WaveFunction& seed, double eps_seed, const ModelParams& params,
                                   const DrivingField& field, double t0, const NewtonOptions& options) {
  check_cutoff(seed, params);
  const OrbitSolution s = solve_orbit(lattice_map_factory(params, field, t0), seed.coeffs(), eps_seed, params.g, options);
  return to_state(s, params.n_max);
}

double period_mean_momentum(const WaveFunction& psi, const ModelParams& params, const DrivingField& field, double t0) {
  check_cutoff(psi, params);
  SplitStepPropagator prop(params, field);
  Eigen::VectorXcd c = psi.coeffs();
  const int steps = prop.steps_per_period();
  double acc = 0.0;
  prop.advance_visit(c, t0, steps, [&](long k, double, const Eigen::VectorXcd& cur) {
    const double w = (k == 0 || k == steps) ? 0.5 : 1.0;
    acc += w * mean_momentum(cur, params.mu);
  });
  return acc / steps;
}

Branch continue_in_g(const NonlinearFloquetState& start, double g_max, double dg, const ModelParams& params,
                     const DrivingField& field, double t0, const ContinuationOptions& options) {
  check_cutoff(start.state, params);
  OrbitSolution s0{start.state.coeffs(), start.quasienergy, start.g, start.residual, start.iterations, 1.0};
  const OrbitBranch ob = continue_orbit(lattice_map_factory(params, field, t0), s0, g_max, dg, options);

  Branch out;
  out.terminated_by = ob.terminated_by;
  out.fold_g = ob.fold_g;
  out.diagnostic = ob.diagnostic;
  auto momentum = [&](const OrbitSolution& s) {
    ModelParams p = params;
    p.g = s.g;
    return period_mean_momentum(WaveFunction(params.n_max, s.state), p, field, t0);
  };
  for (const auto& s : ob.points) {
    out.points.push_back(to_state(s, params.n_max));
    out.momenta.push_back(momentum(s));
  }
  for (const auto& s : ob.beyond_fold) {
    out.beyond_fold.push_back(to_state(s, params.n_max));
    out.beyond_fold_momenta.push_back(momentum(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Orbit integrals

Orbit sample_orbit(const WaveFunction& psi, const ModelParams& params, const DrivingField& field, double t0,
                   int n_intervals) {
  check_cutoff(psi, params);
  SplitStepPropagator prop(params, field);
  const int steps = prop.steps_per_period();
  if (n_intervals < 1 || steps % n_intervals != 0) {
    throw std::invalid_argument("orbit samples must divide the steps per period");
  }
  const int every = steps / n_intervals;
  Orbit orbit;
  orbit.period = field.period();
  Eigen::VectorXcd c = psi.coeffs();
  prop.advance_visit(c, t0, steps, [&](long k, double, const Eigen::VectorXcd& cur) {
    if (k % every == 0) orbit.samples.emplace_back(psi.n_max(), cur);
  });
  return orbit;
}

double quartic_density_integral(const WaveFunction& psi) {
  const int m = dealiased_grid_size(psi.n_max());  // > 4 n_max: |psi|^4 is resolved exactly
  const std::vector<cplx> values = psi.to_position(m);
  double acc = 0.0;
  for (const cplx& v : values) {
    const double r = std::norm(v);
    acc += r * r;
  }
  return acc * kTwoPi / m;
}

double orbit_quartic_integral(const Orbit& orbit) {
  const std::size_t n = orbit.samples.size();
  if (n < 2) throw std::invalid_argument("orbit needs at least two samples");
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = (k == 0 || k + 1 == n) ? 0.5 : 1.0;
    acc += w * quartic_density_integral(orbit.samples[k]);
  }
  return acc * orbit.period / static_cast<double>(n - 1);
}

double quasienergy_perturbative(const Orbit& orbit, double g, double mu, double base_eps) {
  if (g == 0.0) return base_eps;
  return base_eps + g / mu * orbit_quartic_integral(orbit);
}

TwoStateWeights project_two_state(const WaveFunction& phi, const WaveFunction& phi1_lin, const WaveFunction& phi2_lin) {
  TwoStateWeights w;
  w.a2 = std::norm(phi1_lin.overlap(phi));
  w.b2 = std::norm(phi2_lin.overlap(phi));
  w.outside = phi.norm2() - w.a2 - w.b2;
  return w;
}

double quasienergy_two_state(const TwoStateWeights& weights, double eps1, double eps2, const Orbit& orbit, double g,
                             double mu) {
  const double total = weights.a2 + weights.b2;
  if (!(total > 0.0)) throw std::invalid_argument("state has no weight in the two-state subspace");
  const double eps2_near = eps1 + wrap_phase(eps2 - eps1);
  const double linear = (weights.a2 * eps1 + weights.b2 * eps2_near) / total;
  if (g == 0.0) return linear;
  return linear + g / mu * orbit_quartic_integral(orbit);
}

double critical_g(const Orbit& phi1_lin, const Orbit& phi2_lin, double eps1, double eps2, double mu) {
  const double gap = wrap_phase(eps2 - eps1);
  const double denom = orbit_quartic_integral(phi1_lin) - orbit_quartic_integral(phi2_lin);
  if (std::abs(denom) < 1e-12) {
    throw DegeneratePairError("states have equal quartic integrals: no crossing in g");
  }
  if (gap == 0.0) return 0.0;
  return mu * gap / denom;
}

}  // namespace ratchet
