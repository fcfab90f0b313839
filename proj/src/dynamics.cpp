#include "kposim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kpo {

std::string to_string(Method m) { return m == Method::dopri5 ? "dopri5" : "rk4"; }

Method method_from_string(const std::string& s) {
  if (s == "dopri5") return Method::dopri5;
  if (s == "rk4") return Method::rk4;
  throw std::invalid_argument("unknown integrator '" + s + "'");
}

void SolverSettings::validate() const {
  if (!(rel_tol > 0.0 && rel_tol <= 1e-2)) throw std::invalid_argument("rel_tol must be in (0, 1e-2]");
  if (!(abs_tol > 0.0 && abs_tol <= 1e-2)) throw std::invalid_argument("abs_tol must be in (0, 1e-2]");
  if (!(max_step > 0.0)) throw std::invalid_argument("max_step must be positive");
  if (initial_step < 0.0) throw std::invalid_argument("initial_step must be non-negative");
  if (method == Method::rk4 && !(initial_step > 0.0) && !std::isfinite(max_step))
    throw std::invalid_argument("rk4 needs initial_step or a finite max_step");
  if (samples < 2) throw std::invalid_argument("samples must be >= 2");
}

std::vector<double> sample_grid(double t0, double t1, int samples) {
  samples = std::max(samples, 2);
  std::vector<double> g(samples);
  for (int k = 0; k < samples; ++k) g[k] = t0 + (t1 - t0) * k / (samples - 1);
  g.back() = t1;
  return g;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

double scaled_rms(const Vector& e, const Vector& y0, const Vector& y1, double atol, double rtol) {
  double acc = 0.0;
  const Eigen::Index n = e.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = std::abs(e[i]) / sc;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(n));
}

bool all_finite(const Vector& v) { return v.allFinite(); }

void hermite(double theta, double h, const Vector& y0, const Vector& f0, const Vector& y1,
             const Vector& f1, Vector& out) {
  const double t2 = theta * theta, t3 = t2 * theta;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + theta, h01 = -2 * t3 + 3 * t2,
               h11 = t3 - t2;
  out = h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1;
}

class Sampler {
 public:
  Sampler(const std::vector<double>& times, const Observer& observe)
      : times_(times), observe_(observe) {}

  void at_start(double t0, const Vector& y) {
    while (next_ < times_.size() && times_[next_] <= t0) observe_(times_[next_++], y);
  }

  void over_step(double t, double h, const Vector& y0, const Vector& f0, const Vector& y1,
                 const Vector& f1, bool last) {
    const double t_end = t + h;
    while (next_ < times_.size() && (times_[next_] <= t_end || last)) {
      const double ts = times_[next_];
      if (ts >= t_end) {
        observe_(ts, y1);
      } else {
        hermite((ts - t) / h, h, y0, f0, y1, f1, scratch_);
        observe_(ts, scratch_);
      }
      ++next_;
    }
  }

 private:
  const std::vector<double>& times_;
  const Observer& observe_;
  std::size_t next_ = 0;
  Vector scratch_;
};

[[noreturn]] void fail_underflow(double t, double h) {
  std::ostringstream os;
  os << "step size underflow (h = " << h << ") at t = " << t;
  throw ConvergenceError(os.str());
}

SolverStats integrate_dopri5(const Rhs& f, Vector& y, double t0, double t1,
                             const SolverSettings& s, Sampler& sampler, const StepHook& hook) {
  SolverStats st;
  const Eigen::Index n = y.size();
  Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), yt(n), yn(n), err(n);

  auto eval = [&](double t, const Vector& x, Vector& dx) {
    f(t, x, dx);
    ++st.rhs_evals;
  };

  double t = t0;
  eval(t, y, k1);
  if (!all_finite(k1)) throw NumericalError("non-finite derivative at the initial time");
  sampler.at_start(t0, y);

  const double span = t1 - t0;
  double h = s.initial_step;
  if (h <= 0.0) {
    const Vector zero = Vector::Zero(n);
    const double d0 = scaled_rms(y, y, zero, s.abs_tol, s.rel_tol);
    const double d1 = scaled_rms(k1, y, zero, s.abs_tol, s.rel_tol);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * std::max(span, 1.0) : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    yt = y + h0 * k1;
    eval(t + h0, yt, k2);
    const double d2 = scaled_rms(k2 - k1, y, zero, s.abs_tol, s.rel_tol) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    h = std::min(100.0 * h0, h1);
  }

  const double tiny = 1e-14 * std::max(std::abs(t0), std::abs(t1)) + 1e-300;
  while (t < t1) {
    if (st.accepted + st.rejected >= s.max_steps) throw ConvergenceError("step budget exhausted");
    h = std::min(h, s.max_step);
    bool last = false;
    if (t + h >= t1 || t1 - (t + h) < tiny) {
      h = t1 - t;
      last = true;
    }
    if (h < tiny) fail_underflow(t, h);

    yt = y + h * (a21 * k1);
    eval(t + c2 * h, yt, k2);
    yt = y + h * (a31 * k1 + a32 * k2);
    eval(t + c3 * h, yt, k3);
    yt = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    eval(t + c4 * h, yt, k4);
    yt = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    eval(t + c5 * h, yt, k5);
    yt = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    eval(t + h, yt, k6);
    yn = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const double t_new = last ? t1 : t + h;
    eval(t_new, yn, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const double en = scaled_rms(err, y, yn, s.abs_tol, s.rel_tol);
    if (!std::isfinite(en)) {
      if (!all_finite(y)) throw NumericalError("state became non-finite");
      ++st.rejected;
      h *= 0.1;
      if (h < tiny) {
        std::ostringstream os;
        os << "derivative stays non-finite as the step shrinks at t = " << t;
        throw NumericalError(os.str());
      }
      continue;
    }
    if (en <= 1.0) {
      sampler.over_step(t, h, y, k1, yn, k7, last);
      if (hook) hook(yn, k7);
      st.min_step = std::min(st.min_step, h);
      st.max_step = std::max(st.max_step, h);
      ++st.accepted;
      t = t_new;
      y.swap(yn);
      k1.swap(k7);
      const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      if (!last) h *= fac;
    } else {
      ++st.rejected;
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      if (h < tiny) fail_underflow(t, h);
    }
  }
  if (!all_finite(y)) throw NumericalError("state became non-finite");
  return st;
}

SolverStats integrate_rk4(const Rhs& f, Vector& y, double t0, double t1, const SolverSettings& s,
                          Sampler& sampler, const StepHook& hook) {
  SolverStats st;
  const Eigen::Index n = y.size();
  Vector k1(n), k2(n), k3(n), k4(n), yt(n), yn(n), fn(n);
  auto eval = [&](double t, const Vector& x, Vector& dx) {
    f(t, x, dx);
    ++st.rhs_evals;
  };

  double h_req = s.initial_step > 0.0 ? s.initial_step : s.max_step;
  h_req = std::min(h_req, s.max_step);
  const auto steps = static_cast<std::int64_t>(std::ceil((t1 - t0) / h_req - 1e-9));
  if (steps > s.max_steps) throw ConvergenceError("step budget exhausted");
  const double h = (t1 - t0) / static_cast<double>(std::max<std::int64_t>(steps, 1));

  eval(t0, y, k1);
  sampler.at_start(t0, y);
  for (std::int64_t k = 0; k < steps; ++k) {
    const double t = t0 + k * h;
    const bool last = k + 1 == steps;
    const double t_new = last ? t1 : t0 + (k + 1) * h;
    yt = y + (0.5 * h) * k1;
    eval(t + 0.5 * h, yt, k2);
    yt = y + (0.5 * h) * k2;
    eval(t + 0.5 * h, yt, k3);
    yt = y + h * k3;
    eval(t_new, yt, k4);
    yn = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!all_finite(yn)) throw NumericalError("state became non-finite");
    eval(t_new, yn, fn);
    sampler.over_step(t, h, y, k1, yn, fn, last);
    if (hook) hook(yn, fn);
    y.swap(yn);
    k1.swap(fn);
    ++st.accepted;
  }
  st.min_step = st.max_step = h;
  return st;
}

}  // namespace

SolverStats integrate(const Rhs& f, Vector& y, double t0, double t1, const SolverSettings& s,
                      const std::vector<double>& sample_times, const Observer& observe,
                      const StepHook& hook) {
  s.validate();
  if (!(t1 > t0)) throw std::invalid_argument("integration interval must have t1 > t0");
  if (!all_finite(y)) throw NumericalError("initial state is non-finite");
  Sampler sampler(sample_times, observe);
  return s.method == Method::dopri5 ? integrate_dopri5(f, y, t0, t1, s, sampler, hook)
                                    : integrate_rk4(f, y, t0, t1, s, sampler, hook);
}

// ---------------------------------------------------------------------------

namespace {

// occupation[mode][flat index]
std::vector<Eigen::VectorXd> occupations(const HilbertSpace& space) {
  std::vector<Eigen::VectorXd> occ(space.modes(), Eigen::VectorXd(space.total_dim()));
  for (int flat = 0; flat < space.total_dim(); ++flat) {
    int rem = flat;
    for (int m = space.modes() - 1; m >= 0; --m) {
      occ[m](flat) = rem % space.dim(m);
      rem /= space.dim(m);
    }
  }
  return occ;
}

Trajectory empty_trajectory(const HilbertSpace& space, std::size_t samples) {
  Trajectory tr;
  tr.times.reserve(samples);
  tr.norm.reserve(samples);
  tr.photons.assign(space.modes(), {});
  for (auto& p : tr.photons) p.reserve(samples);
  return tr;
}

void hook_scale(Vector& y, Vector& dy, double factor) {
  y *= factor;
  dy *= factor;
}

}  // namespace

namespace {

// H = sum_m H0_m + V(t), with H0_m the static single-mode terms. The state is
// carried as y = exp(i H0 (t - t0)) Q^dag psi in the per-mode eigenbasis Q_m.
class StaticFrame {
 public:
  explicit StaticFrame(const TimeDependentHamiltonian& h) : space_(h.space()), rest_(h.space()) {
    const int modes = space_.modes();
    std::vector<Matrix> h0(modes);
    for (int m = 0; m < modes; ++m) h0[m] = Matrix::Zero(space_.dim(m), space_.dim(m));
    std::vector<const HamiltonianTerm*> moving;
    for (const auto& term : h.terms()) {
      if (!term.coeff && term.factors.size() == 1)
        h0[term.factors[0].mode] += term.factors[0].matrix;
      else
        moving.push_back(&term);
    }
    basis_.resize(modes);
    levels_.resize(modes);
    std::vector<LocalFactor> to_lab, to_eigen;
    for (int m = 0; m < modes; ++m) {
      const Matrix sym = 0.5 * (h0[m] + h0[m].adjoint());
      Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
      if (es.info() != Eigen::Success) throw NumericalError("frame diagonalization failed");
      basis_[m] = es.eigenvectors();
      levels_[m] = es.eigenvalues();
      to_lab.push_back({m, basis_[m]});
      to_eigen.push_back({m, basis_[m].adjoint()});
    }
    for (const HamiltonianTerm* term : moving) {
      HamiltonianTerm rotated = *term;
      for (auto& f : rotated.factors)
        f.matrix = basis_[f.mode].adjoint() * f.matrix * basis_[f.mode];
      rest_.add_term(std::move(rotated));
    }
    to_lab_ = TimeDependentHamiltonian(space_);
    to_lab_.add_product(std::move(to_lab));
    to_eigen_ = TimeDependentHamiltonian(space_);
    to_eigen_.add_product(std::move(to_eigen));
  }

  const TimeDependentHamiltonian& rest() const { return rest_; }

  /// exp(-i E tau) on the full product basis.
  void phases(double tau, Vector& out) const {
    out.resize(space_.total_dim());
    out.setOnes();
    Eigen::Index stride = space_.total_dim();
    for (int m = 0; m < space_.modes(); ++m) {
      const Eigen::Index dm = space_.dim(m);
      stride /= dm;
      Vector local(dm);
      for (Eigen::Index k = 0; k < dm; ++k) local[k] = std::exp(cd(0.0, -levels_[m][k] * tau));
      for (Eigen::Index i = 0; i < out.size(); ++i) out[i] *= local[(i / stride) % dm];
    }
  }

  Vector to_frame(const Vector& psi) const {
    Vector y(psi.size());
    HamiltonianAction(to_eigen_).apply(0.0, psi.data(), y.data());
    return y;
  }

  Vector to_lab(double tau, const Vector& y) const {
    Vector ph;
    phases(tau, ph);
    const Vector z = ph.cwiseProduct(y);
    Vector psi(z.size());
    HamiltonianAction(to_lab_).apply(0.0, z.data(), psi.data());
    return psi;
  }

 private:
  HilbertSpace space_;
  std::vector<Matrix> basis_;
  std::vector<Eigen::VectorXd> levels_;
  TimeDependentHamiltonian rest_, to_lab_, to_eigen_;
};

Propagation<StateVector> propagate_in_static_frame(const TimeDependentHamiltonian& h,
                                                   const StateVector& psi0, double t0, double t1,
                                                   const SolverSettings& settings) {
  const StaticFrame frame(h);
  HamiltonianAction action(frame.rest());
  const auto occ = occupations(h.space());
  const auto grid = sample_grid(t0, t1, settings.samples);
  Trajectory tr = empty_trajectory(h.space(), grid.size());

  Vector ph, z, w;
  Rhs rhs = [&](double t, const Vector& y, Vector& dy) {
    frame.phases(t - t0, ph);
    z = ph.cwiseProduct(y);
    w.resize(z.size());
    action.apply(t, z.data(), w.data());
    dy = cd(0.0, -1.0) * ph.conjugate().cwiseProduct(w);
  };
  Observer obs = [&](double t, const Vector& y) {
    const Eigen::VectorXd p = frame.to_lab(t - t0, y).cwiseAbs2();
    tr.times.push_back(t);
    tr.norm.push_back(std::sqrt(p.sum()));
    for (std::size_t m = 0; m < occ.size(); ++m) tr.photons[m].push_back(p.dot(occ[m]));
  };
  StepHook hook;
  if (settings.renormalize) hook = [](Vector& y, Vector& dy) { hook_scale(y, dy, 1.0 / y.norm()); };

  Vector y = frame.to_frame(psi0.amplitudes());
  tr.stats = integrate(rhs, y, t0, t1, settings, grid, obs, hook);
  return {StateVector(h.space(), frame.to_lab(t1 - t0, y)), std::move(tr)};
}

}  // namespace

Propagation<StateVector> schrodinger_propagate(const TimeDependentHamiltonian& h,
                                               const StateVector& psi0, double t0, double t1,
                                               const SolverSettings& settings) {
  require_same_space(h.space(), psi0.space(), "schrodinger_propagate");
  if (settings.static_frame) return propagate_in_static_frame(h, psi0, t0, t1, settings);
  HamiltonianAction action(h);
  const auto occ = occupations(h.space());
  const auto grid = sample_grid(t0, t1, settings.samples);
  Trajectory tr = empty_trajectory(h.space(), grid.size());

  Rhs rhs = [&](double t, const Vector& y, Vector& dy) {
    action.apply(t, y.data(), dy.data());
    dy *= cd(0.0, -1.0);
  };
  Observer obs = [&](double t, const Vector& y) {
    const Eigen::VectorXd p = y.cwiseAbs2();
    tr.times.push_back(t);
    tr.norm.push_back(std::sqrt(p.sum()));
    for (std::size_t m = 0; m < occ.size(); ++m) tr.photons[m].push_back(p.dot(occ[m]));
  };
  StepHook hook;
  if (settings.renormalize) hook = [](Vector& y, Vector& dy) { hook_scale(y, dy, 1.0 / y.norm()); };

  Vector y = psi0.amplitudes();
  tr.stats = integrate(rhs, y, t0, t1, settings, grid, obs, hook);
  return {StateVector(h.space(), std::move(y)), std::move(tr)};
}

Propagation<DensityMatrix> lindblad_propagate(const TimeDependentHamiltonian& h,
                                              const DensityMatrix& rho0, double gamma, double t0,
                                              double t1, const SolverSettings& settings) {
  require_same_space(h.space(), rho0.space(), "lindblad_propagate");
  if (gamma < 0.0) throw std::invalid_argument("loss rate must be non-negative");
  const HilbertSpace& space = h.space();
  const Eigen::Index d = space.total_dim();

  // H_eff = H - i gamma/2 sum_j a_j^dag a_j
  TimeDependentHamiltonian h_eff = h;
  std::vector<TimeDependentHamiltonian> jumps;
  if (gamma > 0.0) {
    for (int j = 0; j < space.modes(); ++j) {
      const Matrix a = annihilation_matrix(space.dim(j));
      h_eff.add_local(j, cd(0.0, -0.5 * gamma) * (a.adjoint() * a), {}, "loss");
      TimeDependentHamiltonian jump(space);
      jump.add_local(j, a);
      jumps.push_back(std::move(jump));
    }
  }
  HamiltonianAction action(h_eff);
  std::vector<HamiltonianAction> jump_actions;
  for (const auto& j : jumps) jump_actions.emplace_back(j);

  Vector work(d * d), work2(d * d);
  // rho is column-major: flat = col * d + row, so left multiplication acts on
  // the trailing (row) modes with `d` leading batch, right multiplication by
  // A^T on the leading (column) modes with `d` trailing batch.
  Rhs rhs = [&](double t, const Vector& y, Vector& dy) {
    action.apply(t, y.data(), work.data(), d, 1);
    Eigen::Map<const Matrix> x(work.data(), d, d);
    Eigen::Map<Matrix> out(dy.data(), d, d);
    out = cd(0.0, -1.0) * x;
    out += out.adjoint().eval();
    for (auto& ja : jump_actions) {
      ja.apply(t, y.data(), work.data(), d, 1);         // a rho
      ja.apply(t, work.data(), work2.data(), 1, d);     // (a rho) a^dag
      dy += gamma * work2;
    }
  };

  const auto occ = occupations(space);
  const auto grid = sample_grid(t0, t1, settings.samples);
  Trajectory tr = empty_trajectory(space, grid.size());
  Observer obs = [&](double t, const Vector& y) {
    Eigen::Map<const Matrix> r(y.data(), d, d);
    const Eigen::VectorXd diag = r.diagonal().real();
    tr.times.push_back(t);
    tr.norm.push_back(diag.sum());
    for (std::size_t m = 0; m < occ.size(); ++m) tr.photons[m].push_back(diag.dot(occ[m]));
  };
  const bool renorm = settings.renormalize;
  StepHook hook = [d, renorm](Vector& y, Vector& dy) {
    Eigen::Map<Matrix> r(y.data(), d, d);
    Eigen::Map<Matrix> dr(dy.data(), d, d);
    r = (0.5 * (r + r.adjoint())).eval();
    dr = (0.5 * (dr + dr.adjoint())).eval();
    if (renorm) hook_scale(y, dy, 1.0 / r.trace().real());
  };

  Vector y = Eigen::Map<const Vector>(rho0.matrix().data(), d * d);
  tr.stats = integrate(rhs, y, t0, t1, settings, grid, obs, hook);
  Matrix rho = Eigen::Map<const Matrix>(y.data(), d, d);
  return {DensityMatrix(space, std::move(rho)), std::move(tr)};
}

Propagation<DensityMatrix> lindblad_propagate(const TimeDependentHamiltonian& h,
                                              const StateVector& psi0, double gamma, double t0,
                                              double t1, const SolverSettings& settings) {
  return lindblad_propagate(h, DensityMatrix::pure(psi0), gamma, t0, t1, settings);
}

std::vector<StateVector> reference_propagate(const TimeDependentHamiltonian& h_reference,
                                             const std::vector<StateVector>& states, double t0,
                                             double t1, const SolverSettings& settings) {
  SolverSettings s = settings;
  s.samples = 2;
  std::vector<StateVector> out;
  out.reserve(states.size());
  for (const auto& psi : states)
    out.push_back(schrodinger_propagate(h_reference, psi, t0, t1, s).state);
  return out;
}

double state_fidelity(const StateVector& a, const StateVector& b) {
  return std::norm(inner_product(a, b));
}

}  // namespace kpo
