// Copyright 2026 The ndpkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NDPKIT_DMP_HPP_
#define NDPKIT_DMP_HPP_

// Dynamic movement primitives: a critically damped point attractor
//   yddot = alpha * (beta * (g - y) - ydot) + f(x)
// plus a normalized RBF forcing term
//   f(x) = (sum_i psi_i(x) w_i / sum_i psi_i(x)) * x * (g - y0)
// driven by an exponentially decaying phase xdot = -alpha_x * x.
// Everything here is a pure function of its inputs.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ndpkit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Thrown by the integrator when the state stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int step, const std::string& what)
      : std::runtime_error("integration diverged at step " +
                           std::to_string(step) + ": " + what),
        step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

// First-order phase system xdot = -alpha_x * x, integrated with explicit
// Euler steps. alpha_x defaults to ln(1/floor)/duration so the phase reaches
// `floor` (1% of x0) at the nominal duration.
struct PhaseConfig {
  double alpha_x = 4.605170185988091;  // ln(100) / duration
  double x0 = 1.0;
  double duration = 1.0;

  static PhaseConfig for_duration(double duration, double floor = 0.01) {
    PhaseConfig cfg;
    cfg.duration = duration;
    cfg.alpha_x = std::log(1.0 / floor) / duration;
    return cfg;
  }

  void validate() const {
    if (!(alpha_x > 0.0) || !std::isfinite(alpha_x))
      throw std::invalid_argument("PhaseConfig: alpha_x must be positive");
    if (!(x0 > 0.0) || !std::isfinite(x0))
      throw std::invalid_argument("PhaseConfig: x0 must be positive");
    if (!(duration > 0.0) || !std::isfinite(duration))
      throw std::invalid_argument("PhaseConfig: duration must be positive");
  }
};

// Radial basis bank psi_i(x) = exp(-h_i * (x - c_i)^2) with centers ordered
// along the decaying phase (strictly decreasing).
struct RbfBank {
  VectorXd centers;
  VectorXd widths;

  int size() const { return static_cast<int>(centers.size()); }

  void validate() const {
    if (centers.size() < 1)
      throw std::invalid_argument("RbfBank: need at least one basis");
    if (centers.size() != widths.size())
      throw std::invalid_argument("RbfBank: centers/widths size mismatch");
    for (int i = 0; i < size(); ++i) {
      if (!(widths[i] > 0.0))
        throw std::invalid_argument("RbfBank: widths must be positive");
      if (i > 0 && !(centers[i] < centers[i - 1]))
        throw std::invalid_argument("RbfBank: centers must be decreasing");
    }
  }

  // Centers equally spaced in time mapped through the phase decay,
  // c_i = exp(-alpha_x * duration * i/(n-1)); widths h_i = n^1.5 / c_i so
  // adjacent kernels keep overlapping as they shrink with the phase.
  static RbfBank make(int n, const PhaseConfig& phase) {
    if (n < 1) throw std::invalid_argument("RbfBank: n must be >= 1");
    RbfBank bank;
    bank.centers.resize(n);
    bank.widths.resize(n);
    const double span = phase.alpha_x * phase.duration;
    for (int i = 0; i < n; ++i) {
      const double frac = (n == 1) ? 0.5 : static_cast<double>(i) / (n - 1);
      bank.centers[i] = phase.x0 * std::exp(-span * frac);
      bank.widths[i] = std::pow(n, 1.5) / bank.centers[i];
    }
    return bank;
  }
};

// Full parameterization of one movement primitive. beta is tied to alpha/4
// (critical damping); use make() so the invariant holds exactly.
struct DmpParams {
  MatrixXd w;      // n_basis x dims
  VectorXd g;      // dims
  VectorXd y0;     // dims
  VectorXd ydot0;  // dims
  double alpha = 25.0;
  double beta = 6.25;

  int dims() const { return static_cast<int>(g.size()); }

  static DmpParams make(int n_basis, int dims, double alpha = 25.0) {
    DmpParams p;
    p.w = MatrixXd::Zero(n_basis, dims);
    p.g = VectorXd::Zero(dims);
    p.y0 = VectorXd::Zero(dims);
    p.ydot0 = VectorXd::Zero(dims);
    p.alpha = alpha;
    p.beta = alpha / 4.0;
    return p;
  }

  void validate(int n_basis) const {
    if (!(alpha > 0.0))
      throw std::invalid_argument("DmpParams: alpha must be positive");
    if (beta != alpha / 4.0)
      throw std::invalid_argument("DmpParams: beta must equal alpha/4");
    if (w.rows() != n_basis || w.cols() != g.size() ||
        y0.size() != g.size() || ydot0.size() != g.size())
      throw std::invalid_argument("DmpParams: inconsistent shapes");
  }
};

// Time-indexed rollout. All arrays are steps x dims with a fixed step size.
struct Trajectory {
  double dt = 0.0;
  MatrixXd y;
  MatrixXd ydot;
  MatrixXd yddot;

  int steps() const { return static_cast<int>(y.rows()); }
  int dims() const { return static_cast<int>(y.cols()); }
};

// Phase values x[0..steps], x[0] = x0, one explicit Euler step per dt.
inline std::vector<double> phase_rollout(const PhaseConfig& cfg, int steps,
                                         double dt) {
  cfg.validate();
  if (steps < 1) throw std::invalid_argument("phase_rollout: steps must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("phase_rollout: dt must be positive");
  if (cfg.alpha_x * dt >= 1.0)
    throw std::invalid_argument("phase_rollout: alpha_x*dt must be < 1");
  std::vector<double> x(static_cast<size_t>(steps) + 1);
  x[0] = cfg.x0;
  const double decay = 1.0 - cfg.alpha_x * dt;
  for (int k = 1; k <= steps; ++k) x[k] = x[k - 1] * decay;
  return x;
}

// psi_i = exp(-h_i * (x - c_i)^2), each in (0, 1].
inline VectorXd basis_activations(double x, const RbfBank& bank) {
  const int n = bank.size();
  VectorXd psi(n);
  for (int i = 0; i < n; ++i) {
    const double d = x - bank.centers[i];
    psi[i] = std::exp(-bank.widths[i] * d * d);
  }
  return psi;
}

// Normalized basis row psi / sum(psi). The sum is clamped away from zero so
// the function stays total even when every kernel underflows.
inline VectorXd normalized_basis(double x, const RbfBank& bank) {
  VectorXd psi = basis_activations(x, bank);
  const double denom =
      std::max(psi.sum(), std::numeric_limits<double>::min() * bank.size());
  return psi / denom;
}

// f = (sum psi_i w_i / sum psi_i) * x * (g - y0), per dimension.
inline VectorXd forcing_term(double x, const DmpParams& params,
                             const RbfBank& bank) {
  if (bank.size() != params.w.rows())
    throw std::invalid_argument("forcing_term: bank/weight size mismatch");
  const VectorXd b = normalized_basis(x, bank);
  VectorXd f(params.dims());
  for (int d = 0; d < params.dims(); ++d)
    f[d] = b.dot(params.w.col(d)) * x * (params.g[d] - params.y0[d]);
  return f;
}

// Everything the reverse pass needs to differentiate one rollout: phases,
// normalized basis rows and the state at each micro step. Micro step s covers
// [s*dt/substeps, (s+1)*dt/substeps); entry S is the final state.
struct RolloutTrace {
  Trajectory traj;
  std::vector<double> phases;  // S+1
  MatrixXd basis;              // (S+1) x n, normalized rows
  MatrixXd y_micro;            // (S+1) x dims
  MatrixXd v_micro;            // (S+1) x dims
  int substeps = 1;
  double dt_micro = 0.0;
};

// Semi-implicit Euler rollout (velocity update first, then position) of
//   yddot = alpha*(beta*(g - y) - ydot) + f(x, g)
// recording steps rows. Row k holds the state at time k*dt together with the
// acceleration evaluated there. The phase advances by explicit Euler at the
// micro step size dt/substeps.
inline RolloutTrace integrate_traced(const DmpParams& params,
                                     const PhaseConfig& phase_cfg,
                                     const RbfBank& bank, int steps, double dt,
                                     int substeps = 1) {
  phase_cfg.validate();
  bank.validate();
  params.validate(bank.size());
  if (steps < 2) throw std::invalid_argument("integrate: steps must be >= 2");
  if (!(dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
  if (substeps < 1) throw std::invalid_argument("integrate: substeps must be >= 1");

  const int dims = params.dims();
  const int n = bank.size();
  const int micro_total = (steps - 1) * substeps;
  const double h = dt / substeps;
  if (phase_cfg.alpha_x * h >= 1.0)
    throw std::invalid_argument("integrate: alpha_x*dt/substeps must be < 1");

  RolloutTrace trace;
  trace.substeps = substeps;
  trace.dt_micro = h;
  trace.phases.resize(static_cast<size_t>(micro_total) + 1);
  trace.basis.resize(micro_total + 1, n);
  trace.y_micro.resize(micro_total + 1, dims);
  trace.v_micro.resize(micro_total + 1, dims);
  trace.traj.dt = dt;
  trace.traj.y.resize(steps, dims);
  trace.traj.ydot.resize(steps, dims);
  trace.traj.yddot.resize(steps, dims);

  VectorXd y = params.y0;
  VectorXd v = params.ydot0;
  double x = phase_cfg.x0;
  const double decay = 1.0 - phase_cfg.alpha_x * h;
  const VectorXd amp = params.g - params.y0;  // forcing scale per dim

  for (int s = 0; s <= micro_total; ++s) {
    const VectorXd b = normalized_basis(x, bank);
    trace.phases[s] = x;
    trace.basis.row(s) = b.transpose();
    trace.y_micro.row(s) = y.transpose();
    trace.v_micro.row(s) = v.transpose();

    VectorXd a(dims);
    for (int d = 0; d < dims; ++d) {
      const double f = b.dot(params.w.col(d)) * x * amp[d];
      a[d] = params.alpha * (params.beta * (params.g[d] - y[d]) - v[d]) + f;
    }

    if (s % substeps == 0) {
      const int row = s / substeps;
      trace.traj.y.row(row) = y.transpose();
      trace.traj.ydot.row(row) = v.transpose();
      trace.traj.yddot.row(row) = a.transpose();
      if (!trace.traj.y.row(row).allFinite() ||
          !trace.traj.ydot.row(row).allFinite() ||
          !trace.traj.yddot.row(row).allFinite())
        throw DivergenceError(row, "non-finite state");
    }
    if (s == micro_total) break;

    v += h * a;
    y += h * v;
    x *= decay;
  }
  return trace;
}

inline Trajectory integrate(const DmpParams& params,
                            const PhaseConfig& phase_cfg, const RbfBank& bank,
                            int steps, double dt, int substeps = 1) {
  return integrate_traced(params, phase_cfg, bank, steps, dt, substeps).traj;
}

// Same primitive rolled out with a different sample count; dt is scaled so
// the covered duration (steps-1)*dt stays fixed.
inline Trajectory rescale(const DmpParams& params, const PhaseConfig& phase_cfg,
                          const RbfBank& bank, int steps, double dt,
                          int new_steps, int substeps = 1) {
  if (new_steps < 2)
    throw std::invalid_argument("rescale: new_steps must be >= 2");
  const double new_dt = dt * (steps - 1) / static_cast<double>(new_steps - 1);
  return integrate(params, phase_cfg, bank, new_steps, new_dt, substeps);
}

// Classical regression fit of the basis weights to a demonstration.
// Sets g and y0 from the demo endpoints, computes the target force
// f* = yddot - alpha*(beta*(g - y) - ydot) per step, and solves per-dimension
// minimum-norm least squares against the normalized-basis * x design. When a
// dimension has g == y0 the forcing amplitude vanishes and w is set to zero.
inline DmpParams fit_weights_regression(const Trajectory& demo,
                                        const RbfBank& bank,
                                        const PhaseConfig& phase_cfg,
                                        double alpha = 25.0) {
  bank.validate();
  const int T = demo.steps();
  const int dims = demo.dims();
  const int n = bank.size();
  if (T < n)
    throw std::invalid_argument("fit_weights_regression: demo shorter than basis count");
  if (demo.ydot.rows() != T || demo.yddot.rows() != T ||
      demo.ydot.cols() != dims || demo.yddot.cols() != dims)
    throw std::invalid_argument("fit_weights_regression: mismatched demo shapes");
  if (!demo.y.allFinite() || !demo.ydot.allFinite() || !demo.yddot.allFinite())
    throw std::invalid_argument("fit_weights_regression: demo must be finite");

  DmpParams params = DmpParams::make(n, dims, alpha);
  params.y0 = demo.y.row(0).transpose();
  params.ydot0 = demo.ydot.row(0).transpose();
  params.g = demo.y.row(T - 1).transpose();

  const std::vector<double> x = phase_rollout(phase_cfg, T - 1, demo.dt);
  MatrixXd design(T, n);
  for (int k = 0; k < T; ++k)
    design.row(k) = normalized_basis(x[k], bank).transpose() * x[k];
  const auto solver = design.completeOrthogonalDecomposition();

  for (int d = 0; d < dims; ++d) {
    const double amp = params.g[d] - params.y0[d];
    const double scale = std::max({1.0, std::abs(params.g[d]), std::abs(params.y0[d])});
    if (std::abs(amp) <= 1e-12 * scale) {
      params.w.col(d).setZero();
      continue;
    }
    VectorXd target(T);
    for (int k = 0; k < T; ++k) {
      const double attractor =
          alpha * (params.beta * (params.g[d] - demo.y(k, d)) - demo.ydot(k, d));
      target[k] = (demo.yddot(k, d) - attractor) / amp;
    }
    params.w.col(d) = solver.solve(target);
  }
  return params;
}

}  // namespace ndpkit

#endif  // NDPKIT_DMP_HPP_
