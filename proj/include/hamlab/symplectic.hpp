#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hamlab/error.hpp"
#include "hamlab/field.hpp"

namespace hamlab {

/// What an integrator needs from a Hamiltonian.
template <class H>
concept FlowHamiltonian = requires(const H& h, std::span<const double> x, std::span<double> y) {
  { h.n() } -> std::convertible_to<std::size_t>;
  { h.energy(x, x) } -> std::convertible_to<double>;
  h.vector_field(x, x, y, y);
  { h.lipschitz_bound() } -> std::convertible_to<double>;
  { h.separable() } -> std::convertible_to<bool>;
  h.rotation(y);
  { h.domain() } -> std::convertible_to<const ActionDomain&>;
};

struct PhaseState {
  std::vector<double> theta;
  std::vector<double> I;
  double t = 0.0;
};

enum class Scheme { implicit_midpoint, splitting };

inline std::string to_string(Scheme s) { return s == Scheme::splitting ? "splitting" : "midpoint"; }

inline Scheme parse_scheme(const std::string& s) {
  if (s == "midpoint" || s == "implicit_midpoint") return Scheme::implicit_midpoint;
  if (s == "splitting") return Scheme::splitting;
  throw Error(ErrorCode::InvalidConfig, "unknown scheme '" + s + "'");
}

struct IntegratorConfig {
  Scheme scheme = Scheme::implicit_midpoint;
  double h = 1e-2;  // negative h integrates backwards
  double fp_tol = 1e-13;
  int fp_max_iter = 50;
  long record_every = 0;  // 0: initial and final state only
  bool check_domain = true;
};

struct Trajectory {
  std::vector<PhaseState> samples;
  double energy0 = 0.0;
  double max_energy_drift = 0.0;
  double max_action_drift = 0.0;
};

inline double wrap_angle(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

inline double action_distance(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

/// Stateful stepper; keeps scratch buffers so long runs do not allocate.
template <FlowHamiltonian H>
class Integrator {
 public:
  Integrator(const H& ham, IntegratorConfig cfg) : H_(ham), cfg_(cfg), n_(ham.n()) {
    if (!(cfg_.h != 0.0) || !std::isfinite(cfg_.h)) throw Error(ErrorCode::InvalidConfig, "step h must be nonzero");
    if (!(cfg_.fp_tol > 0.0) || cfg_.fp_max_iter < 1) throw Error(ErrorCode::InvalidConfig, "bad fixed-point settings");
    if (cfg_.scheme == Scheme::splitting) {
      if (!H_.separable()) throw Error(ErrorCode::SchemeUnavailable, "splitting needs an action-free perturbation");
    } else {
      double L = H_.lipschitz_bound();
      if (std::fabs(cfg_.h) * L >= 0.5)
        throw Error(ErrorCode::StepTooLarge, "|h| * Lipschitz bound = " + std::to_string(std::fabs(cfg_.h) * L) +
                                                  " is not below 1/2");
    }
    for (auto* v : {&mt_, &mi_, &nt_, &ni_, &ft_, &fi_, &rot_}) v->assign(n_, 0.0);
    H_.rotation(rot_);
  }

  const IntegratorConfig& config() const noexcept { return cfg_; }

  /// Advances s in place by one step.
  void step(PhaseState& s) {
    if (s.theta.size() != n_ || s.I.size() != n_) throw Error(ErrorCode::DomainError, "state has wrong dimension");
    if (cfg_.scheme == Scheme::splitting)
      splitting(s);
    else
      midpoint(s);
    for (double& v : s.theta) v = wrap_angle(v);
    s.t += cfg_.h;
    if (cfg_.check_domain && !H_.domain().contains(s.I))
      throw Error(ErrorCode::BoundaryExit, "action left the domain at t = " + std::to_string(s.t));
  }

 private:
  // z' = z + h F((z + z') / 2) by fixed-point iteration; theta' is kept unwrapped while iterating.
  void midpoint(PhaseState& s) {
    const double h = cfg_.h;
    double scale = 1.0;
    for (std::size_t i = 0; i < n_; ++i) scale = std::max({scale, std::fabs(s.theta[i]), std::fabs(s.I[i])});
    const double tol = cfg_.fp_tol * scale;

    // explicit Euler predictor
    H_.vector_field(s.theta, s.I, ft_, fi_);
    for (std::size_t i = 0; i < n_; ++i) {
      nt_[i] = s.theta[i] + h * ft_[i];
      ni_[i] = s.I[i] + h * fi_[i];
    }
    double omega = 1.0, prev = INFINITY;
    int damped_from = -1;
    for (int it = 0; it < cfg_.fp_max_iter; ++it) {
      for (std::size_t i = 0; i < n_; ++i) {
        mt_[i] = 0.5 * (s.theta[i] + nt_[i]);
        mi_[i] = 0.5 * (s.I[i] + ni_[i]);
      }
      H_.vector_field(mt_, mi_, ft_, fi_);
      double inc = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        double t1 = s.theta[i] + h * ft_[i], i1 = s.I[i] + h * fi_[i];
        double dt = t1 - nt_[i], di = i1 - ni_[i];
        inc = std::max({inc, std::fabs(dt), std::fabs(di)});
        nt_[i] += omega * dt;
        ni_[i] += omega * di;
      }
      if (!std::isfinite(inc)) break;
      if (inc <= tol) {
        s.theta.assign(nt_.begin(), nt_.end());
        s.I.assign(ni_.begin(), ni_.end());
        return;
      }
      // non-contraction: switch to damped iteration once
      if (inc >= prev && damped_from < 0) {
        omega = 0.5;
        damped_from = it;
      }
      prev = inc;
    }
    throw Error(ErrorCode::FixedPointDiverged, "implicit midpoint did not converge at t = " + std::to_string(s.t));
  }

  // Strang: half kick, exact rotation, half kick.
  void splitting(PhaseState& s) {
    const double h = cfg_.h;
    kick(s, 0.5 * h);
    for (std::size_t i = 0; i < n_; ++i) s.theta[i] += h * rot_[i];
    kick(s, 0.5 * h);
  }

  void kick(PhaseState& s, double tau) {
    // for a separable H the action part of the field does not depend on I
    H_.vector_field(s.theta, s.I, ft_, fi_);
    for (std::size_t i = 0; i < n_; ++i) s.I[i] += tau * fi_[i];
  }

  const H& H_;
  IntegratorConfig cfg_;
  std::size_t n_;
  std::vector<double> mt_, mi_, nt_, ni_, ft_, fi_, rot_;
};

template <FlowHamiltonian H>
PhaseState step(const H& ham, PhaseState s, const IntegratorConfig& cfg) {
  Integrator<H> integ(ham, cfg);
  integ.step(s);
  return s;
}

inline long step_count(double T, double h) {
  if (!(T > 0.0)) throw Error(ErrorCode::DomainError, "horizon T must be positive");
  double n = std::ceil(T / std::fabs(h) - 1e-9);
  return std::max(1L, static_cast<long>(n));
}

template <FlowHamiltonian H>
Trajectory integrate(const H& ham, const PhaseState& s0, double T, const IntegratorConfig& cfg) {
  Integrator<H> integ(ham, cfg);
  const long N = step_count(T, cfg.h);
  Trajectory tr;
  tr.energy0 = ham.energy(s0.theta, s0.I);
  tr.samples.push_back(s0);
  PhaseState s = s0;
  for (long k = 1; k <= N; ++k) {
    integ.step(s);
    tr.max_energy_drift = std::max(tr.max_energy_drift, std::fabs(ham.energy(s.theta, s.I) - tr.energy0));
    tr.max_action_drift = std::max(tr.max_action_drift, action_distance(s.I, s0.I));
    if (k == N || (cfg.record_every > 0 && k % cfg.record_every == 0)) tr.samples.push_back(s);
  }
  return tr;
}

/// Outcome of a run that stops at the first threshold crossing.
struct HitResult {
  std::optional<double> tau;
  double max_drift = 0.0;
  double energy_drift = 0.0;
  double t_end = 0.0;
  PhaseState final_state;
};

/// Integrates until |I(t) - I(0)|_inf >= c1 (linear interpolation between steps) or t reaches T_max.
/// A nonpositive c1 disables the threshold.
template <FlowHamiltonian H>
HitResult run_until(const H& ham, const PhaseState& s0, double c1, double T_max, const IntegratorConfig& cfg) {
  Integrator<H> integ(ham, cfg);
  const long N = step_count(T_max, cfg.h);
  HitResult r;
  const double e0 = ham.energy(s0.theta, s0.I);
  PhaseState s = s0;
  double d_prev = 0.0, t_prev = s0.t;
  for (long k = 1; k <= N; ++k) {
    integ.step(s);
    double d = action_distance(s.I, s0.I);
    r.energy_drift = std::max(r.energy_drift, std::fabs(ham.energy(s.theta, s.I) - e0));
    r.max_drift = std::max(r.max_drift, d);
    if (c1 > 0.0 && d >= c1) {
      double frac = d > d_prev ? (c1 - d_prev) / (d - d_prev) : 1.0;
      r.tau = t_prev - s0.t + frac * (s.t - t_prev);
      break;
    }
    d_prev = d;
    t_prev = s.t;
  }
  r.t_end = s.t;
  r.final_state = std::move(s);
  return r;
}

template <FlowHamiltonian H>
std::optional<double> hitting_time(const H& ham, const PhaseState& s0, double c1, double T_max,
                                   const IntegratorConfig& cfg) {
  if (!(c1 > 0.0)) throw Error(ErrorCode::DomainError, "c1 must be positive");
  return run_until(ham, s0, c1, T_max, cfg).tau;
}

}  // namespace hamlab
