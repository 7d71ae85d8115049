#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "hamlab/error.hpp"
#include "hamlab/field.hpp"
#include "hamlab/freq_arith.hpp"
#include "hamlab/parallel.hpp"
#include "hamlab/symplectic.hpp"

namespace hamlab {

/// nonresonant eliminates every 0 < |k| <= K; resonant(d) keeps modes whose
/// trailing n - d components vanish.
struct AveragingMode {
  enum Kind { nonresonant, resonant } kind = nonresonant;
  std::size_t d = 0;

  static AveragingMode nonres() { return {}; }
  static AveragingMode res(std::size_t d) { return {resonant, d}; }

  /// "nonres" or "res:<d>".
  static AveragingMode parse(const std::string& s) {
    if (s == "nonres") return nonres();
    if (s.rfind("res:", 0) == 0) {
      try {
        std::size_t pos = 0;
        long d = std::stol(s.substr(4), &pos);
        if (pos == s.size() - 4 && d >= 1) return res(static_cast<std::size_t>(d));
      } catch (const std::exception&) {
      }
    }
    throw Error(ErrorCode::InvalidConfig, "mode must be 'nonres' or 'res:<d>', got '" + s + "'");
  }

  std::string str() const { return kind == nonresonant ? "nonres" : "res:" + std::to_string(d); }

  bool kept(std::span<const long> k) const {
    std::size_t from = kind == nonresonant ? 0 : d;
    for (std::size_t i = from; i < k.size(); ++i)
      if (k[i] != 0) return false;
    return true;
  }
};

struct NormalFormResult {
  FourierTaylorField chi;
  FourierTaylorField averaged;
  long K = 0;
  double remainder_bound = std::numeric_limits<double>::quiet_NaN();  // set by remainder_probe
  double smallest_divisor = std::numeric_limits<double>::infinity();  // no eliminated mode: infinite
  std::vector<WaveVector> eliminated;  // lexicographically positive representatives
};

/// chi_k = f_k / (2 pi i k.alpha) on the eliminated modes; kept modes form `averaged`.
/// Modes with |k| > K stay in neither and count toward the remainder.
inline NormalFormResult solve_homological(const FourierTaylorField& f, const FrequencyVector& alpha, long K,
                                          AveragingMode mode, const ArithConfig& cfg = {}) {
  const std::size_t n = f.n();
  if (alpha.size() != n) throw Error(ErrorCode::InvalidModel, "alpha and field dimensions differ");
  if (K < 1) throw Error(ErrorCode::DomainError, "cutoff K must be >= 1");
  if (mode.kind == AveragingMode::resonant) {
    if (mode.d < 1 || mode.d >= n) throw Error(ErrorCode::DomainError, "resonant mode needs 1 <= d <= n-1");
    for (std::size_t i = 0; i < mode.d; ++i)
      if (alpha[i] != 0.0) throw Error(ErrorCode::DomainError, "resonant mode needs alpha = (0, alpha~)");
  }
  if (lattice_box_size(n, K) > cfg.budget)
    throw Error(ErrorCode::CutoffTooLarge, "(2K+1)^n exceeds the enumeration budget");

  NormalFormResult r;
  r.K = K;
  FourierTaylorField::ModeMap chi, kept;
  for (const auto& [k, p] : f.modes()) {
    if (mode.kept(k)) {
      kept.emplace(k, p);
      continue;
    }
    if (sup_norm(k) > K) continue;
    const double kd = alpha.dot(k);
    double knorm = 0.0;
    for (long v : k) knorm += static_cast<double>(v) * static_cast<double>(v);
    const double tol = cfg.resonance_tol * (cfg.scale_tol_by_norm ? std::sqrt(knorm) : 1.0);
    if ((alpha.has_exact_form() && alpha.exactly_resonant(k)) || std::fabs(kd) <= tol)
      throw Error(ErrorCode::SmallDivisorBelowTolerance, "divisor k.alpha below tolerance", k);
    // multiply by the purely imaginary -i / (2 pi k.alpha) so chi_{-k} = conj(chi_k) exactly
    chi.emplace(k, p * std::complex<double>(0.0, -1.0 / (kTwoPi * kd)));
    r.smallest_divisor = std::min(r.smallest_divisor, std::fabs(kd));
    if (lex_positive(k)) r.eliminated.push_back(k);
  }
  r.chi = f.with_modes(std::move(chi));
  r.averaged = f.with_modes(std::move(kept));
  return r;
}

/// {f, g} = sum_i d_theta_i f d_I_i g - d_I_i f d_theta_i g, exact in the mode algebra.
inline FourierTaylorField poisson_bracket(const FourierTaylorField& f, const FourierTaylorField& g) {
  if (f.n() != g.n()) throw Error(ErrorCode::InvalidModel, "field dimension mismatch");
  auto out = FourierTaylorField::zero(f.n(), f.domain(), f.width());
  for (std::size_t i = 0; i < f.n(); ++i) {
    out += f.d_theta(i) * g.d_action(i);
    out += -1.0 * (f.d_action(i) * g.d_theta(i));
  }
  return out;
}

/// alpha . d_theta chi, the left side of the homological equation.
inline FourierTaylorField alpha_derivative(const FourierTaylorField& chi, const FrequencyVector& alpha) {
  auto out = FourierTaylorField::zero(chi.n(), chi.domain(), chi.width());
  for (std::size_t i = 0; i < chi.n(); ++i)
    if (alpha[i] != 0.0) out += alpha[i] * chi.d_theta(i);
  return out;
}

/// K = floor(Delta_alpha(c / eps)).
inline long choose_cutoff(const FrequencyVector& alpha, double eps, double c = 1.0, const ArithConfig& cfg = {}) {
  if (!(eps > 0.0)) throw Error(ErrorCode::DomainError, "epsilon must be positive");
  return static_cast<long>(std::floor(delta(alpha, c / eps, cfg)));
}

struct ProbeConfig {
  int flow_steps = 16;  // raised automatically if the step bound requires it
  double action_fraction = 0.5;  // probes use I within this fraction of the domain radius
  unsigned threads = 1;
};

/// Seeded probe points (theta, I) inside the model domain.
inline std::vector<PhaseState> probe_points(const ActionDomain& dom, std::size_t n, int probes, std::uint64_t seed,
                                            double fraction) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PhaseState> pts(static_cast<std::size_t>(probes));
  for (auto& p : pts) {
    p.theta.resize(n);
    p.I.resize(n);
    for (auto& v : p.theta) v = u(rng);
    for (std::size_t i = 0; i < n; ++i) p.I[i] = dom.center[i] + fraction * dom.radius * (2.0 * u(rng) - 1.0);
  }
  return pts;
}

/// max over probes of |H(Phi(z)) - alpha.I - eps * averaged(z)|, Phi the time-eps flow of chi.
/// Measured, not a bound; stores the value in nf.remainder_bound.
inline double remainder_probe(const Hamiltonian& H, NormalFormResult& nf, int probes, std::uint64_t seed,
                              const ProbeConfig& pc = {}) {
  if (probes < 1) throw Error(ErrorCode::DomainError, "probes must be >= 1");
  const double eps = H.epsilon();
  const std::size_t n = H.n();
  FieldHamiltonian gen(nf.chi, eps);  // time-1 flow of eps*chi = time-eps flow of chi
  double L = gen.lipschitz_bound();
  int steps = std::max(pc.flow_steps, static_cast<int>(std::ceil(4.0 * L)) + 1);
  IntegratorConfig ic;
  ic.h = 1.0 / steps;
  auto pts = probe_points(H.domain(), n, probes, seed, pc.action_fraction);
  std::vector<double> err(pts.size(), 0.0);
  parallel_for(pts.size(), pc.threads, [&](std::size_t j) {
    const auto& z = pts[j];
    PhaseState w = z;
    if (eps != 0.0 && !nf.chi.is_zero()) {
      Integrator<FieldHamiltonian> integ(gen, ic);
      for (int s = 0; s < steps; ++s) integ.step(w);
    }
    double lin = 0.0;
    for (std::size_t i = 0; i < n; ++i) lin += H.alpha()[i] * z.I[i];
    err[j] = std::fabs(H.evaluate(w.theta, w.I) - lin - eps * nf.averaged.evaluate(z.theta, z.I));
  });
  double m = 0.0;
  for (double e : err) m = std::max(m, e);
  nf.remainder_bound = m;
  return m;
}

}  // namespace hamlab
