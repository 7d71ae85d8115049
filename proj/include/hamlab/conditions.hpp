#pragma once

// Checkers for the genericity conditions on a perturbation f:
//   G1  the partial average over the non-resonant angles is non-constant in
//       the resonant angles;
//   G2  the Hessian of the full average is non-singular at I*;
//   G3  the Taylor jet of the full average at I* is stably steep;
//   G4  that Hessian restricted to the orthogonal complement of alpha is
//       sign-definite.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "field.hpp"
#include "steepness.hpp"

namespace hamlab {

enum class Condition { G1, G2, G3, G4 };

inline const char* to_string(Condition c) {
  switch (c) {
    case Condition::G1: return "G1";
    case Condition::G2: return "G2";
    case Condition::G3: return "G3";
    case Condition::G4: return "G4";
  }
  return "?";
}

struct ConditionReport {
  Condition condition = Condition::G1;
  bool holds = false;
  // present iff holds: the point / quantity that witnesses the condition
  std::optional<nlohmann::json> witness;
  // measured quantities, reported whether or not the condition holds
  nlohmann::json diagnostics = nlohmann::json::object();
  std::optional<SteepnessVerdict> verdict;
  std::vector<std::string> warnings;
};

struct ConditionConfig {
  double g1_floor = 1e-6;
  double g2_floor = 1e-8;
  double g4_floor = 1e-8;
  std::size_t theta_grid = 32;
  std::size_t I_grid = 5;
  // stably-steep parameters for G3
  double rho = 0.1;
  double C = 0.5;
  double delta = 0.1;
  SteepnessSampling sampling;
};

namespace detail {

inline nlohmann::json to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline nlohmann::json to_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
  return rows;
}

// Operator norm induced by the sup norm (max absolute row sum).
inline double sup_operator_norm(const Eigen::MatrixXd& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

inline double grad_sup(const FourierTaylorField& fbar, std::size_t d, std::span<const double> th,
                       std::span<const double> I) {
  std::vector<double> gt(fbar.n()), gi(fbar.n());
  fbar.gradients(th, I, gt, gi);
  double m = 0.0;
  for (std::size_t j = 0; j < d; ++j) m = std::max(m, std::fabs(gt[j]));
  return m;
}

}  // namespace detail

/// G1: scans T^d x B for the largest |d f_bar / d theta_bar| (sup norm over the
/// d resonant angles), then refines by pattern ascent.
inline ConditionReport check_G1(const FourierTaylorField& f, std::size_t d, const ConditionConfig& cfg = {}) {
  const std::size_t n = f.n();
  FourierTaylorField fbar = partial_average(f, d);
  const auto& dom = f.domain();
  std::vector<double> th(n, 0.0), I = dom.center, best_th = th, best_I = I;
  double best = -1.0;
  const std::size_t tg = std::max<std::size_t>(cfg.theta_grid, 1), ig = std::max<std::size_t>(cfg.I_grid, 1);
  std::size_t total = 1;
  for (std::size_t j = 0; j < d; ++j) total *= tg;
  for (std::size_t j = 0; j < n; ++j) total *= ig;
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t r = idx;
    for (std::size_t j = 0; j < d; ++j) {
      th[j] = static_cast<double>(r % tg) / static_cast<double>(tg);
      r /= tg;
    }
    for (std::size_t j = 0; j < n; ++j) {
      double t = ig == 1 ? 0.5 : static_cast<double>(r % ig) / static_cast<double>(ig - 1);
      I[j] = dom.center[j] - dom.radius + 2.0 * dom.radius * t;
      r /= ig;
    }
    double v = detail::grad_sup(fbar, d, th, I);
    if (v > best) {
      best = v;
      best_th = th;
      best_I = I;
    }
  }
  // pattern ascent over (theta_bar, I) inside the domain
  double step_t = 0.5 / static_cast<double>(tg), step_i = dom.radius / static_cast<double>(ig);
  for (int it = 0; it < 200 && (step_t > 1e-10 || step_i > 1e-10); ++it) {
    bool moved = false;
    for (std::size_t j = 0; j < d + n; ++j) {
      for (double sgn : {1.0, -1.0}) {
        auto t2 = best_th;
        auto i2 = best_I;
        if (j < d) {
          t2[j] += sgn * step_t;
        } else {
          std::size_t a = j - d;
          i2[a] = std::clamp(i2[a] + sgn * step_i, dom.center[a] - dom.radius, dom.center[a] + dom.radius);
        }
        double v = detail::grad_sup(fbar, d, t2, i2);
        if (v > best) {
          best = v;
          best_th = t2;
          best_I = i2;
          moved = true;
        }
      }
    }
    if (!moved) {
      step_t *= 0.5;
      step_i *= 0.5;
    }
  }
  for (std::size_t j = 0; j < d; ++j) best_th[j] -= std::floor(best_th[j]);

  ConditionReport rep;
  rep.condition = Condition::G1;
  rep.holds = best > cfg.g1_floor;
  rep.diagnostics["max_dtheta"] = best;
  rep.diagnostics["floor"] = cfg.g1_floor;
  rep.diagnostics["d"] = d;
  if (rep.holds) {
    std::vector<double> tb(best_th.begin(), best_th.begin() + static_cast<long>(d));
    // the measured derivative is the quantity 3*zeta
    rep.witness = nlohmann::json{{"theta_bar", tb}, {"I_star", best_I}, {"dtheta", best}, {"zeta", best / 3.0}};
  }
  return rep;
}

/// G2: exact Hessian of the full average at I*.
inline ConditionReport check_G2(const FourierTaylorField& f, std::span<const double> I_star,
                                const ConditionConfig& cfg = {}) {
  auto fbar = full_average(f);
  Eigen::MatrixXd H = hessian_at(fbar, I_star);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  const Eigen::VectorXd lam = es.eigenvalues();
  double smin = lam.cwiseAbs().minCoeff();
  ConditionReport rep;
  rep.condition = Condition::G2;
  rep.holds = smin > cfg.g2_floor;
  rep.diagnostics["determinant"] = H.determinant();
  rep.diagnostics["smallest_singular_value"] = smin;
  rep.diagnostics["eigenvalues"] = detail::to_json(lam);
  rep.diagnostics["hessian"] = detail::to_json(H);
  double M = std::numeric_limits<double>::infinity();
  if (rep.holds) M = std::max(detail::sup_operator_norm(H), detail::sup_operator_norm(H.inverse()));
  rep.diagnostics["M"] = rep.holds ? nlohmann::json(M) : nlohmann::json(nullptr);
  if (rep.holds)
    rep.witness = nlohmann::json{{"I_star", std::vector<double>(I_star.begin(), I_star.end())},
                                 {"determinant", H.determinant()},
                                 {"M", M}};
  return rep;
}

/// G3: jet of the full average at I* of order m is stably steep.
inline ConditionReport check_G3(const FourierTaylorField& f, std::span<const double> I_star, int m,
                                const ConditionConfig& cfg = {}) {
  auto fbar = full_average(f);
  ConditionReport rep;
  rep.condition = Condition::G3;
  const int mn = steep_degree_threshold(f.n());
  if (m < mn)
    rep.warnings.push_back("m = " + std::to_string(m) + " is below m_n = " + std::to_string(mn) +
                           "; genericity of stable steepness is only known for m >= m_n");
  JetPolynomial jet = taylor_jet(fbar, I_star, m);
  auto v = check_stably_steep(jet, cfg.rho, cfg.C, cfg.delta, cfg.sampling);
  rep.holds = v.accepted;
  rep.diagnostics["m"] = m;
  rep.diagnostics["m_n"] = mn;
  rep.diagnostics["rho"] = cfg.rho;
  rep.diagnostics["C"] = cfg.C;
  rep.diagnostics["delta"] = cfg.delta;
  rep.diagnostics["worst_margin"] = v.worst_margin;
  rep.diagnostics["subspaces_per_dim"] = v.samples;
  if (v.worst) {
    rep.diagnostics["worst_subspace"] = detail::to_json(v.worst->subspace);
    rep.diagnostics["worst_zeta"] = v.worst->zeta;
    rep.diagnostics["worst_eta"] = v.worst->eta;
    rep.diagnostics["worst_maxmin"] = v.worst->maxmin;
    rep.diagnostics["worst_threshold"] = v.worst->threshold;
  }
  if (rep.holds) {
    Eigen::VectorXd g = gradient_at(fbar, I_star);
    double varpi = g.cwiseAbs().maxCoeff();
    auto sc = steep_constants(v, varpi, cfg.delta);
    rep.witness = nlohmann::json{{"I_star", std::vector<double>(I_star.begin(), I_star.end())},
                                 {"worst_margin", v.worst_margin},
                                 {"steep", {{"kappa", sc.kappa}, {"C_prime", sc.C_prime},
                                            {"delta_prime", sc.delta_prime}, {"index", sc.index}}}};
  }
  rep.verdict = std::move(v);
  return rep;
}

/// Orthonormal basis (rows) of the orthogonal complement of alpha, by
/// Gram-Schmidt on the standard basis after the alpha direction.
inline Eigen::MatrixXd complement_basis(const FrequencyVector& alpha) {
  const auto n = static_cast<Eigen::Index>(alpha.size());
  std::vector<Eigen::VectorXd> acc;
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(alpha.components().data(), n);
  acc.push_back(a.normalized());
  for (Eigen::Index i = 0; i < n && static_cast<Eigen::Index>(acc.size()) < n; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(n, i);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : acc) v -= v.dot(u) * u;
    if (v.norm() > 1e-10) acc.push_back(v.normalized());
  }
  Eigen::MatrixXd B(n - 1, n);
  for (Eigen::Index j = 1; j < n; ++j) B.row(j - 1) = acc[static_cast<std::size_t>(j)].transpose();
  return B;
}

/// G4: Hessian of the full average restricted to alpha-perp is definite.
inline ConditionReport check_G4(const FourierTaylorField& f, std::span<const double> I_star,
                                const FrequencyVector& alpha, const ConditionConfig& cfg = {}) {
  if (!alpha.normalized()) throw Error(ErrorCode::DomainError, "alpha must have unit sup norm");
  auto fbar = full_average(f);
  Eigen::MatrixXd H = hessian_at(fbar, I_star);
  Eigen::MatrixXd B = complement_basis(alpha);
  Eigen::MatrixXd P = B * H * B.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  const Eigen::VectorXd lam = es.eigenvalues();
  bool pos = (lam.array() > cfg.g4_floor).all();
  bool neg = (lam.array() < -cfg.g4_floor).all();
  ConditionReport rep;
  rep.condition = Condition::G4;
  rep.holds = pos || neg;
  rep.diagnostics["eigenvalues"] = detail::to_json(lam);
  rep.diagnostics["projected_hessian"] = detail::to_json(P);
  if (rep.holds)
    rep.witness = nlohmann::json{{"I_star", std::vector<double>(I_star.begin(), I_star.end())},
                                 {"sign", pos ? 1 : -1},
                                 {"eigenvalues", detail::to_json(lam)}};
  return rep;
}

inline nlohmann::json report_json(const ConditionReport& r) {
  nlohmann::json j{{"condition", to_string(r.condition)}, {"holds", r.holds}, {"diagnostics", r.diagnostics}};
  j["witness"] = r.witness ? *r.witness : nlohmann::json(nullptr);
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace hamlab
