#pragma once

// Sampling-based certification of stably steep polynomials.
//
// A jet P0 in P_2(n, m) is (rho, C, delta)-stably steep when every P with
// |P - P0| < rho (coefficient sup norm), restricted to any subspace L of
// dimension 1..n-1, satisfies
//     max_{0 <= eta <= zeta} min_{|x| = eta, x in L} |grad P_L(x)| > C zeta^(m-1)
// for all 0 < zeta <= delta. The universally quantified sets (perturbations,
// subspaces, zeta, eta, sphere) are sampled; a rejection always comes with a
// concrete witness that re-evaluates to a violation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "field.hpp"
#include "polynomial.hpp"

namespace hamlab {

/// Flattened polynomial for fast value/gradient/Hessian evaluation.
class CompiledPolynomial {
 public:
  CompiledPolynomial() = default;
  explicit CompiledPolynomial(const ActionPolynomial& p) : n_(p.nvars()) {
    for (const auto& [e, c] : p.terms()) {
      exps_.insert(exps_.end(), e.begin(), e.end());
      coef_.push_back(c);
      for (int x : e) max_exp_ = std::max(max_exp_, x);
    }
  }

  std::size_t n() const noexcept { return n_; }

  /// Gradient into `g`; Hessian into `hess` (row-major n*n) when non-empty.
  void derivatives(std::span<const double> x, std::span<double> g, std::span<double> hess = {}) const {
    const int stride = max_exp_ + 1;
    pw_.resize(n_ * static_cast<std::size_t>(stride));
    for (std::size_t i = 0; i < n_; ++i) {
      double* row = &pw_[i * stride];
      row[0] = 1.0;
      for (int p = 1; p <= max_exp_; ++p) row[p] = row[p - 1] * x[i];
    }
    auto pw = [&](std::size_t i, int p) { return p < 0 ? 0.0 : pw_[i * stride + p]; };
    std::fill(g.begin(), g.end(), 0.0);
    std::fill(hess.begin(), hess.end(), 0.0);
    for (std::size_t t = 0; t < coef_.size(); ++t) {
      const int* e = &exps_[t * n_];
      for (std::size_t a = 0; a < n_; ++a) {
        if (e[a] == 0) continue;
        double m = coef_[t] * e[a];
        for (std::size_t i = 0; i < n_; ++i) m *= pw(i, i == a ? e[i] - 1 : e[i]);
        g[a] += m;
        if (hess.empty()) continue;
        for (std::size_t b = 0; b < n_; ++b) {
          int eb = b == a ? e[b] - 1 : e[b];
          if (eb == 0) continue;
          double h = coef_[t] * e[a] * eb;
          for (std::size_t i = 0; i < n_; ++i) {
            int p = e[i] - (i == a) - (i == b);
            h *= pw(i, p);
          }
          hess[a * n_ + b] += h;
        }
      }
    }
  }

 private:
  std::size_t n_ = 0;
  std::vector<int> exps_;
  std::vector<double> coef_;
  int max_exp_ = 0;
  mutable std::vector<double> pw_;
};

inline Eigen::VectorXd gradient_at(const ActionPolynomial& p, std::span<const double> x) {
  Eigen::VectorXd g(p.nvars());
  CompiledPolynomial(p).derivatives(x, std::span<double>(g.data(), g.size()));
  return g;
}

inline Eigen::MatrixXd hessian_at(const ActionPolynomial& p, std::span<const double> x) {
  const auto n = static_cast<Eigen::Index>(p.nvars());
  Eigen::VectorXd g(n);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> h(n, n);
  CompiledPolynomial(p).derivatives(x, std::span<double>(g.data(), g.size()), std::span<double>(h.data(), h.size()));
  return h;
}

/// Rows of `basis` are an orthonormal frame of a subspace of R^n.
using Frame = Eigen::MatrixXd;

/// P restricted to span(basis rows): P_L(x) = P(sum_j x_j b_j), expanded exactly.
inline ActionPolynomial restrict(const ActionPolynomial& P, const Frame& basis) {
  const auto l = static_cast<std::size_t>(basis.rows());
  const auto n = static_cast<std::size_t>(basis.cols());
  if (n != P.nvars()) throw Error(ErrorCode::BasisNotOrthonormal, "frame has wrong ambient dimension");
  if (l < 1 || l > n) throw Error(ErrorCode::BasisNotOrthonormal, "frame dimension out of range");
  Eigen::MatrixXd gram = basis * basis.transpose();
  if ((gram - Eigen::MatrixXd::Identity(l, l)).cwiseAbs().maxCoeff() > 1e-12)
    throw Error(ErrorCode::BasisNotOrthonormal, "frame is not orthonormal to 1e-12");
  // I_i = sum_j basis(j, i) x_j
  std::vector<ActionPolynomial> coord(n, ActionPolynomial(l));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < l; ++j)
      coord[i].add_term([&] {
        MultiIndex e(l, 0);
        e[j] = 1;
        return e;
      }(), basis(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
  ActionPolynomial out(l);
  for (const auto& [e, c] : P.terms()) {
    ActionPolynomial term = ActionPolynomial::constant(l, c);
    for (std::size_t i = 0; i < n; ++i)
      if (e[i] > 0) term = term * coord[i].pow(e[i]);
    out += term;
  }
  return out;
}

inline ActionPolynomial restrict(const JetPolynomial& P, const Frame& basis) { return restrict(P.poly, basis); }

namespace detail {

// Quasi-uniform unit directions in R^l.
inline std::vector<Eigen::VectorXd> sphere_directions(std::size_t l, std::size_t count) {
  std::vector<Eigen::VectorXd> dirs;
  const auto L = static_cast<Eigen::Index>(l);
  if (l == 1) {
    dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
    dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
    return dirs;
  }
  if (l == 2) {
    for (std::size_t i = 0; i < count; ++i) {
      double t = 2.0 * std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
      Eigen::VectorXd u(2);
      u << std::cos(t), std::sin(t);
      dirs.push_back(u);
    }
    return dirs;
  }
  if (l == 3) {
    // Fibonacci lattice
    const double ga = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < count; ++i) {
      double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      Eigen::VectorXd u(3);
      u << r * std::cos(ga * static_cast<double>(i)), r * std::sin(ga * static_cast<double>(i)), z;
      dirs.push_back(u);
    }
    return dirs;
  }
  std::mt19937_64 rng(0x5eedULL + l);
  std::normal_distribution<double> nd;
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::VectorXd u(L);
    for (Eigen::Index j = 0; j < L; ++j) u(j) = nd(rng);
    dirs.push_back(u.normalized());
  }
  return dirs;
}

}  // namespace detail

/// min over |x| = eta of |grad P(x)| (Euclidean norms), over sampled
/// directions followed by projected descent from the best one.
class SphereMinimizer {
 public:
  SphereMinimizer(const ActionPolynomial& P, std::size_t sphere_samples)
      : poly_(P), l_(P.nvars()), dirs_(detail::sphere_directions(P.nvars(), sphere_samples)) {}

  double operator()(double eta) const {
    const auto L = static_cast<Eigen::Index>(l_);
    Eigen::VectorXd x(L), g(L);
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_u;
    for (const auto& u : dirs_) {
      double v = grad_norm2(eta, u, x, g);
      if (v < best) {
        best = v;
        best_u = u;
      }
    }
    if (l_ >= 2) best = descend(eta, best_u, best);
    return std::sqrt(best);
  }

 private:
  double grad_norm2(double eta, const Eigen::VectorXd& u, Eigen::VectorXd& x, Eigen::VectorXd& g) const {
    x = eta * u;
    poly_.derivatives(std::span<const double>(x.data(), x.size()), std::span<double>(g.data(), g.size()));
    return g.squaredNorm();
  }

  double descend(double eta, Eigen::VectorXd u, double value) const {
    const auto L = static_cast<Eigen::Index>(l_);
    Eigen::VectorXd x(L), g(L), trial(L);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> h(L, L);
    double step = 0.5;
    for (int it = 0; it < 40 && step > 1e-12; ++it) {
      x = eta * u;
      poly_.derivatives(std::span<const double>(x.data(), x.size()), std::span<double>(g.data(), g.size()),
                        std::span<double>(h.data(), h.size()));
      Eigen::VectorXd dir = 2.0 * eta * (h * g);
      dir -= dir.dot(u) * u;
      double dn = dir.norm();
      if (dn == 0.0) break;
      dir /= dn;
      bool improved = false;
      while (step > 1e-12) {
        trial = (u - step * dir).normalized();
        double v = grad_norm2(eta, trial, x, g);
        if (v < value) {
          value = v;
          u = trial;
          improved = true;
          step *= 2.0;
          break;
        }
        step *= 0.5;
      }
      if (!improved) break;
    }
    return value;
  }

  CompiledPolynomial poly_;
  std::size_t l_;
  std::vector<Eigen::VectorXd> dirs_;
};

struct MaxMin {
  double value = 0.0;
  double eta = 0.0;
};

/// max over eta in {zeta j / eta_grid : j = 1..eta_grid} of min_{|x|=eta} |grad P_L(x)|.
inline MaxMin maxmin_profile(const ActionPolynomial& P_L, double zeta, std::size_t eta_grid,
                             std::size_t sphere_samples) {
  if (!(zeta > 0.0)) throw Error(ErrorCode::DomainError, "zeta must be positive");
  SphereMinimizer sm(P_L, sphere_samples);
  MaxMin best;
  for (std::size_t j = eta_grid; j >= 1; --j) {
    double eta = zeta * static_cast<double>(j) / static_cast<double>(eta_grid);
    double v = sm(eta);
    if (v > best.value) best = {v, eta};
  }
  return best;
}

inline double maxmin_curve(const ActionPolynomial& P_L, double zeta, std::size_t eta_grid = 64,
                           std::size_t sphere_samples = 256) {
  return maxmin_profile(P_L, zeta, eta_grid, sphere_samples).value;
}

struct SteepnessSampling {
  std::size_t subspaces_per_dim = 64;
  std::size_t perturbations = 16;
  std::size_t eta_grid = 64;
  std::size_t sphere_samples = 256;
  std::size_t zeta_grid = 12;
  // zeta_i = delta * zeta_ratio^i
  double zeta_ratio = 0.5;
  double budget = 5e9;
  std::uint64_t seed = 1;
};

/// A failed (or tightest) check.
struct SteepnessWitness {
  Frame subspace;
  ActionPolynomial perturbed;  // the P that was restricted
  double zeta = 0.0;
  double eta = 0.0;
  double maxmin = 0.0;
  double threshold = 0.0;
};

struct SteepnessVerdict {
  bool accepted = false;
  double rho = 0.0, C = 0.0, delta = 0.0;
  int m = 2;
  // min over checks of maxmin / (C zeta^(m-1)) - 1; positive iff accepted.
  // For passing checks the max-min scan stops once the threshold is exceeded,
  // so the margin of an accepted verdict is a lower bound.
  double worst_margin = std::numeric_limits<double>::infinity();
  std::optional<SteepnessWitness> worst;
  std::vector<std::size_t> samples;  // subspaces tested per dimension l = 1..n-1

  const Frame* worst_subspace() const { return worst ? &worst->subspace : nullptr; }
};

namespace detail {

inline void subsets(std::size_t n, std::size_t l, std::vector<std::vector<std::size_t>>& out) {
  std::vector<std::size_t> idx(l);
  for (std::size_t i = 0; i < l; ++i) idx[i] = i;
  while (true) {
    out.push_back(idx);
    std::size_t i = l;
    while (i > 0 && idx[i - 1] == n - l + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < l; ++j) idx[j] = idx[j - 1] + 1;
  }
}

inline Frame orthonormal_rows(const Eigen::MatrixXd& rows) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(rows.transpose());
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows.cols(), rows.rows());
  return q.transpose();
}

// Coordinate subspaces, spans of Hessian eigenvectors of the quadratic part,
// isotropic lines of that quadratic form, then random frames.
inline std::vector<Frame> candidate_subspaces(const JetPolynomial& P0, std::size_t l, std::size_t random_count,
                                              std::mt19937_64& rng) {
  const std::size_t n = P0.n();
  const auto N = static_cast<Eigen::Index>(n);
  std::vector<Frame> out;
  std::vector<std::vector<std::size_t>> sets;
  subsets(n, l, sets);
  for (const auto& s : sets) {
    Frame f = Frame::Zero(static_cast<Eigen::Index>(l), N);
    for (std::size_t j = 0; j < l; ++j) f(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s[j])) = 1.0;
    out.push_back(f);
  }
  std::vector<double> zero(n, 0.0);
  Eigen::MatrixXd H = hessian_at(P0.poly.degree_range(2, 2), zero);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  const Eigen::MatrixXd& V = es.eigenvectors();
  const Eigen::VectorXd& lam = es.eigenvalues();
  bool distinct_axes = (V.cwiseAbs() - Eigen::MatrixXd::Identity(N, N)).cwiseAbs().maxCoeff() > 1e-12;
  if (distinct_axes) {
    for (const auto& s : sets) {
      Frame f(static_cast<Eigen::Index>(l), N);
      for (std::size_t j = 0; j < l; ++j) f.row(static_cast<Eigen::Index>(j)) = V.col(static_cast<Eigen::Index>(s[j])).transpose();
      out.push_back(f);
    }
  }
  if (l == 1) {
    for (Eigen::Index a = 0; a < N; ++a)
      for (Eigen::Index b = 0; b < N; ++b) {
        if (!(lam(a) > 0.0 && lam(b) < 0.0)) continue;
        for (double sgn : {1.0, -1.0}) {
          Eigen::VectorXd u = std::sqrt(-lam(b)) * V.col(a) + sgn * std::sqrt(lam(a)) * V.col(b);
          out.push_back(u.normalized().transpose());
        }
      }
  }
  std::normal_distribution<double> nd;
  for (std::size_t r = 0; r < random_count; ++r) {
    Eigen::MatrixXd g(static_cast<Eigen::Index>(l), N);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < N; ++j) g(i, j) = nd(rng);
    out.push_back(orthonormal_rows(g));
  }
  return out;
}

}  // namespace detail

/// P0 itself followed by `count` corners of the rho-ball in the coefficient
/// sup norm (every degree 2..m coefficient moved by +-rho, slightly inside).
inline std::vector<ActionPolynomial> sample_perturbations(const JetPolynomial& P0, double rho, std::size_t count,
                                                          std::mt19937_64& rng) {
  std::vector<ActionPolynomial> out{P0.poly};
  auto basis = monomials(P0.n(), 2, P0.m);
  const double r = rho * (1.0 - 1e-9);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < count; ++i) {
    ActionPolynomial p = P0.poly;
    for (const auto& e : basis) p.add_term(e, coin(rng) ? r : -r);
    out.push_back(std::move(p));
  }
  return out;
}

inline SteepnessVerdict check_stably_steep(const JetPolynomial& P0, double rho, double C, double delta,
                                           const SteepnessSampling& s = {}) {
  if (!(rho > 0.0 && C > 0.0 && delta > 0.0))
    throw Error(ErrorCode::DomainError, "rho, C and delta must be positive");
  if (s.eta_grid == 0 || s.zeta_grid == 0 || s.sphere_samples == 0)
    throw Error(ErrorCode::DomainError, "sampling grids must be non-empty");
  const std::size_t n = P0.n();
  const int m = P0.m;
  std::mt19937_64 rng(s.seed);

  SteepnessVerdict v;
  v.rho = rho;
  v.C = C;
  v.delta = delta;
  v.m = m;
  v.accepted = true;

  auto perts = sample_perturbations(P0, rho, s.perturbations, rng);
  std::vector<std::vector<Frame>> frames;
  double planned = 0.0;
  for (std::size_t l = 1; l + 1 <= n; ++l) {
    frames.push_back(detail::candidate_subspaces(P0, l, s.subspaces_per_dim, rng));
    double sphere = l == 1 ? 2.0 : static_cast<double>(s.sphere_samples);
    planned += static_cast<double>(frames.back().size()) * static_cast<double>(perts.size()) *
               static_cast<double>(s.zeta_grid) * static_cast<double>(s.eta_grid) * sphere;
    v.samples.push_back(frames.back().size());
  }
  if (planned > s.budget)
    throw Error(ErrorCode::SamplingBudgetExceeded, "planned evaluations exceed the sampling budget");

  std::vector<double> zetas(s.zeta_grid);
  for (std::size_t i = 0; i < s.zeta_grid; ++i) zetas[i] = delta * std::pow(s.zeta_ratio, static_cast<double>(i));

  for (const auto& fl : frames) {
    for (const auto& f : fl) {
      for (const auto& P : perts) {
        ActionPolynomial PL = restrict(P, f);
        SphereMinimizer sm(PL, s.sphere_samples);
        for (double zeta : zetas) {
          const double thr = C * std::pow(zeta, m - 1);
          MaxMin best;
          for (std::size_t j = s.eta_grid; j >= 1; --j) {
            double eta = zeta * static_cast<double>(j) / static_cast<double>(s.eta_grid);
            double val = sm(eta);
            if (val > best.value || best.eta == 0.0) best = {val, eta};
            if (best.value > thr) break;
          }
          double margin = best.value / thr - 1.0;
          bool fail = !(best.value > thr);
          if (fail) v.accepted = false;
          bool replace = !v.worst || margin < v.worst_margin;
          if (replace) {
            v.worst_margin = margin;
            v.worst = SteepnessWitness{f, P, zeta, best.eta, best.value, thr};
          }
        }
      }
    }
  }
  if (n < 2) v.worst_margin = std::numeric_limits<double>::infinity();
  return v;
}

/// Re-evaluates a witness from scratch: true iff it is a violation.
inline bool witness_violates(const SteepnessWitness& w, const SteepnessSampling& s) {
  auto PL = restrict(w.perturbed, w.subspace);
  return !(maxmin_curve(PL, w.zeta, s.eta_grid, s.sphere_samples) > w.threshold);
}

/// Steepness constants of a function whose jet is stably steep, for a
/// gradient lower bound varpi at the expansion point: (varpi/2, C/2, zeta, m-1).
struct SteepConstants {
  double kappa = 0.0;
  double C_prime = 0.0;
  double delta_prime = 0.0;
  int index = 1;
};

inline SteepConstants steep_constants(const SteepnessVerdict& v, double varpi, double zeta) {
  return SteepConstants{varpi / 2.0, v.C / 2.0, zeta, v.m - 1};
}

inline int steep_degree_threshold(std::size_t n) {
  return static_cast<int>(std::floor(static_cast<double>(n * n) / 2.0 + 2.0));
}

}  // namespace hamlab
