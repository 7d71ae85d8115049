#pragma once

// Finite Fourier-Taylor fields f(theta, I) = sum_k c_k(I) e^{2 pi i k.theta}
// and Hamiltonians H = alpha.I + eps f. Angles are measured in turns.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "format.hpp"
#include "freq_arith.hpp"
#include "polynomial.hpp"

namespace hamlab {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Box |I - center| <= radius (sup norm) on which a field is used.
struct ActionDomain {
  std::vector<double> center;
  double radius = 1.0;

  bool contains(std::span<const double> I) const {
    for (std::size_t i = 0; i < I.size(); ++i)
      if (!(std::fabs(I[i] - center[i]) <= radius)) return false;
    return true;
  }
};

inline long sup_norm(std::span<const long> k) {
  long m = 0;
  for (long v : k) m = std::max(m, std::labs(v));
  return m;
}

inline WaveVector negated(const WaveVector& k) {
  WaveVector r = k;
  for (long& v : r) v = -v;
  return r;
}

/// k is lexicographically positive (first nonzero entry > 0).
inline bool lex_positive(std::span<const long> k) {
  for (long v : k)
    if (v != 0) return v > 0;
  return false;
}

class FourierTaylorField {
 public:
  using ModeMap = std::map<WaveVector, ComplexPolynomial>;

  FourierTaylorField() = default;

  /// `modes` must hold both k and -k with conjugate coefficients; mode 0 must be real.
  FourierTaylorField(std::size_t n, ModeMap modes, ActionDomain domain = {}, double width = 0.1)
      : n_(n), modes_(std::move(modes)), domain_(std::move(domain)), width_(width) {
    if (domain_.center.empty()) domain_.center.assign(n_, 0.0);
    validate();
    compile();
  }

  static FourierTaylorField zero(std::size_t n, ActionDomain domain = {}, double width = 0.1) {
    return FourierTaylorField(n, {}, std::move(domain), width);
  }

  std::size_t n() const noexcept { return n_; }
  const ModeMap& modes() const noexcept { return modes_; }
  const ActionDomain& domain() const noexcept { return domain_; }
  double width() const noexcept { return width_; }

  long max_wave() const {
    long m = 0;
    for (const auto& [k, p] : modes_) m = std::max(m, sup_norm(k));
    return m;
  }

  ComplexPolynomial mode(const WaveVector& k) const {
    auto it = modes_.find(k);
    return it == modes_.end() ? ComplexPolynomial(n_) : it->second;
  }

  /// True when no coefficient depends on I.
  bool theta_only() const {
    for (const auto& [k, p] : modes_)
      if (p.degree() > 0) return false;
    return true;
  }

  bool is_zero() const noexcept { return modes_.empty(); }

  /// Complex value before the real cast; the imaginary part is round-off.
  std::complex<double> evaluate_complex(std::span<const double> theta, std::span<const double> I) const {
    std::complex<double> s(0.0);
    Scratch& w = scratch(I);
    for (const auto& m : compiled_) {
      double ph = 0.0;
      for (std::size_t i = 0; i < n_; ++i) ph += m.k2pi[i] * theta[i];
      std::complex<double> e(std::cos(ph), std::sin(ph));
      std::complex<double> c(0.0);
      for (const auto& t : m.terms) c += t.c * monomial(w, t.exp.data());
      s += c * e;
    }
    return s;
  }

  double evaluate(std::span<const double> theta, std::span<const double> I) const {
    return evaluate_complex(theta, I).real();
  }

  /// Value and both gradients in one pass.
  double gradients(std::span<const double> theta, std::span<const double> I, std::span<double> d_theta,
                   std::span<double> d_I) const {
    std::fill(d_theta.begin(), d_theta.end(), 0.0);
    std::fill(d_I.begin(), d_I.end(), 0.0);
    double value = 0.0;
    Scratch& w = scratch(I);
    for (const auto& m : compiled_) {
      double ph = 0.0;
      for (std::size_t i = 0; i < n_; ++i) ph += m.k2pi[i] * theta[i];
      std::complex<double> e(std::cos(ph), std::sin(ph));
      std::complex<double> c(0.0);
      for (const auto& t : m.terms) {
        c += t.c * monomial(w, t.exp.data());
        for (std::size_t j = 0; j < n_; ++j) {
          if (t.exp[j] == 0) continue;
          d_I[j] += (t.c * e).real() * monomial_derivative(w, t.exp.data(), j);
        }
      }
      std::complex<double> ce = c * e;
      value += ce.real();
      // d/dtheta_j of c e^{i ph} = i k_j 2pi c e^{i ph}; real part is -k_j 2pi Im(ce)
      for (std::size_t j = 0; j < n_; ++j) d_theta[j] -= m.k2pi[j] * ce.imag();
    }
    return value;
  }

  /// Exact term-wise derivative in theta_j.
  FourierTaylorField d_theta(std::size_t j) const {
    ModeMap out;
    for (const auto& [k, p] : modes_) {
      if (k[j] == 0) continue;
      out.emplace(k, p * std::complex<double>(0.0, kTwoPi * static_cast<double>(k[j])));
    }
    return with_modes(std::move(out));
  }

  /// Exact term-wise derivative in I_j.
  FourierTaylorField d_action(std::size_t j) const {
    ModeMap out;
    for (const auto& [k, p] : modes_) {
      auto d = p.derivative(j);
      if (!d.is_zero()) out.emplace(k, std::move(d));
    }
    return with_modes(std::move(out));
  }

  FourierTaylorField with_modes(ModeMap m) const { return FourierTaylorField(n_, std::move(m), domain_, width_); }

  FourierTaylorField& operator+=(const FourierTaylorField& o) {
    check_dim(o);
    for (const auto& [k, p] : o.modes_) {
      auto& slot = modes_.try_emplace(k, ComplexPolynomial(n_)).first->second;
      slot += p;
      if (slot.is_zero()) modes_.erase(k);
    }
    compile();
    return *this;
  }
  FourierTaylorField& operator*=(double s) {
    if (s == 0.0) modes_.clear();
    for (auto& [k, p] : modes_) p *= std::complex<double>(s, 0.0);
    compile();
    return *this;
  }
  friend FourierTaylorField operator+(FourierTaylorField a, const FourierTaylorField& b) { return a += b; }
  friend FourierTaylorField operator-(FourierTaylorField a, FourierTaylorField b) { return a += (b *= -1.0); }
  friend FourierTaylorField operator*(double s, FourierTaylorField a) { return a *= s; }

  /// Pointwise product; wave vectors add and coefficient polynomials multiply.
  friend FourierTaylorField operator*(const FourierTaylorField& a, const FourierTaylorField& b) {
    a.check_dim(b);
    ModeMap out;
    for (const auto& [ka, pa] : a.modes_)
      for (const auto& [kb, pb] : b.modes_) {
        WaveVector k(a.n_);
        for (std::size_t i = 0; i < a.n_; ++i) k[i] = ka[i] + kb[i];
        auto& slot = out.try_emplace(k, ComplexPolynomial(a.n_)).first->second;
        slot += pa * pb;
      }
    for (auto it = out.begin(); it != out.end();) it = it->second.is_zero() ? out.erase(it) : std::next(it);
    return FourierTaylorField(a.n_, std::move(out), a.domain_, a.width_);
  }

  /// Sum over modes of the coefficient majorant on the polydisc |I_i| <= |center_i| + r,
  /// weighted by exp(2 pi |k| s). An upper bound for the sup norm on the complex strip.
  double weighted_norm(double s, double r) const {
    double total = 0.0;
    for (const auto& [k, p] : modes_) {
      double maj = 0.0;
      for (const auto& [e, c] : p.terms()) {
        double m = std::abs(c);
        for (std::size_t i = 0; i < n_; ++i) m *= std::pow(std::fabs(domain_.center[i]) + r, e[i]);
        maj += m;
      }
      total += maj * std::exp(kTwoPi * static_cast<double>(sup_norm(k)) * s);
    }
    return total;
  }

  /// Majorant of the sup-norm Lipschitz constant of (d_I f, -d_theta f) on the domain.
  double lipschitz_bound() const {
    double total = 0.0;
    for (const auto& [k, p] : modes_) {
      double kk = 0.0;
      for (long v : k) kk += kTwoPi * static_cast<double>(std::labs(v));
      for (const auto& [e, c] : p.terms()) {
        double rad = 1.0, de = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
          double R = std::max(1.0, std::fabs(domain_.center[i]) + domain_.radius);
          rad *= std::pow(R, e[i]);
          de += e[i] / R;
        }
        total += std::abs(c) * (kk + de) * (kk + de) * rad;
      }
    }
    return total;
  }

 private:
  struct Term {
    std::vector<int> exp;
    std::complex<double> c;
  };
  struct CompiledMode {
    std::vector<double> k2pi;
    std::vector<Term> terms;
  };
  struct Scratch {
    std::vector<double> pw;  // pw[i * (max_exp + 1) + p] = I_i^p
    int stride = 1;
  };

  Scratch& scratch(std::span<const double> I) const {
    thread_local Scratch w;
    w.stride = max_exp_ + 1;
    w.pw.resize(n_ * static_cast<std::size_t>(w.stride));
    for (std::size_t i = 0; i < n_; ++i) {
      double* row = &w.pw[i * w.stride];
      row[0] = 1.0;
      for (int p = 1; p <= max_exp_; ++p) row[p] = row[p - 1] * I[i];
    }
    return w;
  }

  double monomial(const Scratch& w, const int* e) const {
    double m = 1.0;
    for (std::size_t i = 0; i < n_; ++i) m *= w.pw[i * w.stride + e[i]];
    return m;
  }

  double monomial_derivative(const Scratch& w, const int* e, std::size_t j) const {
    double m = static_cast<double>(e[j]);
    for (std::size_t i = 0; i < n_; ++i) m *= w.pw[i * w.stride + (i == j ? e[i] - 1 : e[i])];
    return m;
  }

  void check_dim(const FourierTaylorField& o) const {
    if (o.n_ != n_) throw Error(ErrorCode::InvalidModel, "field dimension mismatch");
  }

  void validate() const {
    if (domain_.center.size() != n_) throw Error(ErrorCode::InvalidModel, "domain center has wrong dimension");
    if (!(domain_.radius > 0.0)) throw Error(ErrorCode::InvalidModel, "domain radius must be positive");
    for (const auto& [k, p] : modes_) {
      if (k.size() != n_) throw Error(ErrorCode::InvalidModel, "wave vector has wrong dimension");
      if (p.nvars() != n_ && !p.is_zero()) throw Error(ErrorCode::InvalidModel, "coefficient has wrong dimension");
      double scale = std::max(1.0, p.coefficient_sup());
      if (sup_norm(k) == 0) {
        for (const auto& [e, c] : p.terms())
          if (std::fabs(c.imag()) > 1e-14 * scale)
            throw Error(ErrorCode::InvalidModel, "mean mode must have real coefficients");
        continue;
      }
      auto it = modes_.find(negated(k));
      if (it == modes_.end()) {
        if (!p.is_zero()) throw Error(ErrorCode::InvalidModel, "mode without conjugate partner");
        continue;
      }
      auto diff = it->second - conj(p);
      if (diff.coefficient_sup() > 1e-14 * scale)
        throw Error(ErrorCode::InvalidModel, "conjugate mode coefficients do not match");
    }
  }

  void compile() {
    compiled_.clear();
    max_exp_ = 0;
    for (const auto& [k, p] : modes_) {
      CompiledMode m;
      m.k2pi.resize(n_);
      for (std::size_t i = 0; i < n_; ++i) m.k2pi[i] = kTwoPi * static_cast<double>(k[i]);
      for (const auto& [e, c] : p.terms()) {
        m.terms.push_back({e, c});
        for (int x : e) max_exp_ = std::max(max_exp_, x);
      }
      if (!m.terms.empty()) compiled_.push_back(std::move(m));
    }
  }

  std::size_t n_ = 0;
  ModeMap modes_;
  ActionDomain domain_;
  double width_ = 0.1;
  std::vector<CompiledMode> compiled_;
  int max_exp_ = 0;
};

/// Incremental construction of real fields from cosine/sine terms.
class FieldBuilder {
 public:
  explicit FieldBuilder(std::size_t n) : n_(n) {}

  /// p(I) cos(2 pi k.theta)
  FieldBuilder& cos(const WaveVector& k, const ActionPolynomial& p) {
    if (sup_norm(k) == 0) return mean(p);
    auto c = to_complex(p) * std::complex<double>(0.5, 0.0);
    add(k, c);
    add(negated(k), c);
    return *this;
  }
  FieldBuilder& cos(const WaveVector& k, double a = 1.0) { return cos(k, ActionPolynomial::constant(n_, a)); }

  /// p(I) sin(2 pi k.theta)
  FieldBuilder& sin(const WaveVector& k, const ActionPolynomial& p) {
    if (sup_norm(k) == 0) return *this;
    auto c = to_complex(p);
    add(k, c * std::complex<double>(0.0, -0.5));
    add(negated(k), c * std::complex<double>(0.0, 0.5));
    return *this;
  }
  FieldBuilder& sin(const WaveVector& k, double a = 1.0) { return sin(k, ActionPolynomial::constant(n_, a)); }

  /// Angle-independent part.
  FieldBuilder& mean(const ActionPolynomial& p) {
    add(WaveVector(n_, 0), to_complex(p));
    return *this;
  }

  /// c at k and conj(c) at -k.
  FieldBuilder& mode(const WaveVector& k, const ComplexPolynomial& c) {
    if (sup_norm(k) == 0) return mean(real_part(c));
    add(k, c);
    add(negated(k), conj(c));
    return *this;
  }

  FieldBuilder& domain(ActionDomain d) {
    domain_ = std::move(d);
    return *this;
  }
  FieldBuilder& width(double s) {
    width_ = s;
    return *this;
  }

  FourierTaylorField build() const {
    FourierTaylorField::ModeMap m;
    for (const auto& [k, p] : modes_)
      if (!p.is_zero()) m.emplace(k, p);
    return FourierTaylorField(n_, std::move(m), domain_, width_);
  }

 private:
  void add(const WaveVector& k, const ComplexPolynomial& c) {
    if (k.size() != n_) throw Error(ErrorCode::InvalidModel, "wave vector has wrong dimension");
    auto& slot = modes_.try_emplace(k, ComplexPolynomial(n_)).first->second;
    slot += c;
  }

  std::size_t n_;
  std::map<WaveVector, ComplexPolynomial> modes_;
  ActionDomain domain_;
  double width_ = 0.1;
};

/// Shorthand for monomials: mono(n, {2, 0}) = I_1^2.
inline ActionPolynomial mono(std::size_t n, MultiIndex e, double c = 1.0) {
  ActionPolynomial p(n);
  p.add_term(e, c);
  return p;
}

/// Keeps the modes whose last n - d wave components vanish: the average over
/// the trailing n - d angles.
inline FourierTaylorField partial_average(const FourierTaylorField& f, std::size_t d) {
  if (d < 1 || d + 1 > f.n()) throw Error(ErrorCode::DomainError, "partial average needs 1 <= d <= n-1");
  FourierTaylorField::ModeMap out;
  for (const auto& [k, p] : f.modes()) {
    bool keep = std::all_of(k.begin() + static_cast<long>(d), k.end(), [](long v) { return v == 0; });
    if (keep) out.emplace(k, p);
  }
  return f.with_modes(std::move(out));
}

/// Average over all angles.
inline ActionPolynomial full_average(const FourierTaylorField& f) {
  return real_part(f.mode(WaveVector(f.n(), 0)));
}

/// Element of P_2(n, m): a polynomial with homogeneous parts of degrees 2..m only.
struct JetPolynomial {
  int m = 2;
  ActionPolynomial poly;

  JetPolynomial() = default;
  JetPolynomial(int m_, ActionPolynomial p) : m(m_), poly(std::move(p)) {
    if (m < 2) throw Error(ErrorCode::DegreeError, "jet order must be >= 2");
    for (const auto& [e, c] : poly.terms()) {
      int d = total_degree(e);
      if (d < 2 || d > m) throw Error(ErrorCode::DegreeError, "jet has a term of degree " + std::to_string(d));
    }
  }
  std::size_t n() const noexcept { return poly.nvars(); }
};

/// Homogeneous terms of degrees 2..m of the Taylor expansion of p at I_star.
inline JetPolynomial taylor_jet(const ActionPolynomial& p, std::span<const double> I_star, int m) {
  if (m < 2) throw Error(ErrorCode::DegreeError, "jet order must be >= 2");
  if (I_star.size() != p.nvars()) throw Error(ErrorCode::DomainError, "expansion point has wrong dimension");
  return JetPolynomial(m, p.shifted(I_star).degree_range(2, m));
}

/// H(theta, I) = alpha.I + eps f(theta, I).
class Hamiltonian {
 public:
  Hamiltonian(FrequencyVector alpha, double epsilon, FourierTaylorField f)
      : alpha_(std::move(alpha)), eps_(epsilon), f_(std::move(f)) {
    if (alpha_.size() != f_.n()) throw Error(ErrorCode::InvalidModel, "alpha and field dimensions differ");
    if (!(eps_ >= 0.0)) throw Error(ErrorCode::DomainError, "epsilon must be >= 0");
  }

  std::size_t n() const noexcept { return f_.n(); }
  const FrequencyVector& alpha() const noexcept { return alpha_; }
  double epsilon() const noexcept { return eps_; }
  const FourierTaylorField& field() const noexcept { return f_; }
  const ActionDomain& domain() const noexcept { return f_.domain(); }

  Hamiltonian with_epsilon(double e) const { return Hamiltonian(alpha_, e, f_); }

  double evaluate(std::span<const double> theta, std::span<const double> I) const {
    check(I);
    return linear(I) + eps_ * f_.evaluate(theta, I);
  }

  std::vector<double> grad_theta(std::span<const double> theta, std::span<const double> I) const {
    check(I);
    std::vector<double> gt(n()), gi(n());
    f_.gradients(theta, I, gt, gi);
    for (double& v : gt) v *= eps_;
    return gt;
  }

  std::vector<double> grad_I(std::span<const double> theta, std::span<const double> I) const {
    check(I);
    std::vector<double> gt(n()), gi(n());
    f_.gradients(theta, I, gt, gi);
    for (std::size_t i = 0; i < n(); ++i) gi[i] = alpha_[i] + eps_ * gi[i];
    return gi;
  }

  // Integrator interface (no domain check; callers check accepted states).
  double energy(std::span<const double> theta, std::span<const double> I) const {
    return linear(I) + eps_ * f_.evaluate(theta, I);
  }
  void vector_field(std::span<const double> theta, std::span<const double> I, std::span<double> theta_dot,
                    std::span<double> I_dot) const {
    f_.gradients(theta, I, I_dot, theta_dot);
    for (std::size_t i = 0; i < n(); ++i) {
      theta_dot[i] = alpha_[i] + eps_ * theta_dot[i];
      I_dot[i] = -eps_ * I_dot[i];
    }
  }
  double lipschitz_bound() const { return eps_ * f_.lipschitz_bound(); }
  bool separable() const { return f_.theta_only(); }
  void rotation(std::span<double> theta_dot) const {
    for (std::size_t i = 0; i < n(); ++i) theta_dot[i] = alpha_[i];
  }

 private:
  double linear(std::span<const double> I) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n(); ++i) s += alpha_[i] * I[i];
    return s;
  }
  void check(std::span<const double> I) const {
    if (I.size() != n()) throw Error(ErrorCode::DomainError, "action vector has wrong dimension");
    if (!f_.domain().contains(I)) throw Error(ErrorCode::DomainError, "action outside the model domain");
  }

  FrequencyVector alpha_;
  double eps_;
  FourierTaylorField f_;
};

/// Hamiltonian given by a bare field, H = f (no linear part); used for the
/// generating flows of normal forms.
class FieldHamiltonian {
 public:
  explicit FieldHamiltonian(FourierTaylorField f, double scale = 1.0) : f_(std::move(f)), scale_(scale) {}

  std::size_t n() const noexcept { return f_.n(); }
  const ActionDomain& domain() const noexcept { return f_.domain(); }
  double energy(std::span<const double> theta, std::span<const double> I) const {
    return scale_ * f_.evaluate(theta, I);
  }
  void vector_field(std::span<const double> theta, std::span<const double> I, std::span<double> theta_dot,
                    std::span<double> I_dot) const {
    f_.gradients(theta, I, I_dot, theta_dot);
    for (std::size_t i = 0; i < n(); ++i) {
      theta_dot[i] *= scale_;
      I_dot[i] *= -scale_;
    }
  }
  double lipschitz_bound() const { return std::fabs(scale_) * f_.lipschitz_bound(); }
  bool separable() const { return false; }
  void rotation(std::span<double> theta_dot) const { std::fill(theta_dot.begin(), theta_dot.end(), 0.0); }

 private:
  FourierTaylorField f_;
  double scale_;
};

}  // namespace hamlab
