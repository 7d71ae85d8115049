#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "error.hpp"

namespace hamlab {

using MultiIndex = std::vector<int>;

inline int total_degree(const MultiIndex& e) { return std::accumulate(e.begin(), e.end(), 0); }

namespace detail {
template <class T>
double magnitude(const T& v) {
  return std::abs(v);
}
inline double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}
}  // namespace detail

/// Sparse polynomial in n real variables with coefficients of type T
/// (double or std::complex<double>), stored as exponent -> coefficient.
/// Zero coefficients are never stored.
template <class T>
class Polynomial {
 public:
  using Scalar = T;
  using Terms = std::map<MultiIndex, T>;

  Polynomial() = default;
  explicit Polynomial(std::size_t n) : n_(n) {}

  static Polynomial constant(std::size_t n, T c) {
    Polynomial p(n);
    p.add_term(MultiIndex(n, 0), c);
    return p;
  }
  static Polynomial variable(std::size_t n, std::size_t i, T c = T(1)) {
    MultiIndex e(n, 0);
    e[i] = 1;
    Polynomial p(n);
    p.add_term(e, c);
    return p;
  }

  std::size_t nvars() const noexcept { return n_; }
  const Terms& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }
  std::size_t size() const noexcept { return terms_.size(); }

  int degree() const {
    int d = 0;
    for (const auto& [e, c] : terms_) d = std::max(d, total_degree(e));
    return d;
  }

  T coefficient(const MultiIndex& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? T(0) : it->second;
  }

  void add_term(const MultiIndex& e, T c) {
    if (e.size() != n_) throw Error(ErrorCode::InvalidModel, "exponent length does not match variable count");
    for (int x : e)
      if (x < 0) throw Error(ErrorCode::InvalidModel, "negative exponent");
    if (c == T(0)) return;
    auto [it, inserted] = terms_.try_emplace(e, c);
    if (!inserted) {
      it->second += c;
      if (it->second == T(0)) terms_.erase(it);
    }
  }

  T operator()(std::span<const double> x) const {
    T s(0);
    for (const auto& [e, c] : terms_) {
      double m = 1.0;
      for (std::size_t i = 0; i < n_; ++i)
        for (int p = 0; p < e[i]; ++p) m *= x[i];
      s += c * m;
    }
    return s;
  }

  Polynomial derivative(std::size_t i) const {
    Polynomial d(n_);
    for (const auto& [e, c] : terms_) {
      if (e[i] == 0) continue;
      MultiIndex f = e;
      f[i] -= 1;
      d.add_term(f, c * static_cast<double>(e[i]));
    }
    return d;
  }

  /// Terms of total degree in [lo, hi].
  Polynomial degree_range(int lo, int hi) const {
    Polynomial p(n_);
    for (const auto& [e, c] : terms_) {
      int d = total_degree(e);
      if (d >= lo && d <= hi) p.terms_.emplace(e, c);
    }
    return p;
  }

  /// q(X) = p(shift + X), expanded exactly by the binomial theorem.
  Polynomial shifted(std::span<const double> shift) const {
    Polynomial out(n_);
    for (const auto& [e, c] : terms_) {
      // product over variables of sum_j C(e_i, j) shift_i^(e_i - j) X_i^j
      std::vector<std::pair<MultiIndex, T>> acc{{MultiIndex(n_, 0), c}};
      for (std::size_t i = 0; i < n_; ++i) {
        if (e[i] == 0) continue;
        std::vector<std::pair<MultiIndex, T>> next;
        for (const auto& [m, v] : acc) {
          for (int j = 0; j <= e[i]; ++j) {
            double w = detail::binomial(e[i], j) * std::pow(shift[i], e[i] - j);
            if (w == 0.0) continue;
            MultiIndex mm = m;
            mm[i] = j;
            next.emplace_back(std::move(mm), v * w);
          }
        }
        acc = std::move(next);
      }
      for (auto& [m, v] : acc) out.add_term(m, v);
    }
    return out;
  }

  Polynomial& operator+=(const Polynomial& o) {
    adopt_dim(o);
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    adopt_dim(o);
    for (const auto& [e, c] : o.terms_) add_term(e, -c);
    return *this;
  }
  Polynomial& operator*=(T s) {
    if (s == T(0)) {
      terms_.clear();
      return *this;
    }
    for (auto& [e, c] : terms_) c *= s;
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, T s) { return a *= s; }
  friend Polynomial operator*(T s, Polynomial a) { return a *= s; }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    Polynomial p(std::max(a.n_, b.n_));
    for (const auto& [ea, ca] : a.terms_)
      for (const auto& [eb, cb] : b.terms_) {
        MultiIndex e(p.n_, 0);
        for (std::size_t i = 0; i < p.n_; ++i) e[i] = ea[i] + eb[i];
        p.add_term(e, ca * cb);
      }
    return p;
  }

  Polynomial pow(int k) const {
    Polynomial r = constant(n_, T(1));
    for (int i = 0; i < k; ++i) r = r * *this;
    return r;
  }

  /// Largest coefficient magnitude (the coefficient sup norm).
  double coefficient_sup() const {
    double m = 0.0;
    for (const auto& [e, c] : terms_) m = std::max(m, detail::magnitude(c));
    return m;
  }

  /// Drops coefficients with magnitude <= tol.
  Polynomial pruned(double tol) const {
    Polynomial p(n_);
    for (const auto& [e, c] : terms_)
      if (detail::magnitude(c) > tol) p.terms_.emplace(e, c);
    return p;
  }

  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.n_ == b.n_ && a.terms_ == b.terms_;
  }

 private:
  void adopt_dim(const Polynomial& o) {
    if (n_ == 0 && terms_.empty()) n_ = o.n_;
    if (o.n_ != n_ && !o.terms_.empty())
      throw Error(ErrorCode::InvalidModel, "polynomial dimension mismatch");
  }

  std::size_t n_ = 0;
  Terms terms_;
};

using ActionPolynomial = Polynomial<double>;
using ComplexPolynomial = Polynomial<std::complex<double>>;

inline ComplexPolynomial to_complex(const ActionPolynomial& p) {
  ComplexPolynomial c(p.nvars());
  for (const auto& [e, v] : p.terms()) c.add_term(e, {v, 0.0});
  return c;
}

inline ActionPolynomial real_part(const ComplexPolynomial& p) {
  ActionPolynomial r(p.nvars());
  for (const auto& [e, v] : p.terms()) r.add_term(e, v.real());
  return r;
}

inline ActionPolynomial imag_part(const ComplexPolynomial& p) {
  ActionPolynomial r(p.nvars());
  for (const auto& [e, v] : p.terms()) r.add_term(e, v.imag());
  return r;
}

inline ComplexPolynomial conj(const ComplexPolynomial& p) {
  ComplexPolynomial r(p.nvars());
  for (const auto& [e, v] : p.terms()) r.add_term(e, std::conj(v));
  return r;
}

/// All exponents in n variables with total degree in [lo, hi], in lexicographic order.
inline std::vector<MultiIndex> monomials(std::size_t n, int lo, int hi) {
  std::vector<MultiIndex> out;
  MultiIndex e(n, 0);
  auto rec = [&](auto&& self, std::size_t i, int remaining) -> void {
    if (i + 1 == n) {
      for (int v = 0; v <= remaining; ++v) {
        e[i] = v;
        int d = total_degree(e);
        if (d >= lo && d <= hi) out.push_back(e);
      }
      e[i] = 0;
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      e[i] = v;
      self(self, i + 1, remaining - v);
    }
    e[i] = 0;
  };
  if (n > 0) rec(rec, 0, hi);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace hamlab
