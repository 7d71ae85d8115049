#pragma once

// Arithmetic of frequency vectors: small divisors |k.alpha| over integer
// lattices, the functions Psi/Delta, resonance search and Diophantine
// certificates. All norms on integer vectors are sup norms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace hamlab {

using WaveVector = std::vector<long>;

struct ArithConfig {
  // A lattice vector k counts as resonant when |k.alpha| <= resonance_tol * |k|.
  double resonance_tol = 1e-12;
  // Maximal number of lattice points (2Q+1)^n an enumeration may visit.
  double budget = 1e8;
  // When false the tolerance is absolute rather than proportional to |k|.
  bool scale_tol_by_norm = true;
};

namespace detail {

// p/q with q <= max_den such that p/q == x exactly in double arithmetic.
inline std::optional<std::pair<std::int64_t, std::int64_t>> exact_ratio(double x,
                                                                        std::int64_t max_den) {
  if (!std::isfinite(x)) return std::nullopt;
  if (x == std::floor(x) && std::fabs(x) < 9e15) return std::pair<std::int64_t, std::int64_t>{static_cast<std::int64_t>(x), 1};
  // Continued-fraction convergents of |x|.
  double r = std::fabs(x);
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  for (int it = 0; it < 64; ++it) {
    double a = std::floor(r);
    if (a > 9e15) break;
    auto ai = static_cast<std::int64_t>(a);
    std::int64_t p2 = ai * p1 + p0, q2 = ai * q1 + q0;
    if (q2 > max_den) break;
    double sign = x < 0 ? -1.0 : 1.0;
    if (sign * static_cast<double>(p2) / static_cast<double>(q2) == x) {
      return std::pair<std::int64_t, std::int64_t>{x < 0 ? -p2 : p2, q2};
    }
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    double frac = r - a;
    if (frac == 0.0) break;
    r = 1.0 / frac;
  }
  return std::nullopt;
}

}  // namespace detail

/// A frequency vector alpha in R^n, n >= 2.
///
/// When every component is exactly a ratio of small integers, an integer
/// image `alpha * L` is kept so that resonance tests on constructed rational
/// vectors are decided in exact integer arithmetic.
class FrequencyVector {
 public:
  /// Scale v to unit sup norm.
  static FrequencyVector normalize(std::span<const double> v) {
    check_shape(v);
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    std::vector<double> c(v.begin(), v.end());
    for (double& x : c) x /= m;
    return FrequencyVector(std::move(c));
  }

  /// Take v as given (no scaling); `normalized()` reports whether it already has unit norm.
  static FrequencyVector as_is(std::span<const double> v) {
    check_shape(v);
    return FrequencyVector(std::vector<double>(v.begin(), v.end()));
  }

  std::size_t size() const noexcept { return c_.size(); }
  double operator[](std::size_t i) const { return c_[i]; }
  const std::vector<double>& components() const noexcept { return c_; }
  bool normalized() const noexcept { return normalized_; }
  bool has_exact_form() const noexcept { return !exact_.empty(); }

  /// k.alpha, summed in index order.
  double dot(std::span<const long> k) const {
    double s = 0.0;
    for (std::size_t i = 0; i < c_.size(); ++i) s += static_cast<double>(k[i]) * c_[i];
    return s;
  }

  /// True iff k.alpha == 0 exactly; only meaningful when has_exact_form().
  bool exactly_resonant(std::span<const long> k) const {
    __int128 s = 0;
    for (std::size_t i = 0; i < exact_.size(); ++i) s += static_cast<__int128>(k[i]) * exact_[i];
    return s == 0;
  }

  FrequencyVector operator-() const {
    std::vector<double> c = c_;
    for (double& x : c) x = -x;
    return FrequencyVector(std::move(c));
  }

 private:
  explicit FrequencyVector(std::vector<double> c) : c_(std::move(c)) {
    double m = 0.0;
    for (double x : c_) m = std::max(m, std::fabs(x));
    normalized_ = std::fabs(m - 1.0) <= std::numeric_limits<double>::epsilon();
    build_exact();
  }

  static void check_shape(std::span<const double> v) {
    if (v.size() < 2) throw Error(ErrorCode::DimensionTooSmall, "frequency vector needs n >= 2");
    bool all_zero = std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
    if (all_zero) throw Error(ErrorCode::ZeroVector, "frequency vector is zero");
    for (double x : v)
      if (!std::isfinite(x)) throw Error(ErrorCode::DomainError, "non-finite frequency component");
  }

  void build_exact() {
    constexpr std::int64_t kMaxDen = std::int64_t{1} << 20;
    constexpr std::int64_t kMaxLcm = std::int64_t{1} << 53;
    std::vector<std::pair<std::int64_t, std::int64_t>> r;
    std::int64_t lcm = 1;
    for (double x : c_) {
      auto q = detail::exact_ratio(x, kMaxDen);
      if (!q) return;
      std::int64_t g = std::gcd(lcm, q->second);
      if (lcm / g > kMaxLcm / q->second) return;
      lcm = lcm / g * q->second;
      r.push_back(*q);
    }
    exact_.reserve(r.size());
    for (auto [p, q] : r) {
      __int128 a = static_cast<__int128>(p) * (lcm / q);
      if (a > std::numeric_limits<std::int64_t>::max() || a < std::numeric_limits<std::int64_t>::min()) {
        exact_.clear();
        return;
      }
      exact_.push_back(static_cast<std::int64_t>(a));
    }
  }

  std::vector<double> c_;
  bool normalized_ = false;
  std::vector<std::int64_t> exact_;
};

/// Visits every k in Z^n with lo <= |k| <= hi whose first nonzero component
/// is positive (one representative per pair {k, -k}). `fn(k)` gets a span
/// valid for the duration of the call.
template <class Fn>
void for_each_canonical(std::size_t n, long lo, long hi, Fn&& fn) {
  lo = std::max(lo, 1L);
  if (hi < lo || n == 0) return;
  std::vector<long> k(n, 0);
  // depth-first over coordinates; `lead_zero`: all previous coordinates are zero.
  auto rec = [&](auto&& self, std::size_t i, bool lead_zero, long cur_max) -> void {
    if (i + 1 == n) {
      auto visit = [&](long v) {
        k[i] = v;
        fn(std::span<const long>(k));
      };
      if (cur_max >= lo) {
        long start = lead_zero ? 1 : -hi;
        for (long v = start; v <= hi; ++v) visit(v);
      } else {
        if (!lead_zero)
          for (long v = -hi; v <= -lo; ++v) visit(v);
        for (long v = lo; v <= hi; ++v) visit(v);
      }
      k[i] = 0;
      return;
    }
    long start = lead_zero ? 0 : -hi;
    for (long v = start; v <= hi; ++v) {
      k[i] = v;
      self(self, i + 1, lead_zero && v == 0, std::max(cur_max, std::labs(v)));
    }
    k[i] = 0;
  };
  rec(rec, 0, true, 0);
}

/// Minimum of |k.alpha| over one shell |k| = q.
struct ShellMinimum {
  long q = 0;
  double value = std::numeric_limits<double>::infinity();
  WaveVector witness;
  // set when some k in the shell is resonant; `witness` is then that k
  bool resonant = false;
};

inline double lattice_box_size(std::size_t n, long q) {
  return std::pow(2.0 * static_cast<double>(q) + 1.0, static_cast<double>(n));
}

/// Scans lattice shells |k| = 1, 2, ... in increasing order.
class ShellScanner {
 public:
  ShellScanner(const FrequencyVector& alpha, ArithConfig cfg) : alpha_(alpha), cfg_(cfg) {}

  ShellMinimum next() {
    long q = ++q_;
    if (lattice_box_size(alpha_.size(), q) > cfg_.budget) {
      throw Error(ErrorCode::EnumerationBudgetExceeded,
                  "lattice box of radius " + std::to_string(q) + " exceeds budget");
    }
    ShellMinimum s;
    s.q = q;
    const bool exact = alpha_.has_exact_form();
    const double tol = cfg_.scale_tol_by_norm ? cfg_.resonance_tol * static_cast<double>(q) : cfg_.resonance_tol;
    for_each_canonical(alpha_.size(), q, q, [&](std::span<const long> k) {
      double v = std::fabs(alpha_.dot(k));
      bool res = exact ? alpha_.exactly_resonant(k) : v <= tol;
      if (res && !s.resonant) {
        s.resonant = true;
        s.value = exact ? 0.0 : v;
        s.witness.assign(k.begin(), k.end());
      }
      if (!s.resonant && v < s.value) {
        s.value = v;
        s.witness.assign(k.begin(), k.end());
      }
    });
    return s;
  }

  long shells_done() const noexcept { return q_; }

 private:
  const FrequencyVector& alpha_;
  ArithConfig cfg_;
  long q_ = 0;
};

inline void require_normalized(const FrequencyVector& alpha) {
  if (!alpha.normalized()) throw Error(ErrorCode::DomainError, "frequency vector must have unit sup norm");
}

[[noreturn]] inline void throw_resonant(const ShellMinimum& s) {
  throw Error(ErrorCode::ResonantWithinRange,
              "resonant lattice vector with |k| = " + std::to_string(s.q), s.witness);
}

/// Psi_alpha(Q) = max |k.alpha|^-1 over 0 < |k| <= floor(Q).
inline double psi(const FrequencyVector& alpha, double Q, const ArithConfig& cfg = {}) {
  require_normalized(alpha);
  if (!(Q >= 1.0)) throw Error(ErrorCode::DomainError, "psi requires Q >= 1");
  auto qmax = static_cast<long>(std::floor(Q));
  if (lattice_box_size(alpha.size(), qmax) > cfg.budget)
    throw Error(ErrorCode::EnumerationBudgetExceeded, "lattice box exceeds budget");
  ShellScanner scan(alpha, cfg);
  double vmin = std::numeric_limits<double>::infinity();
  for (long q = 1; q <= qmax; ++q) {
    ShellMinimum s = scan.next();
    if (s.resonant) throw_resonant(s);
    vmin = std::min(vmin, s.value);
  }
  return 1.0 / vmin;
}

/// Delta_alpha(x) = sup{Q >= 1 : Q Psi(Q) <= x}, with Psi(Q) = Psi(floor Q).
///
/// Returns 1 when even Q = 1 violates the bound (the defining set is empty).
inline double delta(const FrequencyVector& alpha, double x, const ArithConfig& cfg = {}) {
  require_normalized(alpha);
  if (!(x >= 1.0)) throw Error(ErrorCode::DomainError, "delta requires x >= 1");
  ShellScanner scan(alpha, cfg);
  double vmin = std::numeric_limits<double>::infinity();
  long best_q = 0;
  double best_psi = 0.0;
  // Psi >= 1 for unit-norm alpha, so Q Psi(Q) <= x forces Q <= x.
  while (static_cast<double>(scan.shells_done()) < x) {
    ShellMinimum s = scan.next();
    if (s.resonant) throw_resonant(s);
    vmin = std::min(vmin, s.value);
    double ps = 1.0 / vmin;
    if (static_cast<double>(s.q) * ps > x) break;
    best_q = s.q;
    best_psi = ps;
  }
  if (best_q == 0) return 1.0;
  double q = static_cast<double>(best_q);
  return std::max(q, std::min(q + 1.0, x / best_psi));
}

struct ResonanceReport {
  bool resonant = false;
  std::optional<WaveVector> witness;
  double witness_value = std::numeric_limits<double>::infinity();
  long q_searched = 0;
};

/// Minimizer of |k.alpha| over 0 < |k| <= q_max; resonant iff the minimum is
/// <= tol or an exact integer relation exists.
inline ResonanceReport find_resonance(const FrequencyVector& alpha, long q_max, double tol,
                                      const ArithConfig& cfg = {}) {
  if (q_max < 1) throw Error(ErrorCode::DomainError, "q_max must be >= 1");
  if (!(tol > 0.0)) throw Error(ErrorCode::DomainError, "tol must be positive");
  if (lattice_box_size(alpha.size(), q_max) > cfg.budget)
    throw Error(ErrorCode::EnumerationBudgetExceeded, "lattice box exceeds budget");
  ArithConfig shell_cfg = cfg;
  shell_cfg.resonance_tol = tol;
  shell_cfg.scale_tol_by_norm = false;
  ShellScanner scan(alpha, shell_cfg);
  ResonanceReport rep;
  rep.q_searched = q_max;
  for (long q = 1; q <= q_max; ++q) {
    ShellMinimum s = scan.next();
    if (s.resonant) {
      rep.resonant = true;
      rep.witness = s.witness;
      rep.witness_value = s.value;
      return rep;
    }
    if (s.value < rep.witness_value) {
      rep.witness_value = s.value;
      rep.witness = s.witness;
    }
  }
  rep.resonant = rep.witness_value <= tol;
  return rep;
}

struct DiophantineCertificate {
  double gamma = 0.0;
  double tau = 0.0;
  long q_max = 0;
  // (Q, min over 0<|k|<=Q of |k.alpha| |k|^tau), at Q = 1, 2, 4, ... and q_max
  std::vector<std::pair<long, double>> margin_curve;
};

inline DiophantineCertificate diophantine_certificate(const FrequencyVector& alpha, double tau,
                                                      long q_max, const ArithConfig& cfg = {}) {
  require_normalized(alpha);
  if (q_max < 1) throw Error(ErrorCode::DomainError, "q_max must be >= 1");
  if (!(tau > 0.0)) throw Error(ErrorCode::DomainError, "tau must be positive");
  if (lattice_box_size(alpha.size(), q_max) > cfg.budget)
    throw Error(ErrorCode::EnumerationBudgetExceeded, "lattice box exceeds budget");
  ShellScanner scan(alpha, cfg);
  DiophantineCertificate cert;
  cert.tau = tau;
  cert.q_max = q_max;
  double running = std::numeric_limits<double>::infinity();
  long next_record = 1;
  for (long q = 1; q <= q_max; ++q) {
    ShellMinimum s = scan.next();
    if (s.resonant) throw_resonant(s);
    running = std::min(running, s.value * std::pow(static_cast<double>(q), tau));
    if (q == next_record || q == q_max) {
      cert.margin_curve.emplace_back(q, running);
      if (q == next_record) next_record *= 2;
    }
  }
  cert.gamma = running;
  return cert;
}

}  // namespace hamlab
