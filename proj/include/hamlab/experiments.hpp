#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hamlab/conditions.hpp"
#include "hamlab/error.hpp"
#include "hamlab/format.hpp"
#include "hamlab/freq_arith.hpp"
#include "hamlab/model_io.hpp"
#include "hamlab/parallel.hpp"
#include "hamlab/symplectic.hpp"

namespace hamlab {

enum class ExperimentKind { diffusion, stability };

inline std::string to_string(ExperimentKind k) { return k == ExperimentKind::diffusion ? "diffusion" : "stability"; }

struct TRule {
  enum Kind { multiple_of_inv_eps, fixed } kind = multiple_of_inv_eps;
  double value = 0.0;  // factor, or T
  double operator()(double eps) const { return kind == fixed ? value : value / eps; }
};

struct HRule {
  enum Kind { fixed, scaled } kind = fixed;
  double h0 = 1e-2;
  double p = 0.0;
  double operator()(double eps) const { return kind == fixed ? h0 : h0 * std::pow(eps, p); }
};

struct InitialCondition {
  std::vector<double> theta;
  std::vector<double> I;
};

struct SweepConfig {
  std::string model;  // path; relative paths resolve against the config file's directory
  ExperimentKind experiment = ExperimentKind::diffusion;
  std::vector<double> eps_list;
  double c1 = 0.1;
  TRule T_rule;
  HRule h_rule;
  std::vector<InitialCondition> initial_conditions;
  std::uint64_t seed = 1;
  // optional knobs
  double c = 1.0;  // Delta_alpha(c / eps)
  Scheme scheme = Scheme::implicit_midpoint;
  double fp_tol = 1e-13;
  double energy_flag = 1e-6;
  bool timing = false;  // wall_s stays 0 unless set, so artifacts are reproducible
  unsigned threads = 1;
};

namespace detail {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T dflt) {
  return j.contains(key) ? j.at(key).get<T>() : dflt;
}

inline TRule parse_t_rule(const nlohmann::json& j, ExperimentKind kind, double c1) {
  if (j.is_null()) {
    if (kind == ExperimentKind::diffusion) return {TRule::multiple_of_inv_eps, 10.0 * c1 / kTwoPi};
    throw Error(ErrorCode::InvalidConfig, "stability sweeps need an explicit T_rule");
  }
  auto k = j.at("kind").get<std::string>();
  if (k == "multiple_of_inv_eps") return {TRule::multiple_of_inv_eps, j.at("factor").get<double>()};
  if (k == "fixed") return {TRule::fixed, j.at("T").get<double>()};
  throw Error(ErrorCode::InvalidConfig, "unknown T_rule kind '" + k + "'");
}

inline HRule parse_h_rule(const nlohmann::json& j) {
  if (j.is_null()) return {};
  auto k = j.at("kind").get<std::string>();
  if (k == "fixed") return {HRule::fixed, j.at("h").get<double>(), 0.0};
  if (k == "scaled") return {HRule::scaled, j.at("h0").get<double>(), j.at("p").get<double>()};
  throw Error(ErrorCode::InvalidConfig, "unknown h_rule kind '" + k + "'");
}

}  // namespace detail

inline SweepConfig sweep_config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {}) {
  SweepConfig c;
  try {
    c.model = j.at("model").get<std::string>();
    if (!base.empty() && std::filesystem::path(c.model).is_relative()) c.model = (base / c.model).lexically_normal().string();
    auto kind = j.at("experiment").get<std::string>();
    if (kind == "diffusion")
      c.experiment = ExperimentKind::diffusion;
    else if (kind == "stability")
      c.experiment = ExperimentKind::stability;
    else
      throw Error(ErrorCode::InvalidConfig, "experiment must be diffusion or stability");
    c.eps_list = j.at("eps_list").get<std::vector<double>>();
    c.c1 = detail::get_or(j, "c1", c.c1);
    c.T_rule = detail::parse_t_rule(j.contains("T_rule") ? j.at("T_rule") : nlohmann::json(), c.experiment, c.c1);
    c.h_rule = detail::parse_h_rule(j.contains("h_rule") ? j.at("h_rule") : nlohmann::json());
    for (const auto& ic : j.at("initial_conditions"))
      c.initial_conditions.push_back({ic.at("theta").get<std::vector<double>>(), ic.at("I").get<std::vector<double>>()});
    c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);
    c.c = detail::get_or(j, "c", c.c);
    if (j.contains("scheme")) c.scheme = parse_scheme(j.at("scheme").get<std::string>());
    c.fp_tol = detail::get_or(j, "fp_tol", c.fp_tol);
    c.energy_flag = detail::get_or(j, "energy_flag", c.energy_flag);
    c.timing = detail::get_or(j, "timing", c.timing);
    c.threads = detail::get_or(j, "threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("sweep config: ") + e.what());
  }
  if (c.eps_list.empty()) throw Error(ErrorCode::InvalidConfig, "eps_list is empty");
  for (std::size_t i = 0; i < c.eps_list.size(); ++i) {
    if (!(c.eps_list[i] >= 0.0)) throw Error(ErrorCode::InvalidConfig, "eps_list entries must be >= 0");
    if (i > 0 && !(c.eps_list[i] < c.eps_list[i - 1]))
      throw Error(ErrorCode::InvalidConfig, "eps_list must be strictly descending");
  }
  if (c.initial_conditions.empty()) throw Error(ErrorCode::InvalidConfig, "no initial conditions");
  if (c.experiment == ExperimentKind::diffusion && !(c.c1 > 0.0)) throw Error(ErrorCode::InvalidConfig, "c1 must be > 0");
  return c;
}

inline SweepConfig load_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
  return sweep_config_from_json(j, std::filesystem::path(path).parent_path());
}

struct SweepRecord {
  double eps = 0.0;
  std::size_t ic_index = 0;
  enum Outcome { hit, censored, failed } outcome = censored;
  double tau = std::numeric_limits<double>::quiet_NaN();
  double T_max = 0.0;
  double drift_at_T = 0.0;
  double max_drift = 0.0;
  double delta_inv = std::numeric_limits<double>::quiet_NaN();
  double energy_drift = 0.0;
  double wall_s = 0.0;
  bool energy_flagged = false;
  std::string error;  // ErrorCode name when failed

  std::string outcome_str() const {
    switch (outcome) {
      case hit: return "hit";
      case censored: return "censored";
      default: return "error:" + error;
    }
  }
};

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n_points = 0;
};

/// OLS of log y on log x.
inline FitResult fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::InvalidConfig, "fit inputs differ in length");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  const std::size_t n = lx.size();
  if (n < 3) throw Error(ErrorCode::InsufficientData, "power-law fit needs at least 3 points, have " + std::to_string(n));
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorCode::InsufficientData, "all x values coincide");
  FitResult r;
  r.n_points = n;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  r.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return r;
}

/// log tau against log eps over the hit records.
inline FitResult fit_powerlaw(const std::vector<SweepRecord>& records) {
  std::vector<double> x, y;
  for (const auto& r : records)
    if (r.outcome == SweepRecord::hit) {
      x.push_back(r.eps);
      y.push_back(r.tau);
    }
  return fit_loglog(x, y);
}

/// Leading zero components of alpha: the d of alpha = (0, alpha~).
inline std::size_t resonant_block(const FrequencyVector& a) {
  std::size_t d = 0;
  while (d < a.size() && a[d] == 0.0) ++d;
  return d;
}

struct SweepResult {
  SweepConfig config;
  std::string model_name;
  std::vector<SweepRecord> records;
  std::optional<FitResult> fit;
  std::string fit_error;
  std::vector<std::string> warnings;
};

inline SweepResult run_sweep(const SweepConfig& cfg, const Model& model) {
  SweepResult res;
  res.config = cfg;
  res.model_name = model.name;
  const auto& alpha = model.alpha;
  const std::size_t n = alpha.size();
  for (const auto& ic : cfg.initial_conditions)
    if (ic.theta.size() != n || ic.I.size() != n)
      throw Error(ErrorCode::InvalidConfig, "initial condition dimension differs from the model");

  if (cfg.experiment == ExperimentKind::diffusion) {
    std::size_t d = resonant_block(alpha);
    if (d == 0 || d >= n) {
      res.warnings.push_back("alpha has no resonant block (0, alpha~); G1 not applicable");
    } else if (!check_G1(model.field, d).holds) {
      res.warnings.push_back("G1 fails for this model; running as a negative control");
    }
  } else {
    auto rep = find_resonance(alpha, 16, 1e-12);
    if (rep.resonant)
      throw Error(ErrorCode::ResonantWithinRange, "stability sweep needs non-resonant alpha",
                  rep.witness ? *rep.witness : std::vector<long>{});
  }

  std::vector<double> delta_inv(cfg.eps_list.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t e = 0; e < cfg.eps_list.size(); ++e) {
    if (!(cfg.eps_list[e] > 0.0)) continue;
    try {
      delta_inv[e] = 1.0 / delta(alpha, std::max(1.0, cfg.c / cfg.eps_list[e]));
    } catch (const Error&) {
      // resonant alpha: no Delta envelope
    }
  }

  const std::size_t nic = cfg.initial_conditions.size();
  std::vector<SweepRecord> recs(cfg.eps_list.size() * nic);
  parallel_for(recs.size(), cfg.threads, [&](std::size_t job) {
    const std::size_t e = job / nic, i = job % nic;
    SweepRecord& r = recs[job];
    r.eps = cfg.eps_list[e];
    r.ic_index = i;
    r.delta_inv = delta_inv[e];
    auto t0 = std::chrono::steady_clock::now();
    try {
      Hamiltonian H = model.hamiltonian(r.eps);
      IntegratorConfig ic;
      ic.scheme = cfg.scheme;
      ic.h = cfg.h_rule(r.eps);
      ic.fp_tol = cfg.fp_tol;
      r.T_max = cfg.T_rule(r.eps);
      if (!std::isfinite(r.T_max))
        throw Error(ErrorCode::InvalidConfig, "T_rule gives an infinite horizon at eps = " + fmt17(r.eps));
      PhaseState s0{cfg.initial_conditions[i].theta, cfg.initial_conditions[i].I, 0.0};
      double c1 = cfg.experiment == ExperimentKind::diffusion ? cfg.c1 : 0.0;
      auto hr = run_until(H, s0, c1, r.T_max, ic);
      r.max_drift = hr.max_drift;
      r.energy_drift = hr.energy_drift;
      r.drift_at_T = action_distance(hr.final_state.I, s0.I);
      if (hr.tau) {
        r.outcome = SweepRecord::hit;
        r.tau = *hr.tau;
      } else {
        r.outcome = SweepRecord::censored;
      }
      r.energy_flagged = r.energy_drift > cfg.energy_flag;
    } catch (const Error& err) {
      r.outcome = SweepRecord::failed;
      r.error = to_string(err.code());
    }
    if (cfg.timing) r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  std::sort(recs.begin(), recs.end(), [](const SweepRecord& a, const SweepRecord& b) {
    return a.eps != b.eps ? a.eps < b.eps : a.ic_index < b.ic_index;
  });
  res.records = std::move(recs);

  try {
    if (cfg.experiment == ExperimentKind::diffusion) {
      res.fit = fit_powerlaw(res.records);
    } else {
      std::vector<double> x, y;
      for (const auto& r : res.records)
        if (r.outcome != SweepRecord::failed) {
          x.push_back(r.eps);
          y.push_back(r.max_drift);
        }
      res.fit = fit_loglog(x, y);
    }
  } catch (const Error& e) {
    res.fit_error = to_string(e.code());
  }
  return res;
}

inline SweepResult run_diffusion(SweepConfig cfg, const Model& model) {
  cfg.experiment = ExperimentKind::diffusion;
  return run_sweep(cfg, model);
}

inline SweepResult run_stability(SweepConfig cfg, const Model& model) {
  cfg.experiment = ExperimentKind::stability;
  return run_sweep(cfg, model);
}

inline std::string fmt_or_nan(double v) { return std::isnan(v) ? "nan" : fmt17(v); }

inline std::string records_csv(const std::vector<SweepRecord>& recs) {
  std::ostringstream o;
  o << "eps,ic,outcome,tau,max_drift,delta_inv,energy_drift,wall_s\n";
  for (const auto& r : recs)
    o << fmt17(r.eps) << ',' << r.ic_index << ',' << r.outcome_str() << ',' << fmt_or_nan(r.tau) << ','
      << fmt17(r.max_drift) << ',' << fmt_or_nan(r.delta_inv) << ',' << fmt17(r.energy_drift) << ','
      << fmt17(r.wall_s) << '\n';
  return o.str();
}

inline nlohmann::json fit_json(const SweepResult& res) {
  nlohmann::json j;
  j["experiment"] = to_string(res.config.experiment);
  j["y"] = res.config.experiment == ExperimentKind::diffusion ? "tau" : "max_drift";
  if (res.fit) {
    j["slope"] = res.fit->slope;
    j["intercept"] = res.fit->intercept;
    j["r2"] = res.fit->r2;
    j["n_points"] = res.fit->n_points;
  } else {
    j["error"] = res.fit_error;
  }
  return j;
}

inline std::string summary_text(const SweepResult& res) {
  const auto& c = res.config;
  std::ostringstream o;
  o << "experiment=" << to_string(c.experiment) << '\n';
  o << "model=" << res.model_name << '\n';
  o << "seed=" << c.seed << '\n';
  o << "records=" << res.records.size() << '\n';
  std::size_t hits = 0, cens = 0, fails = 0, flagged = 0;
  for (const auto& r : res.records) {
    hits += r.outcome == SweepRecord::hit;
    cens += r.outcome == SweepRecord::censored;
    fails += r.outcome == SweepRecord::failed;
    flagged += r.energy_flagged;
  }
  o << "hit=" << hits << "\ncensored=" << cens << "\nfailed=" << fails << '\n';
  o << "energy_flagged=" << flagged << " (energy_drift > " << c.energy_flag << ")\n";
  if (res.fit)
    o << "fit_slope=" << fmt17(res.fit->slope) << "\nfit_intercept=" << fmt17(res.fit->intercept)
      << "\nfit_r2=" << fmt17(res.fit->r2) << "\nfit_points=" << res.fit->n_points << '\n';
  else
    o << "fit=" << res.fit_error << '\n';
  for (const auto& r : res.records) {
    if (r.energy_flagged)
      o << "flag eps=" << fmt17(r.eps) << " ic=" << r.ic_index << " energy_drift=" << fmt17(r.energy_drift) << '\n';
    if (r.outcome == SweepRecord::failed) o << "error eps=" << fmt17(r.eps) << " ic=" << r.ic_index << ' ' << r.error << '\n';
  }
  if (c.experiment == ExperimentKind::stability) {
    // envelope comparison is reported, never asserted
    for (std::size_t e = 0; e < c.eps_list.size(); ++e) {
      double eps = c.eps_list[e], worst = 0.0, dinv = std::numeric_limits<double>::quiet_NaN();
      for (const auto& r : res.records)
        if (r.eps == eps) {
          worst = std::max(worst, r.max_drift);
          dinv = r.delta_inv;
        }
      o << "eps=" << fmt17(eps) << " max_drift=" << fmt17(worst) << " delta_inv=" << fmt_or_nan(dinv)
        << " ratio=" << fmt_or_nan(worst / dinv) << " drift_over_eps=" << fmt17(eps > 0 ? worst / eps : 0.0) << '\n';
    }
    o << "note=the doubly exponential stability time is not reachable by simulation; no time claim is tested\n";
  }
  for (const auto& w : res.warnings) o << "warning=" << w << '\n';
  return o.str();
}

/// Writes records.csv, fit.json and summary.txt into dir.
inline void write_sweep(const SweepResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write " + (dir / name).string());
    out << text;
  };
  put("records.csv", records_csv(res.records));
  put("fit.json", fit_json(res).dump(2) + "\n");
  put("summary.txt", summary_text(res));
}

}  // namespace hamlab
