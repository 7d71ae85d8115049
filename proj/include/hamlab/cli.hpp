#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hamlab/conditions.hpp"
#include "hamlab/error.hpp"
#include "hamlab/experiments.hpp"
#include "hamlab/format.hpp"
#include "hamlab/freq_arith.hpp"
#include "hamlab/model_io.hpp"
#include "hamlab/normalform.hpp"
#include "hamlab/parallel.hpp"
#include "hamlab/symplectic.hpp"

namespace hamlab::cli {

inline constexpr int kExitUsage = 64;
inline constexpr int kExitBadInput = 65;
inline constexpr int kExitNumeric = 70;
inline constexpr int kExitResonant = 2;
inline constexpr int kExitBudget = 3;

/// Bad flag values that CLI11 cannot catch on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::ResonantWithinRange: return kExitResonant;
    case ErrorCode::EnumerationBudgetExceeded:
    case ErrorCode::SamplingBudgetExceeded:
    case ErrorCode::CutoffTooLarge: return kExitBudget;
    case ErrorCode::InvalidModel:
    case ErrorCode::InvalidConfig: return kExitBadInput;
    case ErrorCode::ZeroVector:
    case ErrorCode::DimensionTooSmall: return kExitUsage;
    default: return kExitNumeric;
  }
}

inline std::vector<double> parse_csv(const std::string& s, const char* what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      v.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError(std::string("--") + what + ": cannot parse '" + tok + "' as a number");
    }
  }
  if (v.empty()) throw UsageError(std::string("--") + what + " is empty");
  return v;
}

/// One "key=value" line per scalar; arrays of numbers print as csv.
inline void print_flat(std::ostream& out, const std::string& prefix, const nlohmann::json& j) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) print_flat(out, prefix.empty() ? k : prefix + "." + k, v);
    return;
  }
  auto scalar = [](const nlohmann::json& x) -> std::string {
    if (x.is_number_integer() || x.is_number_unsigned()) return x.dump();
    if (x.is_number()) return fmt17(x.get<double>());
    if (x.is_string()) return x.get<std::string>();
    if (x.is_null()) return "nan";
    return x.dump();
  };
  if (j.is_array()) {
    bool flat = std::all_of(j.begin(), j.end(), [](const auto& x) { return x.is_primitive(); });
    if (!flat) {
      out << prefix << '=' << j.dump() << '\n';
      return;
    }
    std::string s;
    for (std::size_t i = 0; i < j.size(); ++i) s += (i ? "," : "") + scalar(j[i]);
    out << prefix << '=' << s << '\n';
    return;
  }
  out << prefix << '=' << scalar(j) << '\n';
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidConfig, "cannot write " + path);
  f << text;
}

struct Globals {
  std::optional<unsigned> threads;
  std::uint64_t seed = 1;
  double budget = 1e8;
  std::vector<std::string> tol;

  // documented tolerance names
  std::map<std::string, double> overrides() const {
    static const std::vector<std::string> names{"resonance_tol", "fp_tol", "g1_floor", "g2_floor", "g4_floor"};
    std::map<std::string, double> m;
    for (const auto& t : tol) {
      auto eq = t.find('=');
      std::string name = t.substr(0, eq);
      if (eq == std::string::npos || std::find(names.begin(), names.end(), name) == names.end())
        throw UsageError("--override expects name=value with name one of resonance_tol, fp_tol, g1_floor, g2_floor, g4_floor");
      m[name] = parse_csv(t.substr(eq + 1), "override").at(0);
    }
    return m;
  }
  unsigned resolved_threads() const { return threads ? *threads : threads_from_env(); }
  ArithConfig arith() const {
    ArithConfig c;
    c.budget = budget;
    auto o = overrides();
    if (o.count("resonance_tol")) c.resonance_tol = o["resonance_tol"];
    return c;
  }
  double fp_tol() const {
    auto o = overrides();
    return o.count("fp_tol") ? o["fp_tol"] : 1e-13;
  }
};

/// Runs the hamlab command line. args excludes the program name.
inline int dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"hamlab: numerical laboratory for near-integrable Hamiltonians H = alpha.I + eps f(theta, I)", "hamlab"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--threads", g.threads, "worker threads (0 = one per core; default HAMLAB_THREADS)");
  app.add_option("--seed", g.seed, "seed for all stochastic sampling")->capture_default_str();
  app.add_option("--budget", g.budget, "lattice / sampling budget")->capture_default_str();
  app.add_option("--override", g.tol, "tolerance override name=value (repeatable)");

  int code = 0;

  // ---- arith
  auto* arith = app.add_subcommand("arith", "frequency arithmetic")->require_subcommand(1);
  std::string alpha_s;
  double Q = 1, x = 1, tau = 1, tol = 1e-12;
  long qmax = 10;
  auto alpha_of = [&] { return FrequencyVector::normalize(parse_csv(alpha_s, "alpha")); };
  auto* psi_c = arith->add_subcommand("psi", "Psi_alpha(Q) = max |k.alpha|^-1 over 0 < |k| <= Q");
  psi_c->add_option("--alpha", alpha_s, "frequency vector, csv")->required();
  psi_c->add_option("--Q", Q, "cutoff (floor is used)")->required();
  psi_c->callback([&] { out << "psi=" << fmt17(psi(alpha_of(), Q, g.arith())) << '\n'; });
  auto* delta_c = arith->add_subcommand("delta", "Delta_alpha(x) = sup{Q >= 1 : Q Psi(Q) <= x}");
  delta_c->add_option("--alpha", alpha_s, "frequency vector, csv")->required();
  delta_c->add_option("--x", x, "argument x >= 1")->required();
  delta_c->callback([&] { out << "delta=" << fmt17(delta(alpha_of(), x, g.arith())) << '\n'; });
  auto* res_c = arith->add_subcommand("resonance", "smallest |k.alpha| for |k| <= qmax");
  res_c->add_option("--alpha", alpha_s, "frequency vector, csv")->required();
  res_c->add_option("--qmax", qmax, "lattice radius")->required();
  res_c->add_option("--tol", tol, "resonance tolerance")->capture_default_str();
  res_c->callback([&] {
    auto r = find_resonance(alpha_of(), qmax, tol, g.arith());
    out << "resonant=" << (r.resonant ? "true" : "false");
    if (r.witness) out << " k=" << join_int(*r.witness) << " value=" << fmt17(r.witness_value);
    out << '\n';
    if (r.resonant) code = kExitResonant;
  });
  auto* dio_c = arith->add_subcommand("dioph", "(gamma, tau)-Diophantine certificate");
  dio_c->add_option("--alpha", alpha_s, "frequency vector, csv")->required();
  dio_c->add_option("--tau", tau, "exponent tau")->required();
  dio_c->add_option("--qmax", qmax, "lattice radius")->required();
  dio_c->callback([&] {
    auto c = diophantine_certificate(alpha_of(), tau, qmax, g.arith());
    out << "gamma=" << fmt17(c.gamma) << " tau=" << fmt17(c.tau) << " qmax=" << c.q_max << '\n';
  });

  // ---- model
  auto* model_c = app.add_subcommand("model", "model files")->require_subcommand(1);
  std::string model_path;
  auto* validate_c = model_c->add_subcommand("validate", "check a model file");
  validate_c->add_option("file", model_path, "model JSON")->required();
  validate_c->callback([&] {
    auto m = load_model(model_path);
    std::size_t stored = 0;
    for (const auto& [k, p] : m.field.modes()) stored += sup_norm(k) == 0 || lex_positive(k);
    out << "valid=true\nname=" << m.name << "\nn=" << m.field.n() << "\nalpha=" << join(m.alpha.components())
        << "\nmodes=" << stored << "\nmax_wave=" << m.field.max_wave() << '\n';
  });

  // ---- check
  auto* check = app.add_subcommand("check", "genericity conditions G1..G4")->require_subcommand(1);
  std::string istar_s, json_path;
  int m_deg = 0;
  long d_res = 0;
  double rho = 0.1, C = 0.5, dlt = 0.1;
  auto add_common = [&](CLI::App* c) {
    c->add_option("--model", model_path, "model JSON")->required();
    c->add_option("--json", json_path, "write the full report as JSON");
  };
  auto finish_check = [&](const ConditionReport& rep) {
    out << "condition=" << to_string(rep.condition) << "\nholds=" << (rep.holds ? "true" : "false") << '\n';
    print_flat(out, "", rep.diagnostics);
    if (rep.witness) print_flat(out, "witness", *rep.witness);
    for (const auto& w : rep.warnings) out << "warning=" << w << '\n';
    if (!json_path.empty()) write_text(json_path, report_json(rep).dump(2) + "\n");
    code = rep.holds ? 0 : 1;
  };
  auto istar_of = [&](const Model& m) {
    if (istar_s.empty()) return m.field.domain().center;
    auto v = parse_csv(istar_s, "Istar");
    if (v.size() != m.field.n()) throw UsageError("--Istar has wrong dimension");
    return v;
  };
  auto cond_cfg = [&] {
    ConditionConfig cc;
    auto o = g.overrides();
    if (o.count("g1_floor")) cc.g1_floor = o["g1_floor"];
    if (o.count("g2_floor")) cc.g2_floor = o["g2_floor"];
    if (o.count("g4_floor")) cc.g4_floor = o["g4_floor"];
    cc.rho = rho;
    cc.C = C;
    cc.delta = dlt;
    cc.sampling.seed = g.seed;
    cc.sampling.budget = std::max(g.budget, cc.sampling.budget);
    return cc;
  };
  auto* g1 = check->add_subcommand("g1", "averaged perturbation has a non-critical point");
  add_common(g1);
  g1->add_option("--d", d_res, "resonant block size (default: leading zeros of alpha)");
  g1->callback([&] {
    auto m = load_model(model_path);
    std::size_t d = d_res > 0 ? static_cast<std::size_t>(d_res) : resonant_block(m.alpha);
    if (d == 0 || d >= m.field.n()) throw UsageError("G1 needs alpha = (0, alpha~) or --d in 1..n-1");
    finish_check(check_G1(m.field, d, cond_cfg()));
  });
  auto* g2 = check->add_subcommand("g2", "Hessian of the full average is non-degenerate at I*");
  add_common(g2);
  g2->add_option("--Istar", istar_s, "action point, csv (default: domain center)");
  g2->callback([&] {
    auto m = load_model(model_path);
    finish_check(check_G2(m.field, istar_of(m), cond_cfg()));
  });
  auto* g3 = check->add_subcommand("g3", "jet of the full average at I* is stably steep");
  add_common(g3);
  g3->add_option("--Istar", istar_s, "action point, csv (default: domain center)");
  g3->add_option("--m", m_deg, "jet order (default: m_n)");
  g3->add_option("--rho", rho, "perturbation radius")->capture_default_str();
  g3->add_option("--C", C, "steepness constant")->capture_default_str();
  g3->add_option("--delta", dlt, "steepness radius")->capture_default_str();
  g3->callback([&] {
    auto m = load_model(model_path);
    int deg = m_deg > 0 ? m_deg : steep_degree_threshold(m.field.n());
    finish_check(check_G3(m.field, istar_of(m), deg, cond_cfg()));
  });
  auto* g4 = check->add_subcommand("g4", "projected Hessian on alpha-perp is definite");
  add_common(g4);
  g4->add_option("--Istar", istar_s, "action point, csv (default: domain center)");
  g4->callback([&] {
    auto m = load_model(model_path);
    finish_check(check_G4(m.field, istar_of(m), m.alpha, cond_cfg()));
  });

  // ---- simulate
  auto* sim = app.add_subcommand("simulate", "integrate the flow and write a trajectory CSV");
  sim->set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
  double eps = 0, T = 1, h = 1e-2;
  std::string th0_s, i0_s, scheme_s = "midpoint", out_path;
  long record_every = 1;
  sim->add_option("--model", model_path, "model JSON")->required();
  sim->add_option("--eps", eps, "perturbation size")->required();
  sim->add_option("--theta0", th0_s, "initial angles (turns), csv")->required();
  sim->add_option("--I0", i0_s, "initial actions, csv")->required();
  sim->add_option("--T", T, "horizon")->required();
  sim->add_option("--h", h, "step (negative integrates backwards)")->required();
  sim->add_option("--scheme", scheme_s, "midpoint | splitting")->capture_default_str();
  sim->add_option("--record-every", record_every, "write every k-th step")->capture_default_str();
  sim->add_option("--out", out_path, "trajectory CSV")->required();
  sim->callback([&] {
    auto m = load_model(model_path);
    auto H = m.hamiltonian(eps);
    IntegratorConfig ic;
    ic.scheme = parse_scheme(scheme_s);
    ic.h = h;
    ic.fp_tol = g.fp_tol();
    ic.record_every = record_every;
    PhaseState s0{parse_csv(th0_s, "theta0"), parse_csv(i0_s, "I0"), 0.0};
    if (s0.theta.size() != m.field.n() || s0.I.size() != m.field.n())
      throw UsageError("--theta0/--I0 have the wrong dimension");
    auto tr = integrate(H, s0, T, ic);
    std::ostringstream csv;
    const std::size_t n = m.field.n();
    csv << 't';
    for (std::size_t i = 1; i <= n; ++i) csv << ",theta_" << i;
    for (std::size_t i = 1; i <= n; ++i) csv << ",I_" << i;
    csv << ",H,driftI\n";
    for (const auto& s : tr.samples)
      csv << fmt17(s.t) << ',' << join(s.theta) << ',' << join(s.I) << ',' << fmt17(H.energy(s.theta, s.I)) << ','
          << fmt17(action_distance(s.I, s0.I)) << '\n';
    write_text(out_path, csv.str());
    out << "steps=" << step_count(T, h) << "\nsamples=" << tr.samples.size()
        << "\nmax_energy_drift=" << fmt17(tr.max_energy_drift) << "\nmax_action_drift=" << fmt17(tr.max_action_drift)
        << '\n';
  });

  // ---- normalform
  auto* nfc = app.add_subcommand("normalform", "first-order averaging and remainder measurement");
  std::string mode_s = "nonres";
  double c_const = 1.0;
  int probes = 32;
  long K_override = 0;
  nfc->add_option("--model", model_path, "model JSON")->required();
  nfc->add_option("--eps", eps, "perturbation size")->required();
  nfc->add_option("--mode", mode_s, "nonres | res:<d>")->capture_default_str();
  nfc->add_option("--c", c_const, "cutoff constant, K = floor(Delta(c/eps))")->capture_default_str();
  nfc->add_option("--K", K_override, "explicit cutoff instead of the Delta rule");
  nfc->add_option("--probes", probes, "probe points for the remainder")->capture_default_str();
  nfc->add_option("--json", json_path, "write the report as JSON");
  nfc->callback([&] {
    auto m = load_model(model_path);
    auto mode = AveragingMode::parse(mode_s);
    auto cfg = g.arith();
    long K = K_override > 0 ? K_override : std::max(1L, choose_cutoff(m.alpha, eps, c_const, cfg));
    auto nf = solve_homological(m.field, m.alpha, K, mode, cfg);
    ProbeConfig pc;
    pc.threads = g.resolved_threads();
    double rem = remainder_probe(m.hamiltonian(eps), nf, probes, g.seed, pc);
    double chi_norm = nf.chi.weighted_norm(m.field.width(), m.field.domain().radius);
    nlohmann::json j{{"K", K},
                     {"mode", mode.str()},
                     {"smallest_divisor", nf.smallest_divisor},
                     {"remainder", rem},
                     {"chi_weighted_norm", chi_norm},
                     {"eliminated_modes", nf.eliminated.size()},
                     {"eps", eps}};
    out << "K=" << K << "\nmode=" << mode.str() << "\nsmallest_divisor=" << fmt17(nf.smallest_divisor)
        << "\nremainder=" << fmt17(rem) << "\nchi_weighted_norm=" << fmt17(chi_norm)
        << "\neliminated_modes=" << nf.eliminated.size() << '\n';
    if (!json_path.empty()) write_text(json_path, j.dump(2) + "\n");
  });

  // ---- experiment
  auto* exp = app.add_subcommand("experiment", "parameter sweeps")->require_subcommand(1);
  std::string config_path, out_dir;
  auto add_exp = [&](const char* name, ExperimentKind kind, const char* help) {
    auto* c = exp->add_subcommand(name, help);
    c->add_option("--config", config_path, "sweep config JSON")->required();
    c->add_option("--out", out_dir, "output directory")->required();
    c->callback([&, kind] {
      auto cfg = load_sweep_config(config_path);
      if (cfg.experiment != kind)
        throw UsageError("config describes a " + to_string(cfg.experiment) + " sweep, not " + to_string(kind));
      cfg.threads = g.resolved_threads();
      auto res = run_sweep(cfg, load_model(cfg.model));
      write_sweep(res, out_dir);
      out << summary_text(res);
    });
  };
  add_exp("diffusion", ExperimentKind::diffusion, "resonant drift times versus eps");
  add_exp("stability", ExperimentKind::stability, "non-resonant drift envelopes versus eps");

  // ---- fit
  auto* fit = app.add_subcommand("fit", "power-law fit of tau against eps from a records.csv");
  std::string records_path;
  fit->add_option("--records", records_path, "records.csv from an experiment")->required();
  fit->callback([&] {
    std::ifstream in(records_path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open " + records_path);
    std::string line;
    std::getline(in, line);
    if (line.rfind("eps,ic,outcome,tau", 0) != 0) throw Error(ErrorCode::InvalidConfig, "not a records.csv file");
    std::vector<double> xs, ys;
    while (std::getline(in, line)) {
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string tok;
      while (std::getline(ss, tok, ',')) f.push_back(tok);
      if (f.size() < 4) throw Error(ErrorCode::InvalidConfig, "malformed records line: " + line);
      if (f[2] != "hit") continue;
      try {
        xs.push_back(std::stod(f[0]));
        ys.push_back(std::stod(f[3]));
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidConfig, "malformed records line: " + line);
      }
    }
    auto r = fit_loglog(xs, ys);
    out << "slope=" << fmt17(r.slope) << "\nintercept=" << fmt17(r.intercept) << "\nr2=" << fmt17(r.r2)
        << "\nn_points=" << r.n_points << '\n';
  });

  // innermost subcommand that was selected, for help and usage text
  auto selected = [&app]() -> const CLI::App* {
    const CLI::App* sel = &app;
    for (bool deeper = true; deeper;) {
      deeper = false;
      for (const auto* s : sel->get_subcommands())
        if (s->parsed()) {
          sel = s;
          deeper = true;
          break;
        }
    }
    return sel;
  };
  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << selected()->help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << selected()->help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ResonantWithinRange && !e.witness().empty()) out << "resonant k=" << join_int(e.witness()) << '\n';
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return code;
}

}  // namespace hamlab::cli
