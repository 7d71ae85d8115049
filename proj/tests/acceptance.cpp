// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,4,...] [--known-red 8,...] [--out DIR]
//
// Exit status is 0 iff the set of failing criteria equals the --known-red set.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hamlab/conditions.hpp"
#include "hamlab/experiments.hpp"
#include "hamlab/normalform.hpp"

using namespace hamlab;
namespace fs = std::filesystem;

namespace {

const double kG = (std::sqrt(5.0) - 1.0) / 2.0;
const double kPhi = (1.0 + std::sqrt(5.0)) / 2.0;

std::string src(const std::string& rel) { return std::string(HAMLAB_SOURCE_DIR) + "/" + rel; }

FrequencyVector golden() { return FrequencyVector::normalize(std::vector<double>{1.0, kG}); }

struct Outcome {
  bool pass = false;
  std::string measured;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

std::string g(double x) {
  std::ostringstream o;
  o.precision(4);
  o << x;
  return o.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Full-box enumeration, no symmetry reduction.
double brute_psi(const std::vector<double>& a, long Q) {
  const std::size_t n = a.size();
  std::vector<long> k(n, -Q);
  double vmin = INFINITY;
  for (;;) {
    bool nonzero = false;
    for (long v : k) nonzero |= v != 0;
    if (nonzero) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(k[i]) * a[i];
      vmin = std::min(vmin, std::fabs(s));
    }
    std::size_t i = 0;
    while (i < n && k[i] == Q) k[i++] = -Q;
    if (i == n) break;
    ++k[i];
  }
  return 1.0 / vmin;
}

Outcome arithmetic_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int mismatches = 0, cases = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 2 + static_cast<std::size_t>(trial % 2);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    auto a = FrequencyVector::normalize(v);
    for (long Q = 1; Q <= 30; ++Q, ++cases)
      if (psi(a, static_cast<double>(Q)) != brute_psi(a.components(), Q)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches"};
}

Outcome golden_values() {
  auto a = golden();
  double e1 = std::fabs(psi(a, 1) / (kPhi * kPhi) - 1.0);
  double e2 = std::fabs(psi(a, 2) * (2 * kG - 1) - 1.0);
  double e3 = std::fabs(delta(a, 3) / (3 / (kPhi * kPhi)) - 1.0);
  double worst = std::max({e1, e2, e3});
  return {worst <= 1e-12, "max rel err " + g(worst)};
}

Outcome diophantine() {
  auto a = golden();
  double g1 = diophantine_certificate(a, 1.0, 1000).gamma;
  double g2 = diophantine_certificate(a, 1.0, 2000).gamma;
  double rel = std::fabs(g2 - g1) / g1;
  return {g1 > 0 && g2 > 0 && rel <= 0.01, "gamma(1000)=" + g(g1) + " gamma(2000)=" + g(g2) + " rel " + g(rel)};
}

SweepResult sweep(const std::string& config, const fs::path& out) {
  auto cfg = load_sweep_config(src(config));
  auto res = run_sweep(cfg, load_model(cfg.model));
  write_sweep(res, out);
  return res;
}

Outcome constant_force(const fs::path& out) {
  auto res = sweep("configs/diffusion_constant_force.json", out / "constant_force");
  bool ok = res.records.size() == 3;
  double worst = 0.0;
  for (const auto& r : res.records) {
    if (r.outcome != SweepRecord::hit) {
      ok = false;
      continue;
    }
    double h = res.config.h_rule(r.eps);
    double err = std::fabs(r.tau - res.config.c1 / (kTwoPi * r.eps));
    worst = std::max(worst, err / h);
  }
  ok = ok && worst <= 1.0 && res.fit && res.fit->slope >= -1.001 && res.fit->slope <= -0.999;
  return {ok, "slope=" + (res.fit ? g(res.fit->slope) : res.fit_error) + " max |tau err|/h=" + g(worst)};
}

Outcome coupled(const fs::path& out) {
  auto res = sweep("configs/diffusion_coupled.json", out / "coupled");
  std::set<std::size_t> ics;
  double lo = INFINITY, hi = 0;
  for (const auto& r : res.records) {
    ics.insert(r.ic_index);
    lo = std::min(lo, r.eps);
    hi = std::max(hi, r.eps);
  }
  bool ok = res.fit && res.fit->slope >= -1.15 && res.fit->slope <= -0.85 && res.fit->r2 >= 0.98 && ics.size() >= 3 &&
            lo <= 1e-4 && hi >= 1e-2;
  if (!res.fit) return {false, "fit failed: " + res.fit_error};
  return {ok, "slope=" + g(res.fit->slope) + " r2=" + g(res.fit->r2) + " hits=" + std::to_string(res.fit->n_points) + "/" +
                  std::to_string(res.records.size())};
}

Outcome conditions(const fs::path& out) {
  int agree = 0, total = 0;
  std::string wrong;
  for (const auto& entry : fs::directory_iterator(src("models/conditions"))) {
    if (entry.path().extension() != ".json") continue;
    auto j = nlohmann::json::parse(slurp(entry.path()));
    auto m = model_from_json(j);
    const auto& ex = j.at("expect");
    auto cond = ex.at("condition").get<std::string>();
    std::vector<double> Istar = ex.value("I_star", std::vector<double>(m.alpha.size(), 0.0));
    ConditionReport rep;
    if (cond == "G1")
      rep = check_G1(m.field, ex.at("d").get<std::size_t>());
    else if (cond == "G2")
      rep = check_G2(m.field, Istar);
    else if (cond == "G3")
      rep = check_G3(m.field, Istar, ex.at("m").get<int>());
    else
      rep = check_G4(m.field, Istar, m.alpha);
    ++total;
    if (rep.holds == ex.at("holds").get<bool>())
      ++agree;
    else
      wrong += " " + entry.path().stem().string();
    write(out / "conditions" / entry.path().filename(), report_json(rep).dump(2) + "\n");
  }
  return {total == 12 && agree == total, std::to_string(agree) + "/" + std::to_string(total) + " verdicts match" + wrong};
}

Outcome normal_form(const fs::path& out) {
  const int probes = 32;
  const std::uint64_t seed = 1;
  double lo = INFINITY, hi = 0, worst_identity = 0;
  nlohmann::json art = nlohmann::json::array();
  for (const char* name : {"single_mode_golden", "g2_golden"}) {
    auto m = load_model(src(std::string("models/") + name + ".json"));
    auto measure = [&](double eps) {
      long K = std::max(1L, choose_cutoff(m.alpha, eps));
      auto nf = solve_homological(m.field, m.alpha, K, AveragingMode::nonres());
      for (const auto& [k, chik] : nf.chi.modes()) {
        auto lhs = chik * std::complex<double>(0.0, kTwoPi * m.alpha.dot(k));
        worst_identity = std::max(worst_identity, (lhs - m.field.mode(k)).coefficient_sup());
      }
      double r = remainder_probe(m.hamiltonian(eps), nf, probes, seed);
      art.push_back({{"model", name}, {"eps", eps}, {"K", K}, {"remainder", r}});
      return r;
    };
    for (double eps : {1e-2, 1e-3}) {
      double r1 = measure(eps);
      double ratio = r1 / measure(eps / 2);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  write(out / "normalform.json", art.dump(2) + "\n");
  bool ok = lo >= 3.0 && hi <= 5.0 && worst_identity <= 1e-14;
  return {ok, "ratio in [" + g(lo) + ", " + g(hi) + "] identity err " + g(worst_identity)};
}

Outcome integrator_structure() {
  auto m = load_model(src("models/g2_golden.json"));
  const double eps = 1e-2;
  auto H = m.hamiltonian(eps);
  IntegratorConfig cfg;
  cfg.h = 1e-2;
  PhaseState s0{{0.2, 0.45}, {0.0, 0.0}, 0.0};
  const double T = 1e6 * cfg.h;

  auto fw = integrate(H, s0, T, cfg);
  auto back = cfg;
  back.h = -cfg.h;
  auto bw = integrate(H, fw.samples.back(), T, back);
  double trip = 0.0;
  for (std::size_t i = 0; i < 2; ++i)
    trip = std::max({trip, std::fabs(std::remainder(bw.samples.back().theta[i] - s0.theta[i], 1.0)),
                     std::fabs(bw.samples.back().I[i] - s0.I[i])});

  // central-difference Jacobian of one step, with the angle wrap undone
  const double d = 1e-6;
  std::vector<double> z0{0.31, 0.62, 0.15, -0.25};
  auto map = [&](const std::vector<double>& z) {
    PhaseState s{{z[0], z[1]}, {z[2], z[3]}, 0.0};
    auto th = s.theta;
    step(H, s, cfg);
    return std::vector<double>{th[0] + std::remainder(s.theta[0] - th[0], 1.0),
                               th[1] + std::remainder(s.theta[1] - th[1], 1.0), s.I[0], s.I[1]};
  };
  Eigen::Matrix4d J;
  for (int j = 0; j < 4; ++j) {
    auto zp = z0, zm = z0;
    zp[static_cast<std::size_t>(j)] += d;
    zm[static_cast<std::size_t>(j)] -= d;
    auto fp = map(zp), fm = map(zm);
    for (int i = 0; i < 4; ++i)
      J(i, j) = (fp[static_cast<std::size_t>(i)] - fm[static_cast<std::size_t>(i)]) / (2 * d);
  }
  double det = std::fabs(J.determinant() - 1.0);

  bool ok = fw.max_energy_drift <= 1e-6 && trip <= 1e-9 && det <= 1e-6;
  return {ok, "energy drift " + g(fw.max_energy_drift) + " (bound 1e-06), round trip " + g(trip) + ", |det-1| " + g(det)};
}

Outcome stability(const fs::path& out) {
  auto res = sweep("configs/stability_g2_golden.json", out / "stability");
  // records are sorted by ascending eps
  bool ok = res.config.T_rule(1e-2) >= 1e5 && !res.records.empty();
  std::map<std::size_t, double> prev_ratio;
  std::string m;
  for (const auto& r : res.records) {
    if (r.outcome == SweepRecord::failed) ok = false;
    if (r.max_drift > 10 * r.eps) ok = false;
    double ratio = r.max_drift / r.delta_inv;
    auto it = prev_ratio.find(r.ic_index);
    if (it != prev_ratio.end() && !(it->second < ratio)) ok = false;
    prev_ratio[r.ic_index] = ratio;
    m += " eps=" + g(r.eps) + ":drift/eps=" + g(r.max_drift / r.eps) + ",ratio=" + g(ratio);
  }
  return {ok, m.empty() ? "no records" : m.substr(1)};
}

std::set<int> parse_set(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.insert(std::stoi(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, known_red;
  fs::path out = fs::temp_directory_path() / "hamlab_acceptance";
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--only" && i + 1 < argc)
      only = parse_set(argv[++i]);
    else if (a == "--known-red" && i + 1 < argc)
      known_red = parse_set(argv[++i]);
    else if (a == "--out" && i + 1 < argc)
      out = argv[++i];
    else {
      std::cerr << "usage: acceptance [--only LIST] [--known-red LIST] [--out DIR]\n";
      return 64;
    }
  }
  fs::remove_all(out);
  const fs::path run_a = out / "a", run_b = out / "b";

  struct Criterion {
    int id;
    std::string what;
    double limit_s;
    std::function<Outcome()> run;
  };
  auto repro = [&]() -> Outcome {
    // criteria 4 to 7 again into a second directory, then byte comparison
    constant_force(run_b);
    coupled(run_b);
    conditions(run_b);
    normal_form(run_b);
    int files = 0, differ = 0;
    std::string which;
    for (const auto& e : fs::recursive_directory_iterator(run_a)) {
      if (!e.is_regular_file()) continue;
      auto rel = fs::relative(e.path(), run_a);
      if (rel.begin()->string() == "stability") continue;
      ++files;
      if (!fs::exists(run_b / rel) || slurp(e.path()) != slurp(run_b / rel)) {
        ++differ;
        which += " " + rel.string();
      }
    }
    return {files > 0 && differ == 0, std::to_string(files) + " artifacts, " + std::to_string(differ) + " differ" + which};
  };

  std::vector<Criterion> all{
      {1, "psi matches brute force on 50 random alpha, Q <= 30", 10, arithmetic_oracle},
      {2, "golden-ratio psi and delta values", 10, golden_values},
      {3, "Diophantine gamma stable under q_max doubling", 30, diophantine},
      {4, "constant-force hitting times and slope", 60, [&] { return constant_force(run_a); }},
      {5, "coupled-model slope and r2", 600, [&] { return coupled(run_a); }},
      {6, "G-condition verdicts on bundled models", 120, [&] { return conditions(run_a); }},
      {7, "normal-form remainder scaling", 120, [&] { return normal_form(run_a); }},
      {8, "midpoint energy, reversibility, Jacobian", 300, integrator_structure},
      {9, "stability drift bound at T = 1e5", 600, [&] { return stability(run_a); }},
      {10, "repeat of 4-7 is byte-identical", 900, repro},
  };

  std::set<int> failed;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    if (c.id == 10 && !only.empty())
      for (int dep : {4, 5, 6, 7})
        if (!only.count(dep)) {
          std::cerr << "criterion 10 needs 4, 5, 6 and 7 in the same run\n";
          return 64;
        }
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double t = seconds_since(t0);
    if (t > c.limit_s) {
      o.pass = false;
      o.measured += " (over " + g(c.limit_s) + " s limit)";
    }
    if (!o.pass) failed.insert(c.id);
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.what << " (" << o.measured << ") ["
              << g(t) << " s]" << (!o.pass && known_red.count(c.id) ? " known red" : "") << std::endl;
  }

  std::set<int> expected;
  for (int id : known_red)
    if (only.empty() || only.count(id)) expected.insert(id);
  if (failed == expected) return 0;
  for (int id : failed)
    if (!expected.count(id)) std::cout << "unexpected failure: criterion " << id << '\n';
  for (int id : expected)
    if (!failed.count(id)) std::cout << "known-red criterion " << id << " now passes; update the known-red list\n";
  return 1;
}
