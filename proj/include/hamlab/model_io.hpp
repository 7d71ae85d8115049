#pragma once

// JSON model files:
//   { "n": 2, "alpha": [0, 1],
//     "modes": [ { "k": [1, 0], "re": [ {"exp": [0, 0], "c": 0.5} ], "im": [] } ],
//     "domain": { "center": [0, 0], "radius": 1 },      (optional)
//     "width": 0.1, "name": "..." }                      (optional)
// Only k = 0 and lexicographically positive k are stored; mode -k is the
// complex conjugate of mode k.

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "field.hpp"

namespace hamlab {

struct Model {
  std::string name;
  FrequencyVector alpha;
  FourierTaylorField field;

  Hamiltonian hamiltonian(double eps) const { return Hamiltonian(alpha, eps, field); }
};

namespace detail {

inline ActionPolynomial parse_poly(const nlohmann::json& j, std::size_t n) {
  ActionPolynomial p(n);
  if (j.is_null()) return p;
  if (!j.is_array()) throw Error(ErrorCode::InvalidModel, "polynomial must be an array of terms");
  for (const auto& t : j) {
    if (!t.contains("exp") || !t.contains("c")) throw Error(ErrorCode::InvalidModel, "term needs 'exp' and 'c'");
    auto e = t.at("exp").get<MultiIndex>();
    if (e.size() != n) throw Error(ErrorCode::InvalidModel, "term exponent has wrong length");
    double c = t.at("c").get<double>();
    if (!std::isfinite(c)) throw Error(ErrorCode::InvalidModel, "non-finite coefficient");
    p.add_term(e, c);
  }
  return p;
}

inline nlohmann::json poly_json(const ActionPolynomial& p) {
  auto arr = nlohmann::json::array();
  for (const auto& [e, c] : p.terms()) arr.push_back({{"exp", e}, {"c", c}});
  return arr;
}

}  // namespace detail

inline Model model_from_json(const nlohmann::json& j) {
  try {
    auto n = j.at("n").get<std::size_t>();
    auto a = j.at("alpha").get<std::vector<double>>();
    if (a.size() != n) throw Error(ErrorCode::InvalidModel, "alpha has wrong length");
    auto alpha = FrequencyVector::as_is(a);
    if (!alpha.normalized()) throw Error(ErrorCode::InvalidModel, "alpha must have unit sup norm");
    FieldBuilder b(n);
    std::map<WaveVector, bool> seen;
    for (const auto& m : j.at("modes")) {
      auto k = m.at("k").get<WaveVector>();
      if (k.size() != n) throw Error(ErrorCode::InvalidModel, "wave vector has wrong length");
      if (seen.count(k)) throw Error(ErrorCode::InvalidModel, "duplicate wave vector");
      seen[k] = true;
      auto re = detail::parse_poly(m.value("re", nlohmann::json::array()), n);
      auto im = detail::parse_poly(m.value("im", nlohmann::json::array()), n);
      if (sup_norm(k) == 0) {
        if (!im.is_zero()) throw Error(ErrorCode::InvalidModel, "mean mode must be real");
        b.mean(re);
        continue;
      }
      if (!lex_positive(k)) throw Error(ErrorCode::InvalidModel, "only lexicographically positive k may be stored");
      ComplexPolynomial c = to_complex(re);
      c += to_complex(im) * std::complex<double>(0.0, 1.0);
      b.mode(k, c);
    }
    ActionDomain dom;
    dom.center.assign(n, 0.0);
    if (j.contains("domain")) {
      const auto& d = j.at("domain");
      if (d.contains("center")) dom.center = d.at("center").get<std::vector<double>>();
      if (d.contains("radius")) dom.radius = d.at("radius").get<double>();
      if (dom.center.size() != n) throw Error(ErrorCode::InvalidModel, "domain center has wrong length");
    }
    b.domain(dom);
    b.width(j.value("width", 0.1));
    return Model{j.value("name", std::string{}), alpha, b.build()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidModel, e.what());
  }
}

inline nlohmann::json model_to_json(const Model& m) {
  nlohmann::json j;
  const auto& f = m.field;
  if (!m.name.empty()) j["name"] = m.name;
  j["n"] = f.n();
  j["alpha"] = m.alpha.components();
  auto modes = nlohmann::json::array();
  for (const auto& [k, p] : f.modes()) {
    if (sup_norm(k) != 0 && !lex_positive(k)) continue;
    modes.push_back({{"k", k}, {"re", detail::poly_json(real_part(p))}, {"im", detail::poly_json(imag_part(p))}});
  }
  j["modes"] = modes;
  j["domain"] = {{"center", f.domain().center}, {"radius", f.domain().radius}};
  j["width"] = f.width();
  return j;
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidModel, "cannot open model file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidModel, path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace hamlab
