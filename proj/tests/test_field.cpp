#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hamlab/model_io.hpp"

using namespace hamlab;

namespace {

const double kG = (std::sqrt(5.0) - 1.0) / 2.0;

FrequencyVector golden() { return FrequencyVector::normalize(std::vector<double>{1.0, kG}); }

ActionDomain box(std::size_t n, double r) { return ActionDomain{std::vector<double>(n, 0.0), r}; }

// A field with modes up to |k| = 2 and quadratic coefficients.
FourierTaylorField random_field(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FieldBuilder b(n);
  b.domain(box(n, 5.0));
  for (const auto& e : monomials(n, 0, 2)) b.mean(mono(n, e, u(rng)));
  for_each_canonical(n, 1, 2, [&](std::span<const long> k) {
    WaveVector kv(k.begin(), k.end());
    ComplexPolynomial c(n);
    for (const auto& e : monomials(n, 0, 2)) c.add_term(e, {u(rng), u(rng)});
    b.mode(kv, c);
  });
  return b.build();
}

}  // namespace

TEST(Evaluate, Examples) {
  auto f = FieldBuilder(2).domain(box(2, 10)).cos({1, 0}).build();
  Hamiltonian h0(golden(), 0.0, f);
  std::vector<double> th{0.37, 0.81}, I{2.0, 3.0};
  EXPECT_NEAR(h0.evaluate(th, I), 2.0 + 3.0 * kG, 1e-15);

  Hamiltonian h1(golden(), 1.0, f);
  std::vector<double> zero{0.0, 0.0};
  EXPECT_NEAR(h1.evaluate(std::vector<double>{0.0, 0.4}, zero), 1.0, 1e-15);

  auto f2 = FieldBuilder(2).domain(box(2, 10)).cos({1, 0}, mono(2, {0, 1})).build();
  Hamiltonian h2(golden(), 0.5, f2);
  std::vector<double> I2{0.0, 2.0};
  EXPECT_NEAR(h2.evaluate(std::vector<double>{0.25, 0.1}, I2), 2.0 * kG, 1e-15);
}

TEST(Evaluate, DomainError) {
  auto f = FieldBuilder(2).domain(box(2, 1.0)).cos({1, 0}).build();
  Hamiltonian h(golden(), 0.1, f);
  try {
    h.evaluate(std::vector<double>{0, 0}, std::vector<double>{1.5, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DomainError);
  }
}

TEST(Gradients, Examples) {
  double eps = 0.3;
  auto f = FieldBuilder(2).cos({1, 0}).build();
  Hamiltonian h(golden(), eps, f);
  std::vector<double> th{0.25, 0.6}, I{0.1, 0.2};
  auto gt = h.grad_theta(th, I);
  EXPECT_NEAR(gt[0], -kTwoPi * eps, 1e-14);
  EXPECT_NEAR(gt[1], 0.0, 1e-15);

  Hamiltonian h0(golden(), 0.0, random_field(2, 1));
  auto gi0 = h0.grad_I(th, I);
  EXPECT_EQ(gi0, golden().components());
  for (double v : h0.grad_theta(th, I)) EXPECT_EQ(v, 0.0);

  auto sq = FieldBuilder(2).domain(box(2, 5)).mean(mono(2, {2, 0})).build();
  Hamiltonian hs(golden(), eps, sq);
  auto gi = hs.grad_I(th, std::vector<double>{3.0, 0.0});
  EXPECT_NEAR(gi[0], 1.0 + 6.0 * eps, 1e-14);
  EXPECT_NEAR(gi[1], kG, 1e-15);
}

TEST(Gradients, MatchCentralDifferences) {
  auto f = random_field(3, 11);
  auto alpha = FrequencyVector::normalize(std::vector<double>{1.0, kG, std::sqrt(2.0) - 1.0});
  Hamiltonian H(alpha, 0.7, f);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double h = 1e-4;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> th(3), I(3);
    for (auto& v : th) v = u(rng);
    for (auto& v : I) v = 2.0 * u(rng) - 1.0;
    auto gt = H.grad_theta(th, I);
    auto gi = H.grad_I(th, I);
    // relative to the gradient's sup norm: single components may nearly cancel
    double scale_t = 1.0, scale_i = 1.0;
    for (std::size_t j = 0; j < 3; ++j) {
      scale_t = std::max(scale_t, std::fabs(gt[j]));
      scale_i = std::max(scale_i, std::fabs(gi[j]));
    }
    for (std::size_t j = 0; j < 3; ++j) {
      auto tp = th, tm = th, ip = I, im = I;
      tp[j] += h;
      tm[j] -= h;
      ip[j] += h;
      im[j] -= h;
      double fd_t = (H.evaluate(tp, I) - H.evaluate(tm, I)) / (2 * h);
      double fd_i = (H.evaluate(th, ip) - H.evaluate(th, im)) / (2 * h);
      EXPECT_LE(std::fabs(fd_t - gt[j]), 1e-6 * scale_t);
      EXPECT_LE(std::fabs(fd_i - gi[j]), 1e-6 * scale_i);
    }
  }
}

TEST(Evaluate, RealValued) {
  auto f = random_field(3, 4);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> th{u(rng), u(rng), u(rng)}, I{u(rng), -u(rng), u(rng)};
    EXPECT_LE(std::fabs(f.evaluate_complex(th, I).imag()), 1e-14);
  }
}

TEST(Field, RejectsNonConjugateModes) {
  FourierTaylorField::ModeMap m;
  m.emplace(WaveVector{1, 0}, ComplexPolynomial::constant(2, {0.5, 0.0}));
  EXPECT_THROW(FourierTaylorField(2, m), Error);
  m.emplace(WaveVector{-1, 0}, ComplexPolynomial::constant(2, {0.5, 0.1}));
  EXPECT_THROW(FourierTaylorField(2, m), Error);
}

TEST(Average, PartialExamples) {
  auto f = FieldBuilder(2).cos({1, 0}).cos({0, 1}).build();
  auto fb = partial_average(f, 1);
  auto expect = FieldBuilder(2).cos({1, 0}).build();
  EXPECT_EQ(fb.modes(), expect.modes());

  EXPECT_EQ(partial_average(expect, 1).modes(), expect.modes());

  auto mixed = FieldBuilder(2).cos({1, 1}).build();
  EXPECT_TRUE(partial_average(mixed, 1).is_zero());
}

TEST(Average, FullExamples) {
  auto f = FieldBuilder(2).mean(ActionPolynomial::constant(2, 1.0)).cos({1, 0}, mono(2, {1, 0})).build();
  EXPECT_EQ(full_average(f), ActionPolynomial::constant(2, 1.0));

  auto q = mono(2, {2, 0}, 0.5) + mono(2, {0, 2}, 0.5);
  auto g = FieldBuilder(2).mean(q).build();
  EXPECT_EQ(full_average(g), q);
}

TEST(Average, ProjectionProperties) {
  for (unsigned seed = 0; seed < 5; ++seed) {
    auto f = random_field(3, seed);
    for (std::size_t d = 1; d <= 2; ++d) {
      auto p = partial_average(f, d);
      EXPECT_EQ(partial_average(p, d).modes(), p.modes());
      EXPECT_EQ(full_average(p), full_average(f));
      for (std::size_t j = 0; j < 3; ++j)
        EXPECT_EQ(partial_average(f.d_action(j), d).modes(), p.d_action(j).modes());
    }
    for (std::size_t j = 0; j < 3; ++j) EXPECT_TRUE(full_average(f.d_theta(j)).is_zero());
  }
}

TEST(TaylorJet, Examples) {
  auto q = mono(2, {2, 0}, 0.5) + mono(2, {0, 2}, 0.5);
  std::vector<double> origin{0.0, 0.0};
  EXPECT_EQ(taylor_jet(q, origin, 2).poly, q);

  auto p = ActionPolynomial::constant(2, 3.0) + mono(2, {1, 0}) + mono(2, {2, 0});
  EXPECT_EQ(taylor_jet(p, origin, 2).poly, mono(2, {2, 0}));

  auto cube = mono(2, {3, 0});
  auto jet = taylor_jet(cube, std::vector<double>{1.0, 0.0}, 2);
  EXPECT_EQ(jet.poly, mono(2, {2, 0}, 3.0));

  try {
    taylor_jet(q, origin, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegreeError);
  }
}

TEST(TaylorJet, MatchesDerivativesAtPoint) {
  // coefficient of X^e equals d^e p(I*) / e!
  auto p = mono(2, {3, 1}, 2.0) + mono(2, {0, 4}, -1.0) + mono(2, {1, 2}, 0.5);
  std::vector<double> s{0.7, -1.3};
  auto jet = taylor_jet(p, s, 4);
  for (const auto& e : monomials(2, 2, 4)) {
    auto d = p;
    double fact = 1.0;
    for (std::size_t i = 0; i < 2; ++i)
      for (int r = 0; r < e[i]; ++r) {
        d = d.derivative(i);
        fact *= r + 1;
      }
    EXPECT_NEAR(jet.poly.coefficient(e), d(s) / fact, 1e-12);
  }
}

TEST(WeightedNorm, Examples) {
  auto c = FieldBuilder(2).cos({1, 0}).build();
  EXPECT_DOUBLE_EQ(c.weighted_norm(0.0, 3.0), 1.0);
  EXPECT_DOUBLE_EQ(c.weighted_norm(0.2, 1.0), std::exp(kTwoPi * 0.2));
  auto lin = FieldBuilder(2).mean(mono(2, {1, 0})).build();
  EXPECT_DOUBLE_EQ(lin.weighted_norm(0.1, 2.0), 2.0);
}

TEST(ModelJson, RoundTripAndValidation) {
  auto f = random_field(2, 3);
  Model m{"rt", golden(), f};
  auto back = model_from_json(model_to_json(m));
  EXPECT_EQ(back.alpha.components(), m.alpha.components());
  for (const auto& [k, p] : f.modes()) {
    auto q = back.field.mode(k);
    EXPECT_LE((q - p).coefficient_sup(), 1e-15);
  }

  auto bad = model_to_json(m);
  bad["alpha"] = {2.0, 1.0};
  EXPECT_THROW(model_from_json(bad), Error);

  auto neg = nlohmann::json::parse(R"({"n":2,"alpha":[1,0.5],"modes":[{"k":[-1,0],"re":[{"exp":[0,0],"c":1}]}]})");
  EXPECT_THROW(model_from_json(neg), Error);

  auto ok = nlohmann::json::parse(R"({"n":2,"alpha":[0,1],"modes":[{"k":[1,0],"re":[{"exp":[0,0],"c":0.5}]}]})");
  auto mo = model_from_json(ok);
  EXPECT_NEAR(mo.field.evaluate(std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 0.0}), 1.0, 1e-15);
}
