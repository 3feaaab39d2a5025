#include <gtest/gtest.h>

#include <cmath>

#include "ssmspike/neurons/init.hpp"

using namespace ssmspike;
using namespace ssmspike::init;

TEST(Bilinear, ReferenceValue) {
  const Complex d = bilinear({-0.5, 0.0}, 0.1);
  EXPECT_NEAR(d.real(), 0.975 / 1.025, 1e-15);
  EXPECT_NEAR(d.real(), 0.951220, 1e-6);
  EXPECT_EQ(d.imag(), 0.0);
}

TEST(Bilinear, SmallStepApproachesOne) {
  for (Complex l : {Complex{-0.5, 3.0}, Complex{-2.0, -10.0}, Complex{0.0, 1.0}}) {
    EXPECT_NEAR(std::abs(bilinear(l, 1e-9) - 1.0), 0.0, 1e-7);
  }
}

TEST(Bilinear, LeftHalfPlaneMapsIntoUnitDisk) {
  for (int k = 0; k < 50; ++k)
    for (double d : {1e-3, 1e-2, 1e-1, 1.0}) EXPECT_LT(std::abs(bilinear(s4d_lin_continuous(k), d)), 1.0);
}

TEST(S4dLin, ContinuousEigenvalues) {
  EXPECT_EQ(s4d_lin_continuous(0), Complex(-0.5, 0.0));
  EXPECT_NEAR(s4d_lin_continuous(3).imag(), 3.0 * std::numbers::pi, 1e-15);
}

TEST(S4dLin, SharedDeltaPerNeuronAndSeeded) {
  InitConfig cfg;
  cfg.n = 6;
  cfg.seed = 42;
  const auto a = s4d_lin_init(cfg), b = s4d_lin_init(cfg);
  EXPECT_EQ(a, b);
  // Recover delta from the real eigenvalue at k = 0 and check the rest.
  const double r = a[0].real();
  const double delta = 4.0 * (1.0 - r) / (1.0 + r);  // inverse of (1 - d/4)/(1 + d/4)
  EXPECT_GE(delta, cfg.delta_min * (1 - 1e-9));
  EXPECT_LE(delta, cfg.delta_max * (1 + 1e-9));
  for (int k = 0; k < cfg.n; ++k)
    EXPECT_NEAR(std::abs(a[static_cast<std::size_t>(k)] - bilinear(s4d_lin_continuous(k), delta)), 0.0, 1e-12);
}

TEST(S4dLin, InvalidRange) {
  InitConfig cfg;
  cfg.delta_min = 0.2;
  cfg.delta_max = 0.1;
  EXPECT_THROW(s4d_lin_init(cfg), ConfigError);
  cfg.delta_min = 0.0;
  EXPECT_THROW(s4d_lin_init(cfg), ConfigError);
  cfg = {};
  cfg.n = 0;
  EXPECT_THROW(s4d_lin_init(cfg), ConfigError);
}

TEST(Destabilize, Examples) {
  const auto d = destabilize({{0.9, 0.0}, {0.9, 0.0}});
  EXPECT_EQ(d[0], Complex(0.9, 0.0));
  EXPECT_NEAR(d[1].real(), 1.35, 1e-15);
  const ComplexVector one = {{0.9, 0.1}};
  EXPECT_EQ(destabilize(one), one);
}

TEST(ClipEigenvalues, Examples) {
  const auto c = clip_eigenvalues({std::polar(1.2, 0.3), {0.5, 0.0}});
  EXPECT_NEAR(std::abs(c[0]), 1.0, 1e-15);
  EXPECT_LE(std::abs(c[0]), 1.0);
  EXPECT_NEAR(std::arg(c[0]), 0.3, 1e-15);
  EXPECT_EQ(c[1], Complex(0.5, 0.0));
}

TEST(ClipEigenvalues, NeverAboveOneAfterRounding) {
  Rng rng(12);
  std::uniform_real_distribution<double> mod(0.5, 3.0), ph(-3.2, 3.2);
  ComplexVector v(5000);
  for (auto& x : v) x = std::polar(mod(rng), ph(rng));
  const auto c = clip_eigenvalues(v);
  EXPECT_LE(max_modulus(c), 1.0);
  for (std::size_t k = 0; k < v.size(); ++k)
    if (std::abs(v[k]) <= 1.0) EXPECT_EQ(c[k], v[k]);
}

TEST(InitProjection, GaussianMoments) {
  const auto [c, cb] = init_projection(100, 1000, std::uint64_t{77});
  double sum = 0.0, sq = 0.0;
  for (const auto& x : c) {
    sum += x.real() + x.imag();
    sq += x.real() * x.real() + x.imag() * x.imag();
  }
  const double count = 2.0 * static_cast<double>(c.size());
  EXPECT_NEAR(sum / count, 0.0, 0.01);
  EXPECT_NEAR(sq / count, 1.0, 0.02);
  for (const auto& x : cb) EXPECT_EQ(x, Complex{});
}

TEST(InitializeLayer, RegimesAndFixedInput) {
  SsmLayerConfig cfg;
  cfg.h = 16;
  cfg.n = 4;
  cfg.n_out = 3;
  for (auto regime : {Regime::stable, Regime::unstable}) {
    cfg.regime = regime;
    SsmNeuronLayerParams p(cfg);
    Rng rng(3);
    initialize_layer(p, {}, rng);
    for (double b : p.b) EXPECT_EQ(b, 1.0);
    for (const auto& r : p.rho) EXPECT_EQ(r, Complex(0.5, 0.0));
    if (regime == Regime::stable) {
      EXPECT_LT(max_modulus(p.lambda), 1.0);
    } else {
      EXPECT_GT(max_modulus(p.lambda), 1.0);
      for (std::size_t j = 0; j < 16; ++j) EXPECT_LT(std::abs(p.lambda[j * 4]), 1.0);
    }
  }
}
