#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "refinegan/losses.hpp"
#include "refinegan/masks.hpp"

using namespace refinegan;
using namespace refinegan::nn;

namespace {

Tensor random_tensor(Shape s, Rng& rng) {
  Tensor t(s);
  for (auto& v : t.data()) v = static_cast<real_t>(rng.normal());
  return t;
}

SamplingMask random_mask(int h, int w, double rate, std::uint64_t seed) {
  return generate_mask({MaskPattern::random, rate, h, w, seed});
}

}  // namespace

TEST(Distance, IdenticalIsZero) {
  Rng rng(1);
  const Tensor a = random_tensor({2, 2, 4, 4}, rng);
  EXPECT_EQ(distance(a, a, Distance::mse), 0.0);
  EXPECT_EQ(distance(a, a, Distance::mae), 0.0);
}

TEST(Distance, ZerosVersusOnes) {
  for (Shape s : {Shape{1, 2, 4, 4}, Shape{3, 2, 8, 2}}) {
    EXPECT_DOUBLE_EQ(distance(Tensor(s, 0), Tensor(s, 1), Distance::mse), 1.0);
    EXPECT_DOUBLE_EQ(distance(Tensor(s, 0), Tensor(s, 1), Distance::mae), 1.0);
  }
  KSpaceGrid z(4, 4), o(4, 4);
  for (auto& v : o.data()) v = cplx(1, 1);
  EXPECT_DOUBLE_EQ(distance(z, o, Distance::mse), 1.0);
}

TEST(Distance, MaeMatchesDirectSum) {
  Rng rng(2);
  std::vector<double> a(32), b(32);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  EXPECT_NEAR(distance(a, b, Distance::mae), acc / 32.0, 1e-7);
}

TEST(Distance, ShapeMismatch) {
  EXPECT_THROW(distance(Tensor({1, 2, 4, 4}), Tensor({1, 2, 4, 8}), Distance::mse), ShapeMismatch);
  EXPECT_THROW(distance(KSpaceGrid(4, 4), KSpaceGrid(8, 4), Distance::mse), ShapeMismatch);
}

TEST(Distance, GradientIsAnalytic) {
  Rng rng(3);
  const Tensor ref = random_tensor({1, 2, 3, 3}, rng);
  const Tensor x = random_tensor({1, 2, 3, 3}, rng);
  const double n = static_cast<double>(x.size());
  const LossValue mse = distance_with_grad(ref, x, Distance::mse);
  const LossValue mae = distance_with_grad(ref, x, Distance::mae);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - ref[i];
    EXPECT_NEAR(mse.grad[i], 2.0 * d / n, 1e-7);
    EXPECT_NEAR(mae.grad[i], (d > 0 ? 1.0 : -1.0) / n, 1e-7);
  }
  EXPECT_NEAR(mse.value, distance(ref, x, Distance::mse), 1e-12);
}

TEST(FreqLoss, ConsistentReconstructionIsZero) {
  Rng rng(4);
  const ComplexImage s = oracle::random_image(16, 16, rng);
  const KSpaceMeasurement m = undersample(s, random_mask(16, 16, 0.3, 1));
  EXPECT_EQ(freq_loss(m, s, Distance::mse), 0.0);
  EXPECT_LT(freq_loss(m, zero_fill(m), Distance::mse), 1e-24);
}

TEST(FreqLoss, MatchesMaskedDftOracle) {
  Rng rng(5);
  const ComplexImage s = oracle::random_image(16, 16, rng);
  const ComplexImage recon = oracle::random_image(16, 16, rng);
  const SamplingMask mask = random_mask(16, 16, 0.3, 2);
  const KSpaceMeasurement m = undersample(s, mask);
  const KSpaceGrid ks = oracle::brute_force_dft(s);
  const KSpaceGrid kr = oracle::brute_force_dft(recon);
  for (Distance metric : {Distance::mse, Distance::mae}) {
    double acc = 0.0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (!mask[i]) continue;
      const cplx d = kr[i] - ks[i];
      acc += metric == Distance::mse ? std::norm(d) : std::abs(d.real()) + std::abs(d.imag());
    }
    const double expected = acc / (2.0 * static_cast<double>(ks.size()));
    EXPECT_NEAR(freq_loss(m, recon, metric), expected, 1e-6 * std::max(1.0, expected));
  }
}

TEST(FreqLoss, BatchMatchesSingleAndGradientMatchesDifferences) {
  Rng rng(6);
  const SamplingMask mask = random_mask(8, 8, 0.4, 3);
  std::vector<KSpaceMeasurement> ms;
  std::vector<ComplexImage> recons;
  for (int i = 0; i < 2; ++i) {
    ms.push_back(undersample(oracle::random_image(8, 8, rng), mask));
    recons.push_back(oracle::random_image(8, 8, rng));
  }
  Tensor x = to_tensor(recons);
  const LossValue lv = freq_loss(ms, x, Distance::mse);
  double single = 0.0;
  for (int i = 0; i < 2; ++i) single += freq_loss(ms[i], to_image(x, i), Distance::mse);
  EXPECT_NEAR(lv.value, single / 2.0, 1e-6 * lv.value);

  // Float tensors: a coarse step keeps the difference quotient meaningful.
  const float h = 1e-2f;
  for (std::size_t i = 0; i < x.size(); i += 7) {
    const real_t keep = x[i];
    x[i] = keep + h;
    const double fp = freq_loss(ms, x, Distance::mse).value;
    x[i] = keep - h;
    const double fm = freq_loss(ms, x, Distance::mse).value;
    x[i] = keep;
    EXPECT_NEAR(lv.grad[i], (fp - fm) / (2 * h), 2e-4);
  }
}

TEST(ImagLoss, Analytic) {
  Rng rng(7);
  const ComplexImage s = oracle::random_image(8, 8, rng);
  EXPECT_EQ(imag_loss(s, s, Distance::mse), 0.0);
  for (double eps : {1e-3, 0.1, 0.5}) {
    ComplexImage p = s;
    for (auto& v : p.data()) v += cplx(eps, eps);
    EXPECT_NEAR(imag_loss(s, p, Distance::mse), eps * eps, 1e-9);
    EXPECT_NEAR(imag_loss(s, p, Distance::mae), eps, 1e-9);
  }
  EXPECT_THROW(imag_loss(ComplexImage(8, 8), ComplexImage(8, 4), Distance::mse), ShapeMismatch);
}

TEST(CyclicLoss, OracleReconstructionZeroesBothTerms) {
  Rng rng(8);
  const SamplingMask mask = generate_mask({MaskPattern::radial, 0.3, 16, 16, 0});
  for (int trial = 0; trial < 5; ++trial) {
    const ComplexImage s = oracle::random_image(16, 16, rng);
    const KSpaceMeasurement m = undersample(s, mask);
    EXPECT_EQ(freq_loss(m, s, Distance::mse), 0.0);
    EXPECT_EQ(imag_loss(s, s, Distance::mse), 0.0);
    EXPECT_EQ(freq_loss(m, s, Distance::mae), 0.0);
    EXPECT_EQ(imag_loss(s, s, Distance::mae), 0.0);
  }
}

TEST(AdversarialLosses, Arithmetic) {
  const std::vector<double> same = {1.0, 2.0, 3.0};
  auto [g0, d0] = adversarial_losses(same, same, 0.0, 10.0);
  EXPECT_EQ(d0, 0.0);
  EXPECT_EQ(g0, -2.0);
  const std::vector<double> real = {4.0, 6.0}, fake = {1.0, 3.0};
  auto [g, d] = adversarial_losses(real, fake, 0.0, 10.0);
  EXPECT_DOUBLE_EQ(d, -3.0);
  EXPECT_DOUBLE_EQ(g, -2.0);
  auto [g2, d2] = adversarial_losses(real, fake, 0.25, 10.0);
  EXPECT_DOUBLE_EQ(d2, -3.0 + 2.5);
  EXPECT_DOUBLE_EQ(g2, -2.0);
}

TEST(AdversarialLosses, NonFiniteThrows) {
  const std::vector<double> ok = {1.0}, bad = {std::numeric_limits<double>::quiet_NaN()};
  EXPECT_THROW(adversarial_losses(bad, ok, 0.0, 10.0), InvalidInput);
  EXPECT_THROW(adversarial_losses(ok, bad, 0.0, 10.0), InvalidInput);
  EXPECT_THROW(adversarial_losses(ok, ok, std::numeric_limits<double>::infinity(), 10.0), InvalidInput);
}

TEST(GradientPenalty, UnitNormGradientsGiveZero) {
  Tensor g({3, 2, 4, 4});
  Rng rng(9);
  for (int b = 0; b < 3; ++b) {
    auto item = g.item(b);
    double n = 0.0;
    for (auto& v : item) {
      v = static_cast<real_t>(rng.normal());
      n += static_cast<double>(v) * v;
    }
    for (auto& v : item) v = static_cast<real_t>(v / std::sqrt(n));
  }
  EXPECT_NEAR(gradient_penalty_term(g), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(gradient_penalty_term(Tensor({2, 2, 4, 4})), 1.0);
}

TEST(TotalLoss, Arithmetic) {
  const LossWeights w;
  const std::vector<std::pair<double, double>> one = {{0.2, 0.05}};
  EXPECT_NEAR(total_loss(one, 0.0, w), 0.7, 1e-12);
  const std::vector<std::pair<double, double>> zeros = {{0.0, 0.0}};
  EXPECT_EQ(total_loss(zeros, 0.0, w), 0.0);
  const std::vector<std::pair<double, double>> two = {{0.2, 0.05}, {0.2, 0.05}};
  EXPECT_DOUBLE_EQ(total_loss(two, 1.5, w) - 1.5, 2.0 * (total_loss(one, 1.5, w) - 1.5));
  LossWeights scaled;
  scaled.adversarial = 0.01;
  EXPECT_NEAR(total_loss(one, 3.0, scaled), 0.7 + 0.03, 1e-12);
}

TEST(LossWeights, ValidationAndJson) {
  LossWeights w;
  w.validate();
  w.gamma = -1;
  EXPECT_THROW(w.validate(), InvalidInput);
  w = LossWeights{};
  w.alpha = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(w.validate(), InvalidInput);

  LossWeights a;
  a.alpha = 2.0;
  a.distance = Distance::mae;
  a.drift = 1e-3;
  const nlohmann::json j = a;
  EXPECT_EQ(j.get<LossWeights>(), a);
  EXPECT_THROW((nlohmann::json{{"alpha", 1.0}, {"beta", 2.0}}.get<LossWeights>()), InvalidInput);
  EXPECT_EQ(parse_distance("mae"), Distance::mae);
  EXPECT_THROW(parse_distance("huber"), InvalidInput);
}

TEST(Interpolate, Endpoints) {
  Rng rng(10);
  const Tensor real = random_tensor({2, 2, 4, 4}, rng);
  const Tensor fake = random_tensor({2, 2, 4, 4}, rng);
  const std::vector<double> eps = {1.0, 0.0};
  const Tensor x = interpolate(real, fake, eps);
  for (std::size_t i = 0; i < real.item(0).size(); ++i) {
    EXPECT_EQ(x.item(0)[i], real.item(0)[i]);
    EXPECT_EQ(x.item(1)[i], fake.item(1)[i]);
  }
}

TEST(CriticLoss, ZeroCriticPaysFullPenalty) {
  NetworkConfig cfg{.levels = 2, .base_filters = 8};
  Critic critic(cfg);
  zero_parameters(critic.parameters());
  Rng rng(11);
  const Tensor real = random_tensor({2, 2, 8, 8}, rng);
  const Tensor fake = random_tensor({2, 2, 8, 8}, rng);
  const std::vector<double> eps = {0.5, 0.5};
  const CriticLoss l = critic_loss_and_grads(critic, real, fake, eps, 10.0);
  EXPECT_EQ(l.mean_real, 0.0);
  EXPECT_EQ(l.mean_fake, 0.0);
  EXPECT_DOUBLE_EQ(l.gp, 1.0);
  EXPECT_DOUBLE_EQ(l.adv_d, 10.0);
}

TEST(CriticLoss, ConsistentWithAdversarialLosses) {
  NetworkConfig cfg{.levels = 2, .base_filters = 8};
  Critic critic(cfg);
  initialize(critic.parameters(), 12);
  Rng rng(13);
  const Tensor real = random_tensor({3, 2, 8, 8}, rng);
  const Tensor fake = random_tensor({3, 2, 8, 8}, rng);
  const std::vector<double> eps = {0.1, 0.5, 0.9};
  const CriticLoss l = critic_loss_and_grads(critic, real, fake, eps, 10.0);
  const auto sr = critic.forward(real);
  const auto sf = critic.forward(fake);
  const std::vector<double> dr(sr.begin(), sr.end()), df(sf.begin(), sf.end());
  const auto [adv_g, adv_d] = adversarial_losses(dr, df, l.gp, 10.0);
  EXPECT_NEAR(l.adv_d, adv_d, 1e-5 * std::max(1.0, std::abs(adv_d)));
  EXPECT_NEAR(-l.mean_fake, adv_g, 1e-5 * std::max(1.0, std::abs(adv_g)));
  for (Parameter* p : critic.parameters()) {
    for (real_t v : p->grad) ASSERT_TRUE(std::isfinite(v)) << p->name;
  }

  const CriticLoss drifted = critic_loss_and_grads(critic, real, fake, eps, 10.0, 0.5);
  double sq = 0.0;
  for (double v : dr) sq += v * v;
  EXPECT_NEAR(drifted.adv_d - l.adv_d, 0.5 * sq / 3.0, 1e-4 * std::max(1.0, sq));
}

TEST(GeneratorLoss, BreakdownSatisfiesTotalIdentity) {
  NetworkConfig cfg{.levels = 2, .base_filters = 8, .folds = 2};
  Generator gen(cfg);
  Critic critic(cfg);
  initialize(gen.parameters(), 14);
  initialize(critic.parameters(), 15);
  Rng rng(16);
  const SamplingMask mask = generate_mask({MaskPattern::radial, 0.3, 16, 16, 0});
  GeneratorBatch batch;
  std::vector<ComplexImage> zm, zs, refs;
  for (int i = 0; i < 2; ++i) {
    batch.m.push_back(undersample(oracle::random_image(16, 16, rng), mask));
    zm.push_back(zero_fill(batch.m.back()));
    refs.push_back(oracle::random_image(16, 16, rng));
    zs.push_back(zero_fill(undersample(refs.back(), mask)));
  }
  batch.m_input = to_tensor(zm);
  batch.s_input = to_tensor(zs);
  batch.s_ref = to_tensor(refs);
  const LossWeights w;
  std::vector<std::pair<double, double>> per_fold;
  const LossBreakdown l = generator_loss(gen, critic, batch, w, true, &per_fold);
  ASSERT_EQ(per_fold.size(), 2u);
  EXPECT_NEAR(l.total, l.adv_g + w.alpha * l.freq + w.gamma * l.imag, 1e-6 * std::max(1.0, std::abs(l.total)));
  EXPECT_NEAR(l.freq, per_fold[0].first + per_fold[1].first, 1e-12);
  EXPECT_NEAR(l.imag, per_fold[0].second + per_fold[1].second, 1e-12);
  for (Parameter* p : gen.parameters()) {
    for (real_t v : p->grad) ASSERT_TRUE(std::isfinite(v)) << p->name;
  }
  // The generator step leaves the critic's weights alone.
  std::vector<std::vector<real_t>> before;
  for (Parameter* p : critic.parameters()) before.push_back(p->value);
  generator_loss(gen, critic, batch, w, true);
  const auto params = critic.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) EXPECT_EQ(params[k]->value, before[k]);
}
