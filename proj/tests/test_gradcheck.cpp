// Built against the double-precision network library.
#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "refinegan/losses.hpp"
#include "refinegan/masks.hpp"
#include "refinegan/rng.hpp"

using namespace refinegan;
using namespace refinegan::nn;
using refinegan::testing::check_gradient;
using refinegan::testing::GradCheckResult;

static_assert(sizeof(real_t) == sizeof(double));

namespace {

Tensor random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor t(s);
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

void randomize(std::span<Parameter* const> params, std::uint64_t seed) {
  initialize(params, seed);
  Rng rng(seed ^ 0xb1a5);
  for (Parameter* p : params) {
    if (p->name.ends_with("/bias")) {
      for (auto& v : p->value) v = 0.1 * rng.normal();
    }
  }
}

double dot(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void report(const GradCheckResult& r) {
  for (std::size_t i = 0; i < std::min<std::size_t>(r.bad.size(), 10); ++i) {
    ADD_FAILURE() << r.bad[i].where << "[" << r.bad[i].index << "]: analytic " << r.bad[i].analytic << " numeric "
                  << r.bad[i].numeric;
  }
  EXPECT_TRUE(r.bad.empty()) << r.bad.size() << " of " << r.checked << " entries disagree";
  // Kink crossings must stay rare or the check says little.
  EXPECT_LE(r.kinked * 20, r.checked) << r.kinked << " kink crossings";
}

// Checks a block's input and parameter gradients for the scalar <w, block(x)>.
template <typename Block>
void check_block(Block& block, Shape in, std::uint64_t seed) {
  Rng rng(seed);
  Tensor x = random_tensor(in, rng);
  randomize(block.parameters(), seed);
  const Tensor y0 = block.forward(x);
  const Tensor w = random_tensor(y0.shape(), rng);
  zero_grads(block.parameters());
  const Tensor gx = block.backward(w);
  std::vector<real_t> gx_vec(gx.data().begin(), gx.data().end());

  auto f = [&] { return dot(block.forward(x), w); };
  std::vector<real_t> xv(x.data().begin(), x.data().end());
  GradCheckResult result;
  {
    auto fx = [&] {
      std::copy(xv.begin(), xv.end(), x.data().begin());
      return f();
    };
    result.merge(check_gradient(xv, gx_vec, fx, "input"));
    std::copy(xv.begin(), xv.end(), x.data().begin());
  }
  for (Parameter* p : block.parameters()) {
    const std::vector<real_t> analytic = p->grad;
    result.merge(check_gradient(p->value, analytic, f, p->name));
  }
  report(result);
}

}  // namespace

TEST(GradCheck, EncoderBlock) {
  EncoderBlock block("enc", 2, 8, 0.2);
  check_block(block, {1, 2, 8, 8}, 11);
}

TEST(GradCheck, DecoderBlock) {
  DecoderBlock block("dec", 8, 4, 0.2);
  check_block(block, {2, 8, 4, 4}, 12);
}

TEST(GradCheck, ResidualBlock) {
  ResidualBlock block("res", 8, 0.2);
  check_block(block, {1, 8, 8, 8}, 13);
}

TEST(GradCheck, CriticScoreInputAndParameters) {
  NetworkConfig cfg{.levels = 2, .base_filters = 8, .residual_blocks_per_level = 1, .folds = 2};
  Critic critic(cfg);
  randomize(critic.parameters(), 21);
  Rng rng(22);
  Tensor x = random_tensor({2, 2, 8, 8}, rng);
  critic.forward(x);
  zero_grads(critic.parameters());
  const std::vector<real_t> seeds = {0.5, 0.5};  // mean score
  const Tensor gx = critic.backward(seeds);

  auto mean_score = [&] {
    const auto s = critic.forward(x);
    return 0.5 * (s[0] + s[1]);
  };
  GradCheckResult result;
  for (Parameter* p : critic.parameters()) {
    const std::vector<real_t> analytic = p->grad;
    result.merge(check_gradient(p->value, analytic, mean_score, p->name));
  }
  std::vector<real_t> xv(x.data().begin(), x.data().end());
  std::vector<real_t> ga(gx.data().begin(), gx.data().end());
  result.merge(check_gradient(xv, ga, [&] {
    std::copy(xv.begin(), xv.end(), x.data().begin());
    return mean_score();
  }, "input"));
  report(result);
}

TEST(GradCheck, CriticTangentIsDirectionalDerivative) {
  NetworkConfig cfg{.levels = 2, .base_filters = 8};
  Critic critic(cfg);
  randomize(critic.parameters(), 31);
  Rng rng(32);
  const Tensor x = random_tensor({2, 2, 8, 8}, rng);
  const Tensor v = random_tensor(x.shape(), rng);
  critic.forward(x);
  const auto t = critic.tangent(v);
  const double h = 1e-5;
  Tensor xp = x, xm = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] += h * v[i];
    xm[i] -= h * v[i];
  }
  const auto sp = critic.forward(xp);
  const auto sm = critic.forward(xm);
  for (int b = 0; b < 2; ++b) {
    const double numeric = (sp[b] - sm[b]) / (2 * h);
    EXPECT_NEAR(t[b], numeric, 1e-6 * std::max(1.0, std::abs(numeric)));
  }
}

TEST(GradCheck, CriticLossWithGradientPenalty) {
  NetworkConfig cfg{.levels = 2, .base_filters = 8};
  Critic critic(cfg);
  randomize(critic.parameters(), 41);
  Rng rng(42);
  const Tensor real = random_tensor({2, 2, 8, 8}, rng, 0.5);
  const Tensor fake = random_tensor({2, 2, 8, 8}, rng, 0.5);
  const std::vector<double> eps = {0.3, 0.8};
  const double lambda = 10.0;
  critic_loss_and_grads(critic, real, fake, eps, lambda);
  std::vector<std::vector<real_t>> analytic;
  for (Parameter* p : critic.parameters()) analytic.push_back(p->grad);

  auto f = [&] { return critic_loss_and_grads(critic, real, fake, eps, lambda).adv_d; };
  GradCheckResult result;
  const auto params = critic.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    result.merge(check_gradient(params[k]->value, analytic[k], f, params[k]->name));
  }
  report(result);
}

TEST(GradCheck, TotalLossEveryGeneratorParameter) {
  // 2 levels, base 8, 2 folds, 8x8 inputs.
  NetworkConfig cfg{.levels = 2, .base_filters = 8, .residual_blocks_per_level = 1, .folds = 2};
  Generator generator(cfg);
  Critic critic(cfg);
  randomize(generator.parameters(), 51);
  randomize(critic.parameters(), 52);

  Rng rng(53);
  const SamplingMask mask = generate_mask({MaskPattern::random, 0.4, 8, 8, 5});
  GeneratorBatch batch;
  std::vector<ComplexImage> zf_m, zf_s, refs;
  for (int i = 0; i < 2; ++i) {
    ComplexImage img(8, 8);
    for (auto& v : img.data()) v = cplx(0.5 * rng.normal(), 0.2 * rng.normal());
    batch.m.push_back(undersample(img, mask));
    zf_m.push_back(zero_fill(batch.m.back()));
  }
  for (int i = 0; i < 2; ++i) {
    ComplexImage img(8, 8);
    for (auto& v : img.data()) v = cplx(0.5 * rng.normal(), 0.2 * rng.normal());
    refs.push_back(img);
    zf_s.push_back(zero_fill(undersample(img, mask)));
  }
  batch.m_input = to_tensor(zf_m);
  batch.s_input = to_tensor(zf_s);
  batch.s_ref = to_tensor(refs);
  const LossWeights w;

  generator_loss(generator, critic, batch, w, true);
  const auto params = generator.parameters();
  std::vector<std::vector<real_t>> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);

  auto f = [&] { return generator_loss(generator, critic, batch, w, false).total; };
  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    result.merge(check_gradient(params[k]->value, analytic[k], f, params[k]->name));
  }
  report(result);
  EXPECT_GT(result.checked, 10000u);
}
