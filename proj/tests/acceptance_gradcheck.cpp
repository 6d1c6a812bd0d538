// Gradient check of the total generator loss for the acceptance suite. Built
// against the double-precision network library, so it runs as a separate
// process. Prints one summary line; exit code 0 when every entry agrees.

#include <chrono>
#include <cstdio>

#include "gradcheck.hpp"
#include "refinegan/losses.hpp"
#include "refinegan/masks.hpp"
#include "refinegan/rng.hpp"

using namespace refinegan;
using namespace refinegan::nn;
using refinegan::testing::check_gradient;
using refinegan::testing::GradCheckResult;

static_assert(sizeof(real_t) == sizeof(double));

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  const NetworkConfig cfg{.levels = 2, .base_filters = 8, .residual_blocks_per_level = 1, .folds = 2};
  Generator generator(cfg);
  Critic critic(cfg);
  initialize(generator.parameters(), 61);
  initialize(critic.parameters(), 62);
  // Nonzero biases and output layer, so no gradient is trivially zero.
  Rng rng(63);
  for (Parameter* p : generator.parameters()) {
    if (p->name.ends_with("/bias")) {
      for (auto& v : p->value) v = 0.1 * rng.normal();
    }
  }

  const SamplingMask mask = generate_mask({MaskPattern::radial, 0.4, 8, 8, 3});
  GeneratorBatch batch;
  std::vector<ComplexImage> zf_m, zf_s, refs;
  auto random_image = [&rng] {
    ComplexImage img(8, 8);
    for (auto& v : img.data()) v = cplx(0.5 * rng.normal(), 0.2 * rng.normal());
    return img;
  };
  for (int i = 0; i < 2; ++i) {
    batch.m.push_back(undersample(random_image(), mask));
    zf_m.push_back(zero_fill(batch.m.back()));
    refs.push_back(random_image());
    zf_s.push_back(zero_fill(undersample(refs.back(), mask)));
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
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("tensors %zu entries %zu mismatches %zu kinked %zu seconds %.1f\n", params.size(), result.checked,
              result.bad.size(), result.kinked, seconds);
  for (std::size_t i = 0; i < std::min<std::size_t>(result.bad.size(), 5); ++i) {
    std::printf("  %s[%zu] analytic %.8g numeric %.8g\n", result.bad[i].where.c_str(), result.bad[i].index,
                result.bad[i].analytic, result.bad[i].numeric);
  }
  const bool ok = result.bad.empty() && result.kinked * 20 <= result.checked;
  return ok ? 0 : 1;
}
