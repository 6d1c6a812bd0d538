#include "refinegan/losses.hpp"

#include <cmath>

namespace refinegan {

using nn::real_t;
using nn::Tensor;

std::string to_string(Distance d) { return d == Distance::mse ? "mse" : "mae"; }

Distance parse_distance(const std::string& name) {
  if (name == "mse" || name == "MSE") return Distance::mse;
  if (name == "mae" || name == "MAE") return Distance::mae;
  throw InvalidInput("unknown distance '" + name + "' (expected mse or mae)");
}

void LossWeights::validate() const {
  for (double v : {alpha, gamma, gp_lambda, adversarial, drift}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("LossWeights: weights must be finite and >= 0");
  }
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = nlohmann::json{{"alpha", w.alpha},
                     {"gamma", w.gamma},
                     {"gp_lambda", w.gp_lambda},
                     {"distance", to_string(w.distance)},
                     {"adversarial", w.adversarial},
                     {"drift", w.drift}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  for (const auto& [key, value] : j.items()) {
    if (key != "alpha" && key != "gamma" && key != "gp_lambda" && key != "distance" && key != "adversarial" &&
        key != "drift") {
      throw InvalidInput("LossWeights: unknown key '" + key + "'");
    }
  }
  if (j.contains("alpha")) j.at("alpha").get_to(w.alpha);
  if (j.contains("gamma")) j.at("gamma").get_to(w.gamma);
  if (j.contains("gp_lambda")) j.at("gp_lambda").get_to(w.gp_lambda);
  if (j.contains("distance")) w.distance = parse_distance(j.at("distance").get<std::string>());
  if (j.contains("adversarial")) j.at("adversarial").get_to(w.adversarial);
  if (j.contains("drift")) j.at("drift").get_to(w.drift);
}

namespace {

double elementwise(double d, Distance metric) { return metric == Distance::mse ? d * d : std::abs(d); }

// Derivative of the per-element term with respect to the second argument,
// where d = x - ref.
double elementwise_grad(double d, Distance metric) {
  if (metric == Distance::mse) return 2.0 * d;
  return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
}

}  // namespace

double distance(std::span<const double> a, std::span<const double> b, Distance metric) {
  if (a.size() != b.size()) throw ShapeMismatch("distance: sizes differ");
  if (a.empty()) throw InvalidInput("distance: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += elementwise(a[i] - b[i], metric);
  return acc / static_cast<double>(a.size());
}

double distance(const Tensor& a, const Tensor& b, Distance metric) {
  if (a.shape() != b.shape()) throw ShapeMismatch("distance: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  if (a.empty()) throw InvalidInput("distance: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += elementwise(double(a[i]) - double(b[i]), metric);
  return acc / static_cast<double>(a.size());
}

double distance(const KSpaceGrid& a, const KSpaceGrid& b, Distance metric) {
  if (!a.same_shape(b)) throw ShapeMismatch("distance: grid shapes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const cplx d = a[i] - b[i];
    acc += elementwise(d.real(), metric) + elementwise(d.imag(), metric);
  }
  return acc / static_cast<double>(2 * a.size());
}

LossValue distance_with_grad(const Tensor& ref, const Tensor& x, Distance metric) {
  if (ref.shape() != x.shape()) throw ShapeMismatch("distance: " + to_string(ref.shape()) + " vs " + to_string(x.shape()));
  LossValue out{0.0, Tensor(x.shape())};
  const double inv = 1.0 / static_cast<double>(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = double(x[i]) - double(ref[i]);
    acc += elementwise(d, metric);
    out.grad[i] = static_cast<real_t>(elementwise_grad(d, metric) * inv);
  }
  out.value = acc * inv;
  return out;
}

LossValue freq_loss(std::span<const KSpaceMeasurement> measurements, const Tensor& recon, Distance metric) {
  const auto& s = recon.shape();
  if (s.c != 2 || static_cast<std::size_t>(s.n) != measurements.size()) {
    throw ShapeMismatch("freq_loss: " + std::to_string(measurements.size()) + " measurements for " + to_string(s));
  }
  LossValue out{0.0, Tensor(s)};
  const double inv = 1.0 / static_cast<double>(recon.size());
  double acc = 0.0;
  for (int b = 0; b < s.n; ++b) {
    const KSpaceMeasurement& m = measurements[b];
    if (m.height() != s.h || m.width() != s.w) throw ShapeMismatch("freq_loss: measurement shape");
    const KSpaceGrid k = forward_fourier(nn::to_image(recon, b));
    KSpaceGrid gk(s.h, s.w);
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (!m.mask()[i]) continue;  // both sides are zero off the support
      const cplx d = k[i] - m.values()[i];
      acc += elementwise(d.real(), metric) + elementwise(d.imag(), metric);
      gk[i] = cplx(elementwise_grad(d.real(), metric), elementwise_grad(d.imag(), metric)) * inv;
    }
    const ComplexImage g = inverse_fourier(gk);
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        out.grad.at(b, 0, y, x) = static_cast<real_t>(g(y, x).real());
        out.grad.at(b, 1, y, x) = static_cast<real_t>(g(y, x).imag());
      }
    }
  }
  out.value = acc * inv;
  return out;
}

double freq_loss(const KSpaceMeasurement& m, const ComplexImage& recon, Distance metric) {
  if (!recon.same_shape(m.height(), m.width())) throw ShapeMismatch("freq_loss: shapes differ");
  return distance(m.values(), undersample(recon, m.mask()).values(), metric);
}

LossValue imag_loss(const Tensor& reference, const Tensor& recon, Distance metric) {
  return distance_with_grad(reference, recon, metric);
}

double imag_loss(const ComplexImage& reference, const ComplexImage& recon, Distance metric) {
  if (!reference.same_shape(recon)) throw ShapeMismatch("imag_loss: shapes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const cplx d = recon[i] - reference[i];
    acc += elementwise(d.real(), metric) + elementwise(d.imag(), metric);
  }
  return acc / static_cast<double>(2 * recon.size());
}

std::pair<double, double> adversarial_losses(std::span<const double> real_scores, std::span<const double> fake_scores,
                                             double gp_term, double gp_lambda) {
  if (real_scores.empty() || fake_scores.empty()) throw InvalidInput("adversarial_losses: empty score batch");
  auto mean = [](std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) {
      if (!std::isfinite(x)) throw InvalidInput("adversarial_losses: non-finite score");
      acc += x;
    }
    return acc / static_cast<double>(v.size());
  };
  if (!std::isfinite(gp_term)) throw InvalidInput("adversarial_losses: non-finite gradient penalty");
  const double fake = mean(fake_scores);
  const double real = mean(real_scores);
  return {-fake, fake - real + gp_lambda * gp_term};
}

double gradient_penalty_term(const Tensor& input_grads) {
  const int n = input_grads.shape().n;
  if (n == 0) throw InvalidInput("gradient_penalty_term: empty batch");
  double acc = 0.0;
  for (int b = 0; b < n; ++b) {
    double sq = 0.0;
    for (real_t v : input_grads.item(b)) sq += double(v) * double(v);
    const double d = std::sqrt(sq) - 1.0;
    acc += d * d;
  }
  return acc / n;
}

double total_loss(std::span<const std::pair<double, double>> fold_freq_imag, double adv_g, const LossWeights& w) {
  if (fold_freq_imag.empty()) throw InvalidInput("total_loss: no folds");
  double total = w.adversarial * adv_g;
  for (const auto& [freq, imag] : fold_freq_imag) total += w.alpha * freq + w.gamma * imag;
  return total;
}

Tensor interpolate(const Tensor& real, const Tensor& fake, std::span<const double> eps) {
  if (real.shape() != fake.shape()) throw ShapeMismatch("interpolate: real and fake shapes differ");
  if (eps.size() != static_cast<std::size_t>(real.shape().n)) throw ShapeMismatch("interpolate: one weight per item");
  Tensor out(real.shape());
  for (int b = 0; b < real.shape().n; ++b) {
    const auto r = real.item(b);
    const auto f = fake.item(b);
    auto o = out.item(b);
    const auto e = static_cast<real_t>(eps[b]);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = e * r[i] + (real_t(1) - e) * f[i];
  }
  return out;
}

CriticLoss critic_loss_and_grads(nn::Critic& critic, const Tensor& real, const Tensor& fake,
                                 std::span<const double> eps, double gp_lambda, double drift) {
  const int n = real.shape().n;
  const auto params = critic.parameters();
  CriticLoss out;

  if (gp_lambda > 0.0) {
    const Tensor xhat = interpolate(real, fake, eps);
    critic.forward(xhat);
    const std::vector<real_t> ones(static_cast<std::size_t>(n), real_t(1));
    const Tensor g = critic.backward(ones);
    out.gp = gradient_penalty_term(g);

    // v_i = dP/dg_i for P = mean_i (||g_i|| - 1)^2.
    Tensor v(g.shape());
    for (int b = 0; b < n; ++b) {
      double sq = 0.0;
      for (real_t x : g.item(b)) sq += double(x) * double(x);
      const double norm = std::sqrt(sq);
      const double scale = norm > 0.0 ? 2.0 * (norm - 1.0) / (norm * n) : 0.0;
      auto vi = v.item(b);
      const auto gi = g.item(b);
      for (std::size_t i = 0; i < vi.size(); ++i) vi[i] = static_cast<real_t>(scale * gi[i]);
    }
    nn::zero_grads(params);
    critic.tangent(v);
    const std::vector<real_t> seeds(static_cast<std::size_t>(n), static_cast<real_t>(gp_lambda));
    critic.backward_tangent(seeds);
  } else {
    nn::zero_grads(params);
  }

  const std::vector<real_t> scores = critic.forward(nn::concat(fake, real));
  std::vector<real_t> seeds(scores.size());
  std::vector<double> fake_scores, real_scores;
  for (int b = 0; b < n; ++b) {
    fake_scores.push_back(scores[b]);
    real_scores.push_back(scores[n + b]);
    seeds[b] = static_cast<real_t>(1.0 / n);
    seeds[n + b] = static_cast<real_t>((-1.0 + 2.0 * drift * scores[n + b]) / n);
  }
  critic.backward(seeds);
  out.adv_d = adversarial_losses(real_scores, fake_scores, out.gp, gp_lambda).second;
  for (double x : real_scores) out.adv_d += drift * x * x / n;
  for (double x : real_scores) out.mean_real += x / n;
  for (double x : fake_scores) out.mean_fake += x / n;
  return out;
}

LossBreakdown generator_loss(nn::Generator& generator, nn::Critic& critic, const GeneratorBatch& batch,
                             const LossWeights& w, bool grads, std::vector<std::pair<double, double>>* per_fold) {
  const int nm = batch.m_input.shape().n;
  const int ns = batch.s_input.shape().n;
  if (nm == 0 || ns == 0) throw InvalidInput("generator_loss: empty batch");
  if (batch.s_ref.shape() != batch.s_input.shape()) throw ShapeMismatch("generator_loss: s-batch shapes differ");

  // Both batches go through the generator together; items [0, nm) are the
  // m-batch.
  const std::vector<Tensor> checkpoints = generator.forward(nn::concat(batch.m_input, batch.s_input));
  const int folds = static_cast<int>(checkpoints.size());

  LossBreakdown out;
  std::vector<std::pair<double, double>> fold_losses;
  std::vector<Tensor> g_checkpoints(checkpoints.size());
  for (int k = 0; k < folds; ++k) {
    const LossValue f = freq_loss(batch.m, nn::slice(checkpoints[k], 0, nm), w.distance);
    const LossValue im = imag_loss(batch.s_ref, nn::slice(checkpoints[k], nm, ns), w.distance);
    fold_losses.emplace_back(f.value, im.value);
    out.freq += f.value;
    out.imag += im.value;
    if (grads) {
      Tensor gf = f.grad;
      gf *= static_cast<real_t>(w.alpha);
      Tensor gi = im.grad;
      gi *= static_cast<real_t>(w.gamma);
      g_checkpoints[k] = nn::concat(gf, gi);
    }
  }

  const Tensor fake = nn::slice(checkpoints.back(), 0, nm);
  const std::vector<real_t> scores = critic.forward(fake);
  double mean_fake = 0.0;
  for (real_t s : scores) mean_fake += double(s) / nm;
  out.adv_g = -mean_fake;
  out.total = total_loss(fold_losses, out.adv_g, w);
  if (per_fold != nullptr) *per_fold = fold_losses;

  if (grads) {
    const std::vector<real_t> seeds(static_cast<std::size_t>(nm), static_cast<real_t>(-w.adversarial / nm));
    const Tensor g_fake = critic.backward(seeds);
    Tensor& g_last = g_checkpoints.back();
    for (int b = 0; b < nm; ++b) {
      auto dst = g_last.item(b);
      const auto src = g_fake.item(b);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
    const auto params = generator.parameters();
    nn::zero_grads(params);
    generator.backward(g_checkpoints);
  }
  return out;
}

}  // namespace refinegan
