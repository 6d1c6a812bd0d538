#pragma once

#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "refinegan/kspace.hpp"
#include "refinegan/nn/networks.hpp"

namespace refinegan {

enum class Distance { mse, mae };

std::string to_string(Distance d);
Distance parse_distance(const std::string& name);

struct LossWeights {
  double alpha = 1.0;   // frequency loss
  double gamma = 10.0;  // image loss
  double gp_lambda = 10.0;
  Distance distance = Distance::mse;
  /// Multiplies adv_g in the total; 1 gives the plain objective.
  double adversarial = 1.0;
  /// Adds drift * mean(real^2) to the critic loss to keep scores near zero.
  double drift = 0.0;

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

/// One training step. freq and imag are summed over the generator folds.
struct LossBreakdown {
  double adv_g = 0.0;
  double adv_d = 0.0;
  double freq = 0.0;
  double imag = 0.0;
  double total = 0.0;
};

/// A scalar loss and its gradient with respect to the reconstruction.
struct LossValue {
  double value = 0.0;
  nn::Tensor grad;
};

/// Mean over all elements; complex data counts as two real channels.
double distance(std::span<const double> a, std::span<const double> b, Distance metric);
double distance(const nn::Tensor& a, const nn::Tensor& b, Distance metric);
double distance(const KSpaceGrid& a, const KSpaceGrid& b, Distance metric);

/// Gradient of distance(ref, x) with respect to x.
LossValue distance_with_grad(const nn::Tensor& ref, const nn::Tensor& x, Distance metric);

/// distance(m.values, R F s̄) over the dense grids of the whole batch, and
/// its gradient F^H R^H (...) with respect to s̄. Item b of `recon` pairs with
/// measurements[b].
LossValue freq_loss(std::span<const KSpaceMeasurement> measurements, const nn::Tensor& recon, Distance metric);
double freq_loss(const KSpaceMeasurement& m, const ComplexImage& recon, Distance metric);

/// distance(s, s̄).
LossValue imag_loss(const nn::Tensor& reference, const nn::Tensor& recon, Distance metric);
double imag_loss(const ComplexImage& reference, const ComplexImage& recon, Distance metric);

/// WGAN losses: adv_d = mean(fake) - mean(real) + lambda * gp,
/// adv_g = -mean(fake). Returns (adv_g, adv_d).
std::pair<double, double> adversarial_losses(std::span<const double> real_scores, std::span<const double> fake_scores,
                                             double gp_term, double gp_lambda);

/// Mean over items of (||g_i|| - 1)^2 for a batch of input gradients.
double gradient_penalty_term(const nn::Tensor& input_grads);

/// adversarial * adv_g + sum_k (alpha * freq_k + gamma * imag_k).
double total_loss(std::span<const std::pair<double, double>> fold_freq_imag, double adv_g, const LossWeights& w);

struct CriticLoss {
  double adv_d = 0.0;
  double gp = 0.0;
  double mean_real = 0.0;
  double mean_fake = 0.0;
};

/// Interpolates eps_i * real_i + (1 - eps_i) * fake_i.
nn::Tensor interpolate(const nn::Tensor& real, const nn::Tensor& fake, std::span<const double> eps);

/// Evaluates adv_d including the gradient penalty at the interpolates and
/// leaves d(adv_d)/d(theta) in the critic's parameter gradients (which are
/// overwritten, not accumulated). The penalty's parameter gradient is the
/// gradient of the critic's directional derivative along dP/dg, so no second
/// order backward pass is needed.
CriticLoss critic_loss_and_grads(nn::Critic& critic, const nn::Tensor& real, const nn::Tensor& fake,
                                 std::span<const double> eps, double gp_lambda, double drift = 0.0);

/// Inputs of one generator step. The m-batch drives the frequency loss and
/// the adversarial term, the independently drawn s-batch the image loss.
struct GeneratorBatch {
  std::vector<KSpaceMeasurement> m;
  nn::Tensor m_input;  // zero-filling reconstructions of m
  nn::Tensor s_input;  // zero-filling reconstructions of undersampled s
  nn::Tensor s_ref;    // the fully sampled s
};

/// Per-fold losses and the total for one generator step. When `grads` is
/// set, the generator's parameter gradients are overwritten with
/// d(total)/d(theta); the critic's parameter gradients are clobbered.
LossBreakdown generator_loss(nn::Generator& generator, nn::Critic& critic, const GeneratorBatch& batch,
                             const LossWeights& w, bool grads,
                             std::vector<std::pair<double, double>>* per_fold = nullptr);

}  // namespace refinegan
