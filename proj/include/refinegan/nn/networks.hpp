#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <vector>

#include "refinegan/nn/blocks.hpp"

namespace refinegan::nn {

struct NetworkConfig {
  int levels = 4;
  int base_filters = 32;
  int residual_blocks_per_level = 1;
  int folds = 2;  // 1 = single generator, 2 = generator plus refinement
  int input_channels = 2;
  double negative_slope = 0.2;

  /// Throws InvalidInput when the hyperparameters are inconsistent.
  void validate() const;
  /// Throws ShapeMismatch unless both sides are divisible by 2^levels.
  void validate_input(int height, int width) const;
  int filters_at(int level) const { return base_filters << level; }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

/// One encoder-decoder residual autoencoder. Encoder features are added to
/// the decoder features of the same resolution; the output is
/// input + tanh(final conv).
class GeneratorFold {
 public:
  GeneratorFold(const NetworkConfig& config, const std::string& prefix);

  Tensor forward(const Tensor& x);
  /// Gradient with respect to the fold input, including the identity path.
  Tensor backward(const Tensor& g_out);

  std::vector<Parameter*> parameters();
  const Shape& bottleneck_shape() const { return bottleneck_shape_; }

 private:
  NetworkConfig config_;
  std::vector<EncoderBlock> encoders_;
  std::vector<std::vector<ResidualBlock>> encoder_res_;
  std::vector<DecoderBlock> decoders_;
  std::vector<std::vector<ResidualBlock>> decoder_res_;
  Conv2d output_;
  Tanh squash_;
  Shape bottleneck_shape_;
};

/// Chain of folds: fold k refines the checkpoint of fold k-1. Every fold has
/// its own parameters.
class Generator {
 public:
  explicit Generator(const NetworkConfig& config);

  /// One checkpoint per fold; the last one is the final reconstruction.
  std::vector<Tensor> forward(const Tensor& s0);
  /// g_checkpoints[k] is dL/d(checkpoint k); empty tensors count as zero.
  /// Returns dL/ds0.
  Tensor backward(std::span<const Tensor> g_checkpoints);

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> fold_parameters(int fold);
  GeneratorFold& fold(int k) { return folds_.at(static_cast<std::size_t>(k)); }
  const NetworkConfig& config() const { return config_; }

 private:
  NetworkConfig config_;
  std::vector<GeneratorFold> folds_;
  Shape input_shape_;
};

/// Wasserstein critic: the generator's encoding path followed by global
/// average pooling of the last residual block. One unbounded score per item.
class Critic {
 public:
  explicit Critic(const NetworkConfig& config);

  std::vector<real_t> forward(const Tensor& x);
  /// g_scores[i] = dL/d(score i). Returns dL/dx.
  Tensor backward(std::span<const real_t> g_scores);
  /// Directional derivative of each score along dx at the last forward input.
  std::vector<real_t> tangent(const Tensor& dx);
  /// Backpropagates weights on the tangent outputs into the parameters.
  Tensor backward_tangent(std::span<const real_t> g_tangent);

  std::vector<Parameter*> parameters();
  const NetworkConfig& config() const { return config_; }

 private:
  Tensor pool_backward(std::span<const real_t> g) const;

  NetworkConfig config_;
  std::vector<EncoderBlock> encoders_;
  std::vector<std::vector<ResidualBlock>> res_;
  Shape feature_shape_;
};

/// Fan-in scaled normal weights (He), zero biases. Each parameter draws from
/// a stream derived from the seed and its name, so a parameter's initial
/// value does not depend on which other parameters exist.
void initialize(std::span<Parameter* const> params, std::uint64_t seed);
/// He init everywhere except each fold's output convolution, which starts
/// at zero so the untrained generator is the identity on its input.
void initialize_generator(Generator& generator, std::uint64_t seed);
void zero_parameters(std::span<Parameter* const> params);
void zero_grads(std::span<Parameter* const> params);
/// Copies values between identically named and shaped parameter lists.
void copy_parameters(std::span<Parameter* const> from, std::span<Parameter* const> to);

}  // namespace refinegan::nn
