#pragma once

#include <string>
#include <vector>

#include "refinegan/nn/layers.hpp"

namespace refinegan::nn {

/// Stride-2 3x3 convolution followed by a leaky rectifier; halves the
/// spatial size.
class EncoderBlock {
 public:
  EncoderBlock(const std::string& name, int in_channels, int filters, real_t slope);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  Tensor tangent(const Tensor& dx);
  Tensor backward_tangent(const Tensor& gdy);

  std::vector<Parameter*> parameters();
  int filters() const { return conv_.out_channels(); }

 private:
  Conv2d conv_;
  LeakyRelu act_;
};

/// Transposed stride-2 convolution followed by a leaky rectifier; doubles
/// the spatial size.
class DecoderBlock {
 public:
  DecoderBlock(const std::string& name, int in_channels, int filters, real_t slope);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);

  std::vector<Parameter*> parameters();
  int filters() const { return conv_.out_channels(); }

 private:
  ConvTranspose2d conv_;
  LeakyRelu act_;
};

/// Bottleneck of three stride-1 convolutions with widths C/2, C/2, C plus an
/// identity shortcut. No activation after the addition, so zero weights
/// give the identity map.
class ResidualBlock {
 public:
  ResidualBlock(const std::string& name, int channels, real_t slope);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  Tensor tangent(const Tensor& dx);
  Tensor backward_tangent(const Tensor& gdy);

  std::vector<Parameter*> parameters();
  int channels() const { return conv_o_.out_channels(); }

  const Conv2d& conv_i() const { return conv_i_; }
  const Conv2d& conv_m() const { return conv_m_; }
  const Conv2d& conv_o() const { return conv_o_; }

 private:
  Conv2d conv_i_, conv_m_, conv_o_;
  LeakyRelu act_i_, act_m_;
};

}  // namespace refinegan::nn
