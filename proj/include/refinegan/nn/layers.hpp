#pragma once

#include <string>
#include <vector>

#include "refinegan/nn/tensor.hpp"

namespace refinegan::nn {

// All convolutions are 3x3 with one pixel of zero padding.

/// y = W * x for a stride-1 or stride-2 convolution. W has shape
/// (out_channels, in_channels * 9).
Tensor conv3x3(const std::vector<real_t>& weight, const Tensor& x, int out_channels, int stride);
/// Adjoint of conv3x3 with respect to x; `input` is the shape of x.
Tensor conv3x3_adjoint(const std::vector<real_t>& weight, const Tensor& g, Shape input, int stride);
/// weight_grad += g (*) x, the adjoint of conv3x3 with respect to W.
void conv3x3_weight_grad(std::vector<real_t>& weight_grad, const Tensor& g, const Tensor& x, int stride);

inline int conv_out_dim(int in, int stride) { return (in - 1) / stride + 1; }

/// Layers keep what they need from the last forward pass; each instance is
/// used once per forward/backward cycle.
///
/// The tangent methods propagate a forward-mode directional derivative
/// through the layer at the cached primal point, and backward_tangent
/// differentiates that tangent with respect to the parameters. The critic
/// uses them for the gradient penalty.

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, int in_channels, int out_channels, int stride);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  Tensor tangent(const Tensor& dx);
  Tensor backward_tangent(const Tensor& gdy);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int stride() const { return stride_; }

  Parameter weight;
  Parameter bias;

 private:
  int in_ = 0, out_ = 0, stride_ = 1;
  Tensor input_;
  Tensor tangent_input_;
};

/// Transposed stride-2 3x3 convolution: doubles the spatial size. It is the
/// adjoint of a stride-2 Conv2d from out_channels to in_channels; the weight
/// has shape (in_channels, out_channels * 9).
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(const std::string& name, int in_channels, int out_channels);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

  Parameter weight;
  Parameter bias;

 private:
  int in_ = 0, out_ = 0;
  Tensor input_;
};

class LeakyRelu {
 public:
  explicit LeakyRelu(real_t slope = real_t(0.2)) : slope_(slope) {}

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy) const;
  // Piecewise linear, so the tangent map is the same masked scaling.
  Tensor tangent(const Tensor& dx) const { return backward(dx); }
  Tensor backward_tangent(const Tensor& gdy) const { return backward(gdy); }

 private:
  real_t slope_;
  std::vector<unsigned char> positive_;
};

class Tanh {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy) const;

 private:
  Tensor output_;
};

}  // namespace refinegan::nn
