#include "refinegan/nn/blocks.hpp"

namespace refinegan::nn {

EncoderBlock::EncoderBlock(const std::string& name, int in_channels, int filters, real_t slope)
    : conv_(name + "/conv", in_channels, filters, 2), act_(slope) {}

Tensor EncoderBlock::forward(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw InvalidInput("EncoderBlock: spatial dims must be even, got " + to_string(s));
  }
  return act_.forward(conv_.forward(x));
}

Tensor EncoderBlock::backward(const Tensor& gy) { return conv_.backward(act_.backward(gy)); }

Tensor EncoderBlock::tangent(const Tensor& dx) { return act_.tangent(conv_.tangent(dx)); }

Tensor EncoderBlock::backward_tangent(const Tensor& gdy) {
  return conv_.backward_tangent(act_.backward_tangent(gdy));
}

std::vector<Parameter*> EncoderBlock::parameters() { return {&conv_.weight, &conv_.bias}; }

DecoderBlock::DecoderBlock(const std::string& name, int in_channels, int filters, real_t slope)
    : conv_(name + "/convT", in_channels, filters), act_(slope) {}

Tensor DecoderBlock::forward(const Tensor& x) { return act_.forward(conv_.forward(x)); }

Tensor DecoderBlock::backward(const Tensor& gy) { return conv_.backward(act_.backward(gy)); }

std::vector<Parameter*> DecoderBlock::parameters() { return {&conv_.weight, &conv_.bias}; }

namespace {

int half_channels(int channels) {
  if (channels < 2 || channels % 2 != 0) {
    throw InvalidInput("ResidualBlock: channel count must be even, got " + std::to_string(channels));
  }
  return channels / 2;
}

}  // namespace

ResidualBlock::ResidualBlock(const std::string& name, int channels, real_t slope)
    : conv_i_(name + "/conv_i", channels, half_channels(channels), 1),
      conv_m_(name + "/conv_m", channels / 2, channels / 2, 1),
      conv_o_(name + "/conv_o", channels / 2, channels, 1),
      act_i_(slope), act_m_(slope) {}

Tensor ResidualBlock::forward(const Tensor& x) {
  Tensor h = act_i_.forward(conv_i_.forward(x));
  h = act_m_.forward(conv_m_.forward(h));
  Tensor y = conv_o_.forward(h);
  y += x;
  return y;
}

Tensor ResidualBlock::backward(const Tensor& gy) {
  Tensor g = conv_o_.backward(gy);
  g = conv_m_.backward(act_m_.backward(g));
  g = conv_i_.backward(act_i_.backward(g));
  g += gy;
  return g;
}

Tensor ResidualBlock::tangent(const Tensor& dx) {
  Tensor h = act_i_.tangent(conv_i_.tangent(dx));
  h = act_m_.tangent(conv_m_.tangent(h));
  Tensor y = conv_o_.tangent(h);
  y += dx;
  return y;
}

Tensor ResidualBlock::backward_tangent(const Tensor& gdy) {
  Tensor g = conv_o_.backward_tangent(gdy);
  g = conv_m_.backward_tangent(act_m_.backward_tangent(g));
  g = conv_i_.backward_tangent(act_i_.backward_tangent(g));
  g += gdy;
  return g;
}

std::vector<Parameter*> ResidualBlock::parameters() {
  return {&conv_i_.weight, &conv_i_.bias, &conv_m_.weight, &conv_m_.bias, &conv_o_.weight, &conv_o_.bias};
}

}  // namespace refinegan::nn
