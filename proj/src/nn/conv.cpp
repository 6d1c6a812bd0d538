#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "refinegan/nn/layers.hpp"

namespace refinegan::nn {

namespace {

using RowMatrix = Eigen::Matrix<real_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Output columns [lo, hi) whose stride-2 tap kx lands inside a row of width w.
std::pair<int, int> valid_columns(int kx, int w, int wo) {
  const int lo = kx == 0 ? 1 : 0;
  const int hi = std::min(wo, (w - kx) / 2 + 1);
  return {lo, hi};
}

// Output rows [y0, y1) of items [first, first + count).
struct Block {
  int first, count, y0, y1;
};

// Column buffer for a block: row (c*9 + ky*3 + kx), column
// ((b - first)*P + (oy - y0)*Wo + ox) with P = (y1 - y0)*Wo.
void im2col(const Tensor& x, Block blk, int stride, int wo, std::vector<real_t>& col) {
  const Shape& s = x.shape();
  const int first = blk.first, count = blk.count;
  const std::size_t p = static_cast<std::size_t>(blk.y1 - blk.y0) * wo;
  const std::size_t cols = static_cast<std::size_t>(count) * p;
  col.resize(static_cast<std::size_t>(s.c) * 9 * cols);
  for (int b = 0; b < count; ++b) {
    const real_t* src = x.item(first + b).data();
    for (int c = 0; c < s.c; ++c) {
      const real_t* plane = src + static_cast<std::size_t>(c) * s.h * s.w;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          real_t* row = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * cols + b * p;
          for (int oy = blk.y0; oy < blk.y1; ++oy) {
            const int iy = oy * stride - 1 + ky;
            real_t* dst = row + static_cast<std::size_t>(oy - blk.y0) * wo;
            if (iy < 0 || iy >= s.h) {
              std::fill(dst, dst + wo, real_t{0});
              continue;
            }
            const real_t* line = plane + static_cast<std::size_t>(iy) * s.w;
            if (stride == 1) {
              // ix = ox + kx - 1
              const int lo = kx == 0 ? 1 : 0;
              const int hi = kx == 2 ? wo - 1 : wo;
              if (lo == 1) dst[0] = 0;
              if (hi == wo - 1) dst[wo - 1] = 0;
              std::memcpy(dst + lo, line + lo + kx - 1, sizeof(real_t) * (hi - lo));
            } else {
              const auto [lo, hi] = valid_columns(kx, s.w, wo);
              std::fill(dst, dst + lo, real_t{0});
              for (int ox = lo; ox < hi; ++ox) dst[ox] = line[2 * ox - 1 + kx];
              std::fill(dst + hi, dst + wo, real_t{0});
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: adds the column buffer onto x.
void col2im(const std::vector<real_t>& col, Tensor& x, Block blk, int stride, int wo) {
  const Shape& s = x.shape();
  const int first = blk.first, count = blk.count;
  const std::size_t p = static_cast<std::size_t>(blk.y1 - blk.y0) * wo;
  const std::size_t cols = static_cast<std::size_t>(count) * p;
  for (int b = 0; b < count; ++b) {
    real_t* dst = x.item(first + b).data();
    for (int c = 0; c < s.c; ++c) {
      real_t* plane = dst + static_cast<std::size_t>(c) * s.h * s.w;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const real_t* row = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * cols + b * p;
          for (int oy = blk.y0; oy < blk.y1; ++oy) {
            const int iy = oy * stride - 1 + ky;
            if (iy < 0 || iy >= s.h) continue;
            real_t* line = plane + static_cast<std::size_t>(iy) * s.w;
            const real_t* srow = row + static_cast<std::size_t>(oy - blk.y0) * wo;
            if (stride == 1) {
              const int first_ox = kx == 0 ? 1 : 0;
              const int last_ox = kx == 2 ? wo - 1 : wo;
              for (int ox = first_ox; ox < last_ox; ++ox) line[ox + kx - 1] += srow[ox];
            } else {
              const auto [lo, hi] = valid_columns(kx, s.w, wo);
              for (int ox = lo; ox < hi; ++ox) line[2 * ox - 1 + kx] += srow[ox];
            }
          }
        }
      }
    }
  }
}

// Large planes run one item and a band of output rows at a time, so the
// column buffer stays in cache and each band of an item's (C, P) block is
// already in NCHW order. Small planes are batched so the GEMMs have enough
// columns.
constexpr std::size_t kPerItemPlane = 256;
constexpr std::size_t kColumnBudget = 1 << 16;  // floats per column buffer

int band_rows(long k, int ho, int wo) {
  const long rows = static_cast<long>(kColumnBudget) / (k * wo);
  return static_cast<int>(std::clamp<long>(rows, 1, ho));
}

using StridedMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

thread_local std::vector<real_t> tl_col;
thread_local std::vector<real_t> tl_cm;

// (C, N*P) matrix view <-> (N, C, P) tensor layout.
std::vector<real_t> to_channel_major(const Tensor& t) {
  const Shape& s = t.shape();
  const std::size_t p = s.plane();
  std::vector<real_t> m(t.size());
  for (int b = 0; b < s.n; ++b) {
    for (int c = 0; c < s.c; ++c) {
      const real_t* src = t.item(b).data() + c * p;
      std::copy(src, src + p, m.data() + (static_cast<std::size_t>(c) * s.n + b) * p);
    }
  }
  return m;
}

Tensor from_channel_major(const std::vector<real_t>& m, Shape s) {
  Tensor t(s);
  const std::size_t p = s.plane();
  for (int b = 0; b < s.n; ++b) {
    for (int c = 0; c < s.c; ++c) {
      const real_t* src = m.data() + (static_cast<std::size_t>(c) * s.n + b) * p;
      std::copy(src, src + p, t.item(b).data() + c * p);
    }
  }
  return t;
}

void check_stride(int stride) {
  if (stride != 1 && stride != 2) throw InvalidInput("conv3x3: stride must be 1 or 2");
}

void add_bias(Tensor& y, const Parameter& bias) {
  const Shape& s = y.shape();
  const std::size_t p = s.plane();
  for (int b = 0; b < s.n; ++b) {
    real_t* item = y.item(b).data();
    for (int c = 0; c < s.c; ++c) {
      const real_t v = bias.value[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < p; ++i) item[c * p + i] += v;
    }
  }
}

void accumulate_bias_grad(Parameter& bias, const Tensor& gy) {
  const Shape& s = gy.shape();
  const std::size_t p = s.plane();
  for (int b = 0; b < s.n; ++b) {
    const real_t* item = gy.item(b).data();
    for (int c = 0; c < s.c; ++c) {
      real_t acc = 0;
      for (std::size_t i = 0; i < p; ++i) acc += item[c * p + i];
      bias.grad[static_cast<std::size_t>(c)] += acc;
    }
  }
}

}  // namespace

Tensor conv3x3(const std::vector<real_t>& weight, const Tensor& x, int out_channels, int stride) {
  check_stride(stride);
  const Shape& s = x.shape();
  const long k = static_cast<long>(s.c) * 9;
  if (weight.size() != static_cast<std::size_t>(out_channels) * k) {
    throw ShapeMismatch("conv3x3: weight does not match input channels " + to_string(s));
  }
  const int ho = conv_out_dim(s.h, stride), wo = conv_out_dim(s.w, stride);
  const Shape out_shape{s.n, out_channels, ho, wo};
  const long p = static_cast<long>(ho) * wo;
  const ConstMatrixMap w(weight.data(), out_channels, k);
  if (static_cast<std::size_t>(p) >= kPerItemPlane) {
    Tensor y(out_shape);
    const int band = band_rows(k, ho, wo);
    for (int b = 0; b < s.n; ++b) {
      for (int y0 = 0; y0 < ho; y0 += band) {
        const int y1 = std::min(ho, y0 + band);
        const long cols = static_cast<long>(y1 - y0) * wo;
        im2col(x, {b, 1, y0, y1}, stride, wo, tl_col);
        StridedMap(y.item(b).data() + static_cast<long>(y0) * wo, out_channels, cols, Eigen::OuterStride<>(p))
            .noalias() = w * ConstMatrixMap(tl_col.data(), k, cols);
      }
    }
    return y;
  }
  im2col(x, {0, s.n, 0, ho}, stride, wo, tl_col);
  const long cols = s.n * p;
  tl_cm.resize(static_cast<std::size_t>(out_channels) * cols);
  MatrixMap(tl_cm.data(), out_channels, cols).noalias() = w * ConstMatrixMap(tl_col.data(), k, cols);
  return from_channel_major(tl_cm, out_shape);
}

Tensor conv3x3_adjoint(const std::vector<real_t>& weight, const Tensor& g, Shape input, int stride) {
  check_stride(stride);
  const Shape& s = g.shape();
  const int ho = conv_out_dim(input.h, stride), wo = conv_out_dim(input.w, stride);
  if (s.n != input.n || s.h != ho || s.w != wo) {
    throw ShapeMismatch("conv3x3_adjoint: gradient " + to_string(s) + " does not match input " + to_string(input));
  }
  const long k = static_cast<long>(input.c) * 9;
  if (weight.size() != static_cast<std::size_t>(s.c) * k) throw ShapeMismatch("conv3x3_adjoint: weight shape");
  const long p = static_cast<long>(ho) * wo;
  const ConstMatrixMap w(weight.data(), s.c, k);
  Tensor x(input);
  if (static_cast<std::size_t>(p) >= kPerItemPlane) {
    const int band = band_rows(k, ho, wo);
    for (int b = 0; b < s.n; ++b) {
      for (int y0 = 0; y0 < ho; y0 += band) {
        const int y1 = std::min(ho, y0 + band);
        const long cols = static_cast<long>(y1 - y0) * wo;
        tl_col.resize(static_cast<std::size_t>(k) * cols);
        MatrixMap(tl_col.data(), k, cols).noalias() =
            w.transpose() * ConstStridedMap(g.item(b).data() + static_cast<long>(y0) * wo, s.c, cols,
                                            Eigen::OuterStride<>(p));
        col2im(tl_col, x, {b, 1, y0, y1}, stride, wo);
      }
    }
    return x;
  }
  const long cols = s.n * p;
  const auto gm = to_channel_major(g);
  tl_col.resize(static_cast<std::size_t>(k) * cols);
  MatrixMap(tl_col.data(), k, cols).noalias() = w.transpose() * ConstMatrixMap(gm.data(), s.c, cols);
  col2im(tl_col, x, {0, s.n, 0, ho}, stride, wo);
  return x;
}

void conv3x3_weight_grad(std::vector<real_t>& weight_grad, const Tensor& g, const Tensor& x, int stride) {
  check_stride(stride);
  const Shape& sx = x.shape();
  const Shape& sg = g.shape();
  const int ho = conv_out_dim(sx.h, stride), wo = conv_out_dim(sx.w, stride);
  if (sg.n != sx.n || sg.h != ho || sg.w != wo) throw ShapeMismatch("conv3x3_weight_grad: shapes");
  const long k = static_cast<long>(sx.c) * 9;
  if (weight_grad.size() != static_cast<std::size_t>(sg.c) * k) throw ShapeMismatch("conv3x3_weight_grad: weight");
  const long p = static_cast<long>(ho) * wo;
  MatrixMap wg(weight_grad.data(), sg.c, k);
  if (static_cast<std::size_t>(p) >= kPerItemPlane) {
    const int band = band_rows(k, ho, wo);
    for (int b = 0; b < sx.n; ++b) {
      for (int y0 = 0; y0 < ho; y0 += band) {
        const int y1 = std::min(ho, y0 + band);
        const long cols = static_cast<long>(y1 - y0) * wo;
        im2col(x, {b, 1, y0, y1}, stride, wo, tl_col);
        wg.noalias() += ConstStridedMap(g.item(b).data() + static_cast<long>(y0) * wo, sg.c, cols,
                                        Eigen::OuterStride<>(p)) *
                        ConstMatrixMap(tl_col.data(), k, cols).transpose();
      }
    }
    return;
  }
  const long cols = sx.n * p;
  im2col(x, {0, sx.n, 0, ho}, stride, wo, tl_col);
  const auto gm = to_channel_major(g);
  wg.noalias() += ConstMatrixMap(gm.data(), sg.c, cols) * ConstMatrixMap(tl_col.data(), k, cols).transpose();
}

Conv2d::Conv2d(const std::string& name, int in_channels, int out_channels, int stride)
    : weight(name + "/weight", {out_channels, in_channels, 3, 3}),
      bias(name + "/bias", {out_channels}),
      in_(in_channels), out_(out_channels), stride_(stride) {
  check_stride(stride);
  if (in_channels <= 0 || out_channels <= 0) throw InvalidInput("Conv2d: channel counts must be positive");
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.shape().c != in_) throw ShapeMismatch("Conv2d " + weight.name + ": input " + to_string(x.shape()));
  input_ = x;
  Tensor y = conv3x3(weight.value, x, out_, stride_);
  add_bias(y, bias);
  return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
  conv3x3_weight_grad(weight.grad, gy, input_, stride_);
  accumulate_bias_grad(bias, gy);
  return conv3x3_adjoint(weight.value, gy, input_.shape(), stride_);
}

Tensor Conv2d::tangent(const Tensor& dx) {
  if (dx.shape() != input_.shape()) throw ShapeMismatch("Conv2d::tangent: shape differs from primal input");
  tangent_input_ = dx;
  return conv3x3(weight.value, dx, out_, stride_);
}

Tensor Conv2d::backward_tangent(const Tensor& gdy) {
  conv3x3_weight_grad(weight.grad, gdy, tangent_input_, stride_);
  return conv3x3_adjoint(weight.value, gdy, tangent_input_.shape(), stride_);
}

ConvTranspose2d::ConvTranspose2d(const std::string& name, int in_channels, int out_channels)
    : weight(name + "/weight", {in_channels, out_channels, 3, 3}),
      bias(name + "/bias", {out_channels}),
      in_(in_channels), out_(out_channels) {
  if (in_channels <= 0 || out_channels <= 0) throw InvalidInput("ConvTranspose2d: channel counts must be positive");
}

Tensor ConvTranspose2d::forward(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.c != in_) throw ShapeMismatch("ConvTranspose2d " + weight.name + ": input " + to_string(s));
  input_ = x;
  Tensor y = conv3x3_adjoint(weight.value, x, Shape{s.n, out_, 2 * s.h, 2 * s.w}, 2);
  add_bias(y, bias);
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& gy) {
  accumulate_bias_grad(bias, gy);
  // y = A^T(W) x, so dL/dW = x (*) col(gy) and dL/dx = W col(gy).
  conv3x3_weight_grad(weight.grad, input_, gy, 2);
  return conv3x3(weight.value, gy, in_, 2);
}

Tensor LeakyRelu::forward(const Tensor& x) {
  Tensor y(x.shape());
  positive_.resize(x.size());
  const auto src = x.data();
  auto dst = y.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const bool pos = src[i] > 0;
    positive_[i] = pos;
    dst[i] = pos ? src[i] : slope_ * src[i];
  }
  return y;
}

Tensor LeakyRelu::backward(const Tensor& gy) const {
  if (gy.size() != positive_.size()) throw ShapeMismatch("LeakyRelu::backward: shape differs from forward");
  Tensor gx(gy.shape());
  const auto src = gy.data();
  auto dst = gx.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = positive_[i] ? src[i] : slope_ * src[i];
  return gx;
}

Tensor Tanh::forward(const Tensor& x) {
  output_ = Tensor(x.shape());
  const auto src = x.data();
  auto dst = output_.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::tanh(src[i]);
  return output_;
}

Tensor Tanh::backward(const Tensor& gy) const {
  if (gy.shape() != output_.shape()) throw ShapeMismatch("Tanh::backward: shape differs from forward");
  Tensor gx(gy.shape());
  const auto y = output_.data();
  const auto src = gy.data();
  auto dst = gx.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * (1 - y[i] * y[i]);
  return gx;
}

}  // namespace refinegan::nn
