#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "refinegan/kspace.hpp"

namespace refinegan::nn {

#if defined(REFINEGAN_DOUBLE_PRECISION) && REFINEGAN_DOUBLE_PRECISION
using real_t = double;
#else
using real_t = float;
#endif

struct Shape {
  int n = 0, c = 0, h = 0, w = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  std::size_t item_count() const {
    return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Dense (batch, channels, height, width) activations.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, real_t fill = 0) : shape_(shape), data_(shape.count(), fill) {}
  Tensor(Shape shape, std::vector<real_t> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<real_t> data() { return data_; }
  std::span<const real_t> data() const { return data_; }
  std::span<real_t> item(int b) { return std::span<real_t>(data_).subspan(b * shape_.item_count(), shape_.item_count()); }
  std::span<const real_t> item(int b) const {
    return std::span<const real_t>(data_).subspan(b * shape_.item_count(), shape_.item_count());
  }

  real_t& at(int b, int c, int y, int x) { return data_[offset(b, c, y, x)]; }
  real_t at(int b, int c, int y, int x) const { return data_[offset(b, c, y, x)]; }
  real_t& operator[](std::size_t i) { return data_[i]; }
  real_t operator[](std::size_t i) const { return data_[i]; }

  void fill(real_t v);
  Tensor& operator+=(const Tensor& o);
  Tensor& operator*=(real_t s);

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t offset(int b, int c, int y, int x) const {
    return ((static_cast<std::size_t>(b) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_;
  std::vector<real_t> data_;
};

Tensor operator+(Tensor a, const Tensor& b);

/// Stacks complex images into a (N, 2, H, W) tensor: channel 0 real, 1 imaginary.
Tensor to_tensor(std::span<const ComplexImage> images);
Tensor to_tensor(const ComplexImage& image);
ComplexImage to_image(const Tensor& t, int item);

/// Copies the listed items of `t` into a new batch tensor.
Tensor gather(const Tensor& t, std::span<const std::size_t> items);
/// Concatenates along the batch axis.
Tensor concat(const Tensor& a, const Tensor& b);
/// Items [first, first + count).
Tensor slice(const Tensor& t, int first, int count);

/// A named learnable array with its accumulated gradient.
struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<real_t> value;
  std::vector<real_t> grad;

  Parameter() = default;
  Parameter(std::string name, std::vector<int> shape);

  std::size_t size() const { return value.size(); }
  void zero_grad();
};

}  // namespace refinegan::nn
