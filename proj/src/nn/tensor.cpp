#include "refinegan/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace refinegan::nn {

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + ", " + std::to_string(s.c) + ", " + std::to_string(s.h) + ", " +
         std::to_string(s.w) + ")";
}

Tensor::Tensor(Shape shape, std::vector<real_t> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.count()) throw ShapeMismatch("Tensor: data size does not match " + to_string(shape_));
}

void Tensor::fill(real_t v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& o) {
  if (o.shape_ != shape_) throw ShapeMismatch("Tensor +=: " + to_string(shape_) + " vs " + to_string(o.shape_));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(real_t s) {
  for (real_t& v : data_) v *= s;
  return *this;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](real_t v) { return std::isfinite(v); });
}

Tensor operator+(Tensor a, const Tensor& b) {
  a += b;
  return a;
}

Tensor to_tensor(std::span<const ComplexImage> images) {
  if (images.empty()) throw InvalidInput("to_tensor: no images");
  const int h = images[0].height(), w = images[0].width();
  Tensor t(Shape{static_cast<int>(images.size()), 2, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t b = 0; b < images.size(); ++b) {
    if (!images[b].same_shape(h, w)) throw ShapeMismatch("to_tensor: images differ in shape");
    auto item = t.item(static_cast<int>(b));
    for (std::size_t i = 0; i < plane; ++i) {
      item[i] = static_cast<real_t>(images[b][i].real());
      item[plane + i] = static_cast<real_t>(images[b][i].imag());
    }
  }
  return t;
}

Tensor to_tensor(const ComplexImage& image) { return to_tensor(std::span<const ComplexImage>(&image, 1)); }

ComplexImage to_image(const Tensor& t, int item) {
  const Shape& s = t.shape();
  if (s.c != 2) throw ShapeMismatch("to_image: expected 2 channels, got " + to_string(s));
  if (item < 0 || item >= s.n) throw InvalidInput("to_image: item out of range");
  ComplexImage img(s.h, s.w);
  const auto data = t.item(item);
  const std::size_t plane = s.plane();
  for (std::size_t i = 0; i < plane; ++i) img[i] = cplx(data[i], data[plane + i]);
  return img;
}

Tensor gather(const Tensor& t, std::span<const std::size_t> items) {
  Shape s = t.shape();
  s.n = static_cast<int>(items.size());
  Tensor out(s);
  for (std::size_t b = 0; b < items.size(); ++b) {
    if (items[b] >= static_cast<std::size_t>(t.shape().n)) throw InvalidInput("gather: index out of range");
    auto src = t.item(static_cast<int>(items[b]));
    std::copy(src.begin(), src.end(), out.item(static_cast<int>(b)).begin());
  }
  return out;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  Shape sa = a.shape(), sb = b.shape();
  if (sa.c != sb.c || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeMismatch("concat: " + to_string(sa) + " vs " + to_string(sb));
  }
  Shape s = sa;
  s.n = sa.n + sb.n;
  std::vector<real_t> data;
  data.reserve(s.count());
  data.insert(data.end(), a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return Tensor(s, std::move(data));
}

Tensor slice(const Tensor& t, int first, int count) {
  Shape s = t.shape();
  if (first < 0 || count < 0 || first + count > s.n) throw InvalidInput("slice: range out of bounds");
  s.n = count;
  const auto begin = t.data().begin() + static_cast<std::ptrdiff_t>(first * t.shape().item_count());
  return Tensor(s, std::vector<real_t>(begin, begin + static_cast<std::ptrdiff_t>(s.count())));
}

Parameter::Parameter(std::string n, std::vector<int> shp) : name(std::move(n)), shape(std::move(shp)) {
  const std::size_t count =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, [](std::size_t a, int d) { return a * d; });
  value.assign(count, 0);
  grad.assign(count, 0);
}

void Parameter::zero_grad() { std::fill(grad.begin(), grad.end(), real_t{0}); }

}  // namespace refinegan::nn
