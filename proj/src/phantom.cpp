#include <algorithm>
#include <cmath>
#include <numbers>

#include "refinegan/dataset.hpp"

namespace refinegan {

namespace {

struct Ellipse {
  double cy, cx, ry, rx, angle, value;

  bool contains(double y, double x) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const double dy = y - cy, dx = x - cx;
    const double u = (c * dx + s * dy) / rx;
    const double v = (-s * dx + c * dy) / ry;
    return u * u + v * v <= 1.0;
  }
};

}  // namespace

ComplexImage make_phantom(int size, std::uint64_t seed, bool with_phase) {
  if (size < 8) throw InvalidInput("make_phantom: size must be at least 8");
  Rng rng(seed);
  auto between = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };

  std::vector<Ellipse> shapes;
  const double ry = between(0.78, 0.9), rx = between(0.62, 0.75);
  const double tilt = between(-0.15, 0.15);
  const double cy = between(-0.05, 0.05), cx = between(-0.05, 0.05);
  // Skull rim, then brain tissue painted over its interior.
  shapes.push_back({cy, cx, ry, rx, tilt, between(0.85, 1.0)});
  shapes.push_back({cy, cx, ry * 0.9, rx * 0.9, tilt, between(0.35, 0.5)});
  const int blobs = 4 + static_cast<int>(rng.below(6));
  for (int i = 0; i < blobs; ++i) {
    const double r = std::sqrt(rng.uniform()) * 0.55;
    const double phi = between(0.0, 2.0 * std::numbers::pi);
    shapes.push_back({cy + r * ry * std::sin(phi), cx + r * rx * std::cos(phi), between(0.05, 0.3),
                      between(0.05, 0.25), between(0.0, std::numbers::pi), between(0.05, 0.75)});
  }
  const double gy = between(-0.1, 0.1), gx = between(-0.1, 0.1);
  const double p0 = between(-1.0, 1.0), p1 = between(-1.5, 1.5), p2 = between(-1.5, 1.5),
               p3 = between(-1.0, 1.0);

  ComplexImage img(size, size);
  for (int y = 0; y < size; ++y) {
    const double v = 2.0 * (y + 0.5) / size - 1.0;
    for (int x = 0; x < size; ++x) {
      const double u = 2.0 * (x + 0.5) / size - 1.0;
      double value = 0.0;
      for (const auto& e : shapes) {
        if (e.contains(v, u)) value = e.value;
      }
      if (value > 0.0) value *= 1.0 + gy * v + gx * u;
      value = std::clamp(value, 0.0, 1.0);
      if (with_phase) {
        const double phase = p0 + p1 * u + p2 * v + p3 * u * v;
        img(y, x) = std::polar(value, phase);
      } else {
        img(y, x) = cplx(value, 0.0);
      }
    }
  }
  return img;
}

GrayImage to_gray8(const ComplexImage& img) {
  GrayImage g;
  g.height = img.height();
  g.width = img.width();
  g.maxval = 255;
  g.pixels.resize(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double m = std::clamp(std::abs(img[i]), 0.0, 1.0);
    g.pixels[i] = static_cast<std::uint16_t>(std::lround(255.0 * m));
  }
  return g;
}

}  // namespace refinegan
