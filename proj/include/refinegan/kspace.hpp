#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "refinegan/error.hpp"

namespace refinegan {

using cplx = std::complex<double>;

struct ImageDomain {};
struct FrequencyDomain {};

/// Row-major 2D grid of complex samples. The tag keeps image-domain and
/// k-space data from being mixed up at compile time.
template <typename Domain>
class ComplexGrid {
 public:
  ComplexGrid() = default;
  ComplexGrid(int height, int width)
      : height_(checked_dim(height)), width_(checked_dim(width)),
        data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {}
  ComplexGrid(int height, int width, std::vector<cplx> data)
      : height_(checked_dim(height)), width_(checked_dim(width)), data_(std::move(data)) {
    if (data_.size() != size()) throw ShapeMismatch("ComplexGrid: data size does not match shape");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  bool empty() const { return data_.empty(); }

  cplx& operator()(int y, int x) { return data_[index(y, x)]; }
  const cplx& operator()(int y, int x) const { return data_[index(y, x)]; }
  cplx& operator[](std::size_t i) { return data_[i]; }
  const cplx& operator[](std::size_t i) const { return data_[i]; }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  bool same_shape(int h, int w) const { return h == height_ && w == width_; }
  template <typename Other>
  bool same_shape(const ComplexGrid<Other>& o) const {
    return same_shape(o.height(), o.width());
  }

  friend bool operator==(const ComplexGrid&, const ComplexGrid&) = default;

 private:
  static int checked_dim(int d) {
    if (d <= 0) throw InvalidInput("ComplexGrid: dimensions must be positive");
    return d;
  }
  std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<cplx> data_;
};

using ComplexImage = ComplexGrid<ImageDomain>;
/// Centered spectrum: the DC coefficient sits at (height/2, width/2).
using KSpaceGrid = ComplexGrid<FrequencyDomain>;

enum class MaskPattern { radial, cartesian, random, spiral, full };

std::string to_string(MaskPattern p);
MaskPattern parse_mask_pattern(const std::string& name);

/// Binary selection R of acquired k-space bins.
class SamplingMask {
 public:
  SamplingMask() = default;
  /// All-false mask.
  SamplingMask(int height, int width);
  SamplingMask(int height, int width, std::vector<std::uint8_t> bits);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return bits_.size(); }

  bool operator()(int y, int x) const { return bits_[index(y, x)] != 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(int y, int x, bool v = true) { bits_[index(y, x)] = v ? 1 : 0; }
  void set(std::size_t i, bool v = true) { bits_[i] = v ? 1 : 0; }

  std::span<const std::uint8_t> bits() const { return bits_; }
  std::size_t count() const;

  int center_y() const { return height_ / 2; }
  int center_x() const { return width_ / 2; }
  bool dc_sampled() const { return (*this)(center_y(), center_x()); }

  double nominal_rate = 1.0;
  MaskPattern pattern = MaskPattern::full;
  std::uint64_t seed = 0;

  /// Compares the bits and shape only; metadata is ignored.
  bool same_bits(const SamplingMask& o) const {
    return height_ == o.height_ && width_ == o.width_ && bits_ == o.bits_;
  }

 private:
  std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Undersampled data m = R F s, stored densely. Values are exactly zero
/// wherever the mask is false.
class KSpaceMeasurement {
 public:
  KSpaceMeasurement() = default;
  KSpaceMeasurement(SamplingMask mask, KSpaceGrid values);

  const SamplingMask& mask() const { return mask_; }
  const KSpaceGrid& values() const { return values_; }
  int height() const { return values_.height(); }
  int width() const { return values_.width(); }

 private:
  SamplingMask mask_;
  KSpaceGrid values_;
};

/// Centered, orthonormal 2D DFT.
KSpaceGrid forward_fourier(const ComplexImage& img);
/// Exact inverse (and adjoint) of forward_fourier.
ComplexImage inverse_fourier(const KSpaceGrid& grid);

/// m = R F(img).
KSpaceMeasurement undersample(const ComplexImage& img, const SamplingMask& mask);
/// s0 = F^H R^H m.
ComplexImage zero_fill(const KSpaceMeasurement& m);

/// Replaces the k-space of img at sampled bins by the measured values.
ComplexImage data_consistency_project(const ComplexImage& img, const KSpaceMeasurement& m);

/// Zeroes every bin where the mask is false.
KSpaceGrid apply_mask(const KSpaceGrid& grid, const SamplingMask& mask);

bool all_finite(std::span<const cplx> data);

// Binary k-space container: 16-byte header ("RGANKSP" NUL, u32 version,
// u32 reserved), u32 height, u32 width, then interleaved re/im float32, all
// little-endian.
inline constexpr std::uint32_t kKSpaceFormatVersion = 1;

void write_kspace_grid(const KSpaceGrid& grid, const std::filesystem::path& path);
KSpaceGrid read_kspace_grid(const std::filesystem::path& path);

/// Writes `path` (values) plus the mask as `<path>.mask.pgm` with its sidecar.
void save_measurement(const KSpaceMeasurement& m, const std::filesystem::path& path);
KSpaceMeasurement load_measurement(const std::filesystem::path& path);
std::filesystem::path measurement_mask_path(const std::filesystem::path& path);

}  // namespace refinegan
