#include "refinegan/kspace.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace refinegan {

namespace {

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(fftw_alloc_complex(n)) {
    if (ptr == nullptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* ptr;
};

// Planning is not thread-safe in FFTW, execution with new-array functions is.
class PlanCache {
 public:
  fftw_plan get(int height, int width, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(height, width, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const auto n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    FftwBuffer in(n), out(n);
    fftw_plan plan = fftw_plan_dft_2d(height, width, in.ptr, out.ptr, sign, FFTW_ESTIMATE);
    if (plan == nullptr) throw Error("FFTW planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

// Centered unitary transform: fftshift(fft(ifftshift(x))) / sqrt(N).
std::vector<cplx> centered_dft(std::span<const cplx> src, int height, int width, int sign) {
  const auto n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  FftwBuffer in(n), out(n);
  const int hy = height / 2;
  const int hx = width / 2;
  for (int y = 0; y < height; ++y) {
    const int sy = (y + hy) % height;
    for (int x = 0; x < width; ++x) {
      const int sx = (x + hx) % width;
      const cplx v = src[static_cast<std::size_t>(sy) * width + sx];
      auto& dst = in.ptr[static_cast<std::size_t>(y) * width + x];
      dst[0] = v.real();
      dst[1] = v.imag();
    }
  }
  fftw_execute_dft(plan_cache().get(height, width, sign), in.ptr, out.ptr);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<cplx> result(n);
  for (int y = 0; y < height; ++y) {
    const int sy = (y + hy) % height;
    for (int x = 0; x < width; ++x) {
      const int sx = (x + hx) % width;
      const auto& v = out.ptr[static_cast<std::size_t>(y) * width + x];
      result[static_cast<std::size_t>(sy) * width + sx] = cplx(v[0], v[1]) * scale;
    }
  }
  return result;
}

void require_same_shape(const SamplingMask& mask, int height, int width, const char* what) {
  if (mask.height() != height || mask.width() != width) {
    throw ShapeMismatch(std::string(what) + ": mask shape does not match data shape");
  }
}

}  // namespace

std::string to_string(MaskPattern p) {
  switch (p) {
    case MaskPattern::radial: return "radial";
    case MaskPattern::cartesian: return "cartesian";
    case MaskPattern::random: return "random";
    case MaskPattern::spiral: return "spiral";
    case MaskPattern::full: return "full";
  }
  return "unknown";
}

MaskPattern parse_mask_pattern(const std::string& name) {
  for (auto p : {MaskPattern::radial, MaskPattern::cartesian, MaskPattern::random,
                 MaskPattern::spiral, MaskPattern::full}) {
    if (to_string(p) == name) return p;
  }
  throw InvalidInput("unknown mask pattern '" + name + "'");
}

SamplingMask::SamplingMask(int height, int width)
    : height_(height), width_(width),
      bits_(static_cast<std::size_t>(std::max(height, 0)) *
            static_cast<std::size_t>(std::max(width, 0))) {
  if (height <= 0 || width <= 0) throw InvalidInput("SamplingMask: dimensions must be positive");
}

SamplingMask::SamplingMask(int height, int width, std::vector<std::uint8_t> bits)
    : SamplingMask(height, width) {
  if (bits.size() != bits_.size()) throw ShapeMismatch("SamplingMask: bit count does not match shape");
  for (std::size_t i = 0; i < bits.size(); ++i) bits_[i] = bits[i] != 0 ? 1 : 0;
}

std::size_t SamplingMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

KSpaceMeasurement::KSpaceMeasurement(SamplingMask mask, KSpaceGrid values)
    : mask_(std::move(mask)), values_(std::move(values)) {
  require_same_shape(mask_, values_.height(), values_.width(), "KSpaceMeasurement");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!mask_[i] && values_[i] != cplx{}) {
      throw InvalidInput("KSpaceMeasurement: nonzero value at an unsampled bin");
    }
  }
}

bool all_finite(std::span<const cplx> data) {
  return std::all_of(data.begin(), data.end(), [](const cplx& v) {
    return std::isfinite(v.real()) && std::isfinite(v.imag());
  });
}

KSpaceGrid forward_fourier(const ComplexImage& img) {
  if (img.empty()) throw InvalidInput("forward_fourier: empty image");
  if (!all_finite(img.data())) throw InvalidInput("forward_fourier: non-finite input");
  return KSpaceGrid(img.height(), img.width(),
                    centered_dft(img.data(), img.height(), img.width(), FFTW_FORWARD));
}

ComplexImage inverse_fourier(const KSpaceGrid& grid) {
  if (grid.empty()) throw InvalidInput("inverse_fourier: empty grid");
  if (!all_finite(grid.data())) throw InvalidInput("inverse_fourier: non-finite input");
  return ComplexImage(grid.height(), grid.width(),
                      centered_dft(grid.data(), grid.height(), grid.width(), FFTW_BACKWARD));
}

KSpaceGrid apply_mask(const KSpaceGrid& grid, const SamplingMask& mask) {
  require_same_shape(mask, grid.height(), grid.width(), "apply_mask");
  KSpaceGrid out(grid.height(), grid.width());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (mask[i]) out[i] = grid[i];
  }
  return out;
}

KSpaceMeasurement undersample(const ComplexImage& img, const SamplingMask& mask) {
  require_same_shape(mask, img.height(), img.width(), "undersample");
  return KSpaceMeasurement(mask, apply_mask(forward_fourier(img), mask));
}

ComplexImage zero_fill(const KSpaceMeasurement& m) { return inverse_fourier(m.values()); }

ComplexImage data_consistency_project(const ComplexImage& img, const KSpaceMeasurement& m) {
  require_same_shape(m.mask(), img.height(), img.width(), "data_consistency_project");
  KSpaceGrid k = forward_fourier(img);
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (m.mask()[i]) k[i] = m.values()[i];
  }
  return inverse_fourier(k);
}

}  // namespace refinegan
