#include <array>
#include <cstring>
#include <fstream>

#include "binary_io.hpp"
#include "refinegan/kspace.hpp"
#include "refinegan/masks.hpp"

namespace refinegan {

namespace {

constexpr std::array<char, 8> kMagic = {'R', 'G', 'A', 'N', 'K', 'S', 'P', '\0'};

}  // namespace

void write_kspace_grid(const KSpaceGrid& grid, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(kMagic.data(), kMagic.size());
  detail::put_u32(os, kKSpaceFormatVersion);
  detail::put_u32(os, 0);
  detail::put_u32(os, static_cast<std::uint32_t>(grid.height()));
  detail::put_u32(os, static_cast<std::uint32_t>(grid.width()));
  for (const cplx& v : grid.data()) {
    detail::put_f32(os, static_cast<float>(v.real()));
    detail::put_f32(os, static_cast<float>(v.imag()));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

KSpaceGrid read_kspace_grid(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  const std::string what = path.string();
  std::array<char, 8> magic{};
  detail::read_exact(is, magic.data(), magic.size(), what);
  if (magic != kMagic) throw MalformedFile(what + ": bad magic, not a k-space file");
  const auto version = detail::get_u32(is, what);
  if (version != kKSpaceFormatVersion) {
    throw MalformedFile(what + ": unsupported format version " + std::to_string(version));
  }
  detail::get_u32(is, what);
  const auto height = detail::get_u32(is, what);
  const auto width = detail::get_u32(is, what);
  if (height == 0 || width == 0 || height > (1u << 16) || width > (1u << 16)) {
    throw MalformedFile(what + ": implausible grid shape");
  }
  KSpaceGrid grid(static_cast<int>(height), static_cast<int>(width));
  for (auto& v : grid.data()) {
    const float re = detail::get_f32(is, what);
    const float im = detail::get_f32(is, what);
    v = cplx(re, im);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw MalformedFile(what + ": trailing bytes");
  if (!all_finite(grid.data())) throw MalformedFile(what + ": non-finite sample");
  return grid;
}

std::filesystem::path measurement_mask_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".mask.pgm");
}

void save_measurement(const KSpaceMeasurement& m, const std::filesystem::path& path) {
  write_kspace_grid(m.values(), path);
  save_mask(m.mask(), measurement_mask_path(path));
}

KSpaceMeasurement load_measurement(const std::filesystem::path& path) {
  KSpaceGrid values = read_kspace_grid(path);
  SamplingMask mask = load_mask(measurement_mask_path(path));
  if (mask.height() != values.height() || mask.width() != values.width()) {
    throw ShapeMismatch(path.string() + ": mask shape does not match k-space shape");
  }
  try {
    return KSpaceMeasurement(std::move(mask), std::move(values));
  } catch (const InvalidInput& e) {
    throw MalformedFile(path.string() + ": " + e.what());
  }
}

}  // namespace refinegan
