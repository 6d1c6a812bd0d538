#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace refinegan {

/// Single-channel integer image as stored on disk.
struct GrayImage {
  int height = 0;
  int width = 0;
  int maxval = 255;
  std::vector<std::uint16_t> pixels;  // row-major

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Binary portable graymap (P5), 8- or 16-bit.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

/// 8- or 16-bit grayscale PNG.
GrayImage read_png(const std::filesystem::path& path);
void write_png(const GrayImage& img, const std::filesystem::path& path);

/// Dispatches on the file signature.
GrayImage read_gray_image(const std::filesystem::path& path);

}  // namespace refinegan
