#include "refinegan/image_io.hpp"

#include <png.h>

#include <bit>
#include <cctype>
#include <cstring>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "refinegan/error.hpp"

namespace refinegan {

namespace {

// Reads one whitespace/comment-delimited header token of a Netpbm file.
std::string pgm_token(std::istream& is, const std::string& what) {
  std::string tok;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw MalformedFile(what + ": truncated header");
  return tok;
}

int pgm_int(std::istream& is, const std::string& what) {
  const std::string tok = pgm_token(is, what);
  try {
    std::size_t used = 0;
    int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw MalformedFile(what + ": bad header field '" + tok + "'");
  }
}

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  const std::string what = path.string();
  if (pgm_token(is, what) != "P5") throw MalformedFile(what + ": not a binary PGM (P5)");
  GrayImage img;
  img.width = pgm_int(is, what);
  img.height = pgm_int(is, what);
  img.maxval = pgm_int(is, what);
  if (img.maxval > 65535) throw MalformedFile(what + ": maxval out of range");
  // pgm_token consumed exactly one whitespace byte after maxval.
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  const std::size_t bytes_per = img.maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes_per);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size()) throw MalformedFile(what + ": truncated pixel data");
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    img.pixels[i] = bytes_per == 2 ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1])
                                   : raw[i];
    if (img.pixels[i] > img.maxval) throw MalformedFile(what + ": pixel exceeds maxval");
  }
  return img;
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << "P5\n" << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
  for (std::uint16_t p : img.pixels) {
    if (img.maxval > 255) os.put(static_cast<char>(p >> 8));
    os.put(static_cast<char>(p & 0xff));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

GrayImage read_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  const std::string what = path.string();
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("libpng initialisation failed");
  }
  GrayImage img;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw MalformedFile(what + ": invalid PNG");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw MalformedFile(what + ": only grayscale PNG is supported");
  }
  if (depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.maxval = depth == 16 ? 65535 : 255;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * static_cast<std::size_t>(img.height));
  rows.resize(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[y] = buffer.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      std::uint16_t v;
      if (depth == 16) {
        std::memcpy(&v, rows[y] + 2 * x, 2);
      } else {
        v = rows[y][x];
      }
      img.pixels[static_cast<std::size_t>(y) * img.width + x] = v;
    }
  }
  return img;
}

void write_png(const GrayImage& img, const std::filesystem::path& path) {
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed: " + path.string());
  }
  const int depth = img.maxval > 255 ? 16 : 8;
  png_init_io(png, file.get());
  png_set_IHDR(png, info, img.width, img.height, depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * (depth / 8));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::uint16_t v = img.pixels[static_cast<std::size_t>(y) * img.width + x];
      if (depth == 16) {
        row[2 * x] = static_cast<unsigned char>(v >> 8);
        row[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
      } else {
        row[x] = static_cast<unsigned char>(v);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

GrayImage read_gray_image(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char sig[8] = {};
  is.read(sig, sizeof sig);
  if (is.gcount() >= 2 && sig[0] == 'P' && sig[1] == '5') return read_pgm(path);
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (is.gcount() == 8 && std::memcmp(sig, png_sig, 8) == 0) return read_png(path);
  throw MalformedFile(path.string() + ": unrecognised image format (expected P5 PGM or PNG)");
}

}  // namespace refinegan
