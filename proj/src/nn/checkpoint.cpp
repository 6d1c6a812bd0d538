#include "refinegan/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <numeric>

#include "../binary_io.hpp"
#include "refinegan/error.hpp"

namespace refinegan::nn {

namespace {

constexpr char kMagic[8] = {'R', 'G', 'A', 'N', 'C', 'K', 'P', 'T'};

std::size_t shape_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw MalformedFile("checkpoint: negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

const NamedArray* Container::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  nlohmann::json header;
  header["meta"] = c.meta;
  header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& a : c.arrays) {
    if (shape_count(a.shape) != a.data.size()) throw ShapeMismatch("checkpoint: array " + a.name + " size/shape");
    header["tensors"].push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}});
    offset += a.data.size();
  }
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(kMagic, sizeof kMagic);
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u32(os, 0);
  detail::put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : c.arrays) {
    for (real_t v : a.data) detail::put_f32(os, static_cast<float>(v));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  const std::string what = "checkpoint " + path.string();
  char magic[8];
  detail::read_exact(is, magic, sizeof magic, what);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw MalformedFile(what + ": bad magic");
  const std::uint32_t version = detail::get_u32(is, what);
  if (version != kCheckpointVersion) {
    throw MalformedFile(what + ": unsupported version " + std::to_string(version));
  }
  detail::get_u32(is, what);
  const std::uint64_t header_len = detail::get_u64(is, what);
  if (header_len > (1ULL << 30)) throw MalformedFile(what + ": implausible header length");
  std::string text(header_len, '\0');
  detail::read_exact(is, text.data(), text.size(), what);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(what + ": corrupt header: " + e.what());
  }

  Container c;
  try {
    c.meta = header.at("meta");
    std::size_t expected_offset = 0;
    for (const auto& entry : header.at("tensors")) {
      NamedArray a;
      a.name = entry.at("name").get<std::string>();
      a.shape = entry.at("shape").get<std::vector<int>>();
      if (entry.at("offset").get<std::size_t>() != expected_offset) throw MalformedFile(what + ": bad offsets");
      const std::size_t n = shape_count(a.shape);
      a.data.resize(n);
      expected_offset += n;
      c.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(what + ": corrupt header: " + e.what());
  }
  for (auto& a : c.arrays) {
    for (real_t& v : a.data) v = static_cast<real_t>(detail::get_f32(is, what));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw MalformedFile(what + ": trailing bytes");
  return c;
}

void append_parameters(Container& c, std::span<Parameter* const> params, const std::string& prefix) {
  for (const Parameter* p : params) c.arrays.push_back({prefix + p->name, p->shape, p->value});
}

void assign_parameters(const Container& c, std::span<Parameter* const> params, const std::string& prefix) {
  // Validate everything before touching any parameter.
  std::vector<const NamedArray*> sources;
  for (const Parameter* p : params) {
    const NamedArray* a = c.find(prefix + p->name);
    if (a == nullptr) throw ShapeMismatch("checkpoint has no array " + prefix + p->name);
    if (a->shape != p->shape) throw ShapeMismatch("checkpoint array " + a->name + " has a different shape");
    sources.push_back(a);
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = sources[i]->data;
}

}  // namespace refinegan::nn
