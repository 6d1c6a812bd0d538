#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "refinegan/nn/tensor.hpp"

namespace refinegan::nn {

// Container layout: "RGANCKPT", u32 version, u32 reserved, u64 header length,
// a JSON header, then the arrays back to back as little-endian float32 in
// directory order. The header holds caller metadata under "meta" and the
// directory under "tensors" ([{name, shape, offset}], offset in floats).

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  std::vector<int> shape;
  std::vector<real_t> data;
};

struct Container {
  nlohmann::json meta;
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

/// Snapshot of parameter values, optionally with a name prefix.
void append_parameters(Container& c, std::span<Parameter* const> params, const std::string& prefix = "");
/// Loads values by name. Missing arrays or shape differences throw
/// ShapeMismatch.
void assign_parameters(const Container& c, std::span<Parameter* const> params, const std::string& prefix = "");

}  // namespace refinegan::nn
