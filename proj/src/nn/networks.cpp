#include "refinegan/nn/networks.hpp"

#include <algorithm>
#include <cmath>

#include "refinegan/rng.hpp"

namespace refinegan::nn {

void NetworkConfig::validate() const {
  if (levels < 1) throw InvalidInput("NetworkConfig: levels must be at least 1");
  if (base_filters < 2 || base_filters % 2 != 0) throw InvalidInput("NetworkConfig: base_filters must be even");
  if (residual_blocks_per_level < 0) throw InvalidInput("NetworkConfig: residual_blocks_per_level must be >= 0");
  if (folds < 1) throw InvalidInput("NetworkConfig: folds must be at least 1");
  if (input_channels < 1) throw InvalidInput("NetworkConfig: input_channels must be positive");
  if (!(negative_slope >= 0.0 && negative_slope < 1.0)) throw InvalidInput("NetworkConfig: negative_slope in [0, 1)");
}

void NetworkConfig::validate_input(int height, int width) const {
  const int unit = 1 << levels;
  if (height % unit != 0 || width % unit != 0) {
    throw ShapeMismatch("image " + std::to_string(height) + "x" + std::to_string(width) +
                        " is not divisible by 2^levels = " + std::to_string(unit));
  }
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = nlohmann::json{{"levels", c.levels},
                     {"base_filters", c.base_filters},
                     {"residual_blocks_per_level", c.residual_blocks_per_level},
                     {"folds", c.folds},
                     {"input_channels", c.input_channels},
                     {"negative_slope", c.negative_slope}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
  static const std::vector<std::string> known = {"levels", "base_filters", "residual_blocks_per_level",
                                                 "folds", "input_channels", "negative_slope"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InvalidInput("NetworkConfig: unknown key '" + key + "'");
    }
  }
  if (j.contains("levels")) j.at("levels").get_to(c.levels);
  if (j.contains("base_filters")) j.at("base_filters").get_to(c.base_filters);
  if (j.contains("residual_blocks_per_level")) j.at("residual_blocks_per_level").get_to(c.residual_blocks_per_level);
  if (j.contains("folds")) j.at("folds").get_to(c.folds);
  if (j.contains("input_channels")) j.at("input_channels").get_to(c.input_channels);
  if (j.contains("negative_slope")) j.at("negative_slope").get_to(c.negative_slope);
}

namespace {

std::vector<ResidualBlock> make_res_stack(const NetworkConfig& c, const std::string& prefix,
                                                       int level, int channels) {
  std::vector<ResidualBlock> blocks;
  for (int r = 0; r < c.residual_blocks_per_level; ++r) {
    blocks.emplace_back(prefix + std::to_string(level) + "/res" + std::to_string(r), channels,
                        static_cast<real_t>(c.negative_slope));
  }
  return blocks;
}

void append(std::vector<Parameter*>& out, std::vector<Parameter*> more) {
  out.insert(out.end(), more.begin(), more.end());
}

}  // namespace

GeneratorFold::GeneratorFold(const NetworkConfig& config, const std::string& prefix)
    : config_(config),
      output_(prefix + "/out/conv", config.base_filters, config.input_channels, 1) {
  config.validate();
  const auto slope = static_cast<real_t>(config.negative_slope);
  for (int l = 0; l < config.levels; ++l) {
    const int in = l == 0 ? config.input_channels : config.filters_at(l - 1);
    encoders_.emplace_back(prefix + "/enc" + std::to_string(l), in, config.filters_at(l), slope);
    encoder_res_.push_back(make_res_stack(config, prefix + "/enc", l, config.filters_at(l)));
  }
  for (int l = 0; l < config.levels; ++l) {
    const int out = l == 0 ? config.base_filters : config.filters_at(l - 1);
    decoders_.emplace_back(prefix + "/dec" + std::to_string(l), config.filters_at(l), out, slope);
    decoder_res_.push_back(make_res_stack(config, prefix + "/dec", l, out));
  }
}

Tensor GeneratorFold::forward(const Tensor& x) {
  if (x.shape().c != config_.input_channels) throw ShapeMismatch("generator: input " + to_string(x.shape()));
  config_.validate_input(x.shape().h, x.shape().w);
  std::vector<Tensor> features(static_cast<std::size_t>(config_.levels));
  Tensor h = x;
  for (int l = 0; l < config_.levels; ++l) {
    h = encoders_[l].forward(h);
    for (auto& block : encoder_res_[l]) h = block.forward(h);
    features[l] = h;
  }
  bottleneck_shape_ = h.shape();
  Tensor d = std::move(h);
  for (int l = config_.levels - 1; l >= 0; --l) {
    d = decoders_[l].forward(d);
    if (l > 0) d += features[l - 1];
    for (auto& block : decoder_res_[l]) d = block.forward(d);
  }
  Tensor y = squash_.forward(output_.forward(d));
  y += x;
  return y;
}

Tensor GeneratorFold::backward(const Tensor& g_out) {
  Tensor g = output_.backward(squash_.backward(g_out));
  std::vector<Tensor> g_features(static_cast<std::size_t>(config_.levels));
  for (int l = 0; l < config_.levels; ++l) {
    for (auto it = decoder_res_[l].rbegin(); it != decoder_res_[l].rend(); ++it) g = it->backward(g);
    if (l > 0) g_features[l - 1] = g;
    g = decoders_[l].backward(g);
  }
  for (int l = config_.levels - 1; l >= 0; --l) {
    for (auto it = encoder_res_[l].rbegin(); it != encoder_res_[l].rend(); ++it) g = it->backward(g);
    g = encoders_[l].backward(g);
    if (l > 0) g += g_features[l - 1];
  }
  g += g_out;
  return g;
}

std::vector<Parameter*> GeneratorFold::parameters() {
  std::vector<Parameter*> out;
  for (int l = 0; l < config_.levels; ++l) {
    append(out, encoders_[l].parameters());
    for (auto& block : encoder_res_[l]) append(out, block.parameters());
  }
  for (int l = config_.levels - 1; l >= 0; --l) {
    append(out, decoders_[l].parameters());
    for (auto& block : decoder_res_[l]) append(out, block.parameters());
  }
  out.push_back(&output_.weight);
  out.push_back(&output_.bias);
  return out;
}

Generator::Generator(const NetworkConfig& config) : config_(config) {
  config.validate();
  for (int k = 0; k < config.folds; ++k) folds_.emplace_back(config, "fold" + std::to_string(k));
}

std::vector<Tensor> Generator::forward(const Tensor& s0) {
  input_shape_ = s0.shape();
  std::vector<Tensor> checkpoints;
  checkpoints.reserve(folds_.size());
  const Tensor* input = &s0;
  for (auto& fold : folds_) {
    checkpoints.push_back(fold.forward(*input));
    input = &checkpoints.back();
  }
  return checkpoints;
}

Tensor Generator::backward(std::span<const Tensor> g_checkpoints) {
  if (g_checkpoints.size() != folds_.size()) {
    throw InvalidInput("Generator::backward: expected one gradient per fold");
  }
  Tensor g(input_shape_);
  for (int k = static_cast<int>(folds_.size()) - 1; k >= 0; --k) {
    if (!g_checkpoints[k].empty()) g += g_checkpoints[k];
    g = folds_[k].backward(g);
  }
  return g;
}

std::vector<Parameter*> Generator::parameters() {
  std::vector<Parameter*> out;
  for (auto& fold : folds_) append(out, fold.parameters());
  return out;
}

std::vector<Parameter*> Generator::fold_parameters(int fold) { return folds_.at(static_cast<std::size_t>(fold)).parameters(); }

Critic::Critic(const NetworkConfig& config) : config_(config) {
  config.validate();
  const auto slope = static_cast<real_t>(config.negative_slope);
  for (int l = 0; l < config.levels; ++l) {
    const int in = l == 0 ? config.input_channels : config.filters_at(l - 1);
    encoders_.emplace_back("critic/enc" + std::to_string(l), in, config.filters_at(l), slope);
    res_.push_back(make_res_stack(config, "critic/enc", l, config.filters_at(l)));
  }
}

std::vector<real_t> Critic::forward(const Tensor& x) {
  if (x.shape().c != config_.input_channels) throw ShapeMismatch("critic: input " + to_string(x.shape()));
  config_.validate_input(x.shape().h, x.shape().w);
  Tensor h = x;
  for (int l = 0; l < config_.levels; ++l) {
    h = encoders_[l].forward(h);
    for (auto& block : res_[l]) h = block.forward(h);
  }
  feature_shape_ = h.shape();
  std::vector<real_t> scores(static_cast<std::size_t>(h.shape().n));
  for (int b = 0; b < h.shape().n; ++b) {
    double acc = 0.0;
    for (real_t v : h.item(b)) acc += v;
    scores[b] = static_cast<real_t>(acc / static_cast<double>(h.shape().item_count()));
  }
  return scores;
}

Tensor Critic::pool_backward(std::span<const real_t> g) const {
  if (g.size() != static_cast<std::size_t>(feature_shape_.n)) throw ShapeMismatch("critic: one gradient per item");
  Tensor gh(feature_shape_);
  const real_t inv = real_t(1) / static_cast<real_t>(feature_shape_.item_count());
  for (int b = 0; b < feature_shape_.n; ++b) {
    for (real_t& v : gh.item(b)) v = g[b] * inv;
  }
  return gh;
}

Tensor Critic::backward(std::span<const real_t> g_scores) {
  Tensor g = pool_backward(g_scores);
  for (int l = config_.levels - 1; l >= 0; --l) {
    for (auto it = res_[l].rbegin(); it != res_[l].rend(); ++it) g = it->backward(g);
    g = encoders_[l].backward(g);
  }
  return g;
}

std::vector<real_t> Critic::tangent(const Tensor& dx) {
  Tensor h = dx;
  for (int l = 0; l < config_.levels; ++l) {
    h = encoders_[l].tangent(h);
    for (auto& block : res_[l]) h = block.tangent(h);
  }
  std::vector<real_t> out(static_cast<std::size_t>(h.shape().n));
  for (int b = 0; b < h.shape().n; ++b) {
    double acc = 0.0;
    for (real_t v : h.item(b)) acc += v;
    out[b] = static_cast<real_t>(acc / static_cast<double>(h.shape().item_count()));
  }
  return out;
}

Tensor Critic::backward_tangent(std::span<const real_t> g_tangent) {
  Tensor g = pool_backward(g_tangent);
  for (int l = config_.levels - 1; l >= 0; --l) {
    for (auto it = res_[l].rbegin(); it != res_[l].rend(); ++it) g = it->backward_tangent(g);
    g = encoders_[l].backward_tangent(g);
  }
  return g;
}

std::vector<Parameter*> Critic::parameters() {
  std::vector<Parameter*> out;
  for (int l = 0; l < config_.levels; ++l) {
    append(out, encoders_[l].parameters());
    for (auto& block : res_[l]) append(out, block.parameters());
  }
  return out;
}

namespace {

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void initialize(std::span<Parameter* const> params, std::uint64_t seed) {
  for (Parameter* p : params) {
    if (ends_with(p->name, "/bias")) {
      std::fill(p->value.begin(), p->value.end(), real_t{0});
      continue;
    }
    // Regular kernels are (out, in, 3, 3); transposed ones (in, out, 3, 3)
    // where a stride-2 output pixel sees about a quarter of the taps.
    double fan_in = static_cast<double>(p->shape.at(1)) * 9.0;
    if (ends_with(p->name, "convT/weight")) fan_in = static_cast<double>(p->shape.at(0)) * 9.0 / 4.0;
    const double stddev = std::sqrt(2.0 / fan_in);
    Rng rng(derive_seed(seed, name_hash(p->name)));
    for (real_t& v : p->value) v = static_cast<real_t>(stddev * rng.normal());
  }
}

void initialize_generator(Generator& generator, std::uint64_t seed) {
  const auto params = generator.parameters();
  initialize(params, seed);
  for (Parameter* p : params) {
    if (ends_with(p->name, "/out/conv/weight")) std::fill(p->value.begin(), p->value.end(), real_t{0});
  }
}

void zero_parameters(std::span<Parameter* const> params) {
  for (Parameter* p : params) std::fill(p->value.begin(), p->value.end(), real_t{0});
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

void copy_parameters(std::span<Parameter* const> from, std::span<Parameter* const> to) {
  if (from.size() != to.size()) throw ShapeMismatch("copy_parameters: parameter counts differ");
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i]->name != to[i]->name || from[i]->shape != to[i]->shape) {
      throw ShapeMismatch("copy_parameters: " + from[i]->name + " does not match " + to[i]->name);
    }
    to[i]->value = from[i]->value;
  }
}

}  // namespace refinegan::nn
