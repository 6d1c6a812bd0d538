#include "refinegan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

#include "refinegan/nn/checkpoint.hpp"

namespace refinegan {

using nn::real_t;
using nn::Tensor;

namespace {

template <typename T>
void check_keys(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& what) {
  if (!j.is_object()) throw InvalidInput(what + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw InvalidInput(what + ": unknown key '" + key + "'");
  }
}

std::string to_string(GeneratorInit g) { return g == GeneratorInit::he ? "he" : "zero"; }

GeneratorInit parse_init(const std::string& s) {
  if (s == "he") return GeneratorInit::he;
  if (s == "zero") return GeneratorInit::zero;
  throw InvalidInput("generator_init must be 'he' or 'zero', got '" + s + "'");
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidInput("epochs must be at least 1");
  // lr0 = 0 is accepted: it turns training into a dry run.
  if (!(lr0 >= 0.0) || !std::isfinite(lr0)) throw InvalidInput("lr0 must be finite and >= 0");
  if (batch_size < 1) throw InvalidInput("batch_size must be at least 1");
  if (critic_steps < 1) throw InvalidInput("critic_steps must be at least 1");
  if (checkpoint_every < 0) throw InvalidInput("checkpoint_every must be >= 0");
  if (!(mask_spec.nominal_rate > 0.0 && mask_spec.nominal_rate <= 1.0)) {
    throw InvalidInput("mask rate must be in (0, 1]");
  }
  loss_weights.validate();
  net_config.validate();
}

void to_json(nlohmann::json& j, const MaskSpec& m) {
  j = nlohmann::json{{"pattern", to_string(m.pattern)},
                     {"rate", m.nominal_rate},
                     {"height", m.height},
                     {"width", m.width},
                     {"seed", m.seed}};
}

void from_json(const nlohmann::json& j, MaskSpec& m) {
  check_keys<MaskSpec>(j, {"pattern", "rate", "height", "width", "seed"}, "mask");
  if (j.contains("pattern")) m.pattern = parse_mask_pattern(j.at("pattern").get<std::string>());
  if (j.contains("rate")) j.at("rate").get_to(m.nominal_rate);
  if (j.contains("height")) j.at("height").get_to(m.height);
  if (j.contains("width")) j.at("width").get_to(m.width);
  if (j.contains("seed")) j.at("seed").get_to(m.seed);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"lr0", c.lr0},
                     {"batch_size", c.batch_size},
                     {"critic_steps", c.critic_steps},
                     {"seed", c.seed},
                     {"mask", c.mask_spec},
                     {"loss", c.loss_weights},
                     {"network", c.net_config},
                     {"random_mask_per_batch", c.random_mask_per_batch},
                     {"augment", c.augment},
                     {"generator_init", to_string(c.generator_init)},
                     {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  check_keys<TrainConfig>(j,
                          {"epochs", "lr0", "batch_size", "critic_steps", "seed", "mask", "loss", "network",
                           "random_mask_per_batch", "augment", "generator_init", "checkpoint_every"},
                          "train config");
  try {
    if (j.contains("epochs")) j.at("epochs").get_to(c.epochs);
    if (j.contains("lr0")) j.at("lr0").get_to(c.lr0);
    if (j.contains("batch_size")) j.at("batch_size").get_to(c.batch_size);
    if (j.contains("critic_steps")) j.at("critic_steps").get_to(c.critic_steps);
    if (j.contains("seed")) j.at("seed").get_to(c.seed);
    if (j.contains("mask")) j.at("mask").get_to(c.mask_spec);
    if (j.contains("loss")) j.at("loss").get_to(c.loss_weights);
    if (j.contains("network")) j.at("network").get_to(c.net_config);
    if (j.contains("random_mask_per_batch")) j.at("random_mask_per_batch").get_to(c.random_mask_per_batch);
    if (j.contains("augment")) j.at("augment").get_to(c.augment);
    if (j.contains("generator_init")) c.generator_init = parse_init(j.at("generator_init").get<std::string>());
    if (j.contains("checkpoint_every")) j.at("checkpoint_every").get_to(c.checkpoint_every);
  } catch (const nlohmann::json::type_error& e) {
    throw InvalidInput(std::string("train config: ") + e.what());
  }
}

double learning_rate(const TrainConfig& c, int epoch) {
  return c.lr0 * (1.0 - static_cast<double>(epoch) / static_cast<double>(c.epochs));
}

Adam::Adam(std::span<nn::Parameter* const> params) {
  for (const nn::Parameter* p : params) {
    m_.emplace_back(p->size(), real_t{0});
    v_.emplace_back(p->size(), real_t{0});
  }
}

void Adam::update(std::span<nn::Parameter* const> params, double lr) {
  if (params.size() != m_.size()) throw ShapeMismatch("Adam: parameter list changed");
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps_));
  const auto b1 = static_cast<real_t>(beta1), b2 = static_cast<real_t>(beta2);
  const auto step = static_cast<real_t>(lr / c1);
  const auto inv_c2 = static_cast<real_t>(1.0 / c2);
  const auto e = static_cast<real_t>(eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    nn::Parameter& p = *params[k];
    real_t* m = m_[k].data();
    real_t* v = v_[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const real_t g = p.grad[i];
      m[i] = b1 * m[i] + (1 - b1) * g;
      v[i] = b2 * v[i] + (1 - b2) * g * g;
      p.value[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + e);
    }
  }
}

void write_history_csv(const std::vector<HistoryRow>& rows, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "epoch,step,adv_g,adv_d,freq,imag,total,lr\n";
  for (const auto& r : rows) {
    os << fmt::format("{},{},{},{},{},{},{},{}\n", r.epoch, r.step, r.loss.adv_g, r.loss.adv_d, r.loss.freq,
                      r.loss.imag, r.loss.total, r.lr);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != "epoch,step,adv_g,adv_d,freq,imag,total,lr") throw MalformedFile(path.string() + ": unexpected header");
  std::vector<HistoryRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    HistoryRow r;
    ls >> r.epoch >> r.step >> r.loss.adv_g >> r.loss.adv_d >> r.loss.freq >> r.loss.imag >> r.loss.total >> r.lr;
    if (!ls) throw MalformedFile(path.string() + ": bad row");
    rows.push_back(r);
  }
  return rows;
}

TrainState::TrainState(const TrainConfig& c, std::size_t dataset_size)
    : config(c),
      generator(c.net_config),
      critic(c.net_config),
      adam_g(generator.parameters()),
      adam_d(critic.parameters()),
      sampler(dataset_size, static_cast<std::size_t>(c.batch_size), derive_seed(c.seed, 1)),
      critic_sampler(dataset_size, static_cast<std::size_t>(c.batch_size), derive_seed(c.seed, 2)),
      gp_rng(derive_seed(c.seed, 3)),
      mask_rng(derive_seed(c.seed, 4)) {}

int TrainState::steps_per_epoch() const {
  return std::max(1, static_cast<int>(sampler.dataset_size()) / config.batch_size);
}

std::unique_ptr<TrainState> make_train_state(const TrainConfig& config, const Dataset& train_set) {
  config.validate();
  if (train_set.empty()) throw InvalidInput("train: empty dataset");
  config.net_config.validate_input(train_set.height(), train_set.width());
  auto state = std::make_unique<TrainState>(config, train_set.size());
  if (config.generator_init == GeneratorInit::zero) {
    nn::zero_parameters(state->generator.parameters());
  } else {
    nn::initialize_generator(state->generator, derive_seed(config.seed, 5));
  }
  nn::initialize(state->critic.parameters(), derive_seed(config.seed, 6));
  return state;
}

namespace {

// Dihedral transform `t` of an image: bit 0 transposes (square images
// only), bit 1 flips rows, bit 2 flips columns.
ComplexImage dihedral(const ComplexImage& img, int t) {
  if (t == 0) return img;
  const int h = img.height(), w = img.width();
  const bool transpose = (t & 1) && h == w;
  ComplexImage out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int sy = transpose ? x : y, sx = transpose ? y : x;
      if (t & 2) sy = h - 1 - sy;
      if (t & 4) sx = w - 1 - sx;
      out(y, x) = img(sy, sx);
    }
  }
  return out;
}

// Measurements and network inputs for every training item under the run's
// fixed mask, or built per batch when masks are redrawn or images augmented.
class BatchSource {
 public:
  BatchSource(const TrainConfig& config, const Dataset& data) : config_(config), data_(data) {
    MaskSpec spec = config.mask_spec;
    spec.height = data.height();
    spec.width = data.width();
    spec_ = spec;
    refs_ = nn::to_tensor(data.items);
    if (!config.random_mask_per_batch) {
      mask_ = generate_mask(spec);
      std::vector<ComplexImage> zf;
      for (const auto& item : data.items) {
        measurements_.push_back(undersample(item, mask_));
        zf.push_back(zero_fill(measurements_.back()));
      }
      zero_fill_ = nn::to_tensor(zf);
    }
  }

  std::vector<int> transforms(std::size_t n, Rng& rng) const {
    std::vector<int> t(n, 0);
    if (config_.augment) {
      for (int& v : t) v = static_cast<int>(rng.next() % 8);
    }
    return t;
  }

  // Zero-fills and measurements for the listed items.
  std::pair<Tensor, std::vector<KSpaceMeasurement>> measured(std::span<const std::size_t> idx,
                                                             std::span<const int> tf, Rng& mask_rng) const {
    std::vector<KSpaceMeasurement> ms;
    if (!config_.random_mask_per_batch && !config_.augment) {
      for (std::size_t i : idx) ms.push_back(measurements_[i]);
      return {nn::gather(zero_fill_, idx), std::move(ms)};
    }
    SamplingMask mask = mask_;
    if (config_.random_mask_per_batch) {
      MaskSpec spec = spec_;
      spec.seed = mask_rng.next();
      mask = generate_mask(spec);
    }
    std::vector<ComplexImage> zf;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      ms.push_back(undersample(dihedral(data_.items[idx[k]], tf[k]), mask));
      zf.push_back(zero_fill(ms.back()));
    }
    return {nn::to_tensor(zf), std::move(ms)};
  }

  Tensor references(std::span<const std::size_t> idx, std::span<const int> tf) const {
    if (!config_.augment) return nn::gather(refs_, idx);
    std::vector<ComplexImage> out;
    for (std::size_t k = 0; k < idx.size(); ++k) out.push_back(dihedral(data_.items[idx[k]], tf[k]));
    return nn::to_tensor(out);
  }

 private:
  const TrainConfig& config_;
  const Dataset& data_;
  MaskSpec spec_;
  SamplingMask mask_;
  Tensor refs_;
  Tensor zero_fill_;
  std::vector<KSpaceMeasurement> measurements_;
};

void require_finite(double v, const char* what, const TrainState& s) {
  if (!std::isfinite(v)) {
    throw Divergence(fmt::format("{} became {} at epoch {}, step {}", what, v, s.epoch + 1, s.step + 1));
  }
}

void require_finite(std::span<nn::Parameter* const> params, const TrainState& s) {
  for (const nn::Parameter* p : params) {
    for (real_t v : p->value) {
      if (!std::isfinite(v)) {
        throw Divergence(fmt::format("parameter {} became non-finite at epoch {}, step {}", p->name, s.epoch + 1,
                                     s.step + 1));
      }
    }
  }
}

}  // namespace

void train(TrainState& state, const Dataset& train_set, const TrainCallbacks& callbacks, int until_epoch) {
  const TrainConfig& config = state.config;
  if (until_epoch < 0) until_epoch = config.epochs;
  until_epoch = std::min(until_epoch, config.epochs);
  if (train_set.size() != state.sampler.dataset_size()) {
    throw InvalidInput("train: state was created for a dataset of a different size");
  }
  config.net_config.validate_input(train_set.height(), train_set.width());

  const BatchSource source(config, train_set);
  const auto g_params = state.generator.parameters();
  const auto d_params = state.critic.parameters();
  const int steps = state.steps_per_epoch();

  while (state.epoch < until_epoch) {
    const double lr = learning_rate(config, state.epoch);
    for (int s = 0; s < steps; ++s) {
      CriticLoss critic_loss;
      for (int c = 0; c < config.critic_steps; ++c) {
        const Batch cb = state.critic_sampler.next();
        const auto m_tf = source.transforms(cb.m_indices.size(), state.mask_rng);
        const auto s_tf = source.transforms(cb.s_indices.size(), state.mask_rng);
        const Tensor fake = state.generator.forward(source.measured(cb.m_indices, m_tf, state.mask_rng).first).back();
        if (!fake.all_finite()) throw Divergence(fmt::format("generator output became non-finite at epoch {}, step {}",
                                                             state.epoch + 1, state.step + 1));
        const Tensor real = source.references(cb.s_indices, s_tf);
        std::vector<double> eps(cb.s_indices.size());
        for (double& e : eps) e = state.gp_rng.uniform();
        critic_loss = critic_loss_and_grads(state.critic, real, fake, eps, config.loss_weights.gp_lambda,
                                            config.loss_weights.drift);
        require_finite(critic_loss.adv_d, "critic loss", state);
        state.adam_d.update(d_params, lr);
      }
      require_finite(d_params, state);

      const Batch b = state.sampler.next();
      GeneratorBatch gb;
      const auto m_tf = source.transforms(b.m_indices.size(), state.mask_rng);
      const auto s_tf = source.transforms(b.s_indices.size(), state.mask_rng);
      auto [m_input, ms] = source.measured(b.m_indices, m_tf, state.mask_rng);
      gb.m_input = std::move(m_input);
      gb.m = std::move(ms);
      gb.s_ref = source.references(b.s_indices, s_tf);
      gb.s_input = source.measured(b.s_indices, s_tf, state.mask_rng).first;

      LossBreakdown loss = generator_loss(state.generator, state.critic, gb, config.loss_weights, true);
      loss.adv_d = critic_loss.adv_d;
      require_finite(loss.total, "generator loss", state);
      state.adam_g.update(g_params, lr);
      require_finite(g_params, state);

      HistoryRow row{state.epoch + 1, state.step + 1, loss, lr};
      state.history.push_back(row);
      ++state.step;
      if (callbacks.on_step) callbacks.on_step(row);
    }
    ++state.epoch;
    if (callbacks.on_epoch_end) callbacks.on_epoch_end(state);
  }
}

std::unique_ptr<TrainState> train(const TrainConfig& config, const Dataset& train_set, const TrainCallbacks& callbacks) {
  auto state = make_train_state(config, train_set);
  train(*state, train_set, callbacks);
  return state;
}

namespace {

constexpr const char* kStateKind = "refinegan-train-state";

void append_moments(nn::Container& c, Adam& adam, std::span<nn::Parameter* const> params, const std::string& prefix) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    c.arrays.push_back({prefix + "m/" + params[k]->name, params[k]->shape, adam.first_moments()[k]});
    c.arrays.push_back({prefix + "v/" + params[k]->name, params[k]->shape, adam.second_moments()[k]});
  }
}

void assign_moments(const nn::Container& c, Adam& adam, std::span<nn::Parameter* const> params,
                    const std::string& prefix) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (auto [tag, dst] : {std::pair{"m/", &adam.first_moments()[k]}, std::pair{"v/", &adam.second_moments()[k]}}) {
      const nn::NamedArray* a = c.find(prefix + tag + params[k]->name);
      if (a == nullptr || a->shape != params[k]->shape) {
        throw ShapeMismatch("checkpoint: optimizer moment for " + params[k]->name + " missing or misshapen");
      }
      *dst = a->data;
    }
  }
}

nlohmann::json history_json(const std::vector<HistoryRow>& rows) {
  auto out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({r.epoch, r.step, r.loss.adv_g, r.loss.adv_d, r.loss.freq, r.loss.imag, r.loss.total, r.lr});
  }
  return out;
}

std::vector<HistoryRow> history_from_json(const nlohmann::json& j) {
  std::vector<HistoryRow> rows;
  for (const auto& e : j) {
    HistoryRow r;
    r.epoch = e.at(0).get<int>();
    r.step = e.at(1).get<std::int64_t>();
    r.loss = {e.at(2).get<double>(), e.at(3).get<double>(), e.at(4).get<double>(), e.at(5).get<double>(),
              e.at(6).get<double>()};
    r.lr = e.at(7).get<double>();
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

void save_checkpoint(const TrainState& const_state, const std::filesystem::path& path) {
  // Parameter accessors are non-const; nothing below mutates the state.
  auto& state = const_cast<TrainState&>(const_state);
  nn::Container c;
  c.meta = {{"kind", kStateKind},
            {"config", state.config},
            {"epoch", state.epoch},
            {"step", state.step},
            {"dataset_size", state.sampler.dataset_size()},
            {"adam_g_steps", state.adam_g.steps()},
            {"adam_d_steps", state.adam_d.steps()},
            {"sampler", state.sampler.save_state()},
            {"critic_sampler", state.critic_sampler.save_state()},
            {"gp_rng", state.gp_rng.save()},
            {"mask_rng", state.mask_rng.save()},
            {"history", history_json(state.history)}};
  const auto g = state.generator.parameters();
  const auto d = state.critic.parameters();
  nn::append_parameters(c, g, "G/");
  nn::append_parameters(c, d, "D/");
  append_moments(c, state.adam_g, g, "adam_g/");
  append_moments(c, state.adam_d, d, "adam_d/");

  // Write-then-rename so an interrupted save never leaves a torn file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  nn::write_container(tmp, c);
  std::filesystem::rename(tmp, path);
}

namespace {

TrainConfig config_from_container(const nn::Container& c, const std::filesystem::path& path) {
  try {
    if (c.meta.at("kind").get<std::string>() != kStateKind) throw MalformedFile(path.string() + ": not a training state");
    TrainConfig config = c.meta.at("config").get<TrainConfig>();
    config.validate();
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(path.string() + ": " + e.what());
  } catch (const InvalidInput& e) {
    throw MalformedFile(path.string() + ": stored config is invalid: " + e.what());
  }
}

}  // namespace

std::unique_ptr<TrainState> load_checkpoint(const std::filesystem::path& path, const nn::NetworkConfig* expected) {
  const nn::Container c = nn::read_container(path);
  const TrainConfig config = config_from_container(c, path);
  if (expected != nullptr && !(*expected == config.net_config)) {
    nlohmann::json want = *expected, have = config.net_config;
    throw ShapeMismatch("checkpoint network " + have.dump() + " does not match " + want.dump());
  }
  try {
    auto state = std::make_unique<TrainState>(config, c.meta.at("dataset_size").get<std::size_t>());
    state->epoch = c.meta.at("epoch").get<int>();
    state->step = c.meta.at("step").get<std::int64_t>();
    const auto g = state->generator.parameters();
    const auto d = state->critic.parameters();
    nn::assign_parameters(c, g, "G/");
    nn::assign_parameters(c, d, "D/");
    assign_moments(c, state->adam_g, g, "adam_g/");
    assign_moments(c, state->adam_d, d, "adam_d/");
    state->adam_g.set_steps(c.meta.at("adam_g_steps").get<std::int64_t>());
    state->adam_d.set_steps(c.meta.at("adam_d_steps").get<std::int64_t>());
    state->sampler.restore_state(c.meta.at("sampler").get<std::string>());
    state->critic_sampler.restore_state(c.meta.at("critic_sampler").get<std::string>());
    state->gp_rng.restore(c.meta.at("gp_rng").get<std::string>());
    state->mask_rng.restore(c.meta.at("mask_rng").get<std::string>());
    state->history = history_from_json(c.meta.at("history"));
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(path.string() + ": " + e.what());
  }
}

LoadedGenerator load_generator(const std::filesystem::path& path) {
  const nn::Container c = nn::read_container(path);
  LoadedGenerator out;
  out.config = config_from_container(c, path);
  out.generator = std::make_unique<nn::Generator>(out.config.net_config);
  nn::assign_parameters(c, out.generator->parameters(), "G/");
  out.id = path.filename().string() + "@epoch" + std::to_string(c.meta.value("epoch", 0));
  return out;
}

std::vector<std::vector<ComplexImage>> reconstruct_all(nn::Generator& generator,
                                                       std::span<const KSpaceMeasurement> measurements,
                                                       std::span<const Normalization> normalization) {
  if (measurements.size() != normalization.size()) throw InvalidInput("reconstruct: one normalization per measurement");
  const auto& cfg = generator.config();
  std::vector<std::vector<ComplexImage>> out(measurements.size());
  constexpr std::size_t kChunk = 8;
  for (std::size_t first = 0; first < measurements.size(); first += kChunk) {
    const std::size_t count = std::min(kChunk, measurements.size() - first);
    std::vector<ComplexImage> raw, scaled;
    for (std::size_t i = first; i < first + count; ++i) {
      const auto& m = measurements[i];
      cfg.validate_input(m.height(), m.width());
      raw.push_back(zero_fill(m));
      scaled.push_back(normalize(raw.back(), normalization[i]));
    }
    const Tensor input = nn::to_tensor(scaled);
    const std::vector<Tensor> checkpoints = generator.forward(input);
    for (std::size_t b = 0; b < count; ++b) {
      const double scale = normalization[first + b].scale;
      for (const Tensor& ck : checkpoints) {
        ComplexImage img = raw[b];
        const int h = img.height(), w = img.width();
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            const int ib = static_cast<int>(b);
            const double dr = double(ck.at(ib, 0, y, x)) - double(input.at(ib, 0, y, x));
            const double di = double(ck.at(ib, 1, y, x)) - double(input.at(ib, 1, y, x));
            if (dr != 0.0 || di != 0.0) img(y, x) += scale * cplx(dr, di);
          }
        }
        out[first + b].push_back(std::move(img));
      }
    }
  }
  return out;
}

ComplexImage reconstruct(nn::Generator& generator, const KSpaceMeasurement& m, const Normalization& n, int fold) {
  auto all = reconstruct_all(generator, std::span(&m, 1), std::span(&n, 1));
  auto& folds = all.front();
  if (fold < 0) return std::move(folds.back());
  if (fold >= static_cast<int>(folds.size())) throw InvalidInput("reconstruct: fold out of range");
  return std::move(folds[fold]);
}

Normalization estimate_normalization(const KSpaceMeasurement& m, bool complex_valued) {
  return fit_normalization(zero_fill(m), complex_valued);
}

}  // namespace refinegan
