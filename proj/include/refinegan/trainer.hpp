#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "refinegan/dataset.hpp"
#include "refinegan/losses.hpp"
#include "refinegan/masks.hpp"
#include "refinegan/nn/networks.hpp"

namespace refinegan {

enum class GeneratorInit { he, zero };

struct TrainConfig {
  int epochs = 500;
  double lr0 = 1e-4;
  int batch_size = 4;
  int critic_steps = 5;
  std::uint64_t seed = 0;
  MaskSpec mask_spec;
  LossWeights loss_weights;
  nn::NetworkConfig net_config;
  /// Draw a fresh mask (same pattern and rate) for every batch.
  bool random_mask_per_batch = false;
  /// Random flips and transposes of every training image as it is drawn.
  bool augment = false;
  GeneratorInit generator_init = GeneratorInit::he;
  /// Write a checkpoint every this many epochs; 0 only at the end.
  int checkpoint_every = 0;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const MaskSpec& m);
void from_json(const nlohmann::json& j, MaskSpec& m);
void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys throw InvalidInput.
void from_json(const nlohmann::json& j, TrainConfig& c);

/// lr0 * (1 - epoch / epochs), epoch counted from 0.
double learning_rate(const TrainConfig& c, int epoch);

class Adam {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit Adam(std::span<nn::Parameter* const> params);
  void update(std::span<nn::Parameter* const> params, double lr);

  std::int64_t steps() const { return steps_; }
  std::vector<std::vector<nn::real_t>>& first_moments() { return m_; }
  std::vector<std::vector<nn::real_t>>& second_moments() { return v_; }
  void set_steps(std::int64_t s) { steps_ = s; }

 private:
  std::int64_t steps_ = 0;
  std::vector<std::vector<nn::real_t>> m_, v_;
};

struct HistoryRow {
  int epoch = 0;  // 1-based
  std::int64_t step = 0;  // 1-based, global
  LossBreakdown loss;
  double lr = 0.0;
};

void write_history_csv(const std::vector<HistoryRow>& rows, const std::filesystem::path& path);
std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path);

/// Everything needed to continue training bit-compatibly.
struct TrainState {
  TrainState(const TrainConfig& config, std::size_t dataset_size);

  TrainConfig config;
  int epoch = 0;  // completed epochs
  std::int64_t step = 0;  // completed generator steps
  nn::Generator generator;
  nn::Critic critic;
  Adam adam_g;
  Adam adam_d;
  BatchSampler sampler;         // generator steps
  BatchSampler critic_sampler;  // critic steps
  Rng gp_rng;                   // interpolation weights
  Rng mask_rng;                 // per-batch masks and augmentation
  std::vector<HistoryRow> history;

  int steps_per_epoch() const;
};

struct TrainCallbacks {
  std::function<void(const TrainState&)> on_epoch_end;
  std::function<void(const HistoryRow&)> on_step;
};

/// Fresh state with initialized weights.
std::unique_ptr<TrainState> make_train_state(const TrainConfig& config, const Dataset& train_set);

/// Trains until `until_epoch` (default: config.epochs) epochs are complete.
/// Throws Divergence when a loss or weight turns non-finite.
void train(TrainState& state, const Dataset& train_set, const TrainCallbacks& callbacks = {}, int until_epoch = -1);
std::unique_ptr<TrainState> train(const TrainConfig& config, const Dataset& train_set,
                                  const TrainCallbacks& callbacks = {});

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
/// Throws MalformedFile for corrupt or foreign files and ShapeMismatch when
/// `expected` is given and differs from the stored network configuration.
std::unique_ptr<TrainState> load_checkpoint(const std::filesystem::path& path,
                                            const nn::NetworkConfig* expected = nullptr);

/// Generator only, for inference.
struct LoadedGenerator {
  TrainConfig config;
  std::unique_ptr<nn::Generator> generator;
  std::string id;  // file name plus epoch
};
LoadedGenerator load_generator(const std::filesystem::path& path);

/// Final checkpoint (or fold `fold`, 0-based) for a measurement in raw
/// units. The zero-filling image is normalized with `n`, refined, and the
/// scaled residual added back, so a zero residual returns zero_fill(m)
/// exactly.
ComplexImage reconstruct(nn::Generator& generator, const KSpaceMeasurement& m, const Normalization& n, int fold = -1);
/// Every fold's checkpoint for a batch of measurements.
std::vector<std::vector<ComplexImage>> reconstruct_all(nn::Generator& generator,
                                                       std::span<const KSpaceMeasurement> measurements,
                                                       std::span<const Normalization> normalization);

/// Normalization estimated from the zero-filling image, for measurements
/// that arrive without a reference.
Normalization estimate_normalization(const KSpaceMeasurement& m, bool complex_valued);

}  // namespace refinegan
