#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "refinegan/image_io.hpp"
#include "refinegan/kspace.hpp"
#include "refinegan/rng.hpp"

namespace refinegan {

/// Affine intensity map x' = (x - offset) / scale. The offset acts on the
/// real channel only.
struct Normalization {
  double scale = 1.0;
  double offset = 0.0;

  friend bool operator==(const Normalization&, const Normalization&) = default;
};

/// Magnitude data: map [min, max] of the real channel onto [-1, 1].
/// Complex data: divide by the largest magnitude.
Normalization fit_normalization(const ComplexImage& raw, bool complex_valued);
ComplexImage normalize(const ComplexImage& raw, const Normalization& n);
ComplexImage denormalize(const ComplexImage& normalized, const Normalization& n);

enum class Split { train, test };

std::string to_string(Split s);

struct Dataset {
  Split split = Split::train;
  bool complex_valued = false;
  std::vector<std::string> ids;  // source file names
  std::vector<ComplexImage> items;  // normalized
  std::vector<Normalization> normalization;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  int height() const { return items.empty() ? 0 : items.front().height(); }
  int width() const { return items.empty() ? 0 : items.front().width(); }

  void push_back(std::string id, const ComplexImage& raw);
};

/// Grayscale image converted to a complex image with zero imaginary part.
ComplexImage to_complex(const GrayImage& img);

/// Loads every .png/.pgm in `dir`, sorted by file name, then splits with a
/// seeded shuffle. Returns (train, test).
std::pair<Dataset, Dataset> load_image_dir(const std::filesystem::path& dir, double train_fraction,
                                           std::uint64_t seed);

/// Every .png/.pgm in `dir`, in file-name order, without splitting.
Dataset load_image_files(const std::filesystem::path& dir, Split split = Split::train);

/// Loads every fully sampled .ksp grid in `dir` in file-name order; items are
/// the normalized inverse transforms.
Dataset load_kspace_dataset(const std::filesystem::path& dir, Split split = Split::train);

/// Writes {"train": [...], "test": [...]} listing file names per split.
void write_split_manifest(const Dataset& train, const Dataset& test,
                          const std::filesystem::path& path);

/// FNV-1a over the float32-rounded normalized samples.
std::uint64_t dataset_hash(const Dataset& d);

struct Batch {
  std::vector<std::size_t> m_indices;  // measurement stream
  std::vector<std::size_t> s_indices;  // reference-image stream
};

/// Two independent shuffled index streams over one dataset. Each stream
/// reshuffles when exhausted.
class BatchSampler {
 public:
  BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);

  Batch next();

  std::size_t batch_size() const { return batch_size_; }
  std::size_t dataset_size() const { return dataset_size_; }

  std::string save_state() const;
  void restore_state(const std::string& state);

  friend bool operator==(const BatchSampler&, const BatchSampler&) = default;

 private:
  struct Stream {
    Rng rng;
    std::vector<std::size_t> order;
    std::size_t position = 0;

    std::size_t draw();
    friend bool operator==(const Stream&, const Stream&) = default;
  };

  std::size_t dataset_size_;
  std::size_t batch_size_;
  Stream m_stream_;
  Stream s_stream_;
};

Batch next_batch(BatchSampler& sampler, const Dataset& dataset);

/// Synthetic head-like phantom: nested ellipses with random contrast and a
/// smooth intensity bias. Magnitude in [0, 1]; with_phase adds a smooth
/// phase map.
ComplexImage make_phantom(int size, std::uint64_t seed, bool with_phase = false);

/// 8-bit quantized magnitude of a phantom (or any image with range [0, 1]).
GrayImage to_gray8(const ComplexImage& img);

}  // namespace refinegan
