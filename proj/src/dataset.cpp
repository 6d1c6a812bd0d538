#include "refinegan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace refinegan {

namespace fs = std::filesystem;

Normalization fit_normalization(const ComplexImage& raw, bool complex_valued) {
  Normalization n;
  if (complex_valued) {
    double peak = 0.0;
    for (const cplx& v : raw.data()) peak = std::max(peak, std::abs(v));
    n.scale = peak > 0.0 ? peak : 1.0;
    n.offset = 0.0;
  } else {
    double lo = raw[0].real(), hi = raw[0].real();
    for (const cplx& v : raw.data()) {
      lo = std::min(lo, v.real());
      hi = std::max(hi, v.real());
    }
    n.offset = 0.5 * (hi + lo);
    n.scale = hi > lo ? 0.5 * (hi - lo) : 1.0;
  }
  return n;
}

ComplexImage normalize(const ComplexImage& raw, const Normalization& n) {
  ComplexImage out(raw.height(), raw.width());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - n.offset) / n.scale;
  return out;
}

ComplexImage denormalize(const ComplexImage& normalized, const Normalization& n) {
  ComplexImage out(normalized.height(), normalized.width());
  for (std::size_t i = 0; i < normalized.size(); ++i) out[i] = normalized[i] * n.scale + n.offset;
  return out;
}

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

void Dataset::push_back(std::string id, const ComplexImage& raw) {
  if (!items.empty() && !items.front().same_shape(raw)) {
    throw ShapeMismatch("dataset: item '" + id + "' has a different shape");
  }
  const Normalization n = fit_normalization(raw, complex_valued);
  ids.push_back(std::move(id));
  items.push_back(normalize(raw, n));
  normalization.push_back(n);
}

ComplexImage to_complex(const GrayImage& img) {
  ComplexImage out(img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out[i] = cplx(img.pixels[i], 0.0);
  return out;
}

namespace {

std::vector<fs::path> sorted_files(const fs::path& dir, std::initializer_list<const char*> extensions) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    for (const char* e : extensions) {
      if (ext == e) files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

}  // namespace

std::pair<Dataset, Dataset> load_image_dir(const fs::path& dir, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidInput("load_image_dir: split fraction must lie in (0, 1)");
  }
  const auto files = sorted_files(dir, {".png", ".pgm"});
  if (files.size() < 2) throw InvalidInput("load_image_dir: need at least two images in " + dir.string());

  std::vector<std::size_t> order(files.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const auto n = static_cast<long>(files.size());
  const long n_train = std::clamp(std::lround(train_fraction * static_cast<double>(n)), 1L, n - 1);

  Dataset train, test;
  train.split = Split::train;
  test.split = Split::test;
  int height = 0, width = 0;
  for (long k = 0; k < n; ++k) {
    const fs::path& file = files[order[static_cast<std::size_t>(k)]];
    const GrayImage img = read_gray_image(file);
    if (k == 0) {
      height = img.height;
      width = img.width;
    } else if (img.height != height || img.width != width) {
      throw ShapeMismatch("load_image_dir: " + file.filename().string() + " differs in shape");
    }
    (k < n_train ? train : test).push_back(file.filename().string(), to_complex(img));
  }
  return {std::move(train), std::move(test)};
}

Dataset load_image_files(const fs::path& dir, Split split) {
  const auto files = sorted_files(dir, {".png", ".pgm"});
  if (files.empty()) throw InvalidInput("load_image_files: no images in " + dir.string());
  Dataset d;
  d.split = split;
  for (const auto& file : files) {
    const GrayImage img = read_gray_image(file);
    if (!d.empty() && (img.height != d.height() || img.width != d.width())) {
      throw ShapeMismatch("load_image_files: " + file.filename().string() + " differs in shape");
    }
    d.push_back(file.filename().string(), to_complex(img));
  }
  return d;
}

Dataset load_kspace_dataset(const fs::path& dir, Split split) {
  const auto files = sorted_files(dir, {".ksp"});
  if (files.empty()) throw InvalidInput("load_kspace_dataset: no .ksp files in " + dir.string());
  Dataset d;
  d.split = split;
  d.complex_valued = true;
  for (const auto& file : files) {
    const KSpaceGrid grid = read_kspace_grid(file);
    if (!d.items.empty() && !d.items.front().same_shape(grid)) {
      throw ShapeMismatch("load_kspace_dataset: " + file.filename().string() + " differs in shape");
    }
    d.push_back(file.filename().string(), inverse_fourier(grid));
  }
  return d;
}

void write_split_manifest(const Dataset& train, const Dataset& test, const fs::path& path) {
  nlohmann::json j = {{"train", train.ids}, {"test", test.ids}};
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

std::uint64_t dataset_hash(const Dataset& d) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& item : d.items) {
    for (const cplx& v : item.data()) {
      const float re = static_cast<float>(v.real()), im = static_cast<float>(v.imag());
      mix(&re, sizeof re);
      mix(&im, sizeof im);
    }
  }
  return h;
}

std::size_t BatchSampler::Stream::draw() {
  if (position == order.size()) {
    rng.shuffle(order);
    position = 0;
  }
  return order[position++];
}

BatchSampler::BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
    : dataset_size_(dataset_size), batch_size_(batch_size),
      m_stream_{Rng(derive_seed(seed, 1)), {}, 0}, s_stream_{Rng(derive_seed(seed, 2)), {}, 0} {
  if (dataset_size == 0) throw InvalidInput("BatchSampler: empty dataset");
  if (batch_size == 0) throw InvalidInput("BatchSampler: batch size must be positive");
  for (Stream* s : {&m_stream_, &s_stream_}) {
    s->order.resize(dataset_size);
    for (std::size_t i = 0; i < dataset_size; ++i) s->order[i] = i;
    s->position = dataset_size;  // forces a shuffle on first draw
  }
}

Batch BatchSampler::next() {
  Batch b;
  b.m_indices.reserve(batch_size_);
  b.s_indices.reserve(batch_size_);
  for (std::size_t i = 0; i < batch_size_; ++i) {
    b.m_indices.push_back(m_stream_.draw());
    b.s_indices.push_back(s_stream_.draw());
  }
  return b;
}

std::string BatchSampler::save_state() const {
  nlohmann::json j;
  j["dataset_size"] = dataset_size_;
  j["batch_size"] = batch_size_;
  for (const auto& [name, s] : {std::pair{"m", &m_stream_}, std::pair{"s", &s_stream_}}) {
    j[name] = {{"rng", s->rng.save()}, {"order", s->order}, {"position", s->position}};
  }
  return j.dump();
}

void BatchSampler::restore_state(const std::string& state) {
  try {
    const auto j = nlohmann::json::parse(state);
    if (j.at("dataset_size").get<std::size_t>() != dataset_size_ ||
        j.at("batch_size").get<std::size_t>() != batch_size_) {
      throw MalformedFile("BatchSampler: saved state belongs to a different dataset or batch size");
    }
    for (auto& [name, s] : {std::pair{"m", &m_stream_}, std::pair{"s", &s_stream_}}) {
      s->rng.restore(j.at(name).at("rng").get<std::string>());
      s->order = j.at(name).at("order").get<std::vector<std::size_t>>();
      s->position = j.at(name).at("position").get<std::size_t>();
      if (s->order.size() != dataset_size_ || s->position > dataset_size_) {
        throw MalformedFile("BatchSampler: inconsistent saved stream");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(std::string("BatchSampler: ") + e.what());
  }
}

Batch next_batch(BatchSampler& sampler, const Dataset& dataset) {
  if (dataset.empty()) throw InvalidInput("next_batch: empty dataset");
  if (dataset.size() != sampler.dataset_size()) {
    throw InvalidInput("next_batch: sampler was built for a different dataset size");
  }
  return sampler.next();
}

}  // namespace refinegan
