// refinegan: mask generation, data preparation, training, reconstruction,
// evaluation and plotting from the command line.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numerical divergence.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "refinegan/dataset.hpp"
#include "refinegan/evaluate.hpp"
#include "refinegan/image_io.hpp"
#include "refinegan/plot.hpp"
#include "refinegan/trainer.hpp"

namespace fs = std::filesystem;
using namespace refinegan;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

/// Bad flags or configuration, as opposed to bad data.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json versions() {
  return {{"refinegan", kVersion},
          {"compiler", __VERSION__},
          {"fmt", FMT_VERSION},
          {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                        NLOHMANN_JSON_VERSION_PATCH)},
#ifdef REFINEGAN_DOUBLE_PRECISION
          {"precision", "f64"}};
#else
          {"precision", "f32"}};
#endif
}

bool has_kspace_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".ksp") return true;
  }
  return false;
}

Dataset load_any(const fs::path& dir, Split split) {
  return has_kspace_files(dir) ? load_kspace_dataset(dir, split) : load_image_files(dir, split);
}

// Magnitude in raw units as a 16-bit image. `peak` maps to 65535 unless the
// data came from 8/16-bit images (`maxval` > 0), which keep their scale.
GrayImage to_gray(const ComplexImage& img, int maxval, double peak) {
  GrayImage g{img.height(), img.width(), maxval > 0 ? maxval : 65535, {}};
  g.pixels.resize(img.data().size());
  const double scale = maxval > 0 ? 1.0 : (peak > 0 ? 65535.0 / peak : 1.0);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    const double v = std::clamp(std::round(std::abs(img[i]) * scale), 0.0, double(g.maxval));
    g.pixels[i] = static_cast<std::uint16_t>(v);
  }
  return g;
}

void write_image(const ComplexImage& img, const fs::path& path, int maxval, double peak) {
  if (path.extension() == ".ksp") {
    write_kspace_grid(forward_fourier(img), path);
  } else if (path.extension() == ".pgm") {
    write_pgm(to_gray(img, maxval, peak), path);
  } else {
    write_png(to_gray(img, maxval, peak), path);
  }
}

MaskPattern pattern_arg(const std::string& s) {
  try {
    return parse_mask_pattern(s);
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
}

// ---------------------------------------------------------------- gen-masks

struct GenMasksArgs {
  std::string pattern = "radial";
  double rate = 0.3;
  int size = 256, height = 0, width = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen_masks(const GenMasksArgs& a) {
  MaskSpec spec{pattern_arg(a.pattern), a.rate, a.height > 0 ? a.height : a.size, a.width > 0 ? a.width : a.size,
                a.seed};
  SamplingMask mask;
  try {
    mask = generate_mask(spec);
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
  const fs::path out = a.out.empty() ? fs::path(fmt::format("mask_{}_{:.0f}.pgm", a.pattern, a.rate * 100)) : fs::path(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_mask(mask, out);
  fmt::print("{}: {}x{} {} nominal {:.4f} achieved {:.4f} ({} of {} bins), DC {}\n", out.string(), mask.height(),
             mask.width(), a.pattern, a.rate, mask_rate(mask), mask.count(), mask.size(),
             mask.dc_sampled() ? "sampled" : "missing");
  return 0;
}

// ---------------------------------------------------------------- prepare

struct PrepareArgs {
  std::string input;
  int phantoms = 0;
  int size = 64;
  bool complex_valued = false;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_prepare(const PrepareArgs& a) {
  if (a.input.empty() == (a.phantoms == 0)) throw UsageError("prepare: give exactly one of --input or --phantoms");
  if (!(a.train_fraction > 0 && a.train_fraction < 1)) throw UsageError("prepare: --train-fraction must be in (0, 1)");
  const fs::path out = a.out;
  fs::create_directories(out / "train");
  fs::create_directories(out / "test");

  json manifest = {{"created", utc_now()}, {"versions", versions()}, {"seed", a.seed}};
  Dataset train, test;
  if (!a.input.empty()) {
    std::tie(train, test) = load_image_dir(a.input, a.train_fraction, a.seed);
    for (const auto* d : {&train, &test}) {
      const fs::path sub = out / (d == &train ? "train" : "test");
      for (const auto& id : d->ids) fs::copy_file(fs::path(a.input) / id, sub / id, fs::copy_options::overwrite_existing);
    }
    manifest["source"] = fs::absolute(a.input).string();
  } else {
    if (a.phantoms < 2) throw UsageError("prepare: need at least two phantoms");
    const int n_train = std::clamp(static_cast<int>(std::lround(a.train_fraction * a.phantoms)), 1, a.phantoms - 1);
    train.split = Split::train;
    test.split = Split::test;
    test.complex_valued = train.complex_valued = a.complex_valued;
    for (int i = 0; i < a.phantoms; ++i) {
      // Phantom seeds are consecutive from the run seed.
      const ComplexImage img = make_phantom(a.size, a.seed + static_cast<std::uint64_t>(i), a.complex_valued);
      const bool is_train = i < n_train;
      const std::string id = fmt::format("phantom_{:04d}.{}", i, a.complex_valued ? "ksp" : "png");
      const fs::path path = out / (is_train ? "train" : "test") / id;
      if (a.complex_valued) {
        write_kspace_grid(forward_fourier(img), path);
      } else {
        write_png(to_gray(img, 0, 1.0), path);
      }
    }
    // Reload so hashes describe the stored (quantized) data.
    train = load_any(out / "train", Split::train);
    test = load_any(out / "test", Split::test);
    manifest["source"] = fmt::format("{} synthetic phantoms, {}x{}{}", a.phantoms, a.size, a.size,
                                     a.complex_valued ? ", complex" : "");
  }
  write_split_manifest(train, test, out / "split.json");
  manifest["train"] = {{"count", train.size()}, {"hash", hex64(dataset_hash(train))}};
  manifest["test"] = {{"count", test.size()}, {"hash", hex64(dataset_hash(test))}};
  manifest["shape"] = {train.height(), train.width()};
  write_json(manifest, out / "manifest.json");
  fmt::print("{}: {} train, {} test, {}x{}\n", out.string(), train.size(), test.size(), train.height(), train.width());
  return 0;
}

// ---------------------------------------------------------------- train

struct RunConfig {
  fs::path train_dir, test_dir, output_dir;
  TrainConfig train;
};

json to_json(const RunConfig& r) {
  return {{"data", {{"train_dir", r.train_dir.string()}, {"test_dir", r.test_dir.string()}}},
          {"output_dir", r.output_dir.string()},
          {"train", r.train}};
}

RunConfig parse_run_config(const json& j) {
  RunConfig r;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key != "data" && key != "output_dir" && key != "train") throw UsageError("config: unknown key '" + key + "'");
    }
    if (j.contains("data")) {
      for (const auto& [key, value] : j["data"].items()) {
        if (key != "train_dir" && key != "test_dir") throw UsageError("config: unknown key 'data." + key + "'");
      }
      r.train_dir = j["data"].value("train_dir", "");
      r.test_dir = j["data"].value("test_dir", "");
    }
    r.output_dir = j.value("output_dir", "");
    if (j.contains("train")) r.train = j["train"].get<TrainConfig>();
  } catch (const InvalidInput& e) {
    throw UsageError(std::string("config: ") + e.what());
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  return r;
}

struct TrainArgs {
  std::string config, resume;
  std::string train_dir, test_dir, out;
  std::optional<int> epochs, batch_size, critic_steps, checkpoint_every;
  std::optional<double> lr0, rate;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> pattern;
  bool quiet = false;
};

std::string epoch_name(int epoch) { return fmt::format("epoch_{:04d}.ckpt", epoch); }

void write_reports(nn::Generator& gen, const Dataset& test, const SamplingMask& mask, const std::string& id,
                   const fs::path& dir, bool data_consistency = false) {
  fs::create_directories(dir);
  EvaluateOptions opt;
  opt.checkpoint_id = id;
  opt.data_consistency = data_consistency;
  auto folds = evaluate_folds(gen, test, mask, opt);
  const auto zf = evaluate_zero_fill(test, mask);
  zf.write_csv(dir / "zero_fill.csv");
  zf.write_summary(dir / "zero_fill.json");
  std::vector<std::string> labels{"zero-fill"};
  std::vector<EvaluationReport> reports{zf};
  for (std::size_t k = 0; k < folds.size(); ++k) {
    folds[k].write_csv(dir / fmt::format("fold{}.csv", k + 1));
    folds[k].write_summary(dir / fmt::format("fold{}.json", k + 1));
    labels.push_back(fmt::format("fold {}", k + 1));
    reports.push_back(folds[k]);
  }
  plot_reports(labels, reports, dir / "plots");
  fmt::print("  zero-fill  PSNR {:7.3f}  SSIM {:.4f}  NRMSE {:.4f}\n", zf.psnr.mean, zf.ssim.mean, zf.nrmse.mean);
  for (std::size_t k = 0; k < folds.size(); ++k) {
    fmt::print("  fold {}     PSNR {:7.3f}  SSIM {:.4f}  NRMSE {:.4f}\n", k + 1, folds[k].psnr.mean,
               folds[k].ssim.mean, folds[k].nrmse.mean);
  }
}

int cmd_train(const TrainArgs& a) {
  const auto t0 = Clock::now();
  RunConfig rc;
  std::unique_ptr<TrainState> state;
  if (!a.resume.empty()) {
    state = load_checkpoint(a.resume);
    rc.train = state->config;
    // The run directory is two levels above checkpoints/epoch_N.ckpt.
    const fs::path run_dir = fs::absolute(a.resume).parent_path().parent_path();
    if (fs::exists(run_dir / "config.json")) rc = parse_run_config(read_json(run_dir / "config.json"));
    rc.train = state->config;
    if (rc.output_dir.empty()) rc.output_dir = run_dir;
  } else if (!a.config.empty()) {
    rc = parse_run_config(read_json(a.config));
  }
  if (!a.train_dir.empty()) rc.train_dir = a.train_dir;
  if (!a.test_dir.empty()) rc.test_dir = a.test_dir;
  if (!a.out.empty()) rc.output_dir = a.out;
  if (a.epochs) rc.train.epochs = *a.epochs;
  if (!a.resume.empty()) {
    // Only the epoch budget may change on resume; the rest is fixed by the
    // checkpoint.
    if (a.batch_size || a.critic_steps || a.lr0 || a.rate || a.seed || a.pattern) {
      throw UsageError("train --resume: only --epochs, directories and --out may be given");
    }
  } else {
    if (a.batch_size) rc.train.batch_size = *a.batch_size;
    if (a.critic_steps) rc.train.critic_steps = *a.critic_steps;
    if (a.checkpoint_every) rc.train.checkpoint_every = *a.checkpoint_every;
    if (a.lr0) rc.train.lr0 = *a.lr0;
    if (a.seed) rc.train.seed = *a.seed;
    if (a.rate) rc.train.mask_spec.nominal_rate = *a.rate;
    if (a.pattern) rc.train.mask_spec.pattern = pattern_arg(*a.pattern);
  }
  if (rc.train_dir.empty()) throw UsageError("train: no training directory (config data.train_dir or --train-dir)");
  if (rc.output_dir.empty()) throw UsageError("train: no output directory (config output_dir or --out)");

  const Dataset train_set = load_any(rc.train_dir, Split::train);
  std::optional<Dataset> test_set;
  if (!rc.test_dir.empty()) test_set = load_any(rc.test_dir, Split::test);
  // The mask always matches the data.
  rc.train.mask_spec.height = train_set.height();
  rc.train.mask_spec.width = train_set.width();
  try {
    rc.train.validate();
    rc.train.net_config.validate_input(train_set.height(), train_set.width());
  } catch (const ShapeMismatch&) {
    throw;
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
  if (state) {
    if (!(state->config.mask_spec == rc.train.mask_spec)) throw ShapeMismatch("train --resume: data shape differs from the checkpoint");
    if (state->sampler.dataset_size() != train_set.size()) {
      throw ShapeMismatch("train --resume: training set size differs from the checkpoint");
    }
    if (rc.train.epochs < state->epoch) throw UsageError("train --resume: --epochs is below the completed epochs");
    state->config.epochs = rc.train.epochs;
  } else {
    state = make_train_state(rc.train, train_set);
  }

  const fs::path run = rc.output_dir;
  fs::create_directories(run / "checkpoints");
  fs::create_directories(run / "reports");
  fs::create_directories(run / "plots");
  write_json(to_json(rc), run / "config.json");
  const SamplingMask mask = generate_mask(rc.train.mask_spec);
  save_mask(mask, run / "mask.pgm");

  json manifest = {{"started", utc_now()},
                   {"versions", versions()},
                   {"config", to_json(rc)},
                   {"seeds", {{"run", rc.train.seed}, {"mask", rc.train.mask_spec.seed}}},
                   {"mask", describe(mask)},
                   {"train", {{"count", train_set.size()}, {"hash", hex64(dataset_hash(train_set))}}},
                   {"steps_per_epoch", state->steps_per_epoch()},
                   {"resumed_from", a.resume}};
  if (test_set) manifest["test"] = {{"count", test_set->size()}, {"hash", hex64(dataset_hash(*test_set))}};
  write_json(manifest, run / "manifest.json");

  if (!a.quiet) {
    fmt::print("training {} images {}x{}, {} epochs x {} steps, {}\n", train_set.size(), train_set.height(),
               train_set.width(), rc.train.epochs, state->steps_per_epoch(), describe(mask));
  }
  TrainCallbacks cb;
  cb.on_epoch_end = [&](const TrainState& s) {
    const bool last = s.epoch == s.config.epochs;
    if ((s.config.checkpoint_every > 0 && s.epoch % s.config.checkpoint_every == 0) || last) {
      save_checkpoint(s, run / "checkpoints" / epoch_name(s.epoch));
    }
    write_history_csv(s.history, run / "history.csv");
    if (!a.quiet) {
      const auto means = epoch_means(s.history);
      const auto& m = means.back().loss;
      fmt::print("epoch {:4d}/{}  total {:.5f}  freq {:.5f}  imag {:.5f}  adv_g {:.4f}  adv_d {:.4f}  lr {:.3g}  "
                 "{:.1f}s\n",
                 s.epoch, s.config.epochs, m.total, m.freq, m.imag, m.adv_g, m.adv_d, means.back().lr,
                 seconds_since(t0));
      std::fflush(stdout);
    }
  };
  try {
    train(*state, train_set, cb);
  } catch (const Divergence&) {
    write_history_csv(state->history, run / "history.csv");
    save_checkpoint(*state, run / "checkpoints" / "diverged.ckpt");
    manifest["finished"] = utc_now();
    manifest["status"] = "diverged";
    write_json(manifest, run / "manifest.json");
    throw;
  }
  const fs::path final_ckpt = run / "checkpoints" / epoch_name(state->epoch);
  if (!fs::exists(final_ckpt)) save_checkpoint(*state, final_ckpt);
  fs::copy_file(final_ckpt, run / "checkpoints" / "final.ckpt", fs::copy_options::overwrite_existing);
  write_history_csv(state->history, run / "history.csv");
  plot_history(state->history, run / "plots");
  if (test_set) {
    fmt::print("held-out evaluation ({} images):\n", test_set->size());
    write_reports(state->generator, *test_set, mask, "final.ckpt@epoch" + std::to_string(state->epoch),
                  run / "reports");
  }
  manifest["finished"] = utc_now();
  manifest["status"] = "ok";
  manifest["wall_seconds"] = seconds_since(t0);
  write_json(manifest, run / "manifest.json");
  fmt::print("run directory: {}\n", run.string());
  return 0;
}

// ---------------------------------------------------------------- reconstruct

struct ReconstructArgs {
  std::string checkpoint, kspace, image, mask, out, zero_fill_out;
  int fold = 0;  // 1-based; 0 selects the last
};

int cmd_reconstruct(const ReconstructArgs& a) {
  if (a.kspace.empty() == a.image.empty()) throw UsageError("reconstruct: give exactly one of --kspace or --image");
  const auto t_all = Clock::now();
  LoadedGenerator g = load_generator(a.checkpoint);
  const SamplingMask mask = load_mask(a.mask);
  int maxval = 0;
  bool complex_valued = false;
  KSpaceGrid full;
  if (!a.image.empty()) {
    const GrayImage img = read_gray_image(a.image);
    maxval = img.maxval;
    full = forward_fourier(to_complex(img));
  } else {
    // Either fully sampled or already masked; masking again is harmless.
    full = read_kspace_grid(a.kspace);
    complex_valued = true;
  }
  if (!full.same_shape(mask.height(), mask.width())) {
    throw ShapeMismatch(fmt::format("reconstruct: mask {}x{} vs data {}x{}", mask.height(), mask.width(),
                                    full.height(), full.width()));
  }
  const KSpaceMeasurement m(mask, apply_mask(full, mask));
  const Normalization n = estimate_normalization(m, complex_valued);
  const auto t0 = Clock::now();
  const ComplexImage recon = reconstruct(*g.generator, m, n, a.fold - 1);
  const double infer = seconds_since(t0);
  const ComplexImage zf = zero_fill(m);
  double peak = 0;
  for (const auto& v : zf.data()) peak = std::max(peak, std::abs(v));
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  write_image(recon, a.out, maxval, peak);
  if (!a.zero_fill_out.empty()) write_image(zf, a.zero_fill_out, maxval, peak);
  fmt::print("{}: {}x{} from {} ({}), inference {:.1f} ms, total {:.1f} ms\n", a.out, recon.height(), recon.width(),
             g.id, describe(mask), infer * 1e3, seconds_since(t_all) * 1e3);
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string checkpoint, test_dir, mask, out;
  std::vector<std::string> patterns;
  double rate = 0.3;
  std::uint64_t seed = 0;
  bool data_consistency = false;
  bool oracle = false;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const Dataset test = load_any(a.test_dir, Split::test);
  const fs::path out = a.out;
  fs::create_directories(out);
  if (a.oracle) {
    std::vector<ComplexImage> truth;
    for (std::size_t i = 0; i < test.size(); ++i) truth.push_back(denormalize(test.items[i], test.normalization[i]));
    const auto r = score(test, truth, "fully sampled", "oracle");
    r.write_csv(out / "oracle.csv");
    r.write_summary(out / "oracle.json");
    fmt::print("oracle: PSNR {} SSIM {:.4f} NRMSE {:.4g}\n", r.psnr.mean, r.ssim.mean, r.nrmse.mean);
    return 0;
  }
  if (a.checkpoint.empty()) throw UsageError("evaluate: --checkpoint is required unless --oracle is given");
  LoadedGenerator g = load_generator(a.checkpoint);

  std::vector<SamplingMask> masks;
  if (!a.mask.empty()) {
    if (!a.patterns.empty()) throw UsageError("evaluate: give --mask or --pattern, not both");
    masks.push_back(load_mask(a.mask));
  } else {
    const std::vector<std::string> patterns = a.patterns.empty() ? std::vector<std::string>{"radial"} : a.patterns;
    for (const auto& p : patterns) {
      try {
        masks.push_back(generate_mask({pattern_arg(p), a.rate, test.height(), test.width(), a.seed}));
      } catch (const InvalidInput& e) {
        throw UsageError(e.what());
      }
    }
  }
  if (masks.size() == 1) {
    write_reports(*g.generator, test, masks.front(), g.id, out, a.data_consistency);
    return 0;
  }
  // Pattern sweep: one sub-directory per pattern plus a summary table.
  std::ofstream table(out / "sweep.csv");
  table << "pattern,rate,zero_fill_psnr,zero_fill_nrmse,psnr,ssim,nrmse\n";
  fmt::print("{:<10} {:>6} {:>10} {:>10} {:>8} {:>8} {:>8}\n", "pattern", "rate", "zf psnr", "zf nrmse", "psnr",
             "ssim", "nrmse");
  for (const auto& mask : masks) {
    EvaluateOptions opt;
    opt.checkpoint_id = g.id;
    opt.data_consistency = a.data_consistency;
    const auto r = evaluate(*g.generator, test, mask, opt);
    const auto zf = evaluate_zero_fill(test, mask);
    const fs::path sub = out / to_string(mask.pattern);
    fs::create_directories(sub);
    r.write_csv(sub / "report.csv");
    r.write_summary(sub / "report.json");
    zf.write_csv(sub / "zero_fill.csv");
    table << fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", to_string(mask.pattern), mask_rate(mask),
                         zf.psnr.mean, zf.nrmse.mean, r.psnr.mean, r.ssim.mean, r.nrmse.mean);
    fmt::print("{:<10} {:6.4f} {:10.3f} {:10.4f} {:8.3f} {:8.4f} {:8.4f}\n", to_string(mask.pattern), mask_rate(mask),
               zf.psnr.mean, zf.nrmse.mean, r.psnr.mean, r.ssim.mean, r.nrmse.mean);
  }
  return 0;
}

// ---------------------------------------------------------------- plot

struct PlotArgs {
  std::string history, run, out;
  std::vector<std::string> reports, labels;
};

int cmd_plot(const PlotArgs& a) {
  std::string history = a.history;
  std::vector<std::string> reports = a.reports, labels = a.labels;
  fs::path out = a.out;
  if (!a.run.empty()) {
    const fs::path run = a.run;
    if (history.empty()) history = (run / "history.csv").string();
    if (reports.empty() && fs::exists(run / "reports" / "zero_fill.csv")) {
      reports.push_back((run / "reports" / "zero_fill.csv").string());
      labels = {"zero-fill"};
      for (int k = 1; fs::exists(run / "reports" / fmt::format("fold{}.csv", k)); ++k) {
        reports.push_back((run / "reports" / fmt::format("fold{}.csv", k)).string());
        labels.push_back(fmt::format("fold {}", k));
      }
    }
    if (out.empty()) out = run / "plots";
  }
  if (history.empty() && reports.empty()) throw UsageError("plot: nothing to plot (--history, --report or --run)");
  if (out.empty()) throw UsageError("plot: --out is required");
  std::vector<fs::path> written;
  if (!history.empty()) {
    const auto w = plot_history(read_history_csv(history), out);
    written.insert(written.end(), w.begin(), w.end());
  }
  if (!reports.empty()) {
    if (labels.empty()) {
      for (const auto& r : reports) labels.push_back(fs::path(r).stem().string());
    }
    if (labels.size() != reports.size()) throw UsageError("plot: one --label per --report");
    std::vector<EvaluationReport> loaded;
    for (const auto& r : reports) loaded.push_back(read_report_csv(r));
    const auto w = plot_reports(labels, loaded, out);
    written.insert(written.end(), w.begin(), w.end());
  }
  for (const auto& p : written) fmt::print("{}\n", p.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressed-sensing MRI reconstruction with a refining GAN"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenMasksArgs gm;
  auto* gen = app.add_subcommand("gen-masks", "Generate a sampling mask (P5 image plus JSON sidecar)");
  gen->add_option("--pattern", gm.pattern, "radial, cartesian, random, spiral or full")->capture_default_str();
  gen->add_option("--rate", gm.rate, "Nominal sampling rate in (0, 1]")->capture_default_str();
  gen->add_option("--size", gm.size, "Square mask side")->capture_default_str();
  gen->add_option("--height", gm.height, "Mask height (overrides --size)");
  gen->add_option("--width", gm.width, "Mask width (overrides --size)");
  gen->add_option("--seed", gm.seed, "Random seed")->capture_default_str();
  gen->add_option("-o,--out", gm.out, "Output .pgm path");

  PrepareArgs pa;
  auto* prep = app.add_subcommand("prepare", "Split an image directory, or synthesize phantoms, into train/ and test/");
  prep->add_option("--input", pa.input, "Directory of .png/.pgm images");
  prep->add_option("--phantoms", pa.phantoms, "Number of synthetic phantoms instead of --input");
  prep->add_option("--size", pa.size, "Phantom side length")->capture_default_str();
  prep->add_flag("--complex", pa.complex_valued, "Phantoms with smooth phase, stored as .ksp");
  prep->add_option("--train-fraction", pa.train_fraction, "Training share")->capture_default_str();
  prep->add_option("--seed", pa.seed, "Split / phantom seed")->capture_default_str();
  prep->add_option("-o,--out", pa.out, "Output directory")->required();

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a model; writes a self-describing run directory");
  tr->add_option("config", ta.config, "JSON run configuration");
  tr->add_option("--resume", ta.resume, "Continue from a checkpoint");
  tr->add_option("--train-dir", ta.train_dir, "Training data directory");
  tr->add_option("--test-dir", ta.test_dir, "Held-out data directory, evaluated after training");
  tr->add_option("-o,--out", ta.out, "Run directory");
  tr->add_option("--epochs", ta.epochs);
  tr->add_option("--batch-size", ta.batch_size);
  tr->add_option("--critic-steps", ta.critic_steps);
  tr->add_option("--checkpoint-every", ta.checkpoint_every, "Checkpoint period in epochs");
  tr->add_option("--lr", ta.lr0, "Initial learning rate");
  tr->add_option("--seed", ta.seed);
  tr->add_option("--pattern", ta.pattern, "Mask pattern");
  tr->add_option("--rate", ta.rate, "Mask sampling rate");
  tr->add_flag("-q,--quiet", ta.quiet);

  ReconstructArgs ra;
  auto* rec = app.add_subcommand("reconstruct", "Reconstruct one undersampled acquisition");
  rec->add_option("--checkpoint", ra.checkpoint)->required();
  rec->add_option("--mask", ra.mask, "Mask .pgm from gen-masks")->required();
  rec->add_option("--kspace", ra.kspace, "k-space grid (.ksp)");
  rec->add_option("--image", ra.image, "Fully sampled image to undersample (.png/.pgm)");
  rec->add_option("-o,--out", ra.out, "Output (.png, .pgm or .ksp)")->required();
  rec->add_option("--zero-fill-out", ra.zero_fill_out, "Also write the zero-filling baseline");
  rec->add_option("--fold", ra.fold, "Generator fold, 1-based; default the last")->check(CLI::NonNegativeNumber);

  EvaluateArgs ea;
  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on a held-out directory");
  ev->add_option("--checkpoint", ea.checkpoint);
  ev->add_option("--test-dir", ea.test_dir)->required();
  ev->add_option("--mask", ea.mask, "Mask .pgm");
  ev->add_option("--pattern", ea.patterns, "Pattern(s); several give a sweep table")->delimiter(',');
  ev->add_option("--rate", ea.rate)->capture_default_str();
  ev->add_option("--seed", ea.seed, "Mask seed")->capture_default_str();
  ev->add_flag("--data-consistency", ea.data_consistency, "Restore measured bins after inference");
  ev->add_flag("--oracle", ea.oracle, "Score the references against themselves");
  ev->add_option("-o,--out", ea.out)->required();

  PlotArgs pl;
  auto* plt = app.add_subcommand("plot", "SVG training curves and metric box plots");
  plt->add_option("--history", pl.history, "history.csv");
  plt->add_option("--report", pl.reports, "Report CSV (repeatable)");
  plt->add_option("--label", pl.labels, "Label per report (repeatable)");
  plt->add_option("--run", pl.run, "Run directory: plots its history and reports");
  plt->add_option("-o,--out", pl.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_masks(gm);
    if (*prep) return cmd_prepare(pa);
    if (*tr) return cmd_train(ta);
    if (*rec) return cmd_reconstruct(ra);
    if (*ev) return cmd_evaluate(ea);
    if (*plt) return cmd_plot(pl);
  } catch (const UsageError& e) {
    fmt::print(stderr, "usage error: {}\n", e.what());
    return 1;
  } catch (const Divergence& e) {
    fmt::print(stderr, "training diverged: {}\n", e.what());
    return 3;
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 1;
}
