// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.
//
//   acceptance              all criteria
//   acceptance --only 1,5   a subset
//   acceptance --mask-hashes   (internal) print mask hashes for criterion 2

#include <fmt/format.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <sys/wait.h>
#include <string>

#include "oracles.hpp"
#include "refinegan/evaluate.hpp"
#include "refinegan/image_io.hpp"
#include "refinegan/plot.hpp"
#include "refinegan/trainer.hpp"

#ifndef REFINEGAN_GRADCHECK_HELPER
#error "REFINEGAN_GRADCHECK_HELPER must name the gradient-check executable"
#endif

using namespace refinegan;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string self_exe;

std::pair<int, std::string> run_command(const std::string& cmd) {
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "refinegan_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ------------------------------------------------------------------ desk set

// 25 synthetic phantoms at 64x64, stored as 8-bit images would be; the first
// 20 train, the last 5 are held out.
std::pair<Dataset, Dataset> desk_data() {
  Dataset train, test;
  train.split = Split::train;
  test.split = Split::test;
  for (int i = 0; i < 25; ++i) {
    const ComplexImage img = to_complex(to_gray8(make_phantom(64, 1000 + static_cast<std::uint64_t>(i))));
    (i < 20 ? train : test).push_back(fmt::format("phantom_{:02d}", i), img);
  }
  return {std::move(train), std::move(test)};
}

TrainConfig desk_config() {
  TrainConfig c;
  c.epochs = 200;
  c.lr0 = 1e-3;
  c.batch_size = 1;
  c.critic_steps = 5;
  c.seed = 7;
  c.mask_spec = {MaskPattern::radial, 0.3, 64, 64, 1};
  c.net_config = {.levels = 3, .base_filters = 16, .residual_blocks_per_level = 1, .folds = 2};
  c.loss_weights.adversarial = 0.01;
  c.loss_weights.drift = 1e-3;
  c.augment = true;
  return c;
}

// ------------------------------------------------------------------ 1

std::complex<double> inner(std::span<const cplx> a, std::span<const cplx> b) {
  std::complex<double> acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * std::conj(b[i]);
  return acc;
}

Outcome operator_suite() {
  const auto t0 = Clock::now();
  Rng rng(101);
  constexpr int kTrials = 100;
  double worst_unitary = 0, worst_adjoint = 0, worst_roundtrip = 0, worst_interp = 0;
  for (int t = 0; t < kTrials; ++t) {
    const int h = 8 << rng.below(4), w = 8 << rng.below(4);
    const ComplexImage x = oracle::random_image(h, w, rng);
    const KSpaceGrid fx = forward_fourier(x);
    worst_unitary = std::max(worst_unitary, std::abs(oracle::norm2(fx.data()) / oracle::norm2(x.data()) - 1.0));

    const ComplexImage yi = oracle::random_image(h, w, rng);
    const KSpaceGrid y(h, w, std::vector<cplx>(yi.data().begin(), yi.data().end()));
    const auto gap = inner(fx.data(), y.data()) - inner(x.data(), inverse_fourier(y).data());
    worst_adjoint = std::max(worst_adjoint, std::abs(gap) / (oracle::norm2(x.data()) * oracle::norm2(y.data())));

    worst_roundtrip = std::max(worst_roundtrip, oracle::relative_error(inverse_fourier(fx).data(), x.data()));

    // Interpolation: re-measuring the zero-filling image reproduces m.
    const auto pattern = static_cast<MaskPattern>(rng.below(4));
    const SamplingMask mask = generate_mask({pattern, 0.1 + 0.3 * rng.uniform(), h, w, rng.next()});
    const KSpaceMeasurement m = undersample(x, mask);
    const KSpaceMeasurement again = undersample(zero_fill(m), mask);
    worst_interp = std::max(worst_interp, oracle::relative_error(again.values().data(), m.values().data()));
  }
  const double secs = seconds_since(t0);
  const bool pass = worst_unitary < 1e-6 && worst_adjoint < 1e-5 && worst_roundtrip < 1e-6 && worst_interp < 1e-6 &&
                    secs < 10.0;
  return {pass, fmt::format("{} trials/property; worst unitarity {:.1e}, adjoint {:.1e}, roundtrip {:.1e}, "
                            "interpolation {:.1e}; {:.2f} s",
                            kTrials, worst_unitary, worst_adjoint, worst_roundtrip, worst_interp, secs)};
}

// ------------------------------------------------------------------ 2

constexpr MaskPattern kPatterns[] = {MaskPattern::radial, MaskPattern::cartesian, MaskPattern::random,
                                     MaskPattern::spiral};
constexpr double kRates[] = {0.1, 0.2, 0.3, 0.4};

std::uint64_t fnv1a(std::span<const std::uint8_t> bits) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bits) h = (h ^ b) * 0x100000001b3ULL;
  return h;
}

std::string mask_hashes() {
  std::string out;
  for (auto p : kPatterns) {
    for (double r : kRates) {
      out += fmt::format("{} {:.1f} {:016x}\n", to_string(p), r, fnv1a(generate_mask({p, r, 256, 256, 2024}).bits()));
    }
  }
  return out;
}

Outcome mask_suite() {
  double worst = 0;
  std::string worst_case;
  bool dc = true;
  for (auto p : kPatterns) {
    for (double r : kRates) {
      const SamplingMask mask = generate_mask({p, r, 256, 256, 2024});
      const double dev = std::abs(mask_rate(mask) - r);
      if (dev > worst) {
        worst = dev;
        worst_case = fmt::format("{} {:.1f}", to_string(p), r);
      }
      dc = dc && mask.dc_sampled();
    }
  }
  const std::string here = mask_hashes();
  const auto [code_a, a] = run_command("'" + self_exe + "' --mask-hashes");
  const auto [code_b, b] = run_command("'" + self_exe + "' --mask-hashes");
  const bool deterministic = code_a == 0 && code_b == 0 && a == here && b == here;
  return {worst <= 0.02 && dc && deterministic,
          fmt::format("16 masks at 256x256; worst rate deviation {:.4f} ({}); DC always sampled: {}; "
                      "identical across 2 child processes: {}",
                      worst, worst_case, dc ? "yes" : "no", deterministic ? "yes" : "no")};
}

// ------------------------------------------------------------------ 3

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  Rng rng(303);
  double dp = 0, ds = 0, dn = 0;
  for (int t = 0; t < 50; ++t) {
    RealImage ref(32, 32), test(32, 32);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      ref.data[i] = rng.uniform();
      test.data[i] = ref.data[i] + (0.02 + 0.004 * t) * rng.normal();
    }
    dp = std::max(dp, std::abs(psnr(ref, test) - oracle::psnr(ref, test)));
    ds = std::max(ds, std::abs(ssim(ref, test) - oracle::ssim(ref, test)));
    dn = std::max(dn, std::abs(nrmse(ref, test) - oracle::nrmse(ref, test)));
  }
  const double secs = seconds_since(t0);
  return {dp <= 1e-9 && ds <= 1e-6 && dn <= 1e-6 && secs < 30.0,
          fmt::format("50 random 32x32 pairs; max |dPSNR| {:.1e} dB, |dSSIM| {:.1e}, |dNRMSE| {:.1e}; {:.2f} s", dp,
                      ds, dn, secs)};
}

// ------------------------------------------------------------------ 4

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  const auto [code, out] = run_command("'" REFINEGAN_GRADCHECK_HELPER "' 2>&1");
  const double secs = seconds_since(t0);
  std::string line = out.substr(0, out.find('\n'));
  return {code == 0 && secs < 300.0,
          fmt::format("2 levels, base 8, 2 folds, 8x8, float64, h=1e-4, rel 1e-3: {}; {:.1f} s", line, secs)};
}

// ------------------------------------------------------------------ 5

Outcome zero_network_identity() {
  const auto [train, test] = desk_data();
  nn::Generator gen(desk_config().net_config);
  nn::zero_parameters(gen.parameters());
  const SamplingMask mask = generate_mask(desk_config().mask_spec);
  bool exact = true;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const ComplexImage raw = denormalize(test.items[i], test.normalization[i]);
    const KSpaceMeasurement m = undersample(raw, mask);
    exact = exact && reconstruct(gen, m, estimate_normalization(m, false)) == zero_fill(m);
  }
  const EvaluationReport r = evaluate(gen, test, mask);
  const EvaluationReport z = evaluate_zero_fill(test, mask);
  bool same = r.rows.size() == z.rows.size();
  for (std::size_t i = 0; same && i < r.rows.size(); ++i) {
    same = r.rows[i].magnitude.psnr == z.rows[i].magnitude.psnr && r.rows[i].magnitude.ssim == z.rows[i].magnitude.ssim &&
           r.rows[i].magnitude.nrmse == z.rows[i].magnitude.nrmse;
  }
  return {exact && same, fmt::format("{} held-out images: reconstruct == zero_fill bit-exact: {}; report equals "
                                     "zero-fill report: {} (PSNR {:.3f} dB)",
                                     test.size(), exact ? "yes" : "no", same ? "yes" : "no", r.psnr.mean)};
}

// ------------------------------------------------------------------ 6

Outcome cyclic_optimum() {
  // The oracle generator emits the fully sampled image at every fold.
  const auto [train, test] = desk_data();
  Dataset complex_set;
  complex_set.complex_valued = true;
  for (int i = 0; i < 5; ++i) complex_set.push_back("c", make_phantom(64, 2000 + static_cast<std::uint64_t>(i), true));
  const SamplingMask mask = generate_mask(desk_config().mask_spec);
  const int folds = desk_config().net_config.folds;
  double worst_freq = 0, worst_imag = 0;
  int checks = 0;
  for (const Dataset* d : std::initializer_list<const Dataset*>{&train, &complex_set}) {
    // Measure the truth at network precision, which is what the oracle emits.
    const nn::Tensor truth = nn::to_tensor(d->items);
    std::vector<KSpaceMeasurement> ms;
    for (int b = 0; b < truth.shape().n; ++b) ms.push_back(undersample(nn::to_image(truth, b), mask));
    for (int k = 0; k < folds; ++k) {
      for (Distance metric : {Distance::mse, Distance::mae}) {
        worst_freq = std::max(worst_freq, freq_loss(ms, truth, metric).value);
        worst_imag = std::max(worst_imag, imag_loss(truth, truth, metric).value);
        ++checks;
      }
    }
  }
  return {worst_freq == 0.0 && worst_imag == 0.0,
          fmt::format("{} checkpoint evaluations (2 datasets x {} folds x 2 metrics): max L_freq {:.1e}, max L_imag {:.1e}",
                      checks, folds, worst_freq, worst_imag)};
}

// ------------------------------------------------------------------ 7

std::vector<Outcome> desk_training() {
  const auto t0 = Clock::now();
  const auto [train_set, test] = desk_data();
  const TrainConfig config = desk_config();
  const SamplingMask mask = generate_mask(config.mask_spec);
  const EvaluationReport zf = evaluate_zero_fill(test, mask);

  TrainCallbacks cb;
  cb.on_epoch_end = [&](const TrainState& s) {
    if (s.epoch % 20 == 0) {
      const auto& m = epoch_means(s.history).back().loss;
      fmt::print("      epoch {:3d}: total {:.5f} imag {:.5f} freq {:.6f} ({:.0f} s)\n", s.epoch, m.total, m.imag, m.freq,
                 seconds_since(t0));
      std::fflush(stdout);
    }
  };
  std::unique_ptr<TrainState> state;
  std::string failure;
  try {
    state = train(config, train_set, cb);
  } catch (const Error& e) {
    failure = e.what();
  }
  const double secs = seconds_since(t0);
  if (!state) {
    Outcome bad{false, "training failed: " + failure};
    return {bad, bad, bad};
  }
  const auto folds = evaluate_folds(state->generator, test, mask);
  const double p1 = folds.front().psnr.mean, p2 = folds.back().psnr.mean;

  // Held-out image loss, final checkpoint vs zero-filling, in network units.
  std::vector<ComplexImage> zfs;
  for (const auto& item : test.items) zfs.push_back(zero_fill(undersample(item, mask)));
  const nn::Tensor input = nn::to_tensor(zfs), truth = nn::to_tensor(test.items);
  const double imag_final = imag_loss(truth, state->generator.forward(input).back(), Distance::mse).value;
  const double imag_zf = imag_loss(truth, input, Distance::mse).value;

  const auto means = epoch_means(state->history);
  const double first = means.front().loss.total, last = means.back().loss.total;
  const bool in_budget = secs <= 30 * 60;

  Outcome a{p2 >= zf.psnr.mean + 3.0 && in_budget,
            fmt::format("held-out PSNR {:.3f} dB vs zero-fill {:.3f} dB (gain {:+.3f}, need +3); held-out imag loss "
                        "{:.5f} vs zero-fill {:.5f}; {} epochs in {:.0f} s",
                        p2, zf.psnr.mean, p2 - zf.psnr.mean, imag_final, imag_zf, config.epochs, secs)};
  Outcome b{p2 >= p1 - 0.1, fmt::format("fold 2 PSNR {:.3f} dB vs fold 1 {:.3f} dB (need >= fold 1 - 0.1)", p2, p1)};
  Outcome c{last < first, fmt::format("epoch-mean total loss: epoch {} {:.5f} < epoch 1 {:.5f}", config.epochs, last,
                                      first)};
  return {a, b, c};
}

// ------------------------------------------------------------------ 8

Outcome pattern_sweep() {
  // One short model per pattern at 20%, trained and scored on the desk set.
  const auto t0 = Clock::now();
  const auto [train_set, test] = desk_data();
  std::map<std::string, double> nrmse_by_pattern, zf_by_pattern;
  std::string table;
  bool finite = true;
  for (auto p : kPatterns) {
    TrainConfig c = desk_config();
    c.epochs = 20;
    c.mask_spec.pattern = p;
    c.mask_spec.nominal_rate = 0.2;
    const auto state = train(c, train_set);
    const SamplingMask mask = generate_mask(c.mask_spec);
    const double n = evaluate(state->generator, test, mask).nrmse.mean;
    const double z = evaluate_zero_fill(test, mask).nrmse.mean;
    finite = finite && std::isfinite(n);
    nrmse_by_pattern[to_string(p)] = n;
    table += fmt::format("{} {:.4f} (zero-fill {:.4f}); ", to_string(p), n, z);
  }
  double worst = 0;
  std::string worst_name;
  for (const auto& [name, v] : nrmse_by_pattern) {
    if (v > worst) {
      worst = v;
      worst_name = name;
    }
  }
  return {finite && worst_name != "radial",
          fmt::format("NRMSE at 20%: {}worst: {}; {:.0f} s", table, worst_name, seconds_since(t0))};
}

// ------------------------------------------------------------------ 9

Outcome inference_latency() {
  nn::Generator gen(desk_config().net_config);
  nn::initialize(gen.parameters(), 9);
  const ComplexImage img = to_complex(to_gray8(make_phantom(256, 9)));
  const SamplingMask mask = generate_mask({MaskPattern::radial, 0.3, 256, 256, 1});
  const KSpaceMeasurement m = undersample(img, mask);
  // One warm-up pass (FFT planning, allocation), then the timed pass.
  reconstruct(gen, m, estimate_normalization(m, false));
  const auto t0 = Clock::now();
  const ComplexImage out = reconstruct(gen, m, estimate_normalization(m, false));
  const double secs = seconds_since(t0);
  return {secs < 1.0 && out.height() == 256,
          fmt::format("256x256, {} levels, base {}, {} folds: {:.1f} ms (limit 1000 ms)", desk_config().net_config.levels,
                      desk_config().net_config.base_filters, desk_config().net_config.folds, secs * 1e3)};
}

// ------------------------------------------------------------------ 10

bool params_equal(std::span<nn::Parameter* const> a, std::span<nn::Parameter* const> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k]->value.size() != b[k]->value.size() ||
        std::memcmp(a[k]->value.data(), b[k]->value.data(), a[k]->value.size() * sizeof(nn::real_t)) != 0) {
      return false;
    }
  }
  return true;
}

Outcome checkpoint_roundtrip() {
  const auto [train_set, test] = desk_data();
  TrainConfig c = desk_config();
  c.epochs = 5;
  const fs::path dir = scratch_dir("checkpoint");

  auto straight = make_train_state(c, train_set);
  train(*straight, train_set);

  auto first = make_train_state(c, train_set);
  train(*first, train_set, {}, 2);
  save_checkpoint(*first, dir / "epoch2.ckpt");
  const auto loaded = load_checkpoint(dir / "epoch2.ckpt");
  const bool bit_exact = params_equal(loaded->generator.parameters(), first->generator.parameters()) &&
                         params_equal(loaded->critic.parameters(), first->critic.parameters());
  first.reset();
  train(*loaded, train_set);

  double worst = 0;
  bool same_rows = loaded->history.size() == straight->history.size();
  for (std::size_t i = 0; same_rows && i < straight->history.size(); ++i) {
    const auto& a = straight->history[i].loss;
    const auto& b = loaded->history[i].loss;
    for (double d : {a.total - b.total, a.freq - b.freq, a.imag - b.imag, a.adv_g - b.adv_g, a.adv_d - b.adv_d}) {
      worst = std::max(worst, std::abs(d));
    }
  }
  return {bit_exact && same_rows && worst <= 1e-4,
          fmt::format("save/load bit-exact: {}; resume at epoch 2 of 5 vs straight run: {} logged steps, max loss "
                      "difference {:.1e}",
                      bit_exact ? "yes" : "no", straight->history.size(), worst)};
}

}  // namespace

int main(int argc, char** argv) {
  self_exe = fs::canonical("/proc/self/exe").string();
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--mask-hashes") {
      std::fputs(mask_hashes().c_str(), stdout);
      return 0;
    }
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else {
      std::fprintf(stderr, "usage: acceptance [--only 1,2,...]\n");
      return 1;
    }
  }
  auto wanted = [&](int k) { return only.empty() || only.count(k) > 0; };

  int failures = 0;
  auto report = [&](const std::string& id, const std::string& name, const Outcome& o) {
    fmt::print("{} [{}] {}: {}\n", o.pass ? "PASS" : "FAIL", id, name, o.detail);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };
  auto run = [&](int k, const std::string& name, const std::function<Outcome()>& fn) {
    if (!wanted(k)) return;
    try {
      report(std::to_string(k), name, fn());
    } catch (const std::exception& e) {
      report(std::to_string(k), name, {false, std::string("exception: ") + e.what()});
    }
  };

  run(1, "operator suite", operator_suite);
  run(2, "mask suite", mask_suite);
  run(3, "metric oracle equivalence", metric_oracles);
  run(4, "gradient checks", gradient_checks);
  run(5, "zero-network identity", zero_network_identity);
  run(6, "cyclic-loss optimum", cyclic_optimum);
  if (wanted(7)) {
    try {
      const auto r = desk_training();
      report("7a", "desk training: +3 dB over zero-filling", r[0]);
      report("7b", "desk training: refinement does no harm", r[1]);
      report("7c", "desk training: loss decreases", r[2]);
    } catch (const std::exception& e) {
      report("7", "desk training", {false, std::string("exception: ") + e.what()});
    }
  }
  run(8, "sampling-pattern sweep", pattern_sweep);
  run(9, "inference latency", inference_latency);
  run(10, "checkpoint roundtrip", checkpoint_roundtrip);

  fmt::print("{} criterion line(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
