#include "refinegan/masks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <nlohmann/json.hpp>

#include "refinegan/image_io.hpp"
#include "refinegan/rng.hpp"

namespace refinegan {

namespace {

void force_dc(SamplingMask& m) { m.set(m.center_y(), m.center_x()); }

SamplingMask finish(SamplingMask m, const MaskSpec& spec) {
  force_dc(m);
  m.nominal_rate = spec.nominal_rate;
  m.pattern = spec.pattern;
  m.seed = spec.seed;
  return m;
}

// Bresenham from the origin to (dy, dx); calls visit for every offset.
void bresenham(int dy, int dx, const std::function<void(int, int)>& visit) {
  int x = 0, y = 0;
  const int ax = std::abs(dx), ay = std::abs(dy);
  const int sx = dx >= 0 ? 1 : -1, sy = dy >= 0 ? 1 : -1;
  int err = ax - ay;
  while (true) {
    visit(y, x);
    if (x == dx && y == dy) break;
    const int e2 = 2 * err;
    if (e2 > -ay) {
      err -= ay;
      x += sx;
    }
    if (e2 < ax) {
      err += ax;
      y += sy;
    }
  }
}

SamplingMask radial_with_spokes(int height, int width, int spokes) {
  SamplingMask m(height, width);
  const int cy = m.center_y(), cx = m.center_x();
  // Half-extent reachable on both sides of the center keeps spokes point-symmetric.
  const int ry = std::min(cy, height - 1 - cy);
  const int rx = std::min(cx, width - 1 - cx);
  for (int k = 0; k < spokes; ++k) {
    const double theta = std::numbers::pi * k / spokes;
    const double c = std::cos(theta), s = std::sin(theta);
    // Extend the spoke to the boundary of the symmetric rectangle.
    const double tx = std::abs(c) > 1e-12 ? rx / std::abs(c) : 1e300;
    const double ty = std::abs(s) > 1e-12 ? ry / std::abs(s) : 1e300;
    const double t = std::min(tx, ty);
    const int ex = static_cast<int>(std::lround(t * c));
    const int ey = static_cast<int>(std::lround(t * s));
    bresenham(ey, ex, [&](int oy, int ox) {
      m.set(cy + oy, cx + ox);
      m.set(cy - oy, cx - ox);
    });
  }
  return m;
}

SamplingMask spiral_with_pitch(int height, int width, double a) {
  SamplingMask m(height, width);
  const int cy = m.center_y(), cx = m.center_x();
  const double rmax = std::hypot(height / 2.0, width / 2.0) + 1.0;
  double theta = 0.0;
  while (true) {
    const double r = a * theta;
    if (r > rmax) break;
    const int y = cy + static_cast<int>(std::lround(r * std::sin(theta)));
    const int x = cx + static_cast<int>(std::lround(r * std::cos(theta)));
    if (y >= 0 && y < height && x >= 0 && x < width) m.set(y, x);
    // Arc-length step of at most a quarter bin.
    theta += 0.25 / std::max(std::hypot(r, a), 0.25);
  }
  return m;
}

SamplingMask generate_radial(const MaskSpec& spec) {
  auto rate_of = [&](int n) {
    auto m = radial_with_spokes(spec.height, spec.width, n);
    force_dc(m);
    return mask_rate(m);
  };
  int lo = 1, hi = 8 * std::max(spec.height, spec.width);
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (rate_of(mid) < spec.nominal_rate) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  int best = lo;
  if (lo > 1 && std::abs(rate_of(lo - 1) - spec.nominal_rate) <= std::abs(rate_of(lo) - spec.nominal_rate)) {
    best = lo - 1;
  }
  return radial_with_spokes(spec.height, spec.width, best);
}

SamplingMask generate_spiral(const MaskSpec& spec) {
  auto rate_of = [&](double a) {
    auto m = spiral_with_pitch(spec.height, spec.width, a);
    force_dc(m);
    return mask_rate(m);
  };
  // Coverage falls as the pitch grows; bisect on log(a).
  double lo = std::log(1e-3), hi = std::log(static_cast<double>(std::max(spec.height, spec.width)));
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (rate_of(std::exp(mid)) >= spec.nominal_rate) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double a_lo = std::exp(lo), a_hi = std::exp(hi);
  const double a = std::abs(rate_of(a_lo) - spec.nominal_rate) <= std::abs(rate_of(a_hi) - spec.nominal_rate)
                       ? a_lo
                       : a_hi;
  return spiral_with_pitch(spec.height, spec.width, a);
}

SamplingMask generate_cartesian(const MaskSpec& spec) {
  SamplingMask m(spec.height, spec.width);
  const int cy = m.center_y();
  const int rows = std::clamp(static_cast<int>(std::lround(spec.nominal_rate * spec.height)), 1, spec.height);
  // Weighted sampling without replacement (exponential keys); the weight
  // decays with distance from the DC row so low frequencies are favoured.
  Rng rng(spec.seed);
  const double width_scale = spec.height / 8.0;
  std::vector<std::pair<double, int>> keys;
  for (int y = 0; y < spec.height; ++y) {
    if (y == cy) continue;
    const double d = (y - cy) / width_scale;
    const double weight = 1.0 / (1.0 + d * d);
    double u;
    do {
      u = rng.uniform();
    } while (u <= 0.0);
    keys.emplace_back(std::log(u) / weight, y);
  }
  std::sort(keys.begin(), keys.end(), std::greater<>());
  std::vector<int> chosen{cy};
  for (int i = 0; i < rows - 1; ++i) chosen.push_back(keys[static_cast<std::size_t>(i)].second);
  for (int y : chosen) {
    for (int x = 0; x < spec.width; ++x) m.set(y, x);
  }
  return m;
}

SamplingMask generate_random(const MaskSpec& spec) {
  SamplingMask m(spec.height, spec.width);
  const std::size_t total = m.size();
  const auto target = static_cast<std::size_t>(std::clamp<long>(std::lround(spec.nominal_rate * total), 1, total));
  const std::size_t dc = static_cast<std::size_t>(m.center_y()) * spec.width + m.center_x();
  std::vector<std::size_t> order;
  order.reserve(total - 1);
  for (std::size_t i = 0; i < total; ++i) {
    if (i != dc) order.push_back(i);
  }
  Rng rng(spec.seed);
  // Partial Fisher-Yates: the first target-1 entries form a uniform subset.
  for (std::size_t i = 0; i + 1 < target; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
    m.set(order[i]);
  }
  return m;
}

}  // namespace

SamplingMask generate_mask(const MaskSpec& spec) {
  if (!(spec.nominal_rate > 0.0 && spec.nominal_rate <= 1.0)) {
    throw InvalidInput("generate_mask: rate must lie in (0, 1]");
  }
  if (spec.height < 8 || spec.width < 8) throw InvalidInput("generate_mask: mask must be at least 8x8");
  if (spec.nominal_rate >= 1.0 || spec.pattern == MaskPattern::full) {
    SamplingMask m(spec.height, spec.width, std::vector<std::uint8_t>(
                                                static_cast<std::size_t>(spec.height) * spec.width, 1));
    return finish(std::move(m), spec);
  }
  switch (spec.pattern) {
    case MaskPattern::radial: return finish(generate_radial(spec), spec);
    case MaskPattern::cartesian: return finish(generate_cartesian(spec), spec);
    case MaskPattern::random: return finish(generate_random(spec), spec);
    case MaskPattern::spiral: return finish(generate_spiral(spec), spec);
    case MaskPattern::full: break;
  }
  throw InvalidInput("generate_mask: unsupported pattern");
}

double mask_rate(const SamplingMask& mask) {
  if (mask.size() == 0) return 0.0;
  return static_cast<double>(mask.count()) / static_cast<double>(mask.size());
}

std::filesystem::path mask_sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void save_mask(const SamplingMask& mask, const std::filesystem::path& path) {
  GrayImage img;
  img.height = mask.height();
  img.width = mask.width();
  img.maxval = 255;
  img.pixels.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask[i] ? 255 : 0;
  write_pgm(img, path);

  nlohmann::json meta = {{"pattern", to_string(mask.pattern)},
                         {"nominal_rate", mask.nominal_rate},
                         {"seed", mask.seed}};
  std::ofstream os(mask_sidecar_path(path));
  if (!os) throw IoError("cannot write " + mask_sidecar_path(path).string());
  os << meta.dump(2) << '\n';
}

SamplingMask load_mask(const std::filesystem::path& path) {
  const GrayImage img = read_pgm(path);
  if (img.maxval != 255) throw MalformedFile(path.string() + ": mask maxval must be 255");
  std::vector<std::uint8_t> bits(img.pixels.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const auto p = img.pixels[i];
    if (p != 0 && p != 255) throw MalformedFile(path.string() + ": mask pixels must be 0 or 255");
    bits[i] = p == 255 ? 1 : 0;
  }
  SamplingMask mask(img.height, img.width, std::move(bits));
  const auto sidecar = mask_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream is(sidecar);
    try {
      const auto meta = nlohmann::json::parse(is);
      mask.pattern = parse_mask_pattern(meta.at("pattern").get<std::string>());
      mask.nominal_rate = meta.at("nominal_rate").get<double>();
      mask.seed = meta.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw MalformedFile(sidecar.string() + ": " + e.what());
    }
  } else {
    mask.pattern = MaskPattern::full;
    mask.nominal_rate = mask_rate(mask);
  }
  return mask;
}

}  // namespace refinegan
