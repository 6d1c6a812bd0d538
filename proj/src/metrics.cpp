#include "refinegan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

namespace refinegan {

namespace {

void require_same(const RealImage& a, const RealImage& b, const char* what) {
  if (a.height != b.height || a.width != b.width || a.data.size() != b.data.size()) {
    throw ShapeMismatch(std::string(what) + ": image shapes differ");
  }
  if (a.data.empty()) throw InvalidInput(std::string(what) + ": empty image");
}

double dynamic_range(const RealImage& img) {
  const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
  return *hi - *lo;
}

std::vector<double> gaussian_taps(int window, double sigma) {
  std::vector<double> taps(static_cast<std::size_t>(window));
  const double c = 0.5 * (window - 1);
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    taps[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable "valid" filtering: output is (h - w + 1) x (w - w + 1).
std::vector<double> filter_valid(const std::vector<double>& src, int height, int width,
                                 const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int oh = height - k + 1, ow = width - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(height) * ow);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += taps[t] * src[static_cast<std::size_t>(y) * width + x + t];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += taps[t] * rows[static_cast<std::size_t>(y + t) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

RealImage::RealImage(int h, int w, std::vector<double> values) : height(h), width(w), data(std::move(values)) {
  if (data.size() != static_cast<std::size_t>(h) * static_cast<std::size_t>(w)) {
    throw ShapeMismatch("RealImage: data size does not match shape");
  }
}

RealImage magnitude(const ComplexImage& img) {
  RealImage out(img.height(), img.width());
  for (std::size_t i = 0; i < img.size(); ++i) out.data[i] = std::abs(img[i]);
  return out;
}

RealImage phase(const ComplexImage& img) {
  RealImage out(img.height(), img.width());
  for (std::size_t i = 0; i < img.size(); ++i) out.data[i] = std::arg(img[i]);
  return out;
}

double psnr(const RealImage& ref, const RealImage& test) {
  require_same(ref, test, "psnr");
  const double peak = dynamic_range(ref);
  if (peak <= 0.0) throw UndefinedMetric("psnr: reference has zero dynamic range");
  double sse = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = test.data[i] - ref.data[i];
    sse += d * d;
  }
  if (sse == 0.0) return kPsnrIdentical;
  const double rmse = std::sqrt(sse / static_cast<double>(ref.size()));
  return 20.0 * std::log10(peak / rmse);
}

double ssim(const RealImage& ref, const RealImage& test, const SsimOptions& opt) {
  require_same(ref, test, "ssim");
  if (ref.height < opt.window || ref.width < opt.window) {
    throw InvalidInput("ssim: image is smaller than the " + std::to_string(opt.window) + "-pixel window");
  }
  const double range = dynamic_range(ref);
  if (range <= 0.0) throw UndefinedMetric("ssim: reference has zero dynamic range");
  const double c1 = (opt.k1 * range) * (opt.k1 * range);
  const double c2 = (opt.k2 * range) * (opt.k2 * range);

  const auto taps = gaussian_taps(opt.window, opt.sigma);
  const std::size_t n = ref.size();
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = ref.data[i] * ref.data[i];
    yy[i] = test.data[i] * test.data[i];
    xy[i] = ref.data[i] * test.data[i];
  }
  const auto mu_x = filter_valid(ref.data, ref.height, ref.width, taps);
  const auto mu_y = filter_valid(test.data, ref.height, ref.width, taps);
  const auto e_xx = filter_valid(xx, ref.height, ref.width, taps);
  const auto e_yy = filter_valid(yy, ref.height, ref.width, taps);
  const auto e_xy = filter_valid(xy, ref.height, ref.width, taps);

  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i], my = mu_y[i];
    const double vx = e_xx[i] - mx * mx;
    const double vy = e_yy[i] - my * my;
    const double cxy = e_xy[i] - mx * my;
    total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mu_x.size());
}

double nrmse(const RealImage& ref, const RealImage& test) {
  require_same(ref, test, "nrmse");
  double err = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = test.data[i] - ref.data[i];
    err += d * d;
    norm += ref.data[i] * ref.data[i];
  }
  if (norm == 0.0) throw UndefinedMetric("nrmse: reference has zero norm");
  return std::sqrt(err) / std::sqrt(norm);
}

MetricTriple compare(const RealImage& ref, const RealImage& test) {
  return {psnr(ref, test), ssim(ref, test), nrmse(ref, test)};
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  if (values.empty()) return a;
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1 && std::isfinite(a.mean)) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

void EvaluationReport::finalize() {
  auto collect = [this](auto pick) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(pick(r));
    return aggregate(v);
  };
  psnr = collect([](const ReportRow& r) { return r.magnitude.psnr; });
  ssim = collect([](const ReportRow& r) { return r.magnitude.ssim; });
  nrmse = collect([](const ReportRow& r) { return r.magnitude.nrmse; });
  const bool has_phase = !rows.empty() && std::all_of(rows.begin(), rows.end(),
                                                      [](const ReportRow& r) { return r.phase.has_value(); });
  if (has_phase) {
    phase_psnr = collect([](const ReportRow& r) { return r.phase->psnr; });
    phase_ssim = collect([](const ReportRow& r) { return r.phase->ssim; });
    phase_nrmse = collect([](const ReportRow& r) { return r.phase->nrmse; });
  } else {
    phase_psnr.reset();
    phase_ssim.reset();
    phase_nrmse.reset();
  }
}

void EvaluationReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  const bool with_phase = phase_psnr.has_value();
  os << "id,psnr,ssim,nrmse";
  if (with_phase) os << ",phase_psnr,phase_ssim,phase_nrmse";
  os << '\n' << std::setprecision(17);
  auto put = [&os](const MetricTriple& m) { os << ',' << m.psnr << ',' << m.ssim << ',' << m.nrmse; };
  for (const auto& r : rows) {
    os << r.id;
    put(r.magnitude);
    if (with_phase && r.phase) put(*r.phase);
    os << '\n';
  }
}

EvaluationReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(is, line);
  bool with_phase = false;
  if (line == "id,psnr,ssim,nrmse,phase_psnr,phase_ssim,phase_nrmse") {
    with_phase = true;
  } else if (line != "id,psnr,ssim,nrmse") {
    throw MalformedFile(path.string() + ": not a report file");
  }
  EvaluationReport report;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != (with_phase ? 7u : 4u)) throw MalformedFile(path.string() + ": bad row '" + line + "'");
    auto num = [&](std::size_t k) {
      char* end = nullptr;
      const double v = std::strtod(cells[k].c_str(), &end);
      if (end == cells[k].c_str() || *end != '\0') throw MalformedFile(path.string() + ": bad number " + cells[k]);
      return v;
    };
    ReportRow row{cells[0], {num(1), num(2), num(3)}, std::nullopt};
    if (with_phase) row.phase = MetricTriple{num(4), num(5), num(6)};
    report.rows.push_back(std::move(row));
  }
  if (report.rows.empty()) throw MalformedFile(path.string() + ": no rows");
  report.finalize();
  return report;
}

void EvaluationReport::write_summary(const std::filesystem::path& path) const {
  auto number = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  };
  auto agg = [&number](const Aggregate& a) { return nlohmann::json{{"mean", number(a.mean)}, {"std", number(a.std)}}; };
  nlohmann::json j;
  j["images"] = rows.size();
  j["mask"] = mask_description;
  j["checkpoint"] = checkpoint_id;
  j["magnitude"] = {{"psnr", agg(psnr)}, {"ssim", agg(ssim)}, {"nrmse", agg(nrmse)}};
  if (phase_psnr) {
    j["phase"] = {{"psnr", agg(*phase_psnr)}, {"ssim", agg(*phase_ssim)}, {"nrmse", agg(*phase_nrmse)}};
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

}  // namespace refinegan
