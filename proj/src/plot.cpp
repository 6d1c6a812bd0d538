#include "refinegan/plot.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "refinegan/error.hpp"

namespace refinegan {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool valid() const { return lo <= hi; }
  void pad() {
    if (!valid()) {
      lo = 0;
      hi = 1;
    } else if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
      const double d = std::max(std::abs(hi) * 0.05, 1e-6);
      lo -= d;
      hi += d;
    }
  }
};

// Roughly `count` round-numbered ticks spanning [lo, hi].
std::vector<double> ticks(double lo, double hi, int count = 6) {
  const double raw = (hi - lo) / count;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return out;
}

std::string tick_label(double v) { return fmt::format("{:.4g}", v); }

class Canvas {
 public:
  Canvas(const std::string& title) {
    out_ += fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        kWidth, kHeight);
    out_ += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                        kLeft + plot_w() / 2, escape(title));
  }
  static double plot_w() { return kWidth - kLeft - kRight; }
  static double plot_h() { return kHeight - kTop - kBottom; }

  void y_axis(double lo, double hi, const std::string& label, bool log) {
    ylo_ = lo;
    yhi_ = hi;
    for (double t : ticks(lo, hi)) {
      const double y = py(t);
      out_ += fmt::format("<line x1=\"{}\" x2=\"{}\" y1=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#ddd\"/>\n", kLeft,
                          kLeft + plot_w(), y, y);
      out_ += fmt::format("<text x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\">{}</text>\n", kLeft - 6, y + 4,
                          log ? tick_label(std::pow(10.0, t)) : tick_label(t));
    }
    out_ += fmt::format(
        "<text transform=\"translate(18,{}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n", kTop + plot_h() / 2,
        escape(label));
  }
  void x_axis(double lo, double hi, const std::string& label) {
    xlo_ = lo;
    xhi_ = hi;
    for (double t : ticks(lo, hi)) {
      out_ += fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", px(t),
                          kTop + plot_h() + 18, tick_label(t));
    }
    x_label(label);
  }
  void x_label(const std::string& label) {
    out_ += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", kLeft + plot_w() / 2,
                        kHeight - 14, escape(label));
  }
  void frame() {
    out_ += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                        kLeft, kTop, plot_w(), plot_h());
  }
  double px(double x) const { return kLeft + (x - xlo_) / (xhi_ - xlo_) * plot_w(); }
  double py(double y) const { return kTop + (1.0 - (y - ylo_) / (yhi_ - ylo_)) * plot_h(); }
  std::string& body() { return out_; }
  std::string finish() { return out_ + "</svg>\n"; }

 private:
  std::string out_;
  double xlo_ = 0, xhi_ = 1, ylo_ = 0, yhi_ = 1;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

double quantile(std::vector<double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, sorted.size() - 1);
  return sorted[i] + (pos - static_cast<double>(i)) * (sorted[j] - sorted[i]);
}

}  // namespace

std::string render_svg(const LinePlot& plot) {
  auto ty = [&](double v) { return plot.log_y ? (v > 0 ? std::log10(v) : std::nan("")) : v; };
  Range xr, yr;
  for (const auto& s : plot.series) {
    if (s.x.size() != s.y.size()) throw InvalidInput("plot: series '" + s.label + "' has mismatched x and y");
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(ty(v));
  }
  xr.pad();
  yr.pad();
  Canvas c(plot.title);
  c.x_axis(xr.lo, xr.hi, plot.x_label);
  c.y_axis(yr.lo, yr.hi, plot.y_label, plot.log_y);
  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string path;
    bool pen_down = false;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double y = ty(s.y[i]);
      if (!std::isfinite(y) || !std::isfinite(s.x[i])) {
        pen_down = false;
        continue;
      }
      path += fmt::format("{}{:.2f},{:.2f} ", pen_down ? "L" : "M", c.px(s.x[i]), c.py(y));
      pen_down = true;
    }
    c.body() += fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>\n", path, color,
                            k == 0 && plot.series.size() > 1 ? 0.8 : 1.6);
    const double ly = kTop + 10 + 18 * static_cast<double>(k);
    c.body() += fmt::format("<line x1=\"{0}\" x2=\"{1}\" y1=\"{2}\" y2=\"{2}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                            kWidth - kRight + 12, kWidth - kRight + 32, ly, color);
    c.body() += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", kWidth - kRight + 38, ly + 4, escape(s.label));
  }
  c.frame();
  return c.finish();
}

std::string render_svg(const BoxPlot& plot) {
  if (plot.labels.size() != plot.groups.size()) throw InvalidInput("plot: one label per group");
  Range yr;
  for (const auto& g : plot.groups) {
    for (double v : g) yr.add(v);
  }
  yr.pad();
  const double span = yr.hi - yr.lo;
  yr.lo -= 0.05 * span;
  yr.hi += 0.05 * span;
  Canvas c(plot.title);
  c.y_axis(yr.lo, yr.hi, plot.y_label, false);
  c.x_label("");
  const double slot = Canvas::plot_w() / static_cast<double>(std::max<std::size_t>(1, plot.groups.size()));
  for (std::size_t k = 0; k < plot.groups.size(); ++k) {
    const double cx = kLeft + slot * (static_cast<double>(k) + 0.5);
    c.body() += fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", cx,
                            kTop + Canvas::plot_h() + 18, escape(plot.labels[k]));
    std::vector<double> v;
    for (double x : plot.groups[k]) {
      if (std::isfinite(x)) v.push_back(x);
    }
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    const double q1 = quantile(v, 0.25), med = quantile(v, 0.5), q3 = quantile(v, 0.75);
    double mean = 0;
    for (double x : v) mean += x / static_cast<double>(v.size());
    const double half = std::min(40.0, slot * 0.3);
    const char* color = kPalette[k % std::size(kPalette)];
    c.body() += fmt::format("<line x1=\"{0:.2f}\" x2=\"{0:.2f}\" y1=\"{1:.2f}\" y2=\"{2:.2f}\" stroke=\"black\"/>\n",
                            cx, c.py(v.front()), c.py(v.back()));
    c.body() += fmt::format(
        "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\" fill-opacity=\"0.35\" "
        "stroke=\"black\"/>\n",
        cx - half, c.py(q3), 2 * half, std::max(0.5, c.py(q1) - c.py(q3)), color);
    c.body() += fmt::format("<line x1=\"{0:.2f}\" x2=\"{1:.2f}\" y1=\"{2:.2f}\" y2=\"{2:.2f}\" stroke=\"black\" "
                            "stroke-width=\"2\"/>\n",
                            cx - half, cx + half, c.py(med));
    c.body() += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"white\" stroke=\"black\"/>\n", cx,
                            c.py(mean));
  }
  c.frame();
  return c.finish();
}

std::vector<HistoryRow> epoch_means(const std::vector<HistoryRow>& rows) {
  std::map<int, std::pair<HistoryRow, int>> acc;
  for (const auto& r : rows) {
    auto& [sum, n] = acc[r.epoch];
    sum.epoch = r.epoch;
    sum.step = r.step;
    sum.loss.adv_g += r.loss.adv_g;
    sum.loss.adv_d += r.loss.adv_d;
    sum.loss.freq += r.loss.freq;
    sum.loss.imag += r.loss.imag;
    sum.loss.total += r.loss.total;
    sum.lr = r.lr;
    ++n;
  }
  std::vector<HistoryRow> out;
  for (auto& [epoch, entry] : acc) {
    auto& [sum, n] = entry;
    const double d = n;
    sum.loss.adv_g /= d;
    sum.loss.adv_d /= d;
    sum.loss.freq /= d;
    sum.loss.imag /= d;
    sum.loss.total /= d;
    out.push_back(sum);
  }
  return out;
}

std::vector<std::filesystem::path> plot_history(const std::vector<HistoryRow>& rows,
                                                const std::filesystem::path& out_dir) {
  if (rows.empty()) throw InvalidInput("plot: empty history");
  std::filesystem::create_directories(out_dir);
  const auto means = epoch_means(rows);
  const int steps_per_epoch = static_cast<int>(rows.size() / means.size());

  struct Term {
    const char* name;
    const char* title;
    double (*get)(const HistoryRow&);
    bool log;
  };
  const Term terms[] = {
      {"total", "Total generator loss", [](const HistoryRow& r) { return r.loss.total; }, false},
      {"freq", "Frequency consistency loss", [](const HistoryRow& r) { return r.loss.freq; }, true},
      {"imag", "Image reconstruction loss", [](const HistoryRow& r) { return r.loss.imag; }, true},
      {"adv_g", "Generator adversarial loss", [](const HistoryRow& r) { return r.loss.adv_g; }, false},
      {"adv_d", "Critic loss", [](const HistoryRow& r) { return r.loss.adv_d; }, false},
      {"lr", "Learning rate", [](const HistoryRow& r) { return r.lr; }, false},
  };

  std::vector<std::filesystem::path> written;
  for (const auto& t : terms) {
    LinePlot p;
    p.title = t.title;
    p.x_label = "epoch";
    p.y_label = t.name;
    p.log_y = t.log;
    if (steps_per_epoch > 1 && std::string(t.name) != "lr") {
      Series steps{"per step", {}, {}};
      // Steps placed inside their epoch so both series share the x axis.
      std::map<int, int> seen;
      for (const auto& r : rows) {
        const int k = seen[r.epoch]++;
        steps.x.push_back(r.epoch - 1 + (k + 0.5) / steps_per_epoch);
        steps.y.push_back(t.get(r));
      }
      p.series.push_back(std::move(steps));
    }
    Series mean{"epoch mean", {}, {}};
    for (const auto& r : means) {
      mean.x.push_back(r.epoch);
      mean.y.push_back(t.get(r));
    }
    p.series.push_back(std::move(mean));
    const auto path = out_dir / (std::string("history_") + t.name + ".svg");
    write_text(path, render_svg(p));
    written.push_back(path);
  }
  return written;
}

std::vector<std::filesystem::path> plot_reports(const std::vector<std::string>& labels,
                                                const std::vector<EvaluationReport>& reports,
                                                const std::filesystem::path& out_dir) {
  if (labels.size() != reports.size() || reports.empty()) throw InvalidInput("plot: one label per report");
  std::filesystem::create_directories(out_dir);
  struct Metric {
    const char* name;
    const char* unit;
    double (*get)(const ReportRow&);
  };
  const Metric metrics[] = {
      {"psnr", "PSNR (dB)", [](const ReportRow& r) { return r.magnitude.psnr; }},
      {"ssim", "SSIM", [](const ReportRow& r) { return r.magnitude.ssim; }},
      {"nrmse", "NRMSE", [](const ReportRow& r) { return r.magnitude.nrmse; }},
  };
  std::vector<std::filesystem::path> written;
  for (const auto& m : metrics) {
    BoxPlot p;
    p.title = std::string(m.unit) + " per image";
    p.y_label = m.unit;
    p.labels = labels;
    for (const auto& rep : reports) {
      std::vector<double> g;
      for (const auto& row : rep.rows) g.push_back(m.get(row));
      p.groups.push_back(std::move(g));
    }
    const auto path = out_dir / (std::string("report_") + m.name + ".svg");
    write_text(path, render_svg(p));
    written.push_back(path);
  }
  return written;
}

}  // namespace refinegan
