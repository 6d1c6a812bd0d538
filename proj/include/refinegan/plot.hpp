#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "refinegan/metrics.hpp"
#include "refinegan/trainer.hpp"

namespace refinegan {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct LinePlot {
  std::string title, x_label, y_label;
  std::vector<Series> series;
  bool log_y = false;
};

/// One box (min, quartiles, max, mean marker) per group.
struct BoxPlot {
  std::string title, y_label;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> groups;
};

std::string render_svg(const LinePlot& plot);
std::string render_svg(const BoxPlot& plot);

/// One SVG per loss term plus the learning rate, per-step values with the
/// epoch mean overlaid. Returns the written files.
std::vector<std::filesystem::path> plot_history(const std::vector<HistoryRow>& rows,
                                                const std::filesystem::path& out_dir);

/// One SVG per metric with a box per labelled report.
std::vector<std::filesystem::path> plot_reports(const std::vector<std::string>& labels,
                                                const std::vector<EvaluationReport>& reports,
                                                const std::filesystem::path& out_dir);

/// Rows whose `epoch` share a value are averaged; x is the epoch.
std::vector<HistoryRow> epoch_means(const std::vector<HistoryRow>& rows);

}  // namespace refinegan
