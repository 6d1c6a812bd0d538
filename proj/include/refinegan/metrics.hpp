#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "refinegan/kspace.hpp"

namespace refinegan {

struct RealImage {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  RealImage() = default;
  RealImage(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w) {}
  RealImage(int h, int w, std::vector<double> values);

  double operator()(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  double& operator()(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return data.size(); }
};

RealImage magnitude(const ComplexImage& img);
RealImage phase(const ComplexImage& img);

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 20 log10(peak / RMSE), peak = max(ref) - min(ref). Identical inputs give
/// kPsnrIdentical; a flat reference throws UndefinedMetric.
double psnr(const RealImage& ref, const RealImage& test);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over all fully contained Gaussian windows, dynamic range taken
/// from the reference.
double ssim(const RealImage& ref, const RealImage& test, const SsimOptions& opt = {});

/// ||test - ref||_2 / ||ref||_2.
double nrmse(const RealImage& ref, const RealImage& test);

struct MetricTriple {
  double psnr = 0.0;
  double ssim = 0.0;
  double nrmse = 0.0;
};

MetricTriple compare(const RealImage& ref, const RealImage& test);

struct ReportRow {
  std::string id;
  MetricTriple magnitude;
  std::optional<MetricTriple> phase;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single row
};

struct EvaluationReport {
  std::vector<ReportRow> rows;
  Aggregate psnr, ssim, nrmse;
  std::optional<Aggregate> phase_psnr, phase_ssim, phase_nrmse;
  std::string mask_description;
  std::string checkpoint_id;

  /// Recomputes the aggregates from rows.
  void finalize();

  /// id,psnr,ssim,nrmse[,phase_psnr,phase_ssim,phase_nrmse]
  void write_csv(const std::filesystem::path& path) const;
  /// Aggregates plus metadata as JSON; infinite PSNR is written as "inf".
  void write_summary(const std::filesystem::path& path) const;
};

Aggregate aggregate(const std::vector<double>& values);

/// Reads a file written by write_csv; aggregates are recomputed.
EvaluationReport read_report_csv(const std::filesystem::path& path);

}  // namespace refinegan
