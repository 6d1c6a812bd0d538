#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "refinegan/plot.hpp"

using namespace refinegan;
namespace fs = std::filesystem;

namespace {

std::size_t count(const std::string& text, const std::string& what) {
  std::size_t n = 0;
  for (auto pos = text.find(what); pos != std::string::npos; pos = text.find(what, pos + 1)) ++n;
  return n;
}

std::vector<HistoryRow> fake_history(int epochs, int steps) {
  std::vector<HistoryRow> rows;
  for (int e = 1; e <= epochs; ++e) {
    for (int s = 0; s < steps; ++s) {
      HistoryRow r;
      r.epoch = e;
      r.step = (e - 1) * steps + s + 1;
      r.loss = {-1.0, 2.0, 0.01 / e, 0.1 / e + 0.01 * s, 1.0 / e + 0.1 * s};
      r.lr = 1e-3 * (1.0 - (e - 1.0) / epochs);
      rows.push_back(r);
    }
  }
  return rows;
}

}  // namespace

TEST(Plot, EpochMeansAverageEachEpoch) {
  const auto means = epoch_means(fake_history(3, 4));
  ASSERT_EQ(means.size(), 3u);
  EXPECT_EQ(means[1].epoch, 2);
  EXPECT_NEAR(means[1].loss.total, 0.5 + 0.15, 1e-12);
  EXPECT_EQ(means[1].step, 8);
}

TEST(Plot, LinePlotIsWellFormedSvg) {
  LinePlot p;
  p.title = "a < b";
  p.series.push_back({"one", {0, 1, 2}, {1, 4, 9}});
  p.series.push_back({"two", {0, 1, 2}, {2, std::nan(""), 5}});
  const std::string svg = render_svg(p);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("a &lt; b"), std::string::npos);
  EXPECT_EQ(count(svg, "<path"), 2u);
  // The NaN breaks the second line into two pieces.
  const auto second = svg.substr(svg.rfind("<path"));
  EXPECT_EQ(count(second.substr(0, second.find("/>")), "M"), 2u);

  LinePlot bad;
  bad.series.push_back({"x", {0, 1}, {1}});
  EXPECT_THROW(render_svg(bad), InvalidInput);
}

TEST(Plot, HistoryWritesOneFilePerTerm) {
  const auto dir = fs::temp_directory_path() / "refinegan_test_plot" / "history";
  fs::remove_all(dir);
  const auto files = plot_history(fake_history(500, 1), dir);
  EXPECT_EQ(files.size(), 6u);
  for (const auto& f : files) EXPECT_GT(fs::file_size(f), 200u);
  EXPECT_THROW(plot_history({}, dir), InvalidInput);
}

TEST(Plot, ReportsWriteOneBoxPlotPerMetric) {
  EvaluationReport a, b;
  for (int i = 0; i < 5; ++i) {
    a.rows.push_back({"x", {20.0 + i, 0.5, 0.3}, std::nullopt});
    b.rows.push_back({"x", {kPsnrIdentical, 1.0, 0.0}, std::nullopt});
  }
  const auto dir = fs::temp_directory_path() / "refinegan_test_plot" / "reports";
  fs::remove_all(dir);
  const auto files = plot_reports({"zero-fill", "oracle"}, {a, b}, dir);
  ASSERT_EQ(files.size(), 3u);
  std::ifstream is(files[0]);
  std::stringstream ss;
  ss << is.rdbuf();
  // Infinite PSNRs are left out rather than drawn.
  EXPECT_EQ(count(ss.str(), "<rect x="), 2u);
  EXPECT_THROW(plot_reports({"one"}, {a, b}, dir), InvalidInput);
}
