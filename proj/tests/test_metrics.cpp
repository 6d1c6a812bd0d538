#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "refinegan/metrics.hpp"
#include "refinegan/rng.hpp"

using namespace refinegan;

namespace {

RealImage random_real(int h, int w, Rng& rng, double scale = 1.0) {
  RealImage img(h, w);
  for (double& v : img.data) v = scale * rng.uniform();
  return img;
}

RealImage add_noise(const RealImage& ref, Rng& rng, double sigma) {
  RealImage out = ref;
  for (double& v : out.data) v += sigma * rng.normal();
  return out;
}

}  // namespace

TEST(Psnr, UniformOffsetGivesTwentyDb) {
  RealImage ref(16, 16);
  for (std::size_t i = 0; i < ref.size(); ++i) ref.data[i] = static_cast<double>(i) / (ref.size() - 1);
  RealImage test = ref;
  for (double& v : test.data) v += 0.1;
  EXPECT_NEAR(psnr(ref, test), 20.0, 1e-9);
}

TEST(Psnr, IdenticalIsSentinel) {
  Rng rng(1);
  const auto ref = random_real(16, 16, rng);
  EXPECT_EQ(psnr(ref, ref), kPsnrIdentical);
}

TEST(Psnr, FlatReferenceIsUndefined) {
  RealImage ref(8, 8, std::vector<double>(64, 0.5));
  RealImage test = ref;
  test.data[0] = 0.0;
  EXPECT_THROW(psnr(ref, test), UndefinedMetric);
}

TEST(Psnr, ShapeMismatchThrows) {
  EXPECT_THROW(psnr(RealImage(8, 8), RealImage(8, 9)), ShapeMismatch);
}

TEST(Metrics, MatchOraclesOnRandomPairs) {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ref = random_real(32, 32, rng);
    const auto test = add_noise(ref, rng, 0.02 + 0.01 * trial);
    EXPECT_NEAR(psnr(ref, test), oracle::psnr(ref, test), 1e-9);
    EXPECT_NEAR(ssim(ref, test), oracle::ssim(ref, test), 1e-6);
    EXPECT_NEAR(nrmse(ref, test), oracle::nrmse(ref, test), 1e-9);
  }
}

TEST(Ssim, IdentityIsOne) {
  Rng rng(3);
  const auto ref = random_real(24, 24, rng);
  EXPECT_NEAR(ssim(ref, ref), 1.0, 1e-12);
}

TEST(Ssim, NegatedZeroMeanIsNegative) {
  // Locally zero-mean as well: with white noise the local means flip sign
  // too and the luminance factor cancels the negative structure factor.
  RealImage ref(32, 32);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) ref(y, x) = ((x + y) % 2 ? 1.0 : -1.0) * (1.0 + 0.3 * std::cos(x * 0.2));
  }
  RealImage neg = ref;
  for (double& v : neg.data) v = -v;
  const double s = ssim(ref, neg);
  EXPECT_LT(s, 0.0);
  EXPECT_GE(s, -1.0);
}

TEST(Ssim, TooSmallImageThrows) {
  Rng rng(5);
  const auto ref = random_real(10, 32, rng);
  EXPECT_THROW(ssim(ref, ref), InvalidInput);
}

TEST(Nrmse, Analytic) {
  Rng rng(6);
  const auto ref = random_real(16, 16, rng);
  EXPECT_EQ(nrmse(ref, ref), 0.0);
  RealImage twice = ref;
  for (double& v : twice.data) v *= 2.0;
  EXPECT_NEAR(nrmse(ref, twice), 1.0, 1e-12);
  EXPECT_THROW(nrmse(RealImage(8, 8), RealImage(8, 8, std::vector<double>(64, 1.0))), UndefinedMetric);
}

TEST(Nrmse, ScaleRelation) {
  Rng rng(7);
  const auto ref = random_real(16, 16, rng);
  RealImage e(16, 16);
  for (double& v : e.data) v = 0.1 * rng.normal();
  RealImage test = ref;
  double ne = 0.0, nr = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    test.data[i] += e.data[i];
    ne += e.data[i] * e.data[i];
    nr += ref.data[i] * ref.data[i];
  }
  EXPECT_NEAR(nrmse(ref, test), std::sqrt(ne) / std::sqrt(nr), 1e-12);
}

TEST(Metrics, HigherNrmseMeansLowerPsnr) {
  Rng rng(8);
  const auto ref = random_real(32, 32, rng);
  RealImage dir(32, 32);
  for (double& v : dir.data) v = rng.normal();
  double last_psnr = std::numeric_limits<double>::infinity(), last_nrmse = 0.0;
  for (double scale : {0.01, 0.02, 0.05, 0.1, 0.3}) {
    RealImage test = ref;
    for (std::size_t i = 0; i < ref.size(); ++i) test.data[i] += scale * dir.data[i];
    const double p = psnr(ref, test), n = nrmse(ref, test);
    EXPECT_GT(n, last_nrmse);
    EXPECT_LT(p, last_psnr);
    last_psnr = p;
    last_nrmse = n;
  }
}

TEST(MagnitudePhase, OfComplexImage) {
  ComplexImage img(1, 2, {cplx(3, 4), cplx(0, -2)});
  const auto m = magnitude(img);
  const auto p = phase(img);
  EXPECT_DOUBLE_EQ(m.data[0], 5.0);
  EXPECT_DOUBLE_EQ(m.data[1], 2.0);
  EXPECT_DOUBLE_EQ(p.data[1], -std::numbers::pi / 2);
}

TEST(Report, AggregatesMatchRowMeans) {
  EvaluationReport r;
  Rng rng(9);
  std::vector<double> ps;
  for (int i = 0; i < 7; ++i) {
    ReportRow row{"img" + std::to_string(i), {20.0 + rng.uniform(), rng.uniform(), rng.uniform()}, std::nullopt};
    ps.push_back(row.magnitude.psnr);
    r.rows.push_back(row);
  }
  r.finalize();
  double mean = 0.0;
  for (double v : ps) mean += v;
  mean /= ps.size();
  double ss = 0.0;
  for (double v : ps) ss += (v - mean) * (v - mean);
  EXPECT_NEAR(r.psnr.mean, mean, 1e-9);
  EXPECT_NEAR(r.psnr.std, std::sqrt(ss / (ps.size() - 1)), 1e-9);
  EXPECT_FALSE(r.phase_psnr.has_value());
}

TEST(Report, SingleRowHasZeroStd) {
  const auto a = aggregate({3.0});
  EXPECT_EQ(a.mean, 3.0);
  EXPECT_EQ(a.std, 0.0);
}

TEST(Report, CsvAndSummary) {
  EvaluationReport r;
  r.rows.push_back({"a", {kPsnrIdentical, 1.0, 0.0}, MetricTriple{30.0, 0.9, 0.1}});
  r.rows.push_back({"b", {25.0, 0.8, 0.2}, MetricTriple{28.0, 0.7, 0.3}});
  r.mask_description = "radial 0.3";
  r.checkpoint_id = "ckpt";
  r.finalize();
  ASSERT_TRUE(r.phase_psnr.has_value());
  EXPECT_NEAR(r.phase_psnr->mean, 29.0, 1e-12);

  const auto dir = std::filesystem::temp_directory_path() / "refinegan_test_metrics";
  std::filesystem::create_directories(dir);
  r.write_csv(dir / "report.csv");
  r.write_summary(dir / "summary.json");

  std::ifstream csv(dir / "report.csv");
  std::string header, line;
  std::getline(csv, header);
  EXPECT_EQ(header, "id,psnr,ssim,nrmse,phase_psnr,phase_ssim,phase_nrmse");
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 2);

  std::ifstream js(dir / "summary.json");
  const auto j = nlohmann::json::parse(js);
  EXPECT_EQ(j["magnitude"]["psnr"]["mean"], "inf");
  EXPECT_EQ(j["checkpoint"], "ckpt");
  EXPECT_EQ(j["images"], 2);
  EXPECT_TRUE(j.contains("phase"));
}

TEST(Report, CsvReadBack) {
  EvaluationReport r;
  r.rows.push_back({"a", {kPsnrIdentical, 1.0, 0.0}, std::nullopt});
  r.rows.push_back({"b", {25.125, 0.8, 0.2}, std::nullopt});
  r.finalize();
  const auto dir = std::filesystem::temp_directory_path() / "refinegan_test_metrics";
  std::filesystem::create_directories(dir);
  r.write_csv(dir / "readback.csv");
  const auto back = read_report_csv(dir / "readback.csv");
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[0].magnitude.psnr, kPsnrIdentical);
  EXPECT_EQ(back.rows[1].magnitude.psnr, 25.125);
  EXPECT_EQ(back.rows[1].id, "b");
  EXPECT_FALSE(back.phase_psnr.has_value());
  std::ofstream(dir / "junk.csv") << "x,y\n1,2\n";
  EXPECT_THROW(read_report_csv(dir / "junk.csv"), MalformedFile);
}
