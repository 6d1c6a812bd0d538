#include "refinegan/evaluate.hpp"

#include <fmt/format.h>

#include "refinegan/trainer.hpp"

namespace refinegan {

std::string describe(const SamplingMask& mask) {
  return fmt::format("{} nominal {:.2f} actual {:.4f} {}x{} seed {}", to_string(mask.pattern), mask.nominal_rate,
                     mask_rate(mask), mask.height(), mask.width(), mask.seed);
}

namespace {

std::vector<ComplexImage> raw_references(const Dataset& d) {
  std::vector<ComplexImage> out;
  for (std::size_t i = 0; i < d.size(); ++i) out.push_back(denormalize(d.items[i], d.normalization[i]));
  return out;
}

void check_mask(const Dataset& d, const SamplingMask& mask) {
  if (d.empty()) throw InvalidInput("evaluate: empty test set");
  if (mask.height() != d.height() || mask.width() != d.width()) {
    throw ShapeMismatch(fmt::format("evaluate: mask {}x{} vs images {}x{}", mask.height(), mask.width(), d.height(),
                                    d.width()));
  }
}

}  // namespace

EvaluationReport score(const Dataset& test_set, const std::vector<ComplexImage>& reconstructions,
                       const std::string& mask_description, const std::string& checkpoint_id) {
  if (reconstructions.size() != test_set.size()) throw InvalidInput("score: one reconstruction per test image");
  EvaluationReport report;
  report.mask_description = mask_description;
  report.checkpoint_id = checkpoint_id;
  const auto refs = raw_references(test_set);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    ReportRow row;
    row.id = test_set.ids.empty() ? std::to_string(i) : test_set.ids[i];
    row.magnitude = compare(magnitude(refs[i]), magnitude(reconstructions[i]));
    if (test_set.complex_valued) row.phase = compare(phase(refs[i]), phase(reconstructions[i]));
    report.rows.push_back(std::move(row));
  }
  report.finalize();
  return report;
}

std::vector<EvaluationReport> evaluate_folds(nn::Generator& generator, const Dataset& test_set,
                                             const SamplingMask& mask, const EvaluateOptions& options) {
  check_mask(test_set, mask);
  const auto refs = raw_references(test_set);
  std::vector<KSpaceMeasurement> ms;
  for (const auto& r : refs) ms.push_back(undersample(r, mask));
  const auto recon = reconstruct_all(generator, ms, test_set.normalization);

  std::vector<EvaluationReport> reports;
  const std::size_t folds = recon.front().size();
  for (std::size_t k = 0; k < folds; ++k) {
    std::vector<ComplexImage> images;
    for (std::size_t i = 0; i < recon.size(); ++i) {
      images.push_back(options.data_consistency ? data_consistency_project(recon[i][k], ms[i]) : recon[i][k]);
    }
    std::string id = options.checkpoint_id;
    if (folds > 1) id += fmt::format("{}fold{}", id.empty() ? "" : "/", k + 1);
    reports.push_back(score(test_set, images, describe(mask), id));
  }
  return reports;
}

EvaluationReport evaluate(nn::Generator& generator, const Dataset& test_set, const SamplingMask& mask,
                          const EvaluateOptions& options) {
  auto reports = evaluate_folds(generator, test_set, mask, options);
  EvaluationReport last = std::move(reports.back());
  last.checkpoint_id = options.checkpoint_id;
  return last;
}

EvaluationReport evaluate(nn::Generator& generator, const Dataset& test_set, MaskSpec spec,
                          const EvaluateOptions& options) {
  spec.height = test_set.height();
  spec.width = test_set.width();
  return evaluate(generator, test_set, generate_mask(spec), options);
}

EvaluationReport evaluate_zero_fill(const Dataset& test_set, const SamplingMask& mask) {
  check_mask(test_set, mask);
  std::vector<ComplexImage> images;
  for (const auto& r : raw_references(test_set)) images.push_back(zero_fill(undersample(r, mask)));
  return score(test_set, images, describe(mask), "zero-fill");
}

}  // namespace refinegan
