#pragma once

#include <vector>

#include "refinegan/dataset.hpp"
#include "refinegan/masks.hpp"
#include "refinegan/metrics.hpp"
#include "refinegan/nn/networks.hpp"

namespace refinegan {

struct EvaluateOptions {
  /// Replace sampled k-space bins of the output by the measurement.
  bool data_consistency = false;
  std::string checkpoint_id;
};

/// Undersamples every test image (in raw intensity units) with `mask`,
/// reconstructs it and scores magnitude (and phase for complex data) against
/// the reference. One report per generator fold; the last is the final
/// reconstruction.
std::vector<EvaluationReport> evaluate_folds(nn::Generator& generator, const Dataset& test_set,
                                             const SamplingMask& mask, const EvaluateOptions& options = {});
EvaluationReport evaluate(nn::Generator& generator, const Dataset& test_set, const SamplingMask& mask,
                          const EvaluateOptions& options = {});
/// Builds the mask from `spec` at the dataset's shape.
EvaluationReport evaluate(nn::Generator& generator, const Dataset& test_set, MaskSpec spec,
                          const EvaluateOptions& options = {});

/// The zero-filling baseline under the same protocol.
EvaluationReport evaluate_zero_fill(const Dataset& test_set, const SamplingMask& mask);

/// Scores arbitrary reconstructions (raw units) against the test set.
EvaluationReport score(const Dataset& test_set, const std::vector<ComplexImage>& reconstructions,
                       const std::string& mask_description, const std::string& checkpoint_id);

std::string describe(const SamplingMask& mask);

}  // namespace refinegan
