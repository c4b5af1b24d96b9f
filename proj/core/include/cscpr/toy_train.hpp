#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cscpr/losses.hpp"
#include "cscpr/params.hpp"
#include "cscpr/tensor.hpp"

namespace cscpr {

struct LabeledPair {
  std::size_t query = 0;
  std::size_t candidate = 0;
  int label = 0;
};

/// Frozen-extractor outputs for a handful of frames plus labeled pairs.
struct ToyDataset {
  std::vector<FeatureMatrix> features;
  std::vector<GlobalDescriptor> descriptors;
  std::vector<LabeledPair> pairs;

  void validate() const;
};

struct TrainConfig {
  std::size_t steps = 200;
  double lr_max = 1e-4;
  double lr_min = 1e-7;
  LossWeights weights;
  double margin = 0.3;
  std::size_t hard_negatives = 5;
  std::uint64_t seed = 0;
};

struct TrainRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double lt = 0.0;
  double lc = 0.0;
  double total = 0.0;
};

/// Cosine annealing from lr_max at step 0 to lr_min at the last step.
double cosine_lr(const TrainConfig& config, std::size_t step);

struct RerankObjective {
  double loss = 0.0;  // mean cross-entropy over pairs
  RerankParams grad;  // filled when requested
};

/// Mean rerank cross-entropy over the dataset's pairs and its gradient.
RerankObjective rerank_objective(const ToyDataset& data, const RerankParams& params,
                                 bool with_gradient);

/// Triplet term from hard-negative mining over each query's labeled pairs.
double mined_triplet_loss(const ToyDataset& data, const TrainConfig& config);

/// Full-batch gradient descent on the reranker. Throws NumericError naming
/// the step if the loss becomes non-finite.
std::vector<TrainRecord> toy_train(const ToyDataset& data, RerankParams& params,
                                   const TrainConfig& config);

}  // namespace cscpr
