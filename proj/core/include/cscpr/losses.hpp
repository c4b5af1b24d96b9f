#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cscpr/tensor.hpp"

namespace cscpr {

struct LossWeights {
  double beta_t = 1.0;
  double beta_c = 1.0;
  void validate() const;
};

struct Triplet {
  GlobalDescriptor anchor;
  GlobalDescriptor positive;
  GlobalDescriptor negative;
};

struct TripletBatch {
  std::vector<Triplet> triplets;
  double margin = 0.3;
};

/// Mean of max(0, d(a,p) - d(a,n) + margin) with d = 1 - cosine similarity.
/// An empty batch has loss 0.
double triplet_loss(const TripletBatch& batch);

/// -(y log r + (1-y) log(1-r)); r must lie in (0,1), y in {0,1}.
double rerank_cross_entropy(double r_s, int y);
/// Same loss evaluated from the pre-sigmoid logit without saturation.
double cross_entropy_from_logit(double logit, int y);

double total_loss(double lt, double lc, const LossWeights& w);

struct MiningCandidate {
  GlobalDescriptor descriptor;
  bool is_positive = false;
};

/// Indices of the `h` negatives most similar to the query, most similar first
/// (ties by index). No negatives gives an empty list.
std::vector<std::size_t> mine_hard_negatives(const GlobalDescriptor& query,
                                             std::span<const MiningCandidate> candidates,
                                             std::size_t h);

}  // namespace cscpr
