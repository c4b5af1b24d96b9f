#include "cscpr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cscpr/error.hpp"

namespace cscpr {

void LossWeights::validate() const {
  if (!(beta_t >= 0.0) || !(beta_c >= 0.0)) throw InvalidArgument("loss weights must be >= 0");
}

double triplet_loss(const TripletBatch& batch) {
  if (!(batch.margin >= 0.0)) throw InvalidArgument("triplet margin must be >= 0");
  if (batch.triplets.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& t : batch.triplets) {
    if (t.anchor.dim() != t.positive.dim() || t.anchor.dim() != t.negative.dim()) {
      throw InvalidArgument("triplet descriptors must share one dimension");
    }
    const double d_ap = 1.0 - global_similarity(t.anchor, t.positive);
    const double d_an = 1.0 - global_similarity(t.anchor, t.negative);
    acc += std::max(0.0, d_ap - d_an + batch.margin);
  }
  return acc / static_cast<double>(batch.triplets.size());
}

double rerank_cross_entropy(double r_s, int y) {
  if (!(r_s > 0.0 && r_s < 1.0)) throw InvalidArgument("rerank score must lie in (0,1)");
  if (y != 0 && y != 1) throw InvalidArgument("rerank label must be 0 or 1");
  return y == 1 ? -std::log(r_s) : -std::log1p(-r_s);
}

double cross_entropy_from_logit(double logit, int y) {
  if (y != 0 && y != 1) throw InvalidArgument("rerank label must be 0 or 1");
  // softplus(x) = -log(sigmoid(-x))
  const double x = y == 1 ? -logit : logit;
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double total_loss(double lt, double lc, const LossWeights& w) {
  w.validate();
  return w.beta_t * lt + w.beta_c * lc;
}

std::vector<std::size_t> mine_hard_negatives(const GlobalDescriptor& query,
                                             std::span<const MiningCandidate> candidates,
                                             std::size_t h) {
  std::vector<std::size_t> negatives;
  std::vector<double> sim(candidates.size(), 0.0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].is_positive) continue;
    negatives.push_back(i);
    sim[i] = global_similarity(query, candidates[i].descriptor);
  }
  std::stable_sort(negatives.begin(), negatives.end(),
                   [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
  if (negatives.size() > h) negatives.resize(h);
  return negatives;
}

}  // namespace cscpr
