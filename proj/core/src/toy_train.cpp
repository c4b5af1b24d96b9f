#include "cscpr/toy_train.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "cscpr/error.hpp"

namespace cscpr {

void ToyDataset::validate() const {
  if (features.size() != descriptors.size()) {
    throw InvalidArgument("toy dataset: features and descriptors differ in count");
  }
  bool has_pos = false;
  bool has_neg = false;
  for (const auto& p : pairs) {
    if (p.query >= features.size() || p.candidate >= features.size()) {
      throw InvalidArgument("toy dataset: pair references a missing frame");
    }
    if (p.label != 0 && p.label != 1) throw InvalidArgument("toy dataset: label must be 0 or 1");
    has_pos = has_pos || p.label == 1;
    has_neg = has_neg || p.label == 0;
  }
  if (!has_pos || !has_neg) {
    throw InvalidArgument("toy dataset needs at least one positive and one negative pair");
  }
}

double cosine_lr(const TrainConfig& config, std::size_t step) {
  if (config.steps <= 1) return config.lr_max;
  const double progress = static_cast<double>(step) / static_cast<double>(config.steps - 1);
  return config.lr_min +
         0.5 * (config.lr_max - config.lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

RerankObjective rerank_objective(const ToyDataset& data, const RerankParams& params,
                                 bool with_gradient) {
  if (data.pairs.empty()) throw InvalidArgument("rerank_objective: no pairs");

  std::map<std::size_t, SCCTrace> traces;
  std::map<std::size_t, CenterFeatures> centers;
  for (const auto& p : data.pairs) {
    for (std::size_t idx : {p.query, p.candidate}) {
      if (centers.count(idx) != 0) continue;
      SCCTrace trace;
      centers.emplace(idx, scc_forward(data.features.at(idx), params.scc, &trace));
      traces.emplace(idx, std::move(trace));
    }
  }

  RerankObjective obj;
  if (with_gradient) obj.grad = params.zeros_like();
  std::map<std::size_t, Matrix> d_centers;
  const double inv_pairs = 1.0 / static_cast<double>(data.pairs.size());

  for (const auto& p : data.pairs) {
    CSCCTrace trace;
    const auto& cq = centers.at(p.query);
    const auto& cd = centers.at(p.candidate);
    cscc_forward(cq, cd, params.cscc, &trace);
    obj.loss += cross_entropy_from_logit(trace.logit, p.label) * inv_pairs;
    if (!with_gradient) continue;

    const double d_logit = (trace.score - static_cast<double>(p.label)) * inv_pairs;
    CSCCGradient g = cscc_backward(params.cscc, trace, d_logit);
    Eigen::VectorXd acc = flatten_params(obj.grad.cscc) + flatten_params(g.params);
    assign_params(obj.grad.cscc, acc);

    for (auto [idx, d] : {std::pair{p.query, &g.d_query}, std::pair{p.candidate, &g.d_db}}) {
      auto it = d_centers.find(idx);
      if (it == d_centers.end()) {
        d_centers.emplace(idx, *d);
      } else {
        it->second += *d;
      }
    }
  }

  if (with_gradient) {
    Eigen::VectorXd scc_acc = flatten_params(obj.grad.scc);
    for (const auto& [idx, d] : d_centers) {
      SCCParams g = scc_backward(params.scc, traces.at(idx), d);
      scc_acc += flatten_params(g);
    }
    assign_params(obj.grad.scc, scc_acc);
  }
  return obj;
}

double mined_triplet_loss(const ToyDataset& data, const TrainConfig& config) {
  std::map<std::size_t, std::vector<const LabeledPair*>> by_query;
  for (const auto& p : data.pairs) by_query[p.query].push_back(&p);

  TripletBatch batch;
  batch.margin = config.margin;
  for (const auto& [q, pairs] : by_query) {
    const LabeledPair* positive = nullptr;
    std::vector<MiningCandidate> candidates;
    for (const auto* p : pairs) {
      if (p->label == 1 && positive == nullptr) positive = p;
      candidates.push_back({data.descriptors.at(p->candidate), p->label == 1});
    }
    if (positive == nullptr) continue;
    const auto hard =
        mine_hard_negatives(data.descriptors.at(q), candidates, config.hard_negatives);
    for (std::size_t h : hard) {
      batch.triplets.push_back({data.descriptors.at(q), data.descriptors.at(positive->candidate),
                                candidates[h].descriptor});
    }
  }
  return triplet_loss(batch);
}

std::vector<TrainRecord> toy_train(const ToyDataset& data, RerankParams& params,
                                   const TrainConfig& config) {
  data.validate();
  config.weights.validate();
  // The extractor is frozen, so the triplet term is constant during training.
  const double lt = mined_triplet_loss(data, config);

  std::vector<TrainRecord> history;
  history.reserve(config.steps);
  for (std::size_t step = 0; step < config.steps; ++step) {
    RerankObjective obj = rerank_objective(data, params, true);
    TrainRecord rec;
    rec.step = step;
    rec.lr = cosine_lr(config, step);
    rec.lt = lt;
    rec.lc = obj.loss;
    rec.total = total_loss(lt, obj.loss, config.weights);
    if (!std::isfinite(rec.total)) {
      throw NumericError("toy_train: non-finite loss at step " + std::to_string(step));
    }
    history.push_back(rec);

    Eigen::VectorXd theta = flatten_params(params);
    const Eigen::VectorXd grad = flatten_params(obj.grad);
    theta -= rec.lr * config.weights.beta_c * grad;
    if (!theta.allFinite()) {
      throw NumericError("toy_train: parameters diverged at step " + std::to_string(step));
    }
    assign_params(params, theta);
  }
  return history;
}

}  // namespace cscpr
