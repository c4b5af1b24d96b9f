#include <gtest/gtest.h>

#include <cmath>

#include "cscpr/error.hpp"
#include "cscpr/gradient_check.hpp"
#include "cscpr/losses.hpp"
#include "cscpr/synthetic.hpp"
#include "cscpr/toy_train.hpp"
#include "oracles.hpp"

using namespace cscpr;

namespace {

GlobalDescriptor desc(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return {x};
}

// Two small frames and a reranker sized for them.
struct Toy {
  ToyDataset data;
  RerankParams params;
};

Toy tiny_toy(std::uint64_t seed, std::size_t frames = 3) {
  Rng rng(seed);
  Toy t;
  for (std::size_t f = 0; f < frames; ++f) {
    t.data.features.push_back(oracle::random_features(rng, 16, 6));
    t.data.descriptors.push_back({Vector::NullaryExpr(4, [&] { return 1.0 + 0.1 * rng.normal(); })});
  }
  t.data.pairs = {{0, 1, 1}, {0, 2, 0}};
  t.params.scc = SCCParams::init(6, 8, 6, 3, 2, rng.next());
  t.params.cscc = CSCCParams::init(6, 5, 6, rng.next());
  return t;
}

}  // namespace

TEST(Triplet, Examples) {
  TripletBatch b;
  b.triplets.push_back({desc({1, 0}), desc({1, 0}), desc({0, 1})});
  EXPECT_EQ(triplet_loss(b), 0.0);

  TripletBatch same;
  same.triplets.push_back({desc({1, 2}), desc({1, 2}), desc({1, 2})});
  EXPECT_NEAR(triplet_loss(same), 0.3, 1e-15);

  TripletBatch none;
  EXPECT_EQ(triplet_loss(none), 0.0);

  TripletBatch zero_margin;
  zero_margin.margin = 0;
  for (int i = 0; i < 20; ++i) {
    zero_margin.triplets.push_back({{Vector::Random(3)}, {Vector::Random(3)}, {Vector::Random(3)}});
  }
  EXPECT_GE(triplet_loss(zero_margin), 0.0);

  TripletBatch bad;
  bad.triplets.push_back({desc({0, 0}), desc({1, 0}), desc({0, 1})});
  EXPECT_THROW(triplet_loss(bad), InvalidArgument);
}

TEST(CrossEntropy, ClosedForms) {
  EXPECT_NEAR(rerank_cross_entropy(0.5, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(rerank_cross_entropy(0.5, 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(rerank_cross_entropy(std::exp(-1.0), 1), 1.0, 1e-15);
  EXPECT_THROW(rerank_cross_entropy(0.0, 1), InvalidArgument);
  EXPECT_THROW(rerank_cross_entropy(1.0, 0), InvalidArgument);
  EXPECT_THROW(rerank_cross_entropy(0.5, 2), InvalidArgument);
  EXPECT_NEAR(cross_entropy_from_logit(0.3, 1), rerank_cross_entropy(sigmoid(0.3), 1), 1e-15);
  EXPECT_NEAR(cross_entropy_from_logit(-2.0, 0), rerank_cross_entropy(sigmoid(-2.0), 0), 1e-15);
}

TEST(CrossEntropy, MonotoneInScore) {
  double prev1 = INFINITY, prev0 = -INFINITY;
  for (int i = 1; i < 100; ++i) {
    const double r = i / 100.0;
    const double l1 = rerank_cross_entropy(r, 1), l0 = rerank_cross_entropy(r, 0);
    EXPECT_LT(l1, prev1);
    EXPECT_GT(l0, prev0);
    prev1 = l1;
    prev0 = l0;
  }
}

TEST(TotalLoss, Examples) {
  EXPECT_EQ(total_loss(1.0, 2.0, {}), 3.0);
  EXPECT_EQ(total_loss(1.5, 2.0, {1.0, 0.0}), 1.5);
  EXPECT_EQ(total_loss(0, 0, {}), 0.0);
  LossWeights neg{-1, 1};
  EXPECT_THROW(neg.validate(), InvalidArgument);
}

TEST(Mining, ExamplesAndSortOracle) {
  const auto q = desc({1, 0});
  std::vector<MiningCandidate> one{{desc({0, 1}), false}};
  EXPECT_EQ(mine_hard_negatives(q, one, 3), (std::vector<std::size_t>{0}));

  std::vector<MiningCandidate> two{{desc({0.1, 1}), false}, {desc({1, 0.1}), false}, {desc({1, 0}), true}};
  EXPECT_EQ(mine_hard_negatives(q, two, 1), (std::vector<std::size_t>{1}));

  std::vector<MiningCandidate> pos{{desc({1, 1}), true}};
  EXPECT_TRUE(mine_hard_negatives(q, pos, 5).empty());

  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    std::vector<MiningCandidate> c;
    for (int i = 0; i < 15; ++i) {
      c.push_back({{Vector::NullaryExpr(3, [&] { return rng.normal(); })}, rng.below(3) == 0});
    }
    const GlobalDescriptor query{Vector::NullaryExpr(3, [&] { return rng.normal(); })};
    std::vector<std::size_t> want;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!c[i].is_positive) want.push_back(i);
    }
    std::stable_sort(want.begin(), want.end(), [&](std::size_t a, std::size_t b) {
      return global_similarity(query, c[a].descriptor) > global_similarity(query, c[b].descriptor);
    });
    want.resize(std::min<std::size_t>(want.size(), 4));
    EXPECT_EQ(mine_hard_negatives(query, c, 4), want);
  }
}

TEST(VerifyGradient, Examples) {
  const ScalarFunction sq = [](const Eigen::VectorXd& v) { return v[0] * v[0]; };
  EXPECT_LE(verify_gradient(sq, Eigen::VectorXd::Constant(1, 3.0), Eigen::VectorXd::Constant(1, 6.0)), 1e-7);

  const ScalarFunction flat = [](const Eigen::VectorXd&) { return 4.0; };
  EXPECT_EQ(verify_gradient(flat, Eigen::VectorXd::Ones(3), Eigen::VectorXd::Zero(3)), 0.0);

  EXPECT_GT(verify_gradient(sq, Eigen::VectorXd::Constant(1, 3.0), Eigen::VectorXd::Constant(1, 5.0)), 0.05);

  const ScalarFunction bad = [](const Eigen::VectorXd& v) { return std::log(v[0]); };
  EXPECT_THROW(verify_gradient(bad, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)), NumericError);
}

TEST(VerifyGradient, CsccTwoCenterToy) {
  Rng rng(5);
  auto p = oracle::random_cscc(rng, 3, 4, 4);
  const auto q = oracle::random_centers(rng, 2, 3);
  const auto d = oracle::random_centers(rng, 2, 3);
  for (int y : {0, 1}) {
    CSCCTrace tr;
    const double r = cscc_forward(q, d, p, &tr);
    const auto g = cscc_backward(p, tr, r - y);  // dCE/dlogit
    Eigen::VectorXd theta(3 + p.l_f.weight.size());
    Eigen::VectorXd analytic(theta.size());
    theta << p.alpha, p.beta, p.l_f.bias[0], p.l_f.weight.row(0).transpose();
    analytic << g.params.alpha, g.params.beta, g.params.l_f.bias[0], g.params.l_f.weight.row(0).transpose();
    const ScalarFunction f = [&](const Eigen::VectorXd& v) {
      CSCCParams probe = p;
      probe.alpha = v[0];
      probe.beta = v[1];
      probe.l_f.bias[0] = v[2];
      probe.l_f.weight.row(0) = v.tail(v.size() - 3).transpose();
      return rerank_cross_entropy(cscc_forward(q, d, probe), y);
    };
    EXPECT_LE(verify_gradient(f, theta, analytic), 1e-4);
  }
}

TEST(VerifyGradient, FullRerankObjective) {
  const auto t = tiny_toy(7);
  RerankParams params = t.params;
  const auto obj = rerank_objective(t.data, params, true);
  RerankParams grad = obj.grad;
  RerankParams probe = params;
  const ScalarFunction f = [&](const Eigen::VectorXd& v) {
    assign_params(probe, v);
    return rerank_objective(t.data, probe, false).loss;
  };
  EXPECT_LE(verify_gradient(f, flatten_params(params), flatten_params(grad)), 1e-4);
}

TEST(GradCheck, ReportCoversEveryBlock) {
  const auto rep = check_rerank_gradients(3, 0);
  EXPECT_EQ(rep.instances, 3u);
  RerankParams p;
  p.scc = SCCParams::init(6, 8, 6, 3, 2, 0);
  p.cscc = CSCCParams::init(6, 5, 4, 0);
  for (const auto& b : param_blocks(p)) EXPECT_TRUE(rep.block_max_error.count(b.name)) << b.name;
  EXPECT_LE(rep.max_error, 1e-4);
}

TEST(Params, FlattenRoundTrip) {
  auto t = tiny_toy(9);
  const auto flat = flatten_params(t.params);
  RerankParams other = t.params.zeros_like();
  assign_params(other, flat);
  EXPECT_EQ(flatten_params(other), flat);
  std::size_t total = 0;
  for (const auto& b : param_blocks(t.params)) total += b.size;
  EXPECT_EQ(total, static_cast<std::size_t>(flat.size()));
}

TEST(Schedule, CosineEndpoints) {
  TrainConfig c;
  EXPECT_DOUBLE_EQ(cosine_lr(c, 0), 1e-4);
  EXPECT_NEAR(cosine_lr(c, c.steps - 1), 1e-7, 1e-20);
  for (std::size_t s = 1; s < c.steps; ++s) EXPECT_LE(cosine_lr(c, s), cosine_lr(c, s - 1));
}

TEST(ToyTrain, ZeroRateIsFlat) {
  auto t = tiny_toy(11);
  TrainConfig c;
  c.steps = 4;
  c.lr_max = c.lr_min = 0;
  const auto before = flatten_params(t.params);
  const auto h = toy_train(t.data, t.params, c);
  ASSERT_EQ(h.size(), 4u);
  for (const auto& r : h) EXPECT_EQ(r.total, h.front().total);
  EXPECT_EQ(flatten_params(t.params), before);
}

TEST(ToyTrain, SinglePositivePairDescends) {
  auto t = tiny_toy(13, 2);
  t.data.pairs = {{0, 1, 1}};
  TrainConfig c;
  c.steps = 30;
  c.lr_max = 0.5;
  c.lr_min = 0.05;
  // A single pair has no negative; train on the objective directly.
  const double before = rerank_objective(t.data, t.params, false).loss;
  for (std::size_t s = 0; s < c.steps; ++s) {
    auto obj = rerank_objective(t.data, t.params, true);
    const Eigen::VectorXd step = flatten_params(obj.grad);
    assign_params(t.params, flatten_params(t.params) - cosine_lr(c, s) * step);
  }
  EXPECT_LT(rerank_objective(t.data, t.params, false).loss, before);
}

TEST(ToyTrain, DeterministicAndLogsAllTerms) {
  auto a = tiny_toy(15);
  auto b = tiny_toy(15);
  TrainConfig c;
  c.steps = 5;
  const auto ha = toy_train(a.data, a.params, c);
  const auto hb = toy_train(b.data, b.params, c);
  ASSERT_EQ(ha.size(), hb.size());
  for (std::size_t i = 0; i < ha.size(); ++i) {
    EXPECT_EQ(ha[i].total, hb[i].total);
    EXPECT_EQ(ha[i].total, total_loss(ha[i].lt, ha[i].lc, c.weights));
  }
  EXPECT_EQ(flatten_params(a.params), flatten_params(b.params));
}

TEST(ToyTrain, RejectsOneSidedData) {
  auto t = tiny_toy(17);
  t.data.pairs = {{0, 1, 1}};
  EXPECT_THROW(toy_train(t.data, t.params, {}), InvalidArgument);
}

TEST(ToyTrain, DivergenceNamesStep) {
  auto t = tiny_toy(19);
  TrainConfig c;
  c.steps = 50;
  c.lr_max = c.lr_min = 1e200;
  try {
    toy_train(t.data, t.params, c);
    FAIL() << "expected divergence";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(ToyDataset, BundledSetShape) {
  const auto d = make_toy_dataset(0);
  EXPECT_EQ(d.pairs.size(), 10u);
  std::size_t pos = 0;
  for (const auto& p : d.pairs) pos += p.label;
  EXPECT_EQ(pos, 5u);
  EXPECT_NO_THROW(d.validate());
  const auto c = ExtractorConfig::small();
  for (const auto& f : d.features) {
    EXPECT_EQ(f.rows(), c.layers[c.rerank_layer].points_out);
    EXPECT_EQ(f.dim(), c.rerank_dim());
  }
}
