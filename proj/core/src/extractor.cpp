#include "cscpr/extractor.hpp"

#include <algorithm>
#include <limits>

#include "cscpr/error.hpp"
#include "cscpr/rng.hpp"
#include "cscpr/sampling.hpp"

namespace cscpr {

ExtractorConfig ExtractorConfig::standard() {
  ExtractorConfig c;
  c.layers = {
      {64, 800, 300, 98, 50},
      {128, 300, 100, 50, 20},
      {320, 100, 40, 20, 10},
      {512, 40, 20, 10, 10},
  };
  c.descriptor_dim = 512;
  c.rerank_layer = 1;
  return c;
}

ExtractorConfig ExtractorConfig::small() {
  ExtractorConfig c;
  c.layers = {
      {16, 160, 60, 16, 10},
      {32, 60, 20, 10, 6},
      {48, 24, 8, 6, 4},
      {64, 10, 4, 4, 3},
  };
  c.descriptor_dim = 64;
  c.rerank_layer = 1;
  return c;
}

void ExtractorConfig::validate() const {
  if (layers.empty()) throw InvalidArgument("extractor config needs at least one layer");
  if (descriptor_dim == 0) throw InvalidArgument("descriptor_dim must be positive");
  if (rerank_layer >= layers.size()) throw InvalidArgument("rerank_layer out of range");
  std::size_t prev_points = std::numeric_limits<std::size_t>::max();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const std::string at = "extractor layer " + std::to_string(l) + ": ";
    if (layer.feature_dim == 0 || layer.points_out == 0 || layer.centers == 0 ||
        layer.knn_k == 0 || layer.cluster_k == 0) {
      throw InvalidArgument(at + "all sizes must be positive");
    }
    if (layer.points_out > prev_points) throw InvalidArgument(at + "point counts must not grow");
    if (layer.centers > layer.points_out) throw InvalidArgument(at + "more centers than points");
    prev_points = layer.points_out;
  }
}

ExtractorWeights ExtractorWeights::init(const ExtractorConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed, 0xE7);
  ExtractorWeights w;
  std::size_t in = kRawChannels;
  for (const auto& layer : config.layers) {
    w.layers.push_back({LinearLayer::init(in + 3, layer.feature_dim, rng), 1.0, 0.0});
    in = layer.feature_dim;
  }
  w.head = LinearLayer::init(in, config.descriptor_dim, rng);
  return w;
}

void ExtractorWeights::check(const ExtractorConfig& config) const {
  if (layers.size() != config.layers.size()) {
    throw InvalidArgument("extractor weights do not match the layer count");
  }
  std::size_t in = kRawChannels;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].conv.in() != in + 3 || layers[l].conv.out() != config.layers[l].feature_dim) {
      throw InvalidArgument("extractor weights layer " + std::to_string(l) + " has wrong shape");
    }
    in = config.layers[l].feature_dim;
  }
  if (head.in() != in || head.out() != config.descriptor_dim) {
    throw InvalidArgument("extractor head has wrong shape");
  }
}

Matrix context_cluster_block(const Matrix& features, const std::vector<Vec3>& positions,
                             std::size_t centers, std::size_t cluster_k, double alpha,
                             double beta) {
  const std::size_t n = positions.size();
  const auto center_idx = farthest_point_sample(positions, centers);
  std::vector<Vec3> center_pos(centers);
  for (std::size_t i = 0; i < centers; ++i) center_pos[i] = positions[center_idx[i]];
  const auto nb = knn(center_pos, positions, cluster_k);

  Matrix center_feat = Matrix::Zero(static_cast<Eigen::Index>(centers), features.cols());
  for (std::size_t i = 0; i < centers; ++i) {
    for (std::size_t j : nb.row(i)) {
      center_feat.row(static_cast<Eigen::Index>(i)) += features.row(static_cast<Eigen::Index>(j));
    }
  }
  center_feat /= static_cast<double>(cluster_k);

  const Matrix sim = cosine_similarity_matrix(center_feat, features).unaryExpr(
      [&](double c) { return sigmoid(alpha * c + beta); });
  std::vector<std::size_t> owner(n, 0);
  std::vector<double> weight(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    std::size_t best = 0;
    for (std::size_t i = 1; i < centers; ++i) {
      if (sim(static_cast<Eigen::Index>(i), col) > sim(static_cast<Eigen::Index>(best), col)) {
        best = i;
      }
    }
    owner[j] = best;
    weight[j] = sim(static_cast<Eigen::Index>(best), col);
  }

  Matrix numer = center_feat;
  Vector denom = Vector::Ones(static_cast<Eigen::Index>(centers));
  for (std::size_t j = 0; j < n; ++j) {
    const auto i = static_cast<Eigen::Index>(owner[j]);
    numer.row(i) += weight[j] * features.row(static_cast<Eigen::Index>(j));
    denom[i] += weight[j];
  }
  const Matrix enhanced = numer.array().colwise() / denom.array();

  Matrix out = features;
  for (std::size_t j = 0; j < n; ++j) {
    out.row(static_cast<Eigen::Index>(j)) += enhanced.row(static_cast<Eigen::Index>(owner[j]));
  }
  return out;
}

ExtractorOutput extract_features(const PointCloud& cloud, const ExtractorConfig& config,
                                 const ExtractorWeights& weights) {
  config.validate();
  weights.check(config);
  if (cloud.size() < config.layers.back().points_out) {
    throw InvalidArgument("extract_features: cloud has " + std::to_string(cloud.size()) +
                          " points, needs at least " +
                          std::to_string(config.layers.back().points_out));
  }

  const PointCloud canon = canonical_order(cloud);
  std::vector<Vec3> pos = canon.positions();
  Matrix feat(static_cast<Eigen::Index>(canon.size()), static_cast<Eigen::Index>(kRawChannels));
  for (std::size_t i = 0; i < canon.size(); ++i) {
    const auto row = canon[i].row();
    for (std::size_t c = 0; c < kRawChannels; ++c) {
      feat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
    }
  }

  ExtractorOutput out;
  for (std::size_t l = 0; l < config.layers.size(); ++l) {
    const auto& lc = config.layers[l];
    const auto& lw = weights.layers[l];
    const std::size_t n_prev = pos.size();
    const std::size_t n_out = std::min(lc.points_out, n_prev);
    const std::size_t k = std::min(lc.knn_k, n_prev);

    const auto sel = farthest_point_sample(pos, n_out);
    std::vector<Vec3> sel_pos(n_out);
    for (std::size_t i = 0; i < n_out; ++i) sel_pos[i] = pos[sel[i]];
    const auto nb = knn(sel_pos, pos, k);

    // Point convolution: W [f_j, p_j - p_i] + b, max over neighbors j. The
    // linear map splits into a per-neighbor term and a per-center term.
    const Eigen::Index din = feat.cols();
    const auto w_feat = lw.conv.weight.leftCols(din);
    const auto w_pos = lw.conv.weight.rightCols(3);
    Matrix prev_pos(static_cast<Eigen::Index>(n_prev), 3);
    for (std::size_t i = 0; i < n_prev; ++i) prev_pos.row(static_cast<Eigen::Index>(i)) = pos[i];
    Matrix out_pos(static_cast<Eigen::Index>(n_out), 3);
    for (std::size_t i = 0; i < n_out; ++i) out_pos.row(static_cast<Eigen::Index>(i)) = sel_pos[i];
    const Matrix per_neighbor = feat * w_feat.transpose() + prev_pos * w_pos.transpose();
    const Matrix per_center = out_pos * w_pos.transpose();

    const auto dout = static_cast<Eigen::Index>(lc.feature_dim);
    Matrix next(static_cast<Eigen::Index>(n_out), dout);
    for (std::size_t i = 0; i < n_out; ++i) {
      Eigen::RowVectorXd best =
          Eigen::RowVectorXd::Constant(dout, -std::numeric_limits<double>::infinity());
      for (std::size_t j : nb.row(i)) {
        best = best.cwiseMax(per_neighbor.row(static_cast<Eigen::Index>(j)));
      }
      next.row(static_cast<Eigen::Index>(i)) =
          best - per_center.row(static_cast<Eigen::Index>(i)) + lw.conv.bias.transpose();
    }

    const std::size_t centers = std::min(lc.centers, n_out);
    const std::size_t ck = std::min(lc.cluster_k, n_out);
    feat = context_cluster_block(next, sel_pos, centers, ck, lw.alpha, lw.beta);
    pos = std::move(sel_pos);

    if (l == config.rerank_layer) out.point_features = {feat, pos};
  }

  const Matrix head = linear(weights.head, feat);
  out.descriptor.values = head.colwise().maxCoeff().transpose();
  if (!out.descriptor.values.allFinite()) {
    throw NumericError("extract_features produced a non-finite descriptor");
  }
  return out;
}

}  // namespace cscpr
