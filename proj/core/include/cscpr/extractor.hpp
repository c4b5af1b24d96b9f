#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cscpr/point_cloud.hpp"
#include "cscpr/tensor.hpp"

namespace cscpr {

struct ExtractorLayerConfig {
  std::size_t feature_dim = 64;
  std::size_t points_out = 800;  // FPS downsampling target
  std::size_t centers = 300;     // context-cluster centers
  std::size_t knn_k = 98;        // point-convolution neighborhood
  std::size_t cluster_k = 50;    // neighbors averaged into each center

  friend bool operator==(const ExtractorLayerConfig&, const ExtractorLayerConfig&) = default;
};

struct ExtractorConfig {
  std::vector<ExtractorLayerConfig> layers;
  std::size_t descriptor_dim = 512;
  std::size_t rerank_layer = 1;  // which layer's point features feed reranking

  /// Four layers of 64/128/320/512 channels on 800/300/100/40 points.
  static ExtractorConfig standard();
  /// Same shape at roughly a tenth of the cost, for tests and the toy set.
  static ExtractorConfig small();

  void validate() const;
  std::size_t rerank_dim() const { return layers.at(rerank_layer).feature_dim; }

  friend bool operator==(const ExtractorConfig&, const ExtractorConfig&) = default;
};

struct ExtractorLayerWeights {
  LinearLayer conv;  // (previous dim + 3) -> feature_dim
  double alpha = 1.0;
  double beta = 0.0;
};

struct ExtractorWeights {
  std::vector<ExtractorLayerWeights> layers;
  LinearLayer head;  // last feature_dim -> descriptor_dim

  static ExtractorWeights init(const ExtractorConfig& config, std::uint64_t seed);
  void check(const ExtractorConfig& config) const;

  template <class F>
  void for_each_tensor(F&& f) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string prefix = "extractor.layer" + std::to_string(l);
      f(prefix + ".conv.weight", layers[l].conv.weight.data(), layers[l].conv.weight.size());
      f(prefix + ".conv.bias", layers[l].conv.bias.data(), layers[l].conv.bias.size());
      f(prefix + ".alpha", &layers[l].alpha, Eigen::Index{1});
      f(prefix + ".beta", &layers[l].beta, Eigen::Index{1});
    }
    f(std::string("extractor.head.weight"), head.weight.data(), head.weight.size());
    f(std::string("extractor.head.bias"), head.bias.data(), head.bias.size());
  }
};

struct ExtractorOutput {
  FeatureMatrix point_features;  // rerank-layer features, canonical row order
  GlobalDescriptor descriptor;
};

/// Input channels: the nine raw columns (r,g,b,x,y,z,nx,ny,nz).
inline constexpr std::size_t kRawChannels = 9;

/// Runs the layer stack. Rows are first put into canonical order, so the
/// output does not depend on the input row order.
ExtractorOutput extract_features(const PointCloud& cloud, const ExtractorConfig& config,
                                 const ExtractorWeights& weights);

/// One context-cluster block: FPS centers, mean of the nearest `cluster_k`
/// points, similarity-weighted enhancement of each center by the points that
/// pick it as their best match, and additive dispatch back to those points.
Matrix context_cluster_block(const Matrix& features, const std::vector<Vec3>& positions,
                             std::size_t centers, std::size_t cluster_k, double alpha,
                             double beta);

struct Extractor {
  ExtractorConfig config;
  ExtractorWeights weights;

  ExtractorOutput operator()(const PointCloud& cloud) const {
    return extract_features(cloud, config, weights);
  }
};

}  // namespace cscpr
