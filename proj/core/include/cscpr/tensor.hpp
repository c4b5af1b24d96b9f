#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cscpr/geometry.hpp"

namespace cscpr {

class Rng;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Dense per-point features with the 3D position of each row.
struct FeatureMatrix {
  Matrix values;
  std::vector<Vec3> positions;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(values.cols()); }
  void validate() const;
};

/// Per-center features produced by a context-cluster reduction.
struct CenterFeatures {
  Matrix values;
  std::vector<Vec3> positions;
  std::size_t source_rows = 0;

  std::size_t centers() const noexcept { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(values.cols()); }
  void validate() const;
};

/// Whole-frame descriptor used for global retrieval.
struct GlobalDescriptor {
  Vector values;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(values.size()); }
  friend bool operator==(const GlobalDescriptor& a, const GlobalDescriptor& b) {
    return a.values.size() == b.values.size() && a.values == b.values;
  }
};

struct LinearLayer {
  Matrix weight;  // out x in
  Vector bias;    // out

  std::size_t in() const noexcept { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out() const noexcept { return static_cast<std::size_t>(weight.rows()); }

  /// Uniform in ±sqrt(1/fan_in) for both weight and bias.
  static LinearLayer init(std::size_t in, std::size_t out, Rng& rng);
  static LinearLayer zeros(std::size_t in, std::size_t out);
  LinearLayer zeros_like() const { return zeros(in(), out()); }
};

struct GroupNormParams {
  std::size_t num_groups = 4;
  Vector gamma;
  Vector shift;
  double epsilon = 1e-5;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(gamma.size()); }
  static GroupNormParams identity(std::size_t dim, std::size_t groups, double epsilon = 1e-5);
  GroupNormParams zeros_like() const;
  void validate() const;
};

struct GroupNormCache {
  Matrix normalized;  // x-hat
  Matrix inv_std;     // rows x groups
};

Matrix linear(const LinearLayer& layer, const Matrix& x);
FeatureMatrix linear(const LinearLayer& layer, const FeatureMatrix& x);
/// Accumulates parameter gradients into `grad` and returns dL/dx.
Matrix linear_backward(const LinearLayer& layer, const Matrix& x, const Matrix& dy,
                       LinearLayer& grad);

/// Per-row group normalization with learned scale and shift.
Matrix group_norm(const GroupNormParams& p, const Matrix& x, GroupNormCache* cache = nullptr);
FeatureMatrix group_norm(const GroupNormParams& p, const FeatureMatrix& x);
Matrix group_norm_backward(const GroupNormParams& p, const GroupNormCache& cache,
                           const Matrix& dy, GroupNormParams& grad);

/// Entry (i,j) is cos(a_i, b_j); rows with zero norm give 0.
Matrix cosine_similarity_matrix(const Matrix& a, const Matrix& b);
/// Adds dL/da and dL/db given dL/dcos.
void cosine_similarity_backward(const Matrix& a, const Matrix& b, const Matrix& cos,
                                const Matrix& dcos, Matrix& da, Matrix& db);

/// Cosine similarity of two descriptors; zero norm is an InvalidArgument.
double global_similarity(const GlobalDescriptor& a, const GlobalDescriptor& b);

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace cscpr
