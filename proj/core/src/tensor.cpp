#include "cscpr/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "cscpr/error.hpp"
#include "cscpr/rng.hpp"

namespace cscpr {

void FeatureMatrix::validate() const {
  if (positions.size() != rows()) throw InvalidArgument("feature rows and positions differ");
  if (!values.allFinite()) throw InvalidArgument("feature matrix has non-finite values");
}

void CenterFeatures::validate() const {
  if (positions.size() != centers()) throw InvalidArgument("center rows and positions differ");
  if (!values.allFinite()) throw InvalidArgument("center features have non-finite values");
  if (source_rows != 0 && centers() > source_rows) {
    throw InvalidArgument("more centers than source points");
  }
}

LinearLayer LinearLayer::init(std::size_t in, std::size_t out, Rng& rng) {
  LinearLayer layer = zeros(in, out);
  const double bound = std::sqrt(1.0 / static_cast<double>(in == 0 ? 1 : in));
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      layer.weight(r, c) = rng.uniform(-bound, bound);
    }
  }
  for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = rng.uniform(-bound, bound);
  return layer;
}

LinearLayer LinearLayer::zeros(std::size_t in, std::size_t out) {
  LinearLayer layer;
  layer.weight = Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  layer.bias = Vector::Zero(static_cast<Eigen::Index>(out));
  return layer;
}

GroupNormParams GroupNormParams::identity(std::size_t dim, std::size_t groups, double epsilon) {
  GroupNormParams p;
  p.num_groups = groups;
  p.gamma = Vector::Ones(static_cast<Eigen::Index>(dim));
  p.shift = Vector::Zero(static_cast<Eigen::Index>(dim));
  p.epsilon = epsilon;
  p.validate();
  return p;
}

GroupNormParams GroupNormParams::zeros_like() const {
  GroupNormParams g = *this;
  g.gamma.setZero();
  g.shift.setZero();
  return g;
}

void GroupNormParams::validate() const {
  if (num_groups == 0 || dim() % num_groups != 0) {
    throw InvalidArgument("group_norm: dim " + std::to_string(dim()) +
                          " not divisible by num_groups " + std::to_string(num_groups));
  }
  if (shift.size() != gamma.size()) throw InvalidArgument("group_norm: gamma/shift size mismatch");
  if (!(epsilon > 0.0)) throw InvalidArgument("group_norm: epsilon must be positive");
}

Matrix linear(const LinearLayer& layer, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != layer.in()) {
    throw InvalidArgument("linear: input dim " + std::to_string(x.cols()) +
                          " does not match layer input " + std::to_string(layer.in()));
  }
  // Entry-wise dot products: equal input rows give bit-equal output rows,
  // which a blocked matrix product does not guarantee.
  Matrix y(x.rows(), layer.weight.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index o = 0; o < layer.weight.rows(); ++o) {
      y(r, o) = x.row(r).dot(layer.weight.row(o)) + layer.bias[o];
    }
  }
  return y;
}

FeatureMatrix linear(const LinearLayer& layer, const FeatureMatrix& x) {
  return {linear(layer, x.values), x.positions};
}

Matrix linear_backward(const LinearLayer& layer, const Matrix& x, const Matrix& dy,
                       LinearLayer& grad) {
  grad.weight.noalias() += dy.transpose() * x;
  grad.bias += dy.colwise().sum().transpose();
  return dy * layer.weight;
}

Matrix group_norm(const GroupNormParams& p, const Matrix& x, GroupNormCache* cache) {
  p.validate();
  if (static_cast<std::size_t>(x.cols()) != p.dim()) {
    throw InvalidArgument("group_norm: input dim " + std::to_string(x.cols()) +
                          " does not match parameter dim " + std::to_string(p.dim()));
  }
  const Eigen::Index rows = x.rows();
  const Eigen::Index groups = static_cast<Eigen::Index>(p.num_groups);
  const Eigen::Index size = x.cols() / groups;

  Matrix y(rows, x.cols());
  Matrix xhat(rows, x.cols());
  Matrix inv_std(rows, groups);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index g = 0; g < groups; ++g) {
      const auto seg = x.row(r).segment(g * size, size);
      const double mean = seg.mean();
      const double var = (seg.array() - mean).square().mean();
      const double inv = 1.0 / std::sqrt(var + p.epsilon);
      inv_std(r, g) = inv;
      for (Eigen::Index c = 0; c < size; ++c) {
        const Eigen::Index ch = g * size + c;
        xhat(r, ch) = (x(r, ch) - mean) * inv;
        y(r, ch) = p.gamma[ch] * xhat(r, ch) + p.shift[ch];
      }
    }
  }
  if (cache != nullptr) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

FeatureMatrix group_norm(const GroupNormParams& p, const FeatureMatrix& x) {
  return {group_norm(p, x.values), x.positions};
}

Matrix group_norm_backward(const GroupNormParams& p, const GroupNormCache& cache,
                           const Matrix& dy, GroupNormParams& grad) {
  const Matrix& xhat = cache.normalized;
  const Eigen::Index rows = dy.rows();
  const Eigen::Index groups = static_cast<Eigen::Index>(p.num_groups);
  const Eigen::Index size = dy.cols() / groups;
  const double n = static_cast<double>(size);

  Matrix dx(rows, dy.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index g = 0; g < groups; ++g) {
      double sum_d = 0.0;
      double sum_dx = 0.0;
      for (Eigen::Index c = 0; c < size; ++c) {
        const Eigen::Index ch = g * size + c;
        const double dxhat = dy(r, ch) * p.gamma[ch];
        sum_d += dxhat;
        sum_dx += dxhat * xhat(r, ch);
        grad.gamma[ch] += dy(r, ch) * xhat(r, ch);
        grad.shift[ch] += dy(r, ch);
      }
      const double inv = cache.inv_std(r, g);
      for (Eigen::Index c = 0; c < size; ++c) {
        const Eigen::Index ch = g * size + c;
        const double dxhat = dy(r, ch) * p.gamma[ch];
        dx(r, ch) = inv / n * (n * dxhat - sum_d - xhat(r, ch) * sum_dx);
      }
    }
  }
  return dx;
}

namespace {

Vector row_norms(const Matrix& m) { return m.rowwise().norm(); }

Matrix normalized_rows(const Matrix& m, const Vector& norms) {
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (norms[r] > 0.0) out.row(r) = m.row(r) / norms[r];
  }
  return out;
}

}  // namespace

Matrix cosine_similarity_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw InvalidArgument("cosine_similarity_matrix: dim mismatch");
  const Matrix an = normalized_rows(a, row_norms(a));
  const Matrix bn = normalized_rows(b, row_norms(b));
  Matrix cos(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      cos(i, j) = std::clamp(an.row(i).dot(bn.row(j)), -1.0, 1.0);
    }
  }
  return cos;
}

void cosine_similarity_backward(const Matrix& a, const Matrix& b, const Matrix& cos,
                                const Matrix& dcos, Matrix& da, Matrix& db) {
  const Vector na = row_norms(a);
  const Vector nb = row_norms(b);
  const Matrix an = normalized_rows(a, na);
  const Matrix bn = normalized_rows(b, nb);
  const Matrix weighted = dcos.cwiseProduct(cos);
  const Vector row_w = weighted.rowwise().sum();
  const Vector col_w = weighted.colwise().sum().transpose();

  Matrix ga = dcos * bn;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (na[i] > 0.0) da.row(i) += (ga.row(i) - row_w[i] * an.row(i)) / na[i];
  }
  Matrix gb = dcos.transpose() * an;
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    if (nb[j] > 0.0) db.row(j) += (gb.row(j) - col_w[j] * bn.row(j)) / nb[j];
  }
}

double global_similarity(const GlobalDescriptor& a, const GlobalDescriptor& b) {
  if (a.dim() != b.dim()) throw InvalidArgument("global_similarity: dim mismatch");
  const double na = a.values.norm();
  const double nb = b.values.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw InvalidArgument("global_similarity: zero-norm descriptor");
  return std::clamp(a.values.dot(b.values) / (na * nb), -1.0, 1.0);
}

}  // namespace cscpr
