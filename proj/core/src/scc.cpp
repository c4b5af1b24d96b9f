#include "cscpr/scc.hpp"

#include <algorithm>
#include <numeric>

#include "cscpr/error.hpp"
#include "cscpr/rng.hpp"

namespace cscpr {
namespace {

// Order by position, then feature values, then input index.
std::vector<std::size_t> canonical_rows(const FeatureMatrix& m) {
  std::vector<std::size_t> order(m.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (lex_less(m.positions[a], m.positions[b])) return true;
    if (lex_less(m.positions[b], m.positions[a])) return false;
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) {
      const double va = m.values(static_cast<Eigen::Index>(a), c);
      const double vb = m.values(static_cast<Eigen::Index>(b), c);
      if (va != vb) return va < vb;
    }
    return a < b;
  });
  return order;
}

}  // namespace

SCCParams SCCParams::init(std::size_t in_dim, std::size_t source_dim, std::size_t out_dim,
                          std::size_t num_centers, std::size_t groups, std::uint64_t seed) {
  Rng rng(seed, 0x5CC);
  SCCParams p;
  p.l_r = LinearLayer::init(in_dim, source_dim, rng);
  p.l_s = LinearLayer::init(in_dim, source_dim, rng);
  p.l_c = LinearLayer::init(source_dim, out_dim, rng);
  p.gn_r = GroupNormParams::identity(source_dim, groups);
  p.gn_s = GroupNormParams::identity(source_dim, groups);
  p.num_centers = num_centers;
  p.validate();
  return p;
}

SCCParams SCCParams::zeros_like() const {
  SCCParams g = *this;
  g.l_r = l_r.zeros_like();
  g.l_s = l_s.zeros_like();
  g.l_c = l_c.zeros_like();
  g.gn_r = gn_r.zeros_like();
  g.gn_s = gn_s.zeros_like();
  g.alpha = 0.0;
  g.beta = 0.0;
  return g;
}

void SCCParams::validate() const {
  if (l_r.in() != l_s.in()) throw InvalidArgument("scc: l_r and l_s input dims differ");
  if (l_r.out() != l_s.out()) throw InvalidArgument("scc: l_r and l_s output dims differ");
  if (l_c.in() != l_r.out()) throw InvalidArgument("scc: l_c input must equal D_s");
  if (gn_r.dim() != l_r.out() || gn_s.dim() != l_s.out()) {
    throw InvalidArgument("scc: group norm dims must equal D_s");
  }
  gn_r.validate();
  gn_s.validate();
  if (num_centers == 0) throw InvalidArgument("scc: num_centers must be positive");
}

std::size_t SCCParams::neighborhood(std::size_t rows) const {
  if (knn_k != 0) return knn_k;
  const std::size_t k = 3 * std::max<std::size_t>(1, rows / num_centers);
  return std::min(k, rows);
}

CenterFeatures scc_forward(const FeatureMatrix& points, const SCCParams& params,
                           SCCTrace* trace) {
  params.validate();
  points.validate();
  const std::size_t n = points.rows();
  if (points.dim() != params.in_dim()) {
    throw InvalidArgument("scc_forward: feature dim " + std::to_string(points.dim()) +
                          " does not match SCC input " + std::to_string(params.in_dim()));
  }
  if (params.num_centers > n) {
    throw InvalidArgument("scc_forward: num_centers " + std::to_string(params.num_centers) +
                          " exceeds point count " + std::to_string(n));
  }
  const std::size_t k = params.neighborhood(n);
  if (k == 0 || k > n) throw InvalidArgument("scc_forward: knn_k out of range");

  SCCTrace local;
  SCCTrace& t = trace != nullptr ? *trace : local;

  const auto order = canonical_rows(points);
  t.input.resize(points.values.rows(), points.values.cols());
  t.positions.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    t.input.row(static_cast<Eigen::Index>(r)) =
        points.values.row(static_cast<Eigen::Index>(order[r]));
    t.positions[r] = points.positions[order[r]];
  }

  t.lin_r = linear(params.l_r, t.input);
  t.lin_s = linear(params.l_s, t.input);
  t.ref = group_norm(params.gn_r, t.lin_r, &t.gn_r_cache);
  t.src = group_norm(params.gn_s, t.lin_s, &t.gn_s_cache);

  const std::size_t m = params.num_centers;
  t.centers = farthest_point_sample(t.positions, m);
  std::vector<Vec3> center_pos(m);
  for (std::size_t i = 0; i < m; ++i) center_pos[i] = t.positions[t.centers[i]];
  t.neighbors = knn(center_pos, t.positions, k);

  const Eigen::Index ds = t.ref.cols();
  const auto mi = static_cast<Eigen::Index>(m);
  t.center_ref = Matrix::Zero(mi, ds);
  t.center_src = Matrix::Zero(mi, ds);
  // Sum in index order so that centers sharing a neighborhood get bit-equal
  // features and tie exactly.
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<std::size_t> members(t.neighbors.row(i).begin(), t.neighbors.row(i).end());
    std::sort(members.begin(), members.end());
    for (std::size_t j : members) {
      t.center_ref.row(static_cast<Eigen::Index>(i)) += t.ref.row(static_cast<Eigen::Index>(j));
      t.center_src.row(static_cast<Eigen::Index>(i)) += t.src.row(static_cast<Eigen::Index>(j));
    }
  }
  t.center_ref /= static_cast<double>(k);
  t.center_src /= static_cast<double>(k);

  t.cos = cosine_similarity_matrix(t.center_ref, t.ref);
  t.sim = t.cos.unaryExpr([&](double c) { return sigmoid(params.alpha * c + params.beta); });

  // Keep only the most similar center per point; first index wins ties.
  t.owner.assign(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    std::size_t best = 0;
    for (std::size_t i = 1; i < m; ++i) {
      if (t.sim(static_cast<Eigen::Index>(i), col) > t.sim(static_cast<Eigen::Index>(best), col)) {
        best = i;
      }
    }
    t.owner[j] = best;
  }

  Matrix numer = t.center_src;
  t.denom = Vector::Ones(mi);
  for (std::size_t j = 0; j < n; ++j) {
    const auto i = static_cast<Eigen::Index>(t.owner[j]);
    const double s = t.sim(i, static_cast<Eigen::Index>(j));
    numer.row(i) += s * t.src.row(static_cast<Eigen::Index>(j));
    t.denom[i] += s;
  }
  t.enhanced = numer.array().colwise() / t.denom.array();

  CenterFeatures out;
  out.values = linear(params.l_c, t.enhanced);
  out.positions = std::move(center_pos);
  out.source_rows = n;
  return out;
}

SCCParams scc_backward(const SCCParams& params, const SCCTrace& t, const Matrix& d_out) {
  SCCParams grad = params.zeros_like();
  const auto n = static_cast<Eigen::Index>(t.positions.size());
  const auto m = static_cast<Eigen::Index>(t.centers.size());
  if (d_out.rows() != m || static_cast<std::size_t>(d_out.cols()) != params.out_dim()) {
    throw InvalidArgument("scc_backward: gradient shape mismatch");
  }

  const Matrix d_enh = linear_backward(params.l_c, t.enhanced, d_out, grad.l_c);

  Matrix d_center_src(m, d_enh.cols());
  Vector d_denom(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    d_center_src.row(i) = d_enh.row(i) / t.denom[i];
    d_denom[i] = -d_enh.row(i).dot(t.enhanced.row(i)) / t.denom[i];
  }

  Matrix d_src = Matrix::Zero(n, t.src.cols());
  Matrix d_ref = Matrix::Zero(n, t.ref.cols());
  Matrix d_cos = Matrix::Zero(m, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto i = static_cast<Eigen::Index>(t.owner[static_cast<std::size_t>(j)]);
    const double s = t.sim(i, j);
    d_src.row(j) += s * d_center_src.row(i);
    const double d_s = d_center_src.row(i).dot(t.src.row(j)) + d_denom[i];
    const double dz = d_s * s * (1.0 - s);
    grad.alpha += dz * t.cos(i, j);
    grad.beta += dz;
    d_cos(i, j) = params.alpha * dz;
  }

  Matrix d_center_ref = Matrix::Zero(m, t.center_ref.cols());
  cosine_similarity_backward(t.center_ref, t.ref, t.cos, d_cos, d_center_ref, d_ref);

  const double inv_k = 1.0 / static_cast<double>(t.neighbors.k);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (std::size_t j : t.neighbors.row(static_cast<std::size_t>(i))) {
      const auto jj = static_cast<Eigen::Index>(j);
      d_ref.row(jj) += inv_k * d_center_ref.row(i);
      d_src.row(jj) += inv_k * d_center_src.row(i);
    }
  }

  const Matrix d_lin_r = group_norm_backward(params.gn_r, t.gn_r_cache, d_ref, grad.gn_r);
  const Matrix d_lin_s = group_norm_backward(params.gn_s, t.gn_s_cache, d_src, grad.gn_s);
  linear_backward(params.l_r, t.input, d_lin_r, grad.l_r);
  linear_backward(params.l_s, t.input, d_lin_s, grad.l_s);
  return grad;
}

}  // namespace cscpr
