#include "cscpr/cscc.hpp"

#include <algorithm>

#include "cscpr/error.hpp"
#include "cscpr/rng.hpp"

namespace cscpr {

CSCCParams CSCCParams::init(std::size_t center_dim, std::size_t hidden_dim, std::size_t top_k,
                            std::uint64_t seed) {
  Rng rng(seed, 0xC5CC);
  CSCCParams p;
  p.l_c = LinearLayer::init(2 * center_dim, hidden_dim, rng);
  p.l_f = LinearLayer::init(hidden_dim, 1, rng);
  p.top_k = top_k;
  p.validate();
  return p;
}

CSCCParams CSCCParams::zeros_like() const {
  CSCCParams g = *this;
  g.alpha = 0.0;
  g.beta = 0.0;
  g.l_c = l_c.zeros_like();
  g.l_f = l_f.zeros_like();
  return g;
}

void CSCCParams::validate() const {
  if (l_c.in() == 0 || l_c.in() % 2 != 0) throw InvalidArgument("cscc: l_c input must be 2 D_c");
  if (l_f.in() != l_c.out() || l_f.out() != 1) {
    throw InvalidArgument("cscc: l_f must map the l_c output to one value");
  }
}

std::vector<std::pair<std::size_t, std::size_t>> top_k_entries(const Matrix& corr,
                                                              std::size_t top_k) {
  const auto rows = static_cast<std::size_t>(corr.rows());
  const auto cols = static_cast<std::size_t>(corr.cols());
  const std::size_t total = rows * cols;
  const std::size_t keep = std::min(top_k, total);
  std::vector<std::size_t> flat(total);
  for (std::size_t i = 0; i < total; ++i) flat[i] = i;
  const double* v = corr.data();  // row-major: flat index = i * cols + j
  auto better = [&](std::size_t a, std::size_t b) {
    if (v[a] != v[b]) return v[a] > v[b];
    return a < b;
  };
  if (keep < total) {
    std::nth_element(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(keep), flat.end(),
                     better);
  }
  flat.resize(keep);
  std::sort(flat.begin(), flat.end());
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(keep);
  for (std::size_t f : flat) out.emplace_back(f / cols, f % cols);
  return out;
}

double cscc_forward(const CenterFeatures& query, const CenterFeatures& db,
                    const CSCCParams& params, CSCCTrace* trace) {
  params.validate();
  if (query.dim() != db.dim() || query.dim() != params.center_dim()) {
    throw InvalidArgument("cscc_forward: center dims " + std::to_string(query.dim()) + "/" +
                          std::to_string(db.dim()) + " do not match D_c " +
                          std::to_string(params.center_dim()));
  }
  if (query.centers() == 0 || db.centers() == 0) {
    throw InvalidArgument("cscc_forward: empty center set");
  }
  CSCCTrace local;
  CSCCTrace& t = trace != nullptr ? *trace : local;

  const Eigen::Index mq = query.values.rows();
  const Eigen::Index md = db.values.rows();
  const Eigen::Index dc = query.values.cols();
  const Eigen::Index hidden = static_cast<Eigen::Index>(params.l_c.out());

  t.query = query.values;
  t.db = db.values;
  t.cos = cosine_similarity_matrix(t.query, t.db);
  t.corr = t.cos.unaryExpr([&](double c) { return sigmoid(params.alpha * c + params.beta); });
  t.kept = top_k_entries(t.corr, params.top_k);

  // l_c(C [q_i, d_j]) = C (W_q q_i + W_d d_j) + b for kept pairs only.
  t.proj_q = t.query * params.l_c.weight.leftCols(dc).transpose();
  t.proj_d = t.db * params.l_c.weight.rightCols(dc).transpose();

  t.col_mass = Vector::Zero(md);
  Vector row_mass = Vector::Zero(mq);
  Matrix col_sum = Matrix::Zero(md, hidden);
  for (const auto& [i, j] : t.kept) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto jj = static_cast<Eigen::Index>(j);
    const double c = t.corr(ii, jj);
    col_sum.row(jj) += c * (t.proj_q.row(ii) + t.proj_d.row(jj)) + params.l_c.bias.transpose();
    t.col_mass[jj] += c;
    row_mass[ii] += c;
  }
  t.row_mass = row_mass.sum() / static_cast<double>(mq);

  t.inner = col_sum.array().colwise() / (1.0 + t.col_mass.array());
  t.fused = t.inner.colwise().sum().transpose() / (1.0 + t.row_mass);
  t.logit = params.l_f.weight.row(0).dot(t.fused) + params.l_f.bias[0];
  t.score = sigmoid(t.logit);
  return t.score;
}

CSCCGradient cscc_backward(const CSCCParams& params, const CSCCTrace& t, double d_logit) {
  CSCCGradient g;
  g.params = params.zeros_like();
  const Eigen::Index mq = t.query.rows();
  const Eigen::Index md = t.db.rows();
  const Eigen::Index dc = t.query.cols();

  g.params.l_f.weight.row(0) += d_logit * t.fused.transpose();
  g.params.l_f.bias[0] += d_logit;
  const Vector d_fused = d_logit * params.l_f.weight.row(0).transpose();

  const double scale = 1.0 + t.row_mass;
  const Vector d_total = d_fused / scale;
  const double d_row_mass = -d_fused.dot(t.fused) / scale;

  Matrix d_col_sum(md, d_total.size());
  Vector d_col_mass(md);
  for (Eigen::Index j = 0; j < md; ++j) {
    const double s = 1.0 + t.col_mass[j];
    d_col_sum.row(j) = d_total.transpose() / s;
    d_col_mass[j] = -d_total.dot(t.inner.row(j).transpose()) / s;
  }

  Matrix d_proj_q = Matrix::Zero(mq, d_total.size());
  Matrix d_proj_d = Matrix::Zero(md, d_total.size());
  Matrix d_cos = Matrix::Zero(mq, md);
  const double d_row_entry = d_row_mass / static_cast<double>(mq);
  for (const auto& [i, j] : t.kept) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto jj = static_cast<Eigen::Index>(j);
    const double c = t.corr(ii, jj);
    const auto dh = d_col_sum.row(jj);
    const double d_c = dh.dot(t.proj_q.row(ii) + t.proj_d.row(jj)) + d_col_mass[jj] + d_row_entry;
    d_proj_q.row(ii) += c * dh;
    d_proj_d.row(jj) += c * dh;
    g.params.l_c.bias += dh.transpose();
    const double dz = d_c * c * (1.0 - c);
    g.params.alpha += dz * t.cos(ii, jj);
    g.params.beta += dz;
    d_cos(ii, jj) = params.alpha * dz;
  }

  g.params.l_c.weight.leftCols(dc) += d_proj_q.transpose() * t.query;
  g.params.l_c.weight.rightCols(dc) += d_proj_d.transpose() * t.db;
  g.d_query = d_proj_q * params.l_c.weight.leftCols(dc);
  g.d_db = d_proj_d * params.l_c.weight.rightCols(dc);
  cosine_similarity_backward(t.query, t.db, t.cos, d_cos, g.d_query, g.d_db);
  return g;
}

}  // namespace cscpr
