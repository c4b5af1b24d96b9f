#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "cscpr/tensor.hpp"

namespace cscpr {

/// Cross source context cluster parameters; also used as gradient container.
struct CSCCParams {
  double alpha = 1.0;
  double beta = 0.0;
  LinearLayer l_c;  // 2 D_c -> hidden
  LinearLayer l_f;  // hidden -> 1
  std::size_t top_k = 500;

  std::size_t center_dim() const noexcept { return l_c.in() / 2; }

  static CSCCParams init(std::size_t center_dim, std::size_t hidden_dim, std::size_t top_k,
                         std::uint64_t seed);
  CSCCParams zeros_like() const;
  void validate() const;

  template <class F>
  void for_each_tensor(F&& f) {
    f("cscc.alpha", &alpha, Eigen::Index{1});
    f("cscc.beta", &beta, Eigen::Index{1});
    f("cscc.l_c.weight", l_c.weight.data(), l_c.weight.size());
    f("cscc.l_c.bias", l_c.bias.data(), l_c.bias.size());
    f("cscc.l_f.weight", l_f.weight.data(), l_f.weight.size());
    f("cscc.l_f.bias", l_f.bias.data(), l_f.bias.size());
  }
};

struct CSCCTrace {
  Matrix query, db;  // f_c^q, f_c^d
  Matrix cos;
  Matrix corr;  // C before masking
  std::vector<std::pair<std::size_t, std::size_t>> kept;  // row-major order
  Matrix proj_q, proj_d;  // query / db halves of l_c applied to the features
  Vector col_mass;        // c_m per db center
  double row_mass = 0.0;  // c_n
  Matrix inner;           // per db center, Md x hidden
  Vector fused;           // f-hat_c
  double logit = 0.0;
  double score = 0.0;
};

/// Reranking score r_s in (0, 1) for a query / candidate pair of center sets.
double cscc_forward(const CenterFeatures& query, const CenterFeatures& db,
                    const CSCCParams& params, CSCCTrace* trace = nullptr);

struct CSCCGradient {
  CSCCParams params;
  Matrix d_query;
  Matrix d_db;
};

/// Gradient given dL/d(logit), where r_s = sigmoid(logit).
CSCCGradient cscc_backward(const CSCCParams& params, const CSCCTrace& trace, double d_logit);

/// Indices of the kept entries: the top_k largest of `corr`, ties broken by
/// (row, col). Returned in row-major order.
std::vector<std::pair<std::size_t, std::size_t>> top_k_entries(const Matrix& corr,
                                                              std::size_t top_k);

}  // namespace cscpr
