#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cscpr/sampling.hpp"
#include "cscpr/tensor.hpp"

namespace cscpr {

/// Self context cluster parameters. The same struct doubles as the gradient
/// container (num_centers / knn_k are not trained).
struct SCCParams {
  LinearLayer l_r;  // reference branch, in -> D_s
  LinearLayer l_s;  // source branch,    in -> D_s
  LinearLayer l_c;  // output,          D_s -> D_c
  GroupNormParams gn_r;
  GroupNormParams gn_s;
  double alpha = 1.0;
  double beta = 0.0;
  std::size_t num_centers = 100;
  std::size_t knn_k = 0;  // 0: 3 * (rows / num_centers), capped at rows

  std::size_t in_dim() const noexcept { return l_r.in(); }
  std::size_t source_dim() const noexcept { return l_r.out(); }
  std::size_t out_dim() const noexcept { return l_c.out(); }

  static SCCParams init(std::size_t in_dim, std::size_t source_dim, std::size_t out_dim,
                        std::size_t num_centers, std::size_t groups, std::uint64_t seed);
  SCCParams zeros_like() const;
  void validate() const;

  std::size_t neighborhood(std::size_t rows) const;

  template <class F>
  void for_each_tensor(F&& f) {
    f("scc.l_r.weight", l_r.weight.data(), l_r.weight.size());
    f("scc.l_r.bias", l_r.bias.data(), l_r.bias.size());
    f("scc.l_s.weight", l_s.weight.data(), l_s.weight.size());
    f("scc.l_s.bias", l_s.bias.data(), l_s.bias.size());
    f("scc.l_c.weight", l_c.weight.data(), l_c.weight.size());
    f("scc.l_c.bias", l_c.bias.data(), l_c.bias.size());
    f("scc.gn_r.gamma", gn_r.gamma.data(), gn_r.gamma.size());
    f("scc.gn_r.shift", gn_r.shift.data(), gn_r.shift.size());
    f("scc.gn_s.gamma", gn_s.gamma.data(), gn_s.gamma.size());
    f("scc.gn_s.shift", gn_s.shift.data(), gn_s.shift.size());
    f("scc.alpha", &alpha, Eigen::Index{1});
    f("scc.beta", &beta, Eigen::Index{1});
  }
};

/// Intermediate values kept for the backward pass.
struct SCCTrace {
  Matrix input;  // canonical row order
  std::vector<Vec3> positions;
  Matrix lin_r, lin_s;
  GroupNormCache gn_r_cache, gn_s_cache;
  Matrix ref, src;  // f_p^r, f_p^s
  std::vector<std::size_t> centers;
  NeighborTable neighbors;
  Matrix center_ref, center_src;  // f_c^r, f_c^s
  Matrix cos;                     // M x N
  Matrix sim;                     // S
  std::vector<std::size_t> owner;  // argmax center per point
  Vector denom;                   // 1 + sum_j S-hat_ij
  Matrix enhanced;                // f~_c
};

/// Rows are processed in canonical order (position, then features) so the
/// result does not depend on the input row order.
CenterFeatures scc_forward(const FeatureMatrix& points, const SCCParams& params,
                           SCCTrace* trace = nullptr);

/// Parameter gradient given dL/d(output center features).
SCCParams scc_backward(const SCCParams& params, const SCCTrace& trace, const Matrix& d_out);

}  // namespace cscpr
