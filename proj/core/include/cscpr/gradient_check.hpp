#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace cscpr {

using ScalarFunction = std::function<double(const Eigen::VectorXd&)>;

/// Central differences with step 1e-6 * max(1, |theta_i|). Entry i of the
/// result is |a - n| / max(1e-8, |a| + |n|). Throws NumericError when f is
/// not finite at a probe point.
std::vector<double> gradient_errors(const ScalarFunction& f, const Eigen::VectorXd& theta,
                                    const Eigen::VectorXd& analytic);

/// Largest entry of gradient_errors (0 for an empty parameter vector).
double verify_gradient(const ScalarFunction& f, const Eigen::VectorXd& theta,
                       const Eigen::VectorXd& analytic);

struct GradCheckReport {
  std::map<std::string, double> block_max_error;  // per parameter tensor
  double max_error = 0.0;
  std::size_t instances = 0;
  std::size_t coordinates = 0;
};

/// Checks the analytic reranker gradient (SCC + CSCC, cross-entropy on the
/// rerank score) against finite differences on random small instances.
GradCheckReport check_rerank_gradients(std::size_t instances, std::uint64_t seed);

}  // namespace cscpr
