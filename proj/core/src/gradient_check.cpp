#include "cscpr/gradient_check.hpp"

#include <algorithm>
#include <cmath>

#include "cscpr/error.hpp"
#include "cscpr/losses.hpp"
#include "cscpr/rng.hpp"
#include "cscpr/toy_train.hpp"

namespace cscpr {

std::vector<double> gradient_errors(const ScalarFunction& f, const Eigen::VectorXd& theta,
                                    const Eigen::VectorXd& analytic) {
  if (theta.size() != analytic.size()) {
    throw InvalidArgument("gradient_errors: analytic gradient has the wrong size");
  }
  std::vector<double> errors(static_cast<std::size_t>(theta.size()));
  Eigen::VectorXd probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double eps = 1e-6 * std::max(1.0, std::abs(theta[i]));
    probe[i] = theta[i] + eps;
    const double up = f(probe);
    probe[i] = theta[i] - eps;
    const double down = f(probe);
    probe[i] = theta[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("gradient check: non-finite objective at coordinate " +
                         std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[i];
    errors[static_cast<std::size_t>(i)] =
        std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
  }
  return errors;
}

double verify_gradient(const ScalarFunction& f, const Eigen::VectorXd& theta,
                       const Eigen::VectorXd& analytic) {
  const auto errors = gradient_errors(f, theta, analytic);
  return errors.empty() ? 0.0 : *std::max_element(errors.begin(), errors.end());
}

namespace {

FeatureMatrix random_points(Rng& rng, std::size_t n, std::size_t dim) {
  FeatureMatrix m;
  m.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < m.values.size(); ++i) m.values.data()[i] = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    m.positions.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
  }
  return m;
}

}  // namespace

GradCheckReport check_rerank_gradients(std::size_t instances, std::uint64_t seed) {
  GradCheckReport report;
  report.instances = instances;
  for (std::size_t inst = 0; inst < instances; ++inst) {
    Rng rng(seed, inst);
    const std::size_t in_dim = 6;
    const std::size_t centers = 3 + rng.below(3);

    ToyDataset data;
    data.features.push_back(random_points(rng, 10 + rng.below(16), in_dim));
    data.features.push_back(random_points(rng, 10 + rng.below(16), in_dim));
    data.descriptors.resize(2);
    data.pairs.push_back({0, 1, static_cast<int>(rng.below(2))});

    RerankParams params;
    params.scc = SCCParams::init(in_dim, 8, 6, centers, 2, rng.next());
    params.cscc = CSCCParams::init(6, 5, 1 + rng.below(centers * centers), rng.next());
    for (auto* gn : {&params.scc.gn_r, &params.scc.gn_s}) {
      for (Eigen::Index c = 0; c < gn->gamma.size(); ++c) {
        gn->gamma[c] = rng.uniform(0.5, 1.5);
        gn->shift[c] = rng.uniform(-0.5, 0.5);
      }
    }
    params.scc.alpha = rng.uniform(0.5, 3.0);
    params.scc.beta = rng.uniform(-1.0, 1.0);
    params.cscc.alpha = rng.uniform(0.5, 3.0);
    params.cscc.beta = rng.uniform(-1.0, 1.0);

    const RerankObjective obj = rerank_objective(data, params, true);
    RerankParams grad = obj.grad;
    const Eigen::VectorXd analytic = flatten_params(grad);
    const Eigen::VectorXd theta = flatten_params(params);
    const int label = data.pairs[0].label;

    RerankParams probe = params;
    const ScalarFunction f = [&](const Eigen::VectorXd& v) {
      assign_params(probe, v);
      const CenterFeatures q = scc_forward(data.features[0], probe.scc);
      const CenterFeatures d = scc_forward(data.features[1], probe.scc);
      return rerank_cross_entropy(cscc_forward(q, d, probe.cscc), label);
    };
    const auto errors = gradient_errors(f, theta, analytic);
    report.coordinates += errors.size();

    for (const auto& block : param_blocks(params)) {
      double worst = 0.0;
      for (std::size_t i = 0; i < block.size; ++i) worst = std::max(worst, errors[block.offset + i]);
      double& slot = report.block_max_error[block.name];
      slot = std::max(slot, worst);
      report.max_error = std::max(report.max_error, worst);
    }
  }
  return report;
}

}  // namespace cscpr
