#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <string>
#include <vector>

#include "cscpr/cscc.hpp"
#include "cscpr/scc.hpp"

namespace cscpr {

/// The trainable reranker: one SCC shared by query and candidate, plus CSCC.
struct RerankParams {
  SCCParams scc;
  CSCCParams cscc;

  RerankParams zeros_like() const { return {scc.zeros_like(), cscc.zeros_like()}; }

  template <class F>
  void for_each_tensor(F&& f) {
    scc.for_each_tensor(f);
    cscc.for_each_tensor(f);
  }
};

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

template <class P>
std::vector<ParamBlock> param_blocks(P& params) {
  std::vector<ParamBlock> blocks;
  std::size_t offset = 0;
  params.for_each_tensor([&](const std::string& name, double*, Eigen::Index n) {
    blocks.push_back({name, offset, static_cast<std::size_t>(n)});
    offset += static_cast<std::size_t>(n);
  });
  return blocks;
}

template <class P>
Eigen::VectorXd flatten_params(P& params) {
  std::vector<double> flat;
  params.for_each_tensor([&](const std::string&, double* data, Eigen::Index n) {
    flat.insert(flat.end(), data, data + n);
  });
  return Eigen::Map<Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

template <class P>
void assign_params(P& params, const Eigen::VectorXd& flat) {
  Eigen::Index offset = 0;
  params.for_each_tensor([&](const std::string&, double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) data[i] = flat[offset + i];
    offset += n;
  });
}

}  // namespace cscpr
