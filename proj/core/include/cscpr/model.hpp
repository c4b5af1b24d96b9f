#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "cscpr/extractor.hpp"
#include "cscpr/params.hpp"

namespace cscpr {

inline constexpr const char* kWeightsSchema = "cscpr-weights/1";

/// Reranker sizes. Defaults: 300 x 128 point features clustered into 100
/// centers of width 256.
struct RerankDims {
  std::size_t source_dim = 128;  // D_s
  std::size_t center_dim = 256;  // D_c
  std::size_t hidden_dim = 256;  // CSCC hidden width
  std::size_t num_centers = 100;
  std::size_t groups = 4;
  std::size_t top_k = 500;

  static RerankDims for_extractor(const ExtractorConfig& config);
};

/// Extractor plus reranker: everything a pipeline run needs.
struct Model {
  Extractor extractor;
  RerankParams rerank;
  std::uint64_t seed = 0;

  static Model init(const ExtractorConfig& config, const RerankDims& dims, std::uint64_t seed);
};

nlohmann::ordered_json extractor_config_to_json(const ExtractorConfig& config);
ExtractorConfig extractor_config_from_json(const nlohmann::json& j);

// Weights file: u64 little-endian header length, a UTF-8 JSON header with the
// schema, shapes and tensor table, then all tensors as little-endian float64
// in table order.
void write_model(const Model& model, const std::filesystem::path& path);
Model read_model(const std::filesystem::path& path);

}  // namespace cscpr
