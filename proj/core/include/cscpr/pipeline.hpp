#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cscpr/dataset.hpp"
#include "cscpr/manifest.hpp"
#include "cscpr/model.hpp"
#include "cscpr/tensor.hpp"

namespace cscpr {

inline constexpr const char* kEvalSchema = "cscpr-eval/1";

struct RankedCandidate {
  std::string frame_id;
  double global_score = 0.0;
  std::optional<double> rerank_score;
  bool degenerate = false;  // geometric verification failed

  friend bool operator==(const RankedCandidate&, const RankedCandidate&) = default;
};

struct RankedList {
  std::string query_id;
  std::vector<RankedCandidate> candidates;

  friend bool operator==(const RankedList&, const RankedList&) = default;
};

struct IndexEntry {
  std::string frame_id;
  GlobalDescriptor descriptor;
};

struct RetrievalIndex {
  std::vector<IndexEntry> entries;
  nlohmann::ordered_json config;
  std::string build_timestamp;

  std::size_t size() const noexcept { return entries.size(); }
  void validate() const;  // unique ids, one descriptor dim
};

/// One descriptor per frame, keyed "scene/frame". An empty frame list yields
/// an empty index.
RetrievalIndex build_index(const std::vector<FrameRecord>& frames, const CloudLoader& loader,
                           const Extractor& extractor, std::size_t threads = 1);

/// Top `top_n` entries by descending cosine similarity, ties by frame_id.
RankedList retrieve(const GlobalDescriptor& query, const RetrievalIndex& index, std::size_t top_n,
                    const std::string& query_id = {});
RankedList retrieve(const PointCloud& query, const RetrievalIndex& index, std::size_t top_n,
                    const Extractor& extractor);

/// Scores the first `top_r` candidates and reorders that block by descending
/// score, then global score, then frame_id. The rest keep their order.
RankedList rerank_block(const RankedList& ranked, std::size_t top_r,
                        const std::function<double(const RankedCandidate&)>& score);

using CandidateFeatures = std::function<CenterFeatures(const std::string& frame_id)>;
using CandidateClouds = std::function<PointCloud(const std::string& frame_id)>;

RankedList rerank_cscc(const CenterFeatures& query, const RankedList& ranked, std::size_t top_r,
                       const CSCCParams& cscc, const CandidateFeatures& candidates);
RankedList rerank_cscc(const PointCloud& query, const RankedList& ranked, std::size_t top_r,
                       const RerankParams& params, const Extractor& extractor,
                       const CandidateClouds& candidates);

struct KabschConfig {
  std::size_t iterations = 256;
  double inlier_threshold = 0.05;  // meters
  std::uint64_t seed = 0;
};

struct GeometricScore {
  double score = 0.0;  // negative mean nearest-neighbor distance after alignment
  Pose pose;           // query -> candidate
  std::size_t correspondences = 0;
  std::size_t inliers = 0;
  bool degenerate = false;
};

/// Rows of a cloud as used for matching: color, position centered and divided
/// by the bounding-box diagonal, normal.
std::vector<std::array<double, 9>> matching_features(const PointCloud& cloud);

/// Mutual nearest neighbors in matching-feature space, as (query, candidate)
/// index pairs ordered by query index.
std::vector<std::pair<std::size_t, std::size_t>> mutual_matches(const PointCloud& query,
                                                                const PointCloud& candidate);

/// RANSAC over mutual matches with Kabsch hypotheses. `stream` selects the
/// random stream so that candidates can be scored in any order.
GeometricScore geometric_score(const PointCloud& query, const PointCloud& candidate,
                               const KabschConfig& config, std::uint64_t stream);

RankedList rerank_kabsch_baseline(const PointCloud& query, const RankedList& ranked,
                                  std::size_t top_r, const KabschConfig& config,
                                  const CandidateClouds& candidates);

enum class DescriptorMode { kNetwork, kOracle, kRandom };
enum class RerankerKind { kNone, kCscc, kKabsch };

struct PipelineConfig {
  DescriptorMode descriptors = DescriptorMode::kNetwork;
  RerankerKind reranker = RerankerKind::kCscc;
  std::size_t top_n = 0;  // retrieval depth, 0 = whole database
  std::size_t top_r = 20;
  std::vector<std::size_t> recall_ks = {1, 2, 3};
  KabschConfig kabsch;
  std::size_t random_dim = 32;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
};

std::string to_string(DescriptorMode mode);
std::string to_string(RerankerKind kind);
DescriptorMode descriptor_mode_from_string(const std::string& s);
RerankerKind reranker_from_string(const std::string& s);

nlohmann::ordered_json pipeline_config_to_json(const PipelineConfig& config);
/// Fields missing from `j` keep their defaults.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});

struct QueryResult {
  std::string query_id;
  std::vector<std::string> positives;  // keyframe ids
  RankedList retrieved;
  RankedList reranked;
  std::optional<std::size_t> first_hit;  // 1-based rank of the first positive
};

struct EvalReport {
  std::map<std::size_t, double> recall_at;
  std::size_t queries = 0;
  std::size_t evaluated = 0;
  std::vector<std::string> unanswerable;
  std::size_t database_size = 0;
  std::vector<QueryResult> results;
  std::map<std::string, double> timing_ms;
  nlohmann::ordered_json config;
};

/// Keyframes of all scenes form the database; every other frame is a query.
/// `model` is required for network descriptors and CSCC reranking.
EvalReport evaluate(const DatasetManifest& manifest, const CloudLoader& loader,
                    const PipelineConfig& config, const Model* model = nullptr);

nlohmann::ordered_json report_to_json(const EvalReport& report, bool with_timing = true);

}  // namespace cscpr
