#include "cscpr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <limits>
#include <set>

#include "cscpr/error.hpp"
#include "cscpr/kabsch.hpp"
#include "cscpr/parallel.hpp"
#include "cscpr/rng.hpp"
#include "cscpr/sampling.hpp"
#include "cscpr/scc.hpp"

namespace cscpr {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

bool by_global(const RankedCandidate& a, const RankedCandidate& b) {
  if (a.global_score != b.global_score) return a.global_score > b.global_score;
  return a.frame_id < b.frame_id;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void RetrievalIndex::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.frame_id).second) throw ValidationError({"duplicate index entry " + e.frame_id});
    if (e.descriptor.dim() != entries.front().descriptor.dim()) {
      throw ValidationError({"index entry " + e.frame_id + " has a different descriptor dim"});
    }
  }
}

RetrievalIndex build_index(const std::vector<FrameRecord>& frames, const CloudLoader& loader,
                           const Extractor& extractor, std::size_t threads) {
  RetrievalIndex index;
  index.entries.resize(frames.size());
  parallel_for(frames.size(), threads, [&](std::size_t i) {
    index.entries[i] = {FrameRef{frames[i].scene_id, frames[i].frame_id}.key(),
                        extractor(loader(frames[i])).descriptor};
  });
  index.config = ordered_json{{"extractor", extractor_config_to_json(extractor.config)}};
  index.build_timestamp = utc_timestamp();
  index.validate();
  return index;
}

RankedList retrieve(const GlobalDescriptor& query, const RetrievalIndex& index, std::size_t top_n,
                    const std::string& query_id) {
  RankedList out;
  out.query_id = query_id;
  out.candidates.reserve(index.size());
  for (const auto& e : index.entries) {
    out.candidates.push_back({e.frame_id, global_similarity(query, e.descriptor), std::nullopt, false});
  }
  const std::size_t n = top_n == 0 ? index.size() : std::min(top_n, index.size());
  std::partial_sort(out.candidates.begin(), out.candidates.begin() + static_cast<std::ptrdiff_t>(n),
                    out.candidates.end(), by_global);
  out.candidates.resize(n);
  return out;
}

RankedList retrieve(const PointCloud& query, const RetrievalIndex& index, std::size_t top_n,
                    const Extractor& extractor) {
  return retrieve(extractor(query).descriptor, index, top_n);
}

RankedList rerank_block(const RankedList& ranked, std::size_t top_r,
                        const std::function<double(const RankedCandidate&)>& score) {
  RankedList out = ranked;
  const std::size_t r = std::min(top_r, out.candidates.size());
  for (std::size_t i = 0; i < r; ++i) out.candidates[i].rerank_score = score(out.candidates[i]);
  std::sort(out.candidates.begin(), out.candidates.begin() + static_cast<std::ptrdiff_t>(r),
            [](const RankedCandidate& a, const RankedCandidate& b) {
              if (*a.rerank_score != *b.rerank_score) return *a.rerank_score > *b.rerank_score;
              return by_global(a, b);
            });
  return out;
}

RankedList rerank_cscc(const CenterFeatures& query, const RankedList& ranked, std::size_t top_r,
                       const CSCCParams& cscc, const CandidateFeatures& candidates) {
  return rerank_block(ranked, top_r, [&](const RankedCandidate& c) {
    try {
      return cscc_forward(query, candidates(c.frame_id), cscc);
    } catch (const Error& e) {
      throw Error(e.kind(), "candidate " + c.frame_id + ": " + e.what());
    }
  });
}

RankedList rerank_cscc(const PointCloud& query, const RankedList& ranked, std::size_t top_r,
                       const RerankParams& params, const Extractor& extractor,
                       const CandidateClouds& candidates) {
  const CenterFeatures q = scc_forward(extractor(query).point_features, params.scc);
  return rerank_cscc(q, ranked, top_r, params.cscc, [&](const std::string& id) {
    return scc_forward(extractor(candidates(id)).point_features, params.scc);
  });
}

std::vector<std::array<double, 9>> matching_features(const PointCloud& cloud) {
  const auto pos = cloud.positions();
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : pos) centroid += p;
  centroid /= static_cast<double>(pos.size());
  const double diameter = bounding_diameter(pos);
  const double scale = diameter > 0.0 ? 1.0 / diameter : 1.0;
  std::vector<std::array<double, 9>> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud[i];
    const Vec3 x = (p.position - centroid) * scale;
    out[i] = {p.color.x(), p.color.y(), p.color.z(), x.x(), x.y(), x.z(),
              p.normal.x(), p.normal.y(), p.normal.z()};
  }
  return out;
}

namespace {

double sq_dist9(const std::array<double, 9>& a, const std::array<double, 9>& b) {
  double s = 0.0;
  for (std::size_t c = 0; c < 9; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return s;
}

std::vector<std::size_t> nearest9(const std::vector<std::array<double, 9>>& from,
                                  const std::vector<std::array<double, 9>>& to) {
  std::vector<std::size_t> nn(from.size(), 0);
  for (std::size_t i = 0; i < from.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < to.size(); ++j) {
      const double d = sq_dist9(from[i], to[j]);
      if (d < best) {
        best = d;
        nn[i] = j;
      }
    }
  }
  return nn;
}

double mean_nn_distance(const std::vector<Vec3>& moved, const std::vector<Vec3>& target) {
  const auto nb = knn(moved, target, 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < moved.size(); ++i) sum += (moved[i] - target[nb.row(i)[0]]).norm();
  return sum / static_cast<double>(moved.size());
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> mutual_matches(const PointCloud& query,
                                                                const PointCloud& candidate) {
  const auto fq = matching_features(query);
  const auto fc = matching_features(candidate);
  const auto q_to_c = nearest9(fq, fc);
  const auto c_to_q = nearest9(fc, fq);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < q_to_c.size(); ++i) {
    if (c_to_q[q_to_c[i]] == i) out.emplace_back(i, q_to_c[i]);
  }
  return out;
}

GeometricScore geometric_score(const PointCloud& query, const PointCloud& candidate,
                               const KabschConfig& config, std::uint64_t stream) {
  if (!(config.inlier_threshold > 0.0)) throw InvalidArgument("inlier threshold must be positive");
  const auto qp = query.positions();
  const auto cp = candidate.positions();
  const auto matches = mutual_matches(query, candidate);

  GeometricScore result;
  result.correspondences = matches.size();
  const double thr2 = config.inlier_threshold * config.inlier_threshold;
  auto count_inliers = [&](const Pose& pose) {
    std::size_t n = 0;
    for (const auto& [i, j] : matches) n += (pose.apply(qp[i]) - cp[j]).squaredNorm() <= thr2 ? 1 : 0;
    return n;
  };

  bool found = false;
  Pose best;
  std::size_t best_inliers = 0;
  if (config.iterations > 0 && matches.size() >= 3) {
    Rng rng(config.seed, stream);
    const std::size_t m = matches.size();
    for (std::size_t it = 0; it < config.iterations; ++it) {
      std::array<std::size_t, 3> pick{};
      pick[0] = static_cast<std::size_t>(rng.below(m));
      do pick[1] = static_cast<std::size_t>(rng.below(m)); while (pick[1] == pick[0]);
      do pick[2] = static_cast<std::size_t>(rng.below(m)); while (pick[2] == pick[0] || pick[2] == pick[1]);
      std::vector<Vec3> src, dst;
      for (std::size_t k : pick) {
        src.push_back(qp[matches[k].first]);
        dst.push_back(cp[matches[k].second]);
      }
      Pose pose;
      try {
        pose = kabsch_align(src, dst);
      } catch (const DegenerateGeometry&) {
        continue;
      }
      const std::size_t n = count_inliers(pose);
      if (!found || n > best_inliers) {
        found = true;
        best = pose;
        best_inliers = n;
      }
    }
    if (found && best_inliers >= 3) {
      std::vector<Vec3> src, dst;
      for (const auto& [i, j] : matches) {
        if ((best.apply(qp[i]) - cp[j]).squaredNorm() <= thr2) {
          src.push_back(qp[i]);
          dst.push_back(cp[j]);
        }
      }
      try {
        const Pose refined = kabsch_align(src, dst);
        const std::size_t n = count_inliers(refined);
        if (n >= best_inliers) {
          best = refined;
          best_inliers = n;
        }
      } catch (const DegenerateGeometry&) {
      }
    }
  }

  if (config.iterations > 0 && !found) {
    result.degenerate = true;
    result.score = std::numeric_limits<double>::lowest();
    return result;
  }
  result.pose = best;  // identity when iterations == 0
  result.inliers = found ? best_inliers : count_inliers(best);
  std::vector<Vec3> moved(qp.size());
  for (std::size_t i = 0; i < qp.size(); ++i) moved[i] = result.pose.apply(qp[i]);
  result.score = -mean_nn_distance(moved, cp);
  return result;
}

RankedList rerank_kabsch_baseline(const PointCloud& query, const RankedList& ranked,
                                  std::size_t top_r, const KabschConfig& config,
                                  const CandidateClouds& candidates) {
  std::map<std::string, bool> flagged;
  std::uint64_t stream = 0;
  RankedList out = rerank_block(ranked, top_r, [&](const RankedCandidate& c) {
    const auto s = geometric_score(query, candidates(c.frame_id), config, stream++);
    flagged[c.frame_id] = s.degenerate;
    return s.score;
  });
  for (auto& c : out.candidates) {
    if (const auto it = flagged.find(c.frame_id); it != flagged.end()) c.degenerate = it->second;
  }
  return out;
}

void PipelineConfig::validate() const {
  if (recall_ks.empty()) throw InvalidArgument("recall_ks must not be empty");
  for (std::size_t k : recall_ks) {
    if (k == 0) throw InvalidArgument("recall k must be positive");
  }
  if (reranker != RerankerKind::kNone && top_r == 0) throw InvalidArgument("top_r must be positive");
  if (descriptors == DescriptorMode::kRandom && random_dim == 0) {
    throw InvalidArgument("random_dim must be positive");
  }
  if (!(kabsch.inlier_threshold > 0.0)) throw InvalidArgument("inlier threshold must be positive");
}

std::string to_string(DescriptorMode mode) {
  switch (mode) {
    case DescriptorMode::kNetwork: return "network";
    case DescriptorMode::kOracle: return "oracle";
    case DescriptorMode::kRandom: return "random";
  }
  return "network";
}

std::string to_string(RerankerKind kind) {
  switch (kind) {
    case RerankerKind::kNone: return "none";
    case RerankerKind::kCscc: return "cscc";
    case RerankerKind::kKabsch: return "kabsch";
  }
  return "none";
}

DescriptorMode descriptor_mode_from_string(const std::string& s) {
  if (s == "network") return DescriptorMode::kNetwork;
  if (s == "oracle") return DescriptorMode::kOracle;
  if (s == "random") return DescriptorMode::kRandom;
  throw InvalidArgument("unknown descriptor mode '" + s + "'");
}

RerankerKind reranker_from_string(const std::string& s) {
  if (s == "none") return RerankerKind::kNone;
  if (s == "cscc") return RerankerKind::kCscc;
  if (s == "kabsch") return RerankerKind::kKabsch;
  throw InvalidArgument("unknown reranker '" + s + "'");
}

ordered_json pipeline_config_to_json(const PipelineConfig& c) {
  return ordered_json{{"descriptors", to_string(c.descriptors)},
                      {"reranker", to_string(c.reranker)},
                      {"top_n", c.top_n},
                      {"top_r", c.top_r},
                      {"recall_ks", c.recall_ks},
                      {"ransac_iterations", c.kabsch.iterations},
                      {"inlier_threshold", c.kabsch.inlier_threshold},
                      {"random_dim", c.random_dim},
                      {"seed", c.seed},
                      {"threads", c.threads}};
}

PipelineConfig pipeline_config_from_json(const json& j, PipelineConfig c) {
  try {
    if (j.contains("descriptors")) c.descriptors = descriptor_mode_from_string(j["descriptors"].get<std::string>());
    if (j.contains("reranker")) c.reranker = reranker_from_string(j["reranker"].get<std::string>());
    if (j.contains("top_n")) c.top_n = j["top_n"].get<std::size_t>();
    if (j.contains("top_r")) c.top_r = j["top_r"].get<std::size_t>();
    if (j.contains("recall_ks")) c.recall_ks = j["recall_ks"].get<std::vector<std::size_t>>();
    if (j.contains("ransac_iterations")) c.kabsch.iterations = j["ransac_iterations"].get<std::size_t>();
    if (j.contains("inlier_threshold")) c.kabsch.inlier_threshold = j["inlier_threshold"].get<double>();
    if (j.contains("random_dim")) c.random_dim = j["random_dim"].get<std::size_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j["threads"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw ValidationError({std::string("pipeline config: ") + e.what()});
  }
  c.kabsch.seed = c.seed;
  return c;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

struct Slot {
  const FrameRecord* record;
  std::string key;
};

}  // namespace

EvalReport evaluate(const DatasetManifest& manifest, const CloudLoader& loader,
                    const PipelineConfig& config, const Model* model) {
  config.validate();
  manifest.validate();
  const bool need_network = config.descriptors == DescriptorMode::kNetwork ||
                            config.reranker == RerankerKind::kCscc;
  if (need_network && model == nullptr) {
    throw InvalidArgument("evaluate: network descriptors and CSCC reranking need model weights");
  }

  EvalReport report;
  report.config = pipeline_config_to_json(config);

  // Database and query sets.
  std::vector<Slot> database;
  std::vector<Slot> queries;
  std::vector<std::vector<std::string>> query_positives;
  std::map<std::string, std::size_t> db_slot;
  for (const auto& scene : manifest.scenes) {
    const std::set<std::string> keys(scene.keyframes.begin(), scene.keyframes.end());
    for (const auto& f : scene.frames) {
      if (!keys.contains(f.frame_id)) continue;
      db_slot.emplace(FrameRef{scene.scene_id, f.frame_id}.key(), database.size());
      database.push_back({&f, FrameRef{scene.scene_id, f.frame_id}.key()});
    }
  }
  if (database.empty()) throw ValidationError({"evaluate: manifest has no keyframes"});
  for (const auto& scene : manifest.scenes) {
    const std::set<std::string> keys(scene.keyframes.begin(), scene.keyframes.end());
    for (std::size_t i = 0; i < scene.frames.size(); ++i) {
      const auto& f = scene.frames[i];
      if (keys.contains(f.frame_id)) continue;
      ++report.queries;
      const std::string key = FrameRef{scene.scene_id, f.frame_id}.key();
      std::vector<std::string> positives;
      for (const auto& p : scene.labels[i].positives) {
        if (keys.contains(p)) positives.push_back(FrameRef{scene.scene_id, p}.key());
      }
      if (positives.empty()) {
        report.unanswerable.push_back(key);
        continue;
      }
      queries.push_back({&f, key});
      query_positives.push_back(std::move(positives));
    }
  }
  report.database_size = database.size();
  report.evaluated = queries.size();

  // Frame slots: database first, then queries.
  std::vector<const Slot*> frames;
  for (const auto& s : database) frames.push_back(&s);
  for (const auto& s : queries) frames.push_back(&s);

  auto t0 = Clock::now();
  const bool need_clouds = need_network || config.reranker == RerankerKind::kKabsch;
  std::vector<PointCloud> clouds(need_clouds ? frames.size() : 0);
  if (need_clouds) {
    parallel_for(frames.size(), config.threads, [&](std::size_t i) { clouds[i] = loader(*frames[i]->record); });
  }
  report.timing_ms["load"] = elapsed_ms(t0);

  t0 = Clock::now();
  std::vector<GlobalDescriptor> descriptors(frames.size());
  std::vector<CenterFeatures> centers(config.reranker == RerankerKind::kCscc ? frames.size() : 0);
  if (need_network) {
    parallel_for(frames.size(), config.threads, [&](std::size_t i) {
      try {
        auto out = model->extractor(clouds[i]);
        if (config.reranker == RerankerKind::kCscc) {
          centers[i] = scc_forward(out.point_features, model->rerank.scc);
        }
        descriptors[i] = std::move(out.descriptor);
      } catch (const Error& e) {
        throw Error(e.kind(), "frame " + frames[i]->key + ": " + e.what());
      }
    });
  }
  if (config.descriptors == DescriptorMode::kOracle) {
    const auto dim = static_cast<Eigen::Index>(database.size());
    for (std::size_t i = 0; i < database.size(); ++i) {
      descriptors[i].values = Vector::Zero(dim);
      descriptors[i].values[static_cast<Eigen::Index>(i)] = 1.0;
    }
    for (std::size_t q = 0; q < queries.size(); ++q) {
      descriptors[database.size() + q] = descriptors[db_slot.at(query_positives[q].front())];
    }
  } else if (config.descriptors == DescriptorMode::kRandom) {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      Rng rng(config.seed, i);
      descriptors[i].values.resize(static_cast<Eigen::Index>(config.random_dim));
      for (auto& v : descriptors[i].values) v = rng.normal();
    }
  }
  report.timing_ms["describe"] = elapsed_ms(t0);

  t0 = Clock::now();
  RetrievalIndex index;
  for (std::size_t i = 0; i < database.size(); ++i) index.entries.push_back({database[i].key, descriptors[i]});
  index.validate();
  report.results.resize(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    auto& r = report.results[q];
    r.query_id = queries[q].key;
    r.positives = query_positives[q];
    r.retrieved = retrieve(descriptors[database.size() + q], index, config.top_n, queries[q].key);
  }
  report.timing_ms["retrieve"] = elapsed_ms(t0);

  t0 = Clock::now();
  parallel_for(queries.size(), config.threads, [&](std::size_t q) {
    auto& r = report.results[q];
    const std::size_t qi = database.size() + q;
    switch (config.reranker) {
      case RerankerKind::kNone:
        r.reranked = r.retrieved;
        break;
      case RerankerKind::kCscc:
        r.reranked = rerank_cscc(centers[qi], r.retrieved, config.top_r, model->rerank.cscc,
                                 [&](const std::string& id) { return centers[db_slot.at(id)]; });
        break;
      case RerankerKind::kKabsch: {
        KabschConfig kc = config.kabsch;
        kc.seed = Rng::mix(config.seed, q);
        r.reranked = rerank_kabsch_baseline(clouds[qi], r.retrieved, config.top_r, kc,
                                            [&](const std::string& id) { return clouds[db_slot.at(id)]; });
        break;
      }
    }
  });
  report.timing_ms["rerank"] = elapsed_ms(t0);

  std::set<std::size_t> ks(config.recall_ks.begin(), config.recall_ks.end());
  std::map<std::size_t, std::size_t> hits;
  for (auto& r : report.results) {
    const std::set<std::string> pos(r.positives.begin(), r.positives.end());
    for (std::size_t i = 0; i < r.reranked.candidates.size(); ++i) {
      if (pos.contains(r.reranked.candidates[i].frame_id)) {
        r.first_hit = i + 1;
        break;
      }
    }
    for (std::size_t k : ks) hits[k] += (r.first_hit && *r.first_hit <= k) ? 1 : 0;
  }
  for (std::size_t k : ks) {
    report.recall_at[k] = report.evaluated == 0
                              ? 0.0
                              : static_cast<double>(hits[k]) / static_cast<double>(report.evaluated);
  }
  return report;
}

namespace {

ordered_json list_to_json(const RankedList& list) {
  ordered_json out = ordered_json::array();
  for (const auto& c : list.candidates) {
    ordered_json j{{"frame_id", c.frame_id}, {"global_score", c.global_score}};
    if (c.rerank_score) j["rerank_score"] = *c.rerank_score;
    if (c.degenerate) j["degenerate"] = true;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace

ordered_json report_to_json(const EvalReport& report, bool with_timing) {
  ordered_json recall = ordered_json::object();
  for (const auto& [k, v] : report.recall_at) recall[std::to_string(k)] = v;
  ordered_json results = ordered_json::array();
  for (const auto& r : report.results) {
    results.push_back(ordered_json{{"query", r.query_id},
                                   {"positives", r.positives},
                                   {"first_hit", r.first_hit ? ordered_json(*r.first_hit) : ordered_json()},
                                   {"retrieved", list_to_json(r.retrieved)},
                                   {"reranked", list_to_json(r.reranked)}});
  }
  ordered_json j{{"schema", kEvalSchema},
                 {"config", report.config},
                 {"recall_at", recall},
                 {"queries", report.queries},
                 {"evaluated", report.evaluated},
                 {"unanswerable", report.unanswerable.size()},
                 {"unanswerable_queries", report.unanswerable},
                 {"database_size", report.database_size},
                 {"results", results}};
  if (with_timing) {
    ordered_json t = ordered_json::object();
    for (const auto& [stage, ms] : report.timing_ms) t[stage] = ms;
    j["timing_ms"] = t;
  }
  return j;
}

}  // namespace cscpr
