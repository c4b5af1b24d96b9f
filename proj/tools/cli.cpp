#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "cscpr/error.hpp"
#include "cscpr/gradient_check.hpp"
#include "cscpr/model.hpp"
#include "cscpr/rng.hpp"
#include "cscpr/synthetic.hpp"
#include "selftest.hpp"

namespace cscpr::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

void RunConfig::sync() {
  dataset.seed = seed;
  pipeline.seed = seed;
  pipeline.kabsch.seed = seed;
  pipeline.threads = threads;
  train.seed = seed;
}

ExtractorConfig RunConfig::extractor_config() const {
  if (extractor == "standard") return ExtractorConfig::standard();
  if (extractor == "small") return ExtractorConfig::small();
  throw InvalidArgument("unknown extractor preset '" + extractor + "' (standard | small)");
}

ordered_json run_config_to_json(const RunConfig& c) {
  return ordered_json{
      {"schema", kRunSchema},
      {"seed", c.seed},
      {"threads", c.threads},
      {"extractor", c.extractor},
      {"dataset",
       {{"t_c", c.dataset.thresholds.t_c},
        {"t_p", c.dataset.thresholds.t_p},
        {"t_n", c.dataset.thresholds.t_n},
        {"voxel_size", c.dataset.voxel_size},
        {"negative_cap", c.dataset.negative_cap},
        {"split", c.split}}},
      {"pipeline", pipeline_config_to_json(c.pipeline)},
      {"train",
       {{"steps", c.train.steps},
        {"lr_max", c.train.lr_max},
        {"lr_min", c.train.lr_min},
        {"beta_t", c.train.weights.beta_t},
        {"beta_c", c.train.weights.beta_c},
        {"margin", c.train.margin},
        {"hard_negatives", c.train.hard_negatives}}},
      {"synth", {{"scenes", c.synth_scenes}, {"frames", c.synth_frames}, {"points", c.synth_points}}},
      {"grad_check", {{"instances", c.grad_instances}, {"tolerance", c.grad_tolerance}}},
      {"paths",
       {{"scenes", c.scenes_dir},
        {"manifest", c.manifest},
        {"weights", c.weights},
        {"out", c.out},
        {"query", c.query},
        {"cloud", c.cloud}}}};
}

namespace {

template <class T>
void take(const json& j, const char* key, T& dst) {
  if (j.is_object() && j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

void apply_run_config_json(const json& j, RunConfig& c) {
  if (!j.is_object()) throw ValidationError({"run config must be a JSON object"});
  try {
    if (j.contains("schema") && j["schema"].get<std::string>() != kRunSchema) {
      throw ValidationError({"unsupported run config schema " + j["schema"].get<std::string>()});
    }
    take(j, "seed", c.seed);
    take(j, "threads", c.threads);
    take(j, "extractor", c.extractor);
    if (j.contains("dataset")) {
      const json& d = j["dataset"];
      take(d, "t_c", c.dataset.thresholds.t_c);
      take(d, "t_p", c.dataset.thresholds.t_p);
      take(d, "t_n", c.dataset.thresholds.t_n);
      take(d, "voxel_size", c.dataset.voxel_size);
      take(d, "negative_cap", c.dataset.negative_cap);
      take(d, "split", c.split);
    }
    if (j.contains("pipeline")) c.pipeline = pipeline_config_from_json(j["pipeline"], c.pipeline);
    if (j.contains("train")) {
      const json& t = j["train"];
      take(t, "steps", c.train.steps);
      take(t, "lr_max", c.train.lr_max);
      take(t, "lr_min", c.train.lr_min);
      take(t, "beta_t", c.train.weights.beta_t);
      take(t, "beta_c", c.train.weights.beta_c);
      take(t, "margin", c.train.margin);
      take(t, "hard_negatives", c.train.hard_negatives);
    }
    if (j.contains("synth")) {
      take(j["synth"], "scenes", c.synth_scenes);
      take(j["synth"], "frames", c.synth_frames);
      take(j["synth"], "points", c.synth_points);
    }
    if (j.contains("grad_check")) {
      take(j["grad_check"], "instances", c.grad_instances);
      take(j["grad_check"], "tolerance", c.grad_tolerance);
    }
    if (j.contains("paths")) {
      const json& p = j["paths"];
      take(p, "scenes", c.scenes_dir);
      take(p, "manifest", c.manifest);
      take(p, "weights", c.weights);
      take(p, "out", c.out);
      take(p, "query", c.query);
      take(p, "cloud", c.cloud);
    }
  } catch (const json::exception& e) {
    throw ValidationError({std::string("run config: ") + e.what()});
  }
}

namespace {

/// Flag values are applied after --config so that flags win.
class Flags {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& name, std::function<void(RunConfig&, const T&)> set,
                   const std::string& help) {
    return app->add_option_function<T>(
        name, [this, set](const T& v) { pending_.push_back([set, v](RunConfig& c) { set(c, v); }); }, help);
  }

  void apply(RunConfig& c) const {
    for (const auto& f : pending_) f(c);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> pending_;
};

std::string require(const std::string& value, const char* flag) {
  if (value.empty()) throw InvalidArgument(std::string("missing required ") + flag);
  return value;
}

void write_json(const ordered_json& j, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << j.dump(2) << '\n';
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << j.dump(2) << '\n';
  if (!f) throw IoError("failed writing " + path);
}

Model load_or_init_model(const RunConfig& c) {
  if (!c.weights.empty()) return read_model(c.weights);
  const auto config = c.extractor_config();
  return Model::init(config, RerankDims::for_extractor(config), c.seed);
}

ordered_json candidates_json(const RankedList& list) {
  ordered_json out = ordered_json::array();
  for (const auto& cand : list.candidates) {
    ordered_json j{{"frame_id", cand.frame_id}, {"global_score", cand.global_score}};
    if (cand.rerank_score) j["rerank_score"] = *cand.rerank_score;
    if (cand.degenerate) j["degenerate"] = true;
    out.push_back(std::move(j));
  }
  return out;
}

struct LoadedManifest {
  DatasetManifest manifest;
  CloudLoader loader;
};

LoadedManifest load_manifest(const RunConfig& c) {
  const fs::path path = require(c.manifest, "--manifest");
  LoadedManifest lm{read_manifest(path), {}};
  lm.loader = pcb_loader(path.parent_path());
  return lm;
}

FrameRef parse_ref(const std::string& key) {
  const auto slash = key.find('/');
  if (slash == std::string::npos) throw InvalidArgument("frame reference must be scene/frame: " + key);
  return {key.substr(0, slash), key.substr(slash + 1)};
}

std::vector<FrameRecord> keyframe_records(const DatasetManifest& m) {
  std::vector<FrameRecord> out;
  for (const auto& s : m.scenes) {
    const std::set<std::string> keys(s.keyframes.begin(), s.keyframes.end());
    for (const auto& f : s.frames) {
      if (keys.contains(f.frame_id)) out.push_back(f);
    }
  }
  return out;
}

// Subcommands ---------------------------------------------------------------

int cmd_synth(const RunConfig& c, std::ostream& out) {
  const fs::path dir = require(c.out, "--out");
  SyntheticSceneConfig sc;
  sc.frames = c.synth_frames;
  sc.points_per_frame = c.synth_points;
  std::vector<SyntheticScene> scenes;
  for (std::size_t i = 0; i < c.synth_scenes; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03zu", i);
    scenes.push_back(make_scene(name, sc, Rng::mix(c.seed, i)));
  }
  write_scene_pack(scenes, dir);
  write_json(ordered_json{{"schema", "cscpr-synth/1"}, {"run_config", run_config_to_json(c)}},
             (dir / "synth.json").string(), out);
  out << "wrote " << scenes.size() << " scenes to " << dir.string() << '\n';
  return kOk;
}

int cmd_gen_dataset(const RunConfig& c, std::ostream& out) {
  const auto sequences = read_scene_directory(require(c.scenes_dir, "--scenes"));
  const fs::path path = require(c.out, "--out");
  DatasetManifest m = generate_dataset(sequences, pcb_loader(), c.dataset, c.split, c.threads);
  const fs::path base = fs::absolute(path).parent_path();
  for (auto& s : m.scenes) {
    for (auto& f : s.frames) f.cloud_path = fs::absolute(f.cloud_path).lexically_proximate(base);
  }
  m.validate();
  ordered_json j = manifest_to_json(m);
  j["run_config"] = run_config_to_json(c);
  write_json(j, path.string(), out);
  std::size_t frames = 0, keys = 0, unreachable = 0;
  for (const auto& s : m.scenes) {
    frames += s.frames.size();
    keys += s.keyframes.size();
    unreachable += s.unreachable.size();
  }
  out << "manifest: " << m.scenes.size() << " scenes, " << frames << " database frames, " << keys
      << " keyframes, " << unreachable << " unreachable\n";
  return kOk;
}

int cmd_init_weights(const RunConfig& c, std::ostream& out) {
  const std::string path = require(c.out, "--out");
  const auto config = c.extractor_config();
  write_model(Model::init(config, RerankDims::for_extractor(config), c.seed), path);
  out << "wrote " << c.extractor << " weights (seed " << c.seed << ") to " << path << '\n';
  return kOk;
}

int cmd_extract(const RunConfig& c, std::ostream& out) {
  const Model model = load_or_init_model(c);
  ordered_json frames = ordered_json::array();
  auto emit = [&](const std::string& id, const PointCloud& cloud) {
    const auto d = model.extractor(cloud).descriptor;
    frames.push_back(ordered_json{{"frame_id", id},
                                  {"descriptor", std::vector<double>(d.values.begin(), d.values.end())}});
  };
  if (!c.cloud.empty()) {
    emit(c.cloud, read_pcb(c.cloud));
  } else {
    const auto lm = load_manifest(c);
    for (const auto& s : lm.manifest.scenes) {
      for (const auto& f : s.frames) emit(FrameRef{s.scene_id, f.frame_id}.key(), lm.loader(f));
    }
  }
  write_json(ordered_json{{"schema", "cscpr-descriptors/1"},
                          {"run_config", run_config_to_json(c)},
                          {"frames", frames}},
             c.out, out);
  return kOk;
}

struct QueryContext {
  LoadedManifest lm;
  Model model;
  PointCloud query;
  std::string query_id;
  RetrievalIndex index;
};

QueryContext query_context(const RunConfig& c) {
  QueryContext q{load_manifest(c), load_or_init_model(c), {}, {}, {}};
  if (!c.cloud.empty()) {
    q.query = read_pcb(c.cloud);
    q.query_id = c.cloud;
  } else {
    const FrameRef ref = parse_ref(require(c.query, "--query or --cloud"));
    const FrameRecord* rec = q.lm.manifest.find(ref);
    if (rec == nullptr) throw ValidationError({"query " + ref.key() + " is not in the manifest"});
    q.query = q.lm.loader(*rec);
    q.query_id = ref.key();
  }
  q.index = build_index(keyframe_records(q.lm.manifest), q.lm.loader, q.model.extractor, c.threads);
  return q;
}

int cmd_retrieve(const RunConfig& c, std::ostream& out) {
  const auto q = query_context(c);
  RankedList ranked = retrieve(q.model.extractor(q.query).descriptor, q.index, c.pipeline.top_n, q.query_id);
  write_json(ordered_json{{"schema", "cscpr-ranked/1"},
                          {"run_config", run_config_to_json(c)},
                          {"query", q.query_id},
                          {"candidates", candidates_json(ranked)}},
             c.out, out);
  return kOk;
}

int cmd_rerank(const RunConfig& c, std::ostream& out) {
  const auto q = query_context(c);
  const RankedList ranked = retrieve(q.model.extractor(q.query).descriptor, q.index, c.pipeline.top_n, q.query_id);
  const std::size_t top_r = std::min(c.pipeline.top_r, ranked.candidates.size());
  auto cloud_of = [&](const std::string& id) {
    const FrameRecord* rec = q.lm.manifest.find(parse_ref(id));
    if (rec == nullptr) throw ValidationError({"candidate " + id + " is not in the manifest"});
    return q.lm.loader(*rec);
  };
  RankedList reranked;
  switch (c.pipeline.reranker) {
    case RerankerKind::kNone:
      reranked = ranked;
      break;
    case RerankerKind::kCscc:
      reranked = rerank_cscc(q.query, ranked, top_r, q.model.rerank, q.model.extractor, cloud_of);
      break;
    case RerankerKind::kKabsch:
      reranked = rerank_kabsch_baseline(q.query, ranked, top_r, c.pipeline.kabsch, cloud_of);
      break;
  }
  write_json(ordered_json{{"schema", "cscpr-ranked/1"},
                          {"run_config", run_config_to_json(c)},
                          {"query", q.query_id},
                          {"retrieved", candidates_json(ranked)},
                          {"candidates", candidates_json(reranked)}},
             c.out, out);
  return kOk;
}

int cmd_evaluate(const RunConfig& c, bool with_timing, std::ostream& out) {
  const auto lm = load_manifest(c);
  const bool needs_model = c.pipeline.descriptors == DescriptorMode::kNetwork ||
                           c.pipeline.reranker == RerankerKind::kCscc;
  std::optional<Model> model;
  if (needs_model) model = load_or_init_model(c);
  const EvalReport report = evaluate(lm.manifest, lm.loader, c.pipeline, model ? &*model : nullptr);
  ordered_json j = report_to_json(report, with_timing);
  j["run_config"] = run_config_to_json(c);
  if (!c.out.empty() && c.out != "-") {
    write_json(j, c.out, out);
  }
  for (const auto& [k, v] : report.recall_at) {
    out << "Recall@" << k << " = " << std::setprecision(6) << v << '\n';
  }
  out << "queries " << report.queries << ", evaluated " << report.evaluated << ", unanswerable "
      << report.unanswerable.size() << '\n';
  return kOk;
}

int cmd_grad_check(const RunConfig& c, std::ostream& out) {
  const GradCheckReport rep = check_rerank_gradients(c.grad_instances, c.seed);
  for (const auto& [name, err] : rep.block_max_error) {
    out << std::left << std::setw(24) << name << ' ' << std::scientific << std::setprecision(3) << err << '\n';
  }
  out << "max relative error " << std::scientific << rep.max_error << " over " << rep.instances
      << " instances, " << rep.coordinates << " coordinates (tolerance " << c.grad_tolerance << ")\n";
  if (!c.out.empty()) {
    ordered_json blocks = ordered_json::object();
    for (const auto& [name, err] : rep.block_max_error) blocks[name] = err;
    write_json(ordered_json{{"schema", "cscpr-gradcheck/1"},
                            {"run_config", run_config_to_json(c)},
                            {"max_error", rep.max_error},
                            {"blocks", blocks}},
               c.out, out);
  }
  return rep.max_error <= c.grad_tolerance ? kOk : kNumeric;
}

int cmd_toy_train(const RunConfig& c, std::ostream& out) {
  const auto econfig = ExtractorConfig::small();
  const ToyDataset data = make_toy_dataset(c.seed, econfig);
  const RerankDims dims = RerankDims::for_extractor(econfig);
  Model model = Model::init(econfig, dims, c.seed);
  const auto history = toy_train(data, model.rerank, c.train);
  const double final_lc = rerank_objective(data, model.rerank, false).loss;

  std::ostringstream csv;
  csv << "# run_config=" << run_config_to_json(c).dump() << '\n';
  csv << "step,lt,lc,total\n" << std::setprecision(17);
  for (const auto& r : history) csv << r.step << ',' << r.lt << ',' << r.lc << ',' << r.total << '\n';
  if (c.out.empty() || c.out == "-") {
    out << csv.str();
  } else {
    std::ofstream f(c.out, std::ios::binary);
    if (!f) throw IoError("cannot open " + c.out + " for writing");
    f << csv.str();
  }
  if (!c.weights.empty()) write_model(model, c.weights);
  out << "cross-entropy " << std::setprecision(6)
      << (history.empty() ? final_lc : history.front().lc) << " -> " << final_lc << " after "
      << history.size() << " steps\n";
  return kOk;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kIo: return kIo;
    case ErrorKind::kNumeric:
    case ErrorKind::kDegenerateGeometry: return kNumeric;
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kValidation: return kValidation;
  }
  return kValidation;
}

}  // namespace

int run_subcommand(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Point cloud place recognition: dataset forge, retrieval, reranking and evaluation", "cscpr"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Flags flags;
  std::string config_path;
  bool no_timing = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config; flags override its values");
    flags.add<std::size_t>(sub, "--threads", [](RunConfig& c, const std::size_t& v) { c.threads = v; },
                           "Worker threads");
    flags.add<std::uint64_t>(sub, "--seed", [](RunConfig& c, const std::uint64_t& v) { c.seed = v; },
                             "Random seed");
    flags.add<std::string>(sub, "--out", [](RunConfig& c, const std::string& v) { c.out = v; }, "Output path");
  };
  auto model_flags = [&](CLI::App* sub) {
    flags.add<std::string>(sub, "--weights", [](RunConfig& c, const std::string& v) { c.weights = v; },
                           "Weights file (default: seeded init of --extractor)");
    flags.add<std::string>(sub, "--extractor", [](RunConfig& c, const std::string& v) { c.extractor = v; },
                           "Extractor preset: standard | small");
  };
  auto manifest_flag = [&](CLI::App* sub) {
    flags.add<std::string>(sub, "--manifest", [](RunConfig& c, const std::string& v) { c.manifest = v; },
                           "Dataset manifest");
  };
  auto query_flags = [&](CLI::App* sub) {
    flags.add<std::string>(sub, "--query", [](RunConfig& c, const std::string& v) { c.query = v; },
                           "Query frame as scene/frame");
    flags.add<std::string>(sub, "--cloud", [](RunConfig& c, const std::string& v) { c.cloud = v; },
                           "Query cloud file (PCB1)");
    flags.add<std::size_t>(sub, "--top-n", [](RunConfig& c, const std::size_t& v) { c.pipeline.top_n = v; },
                           "Retrieval depth (0 = whole database)");
  };
  auto rerank_flags = [&](CLI::App* sub) {
    flags.add<std::string>(sub, "--reranker",
                           [](RunConfig& c, const std::string& v) { c.pipeline.reranker = reranker_from_string(v); },
                           "none | cscc | kabsch");
    flags.add<std::size_t>(sub, "--top-r", [](RunConfig& c, const std::size_t& v) { c.pipeline.top_r = v; },
                           "Rerank window");
    flags.add<std::size_t>(sub, "--ransac-iterations",
                           [](RunConfig& c, const std::size_t& v) { c.pipeline.kabsch.iterations = v; },
                           "RANSAC iterations of the Kabsch baseline");
    flags.add<double>(sub, "--inlier-threshold",
                      [](RunConfig& c, const double& v) { c.pipeline.kabsch.inlier_threshold = v; },
                      "Inlier distance of the Kabsch baseline (m)");
  };

  auto* synth = app.add_subcommand("synth", "Write a synthetic scene pack");
  common(synth);
  flags.add<std::size_t>(synth, "--scenes", [](RunConfig& c, const std::size_t& v) { c.synth_scenes = v; }, "Rooms");
  flags.add<std::size_t>(synth, "--frames", [](RunConfig& c, const std::size_t& v) { c.synth_frames = v; },
                         "Frames per room");
  flags.add<std::size_t>(synth, "--points", [](RunConfig& c, const std::size_t& v) { c.synth_points = v; },
                         "Points per frame");

  auto* gen = app.add_subcommand("gen-dataset", "Select database frames, label pairs, extract keyframes");
  common(gen);
  flags.add<std::string>(gen, "--scenes", [](RunConfig& c, const std::string& v) { c.scenes_dir = v; },
                         "Directory of scene folders with trajectory.json");
  flags.add<double>(gen, "--t-c", [](RunConfig& c, const double& v) { c.dataset.thresholds.t_c = v; },
                    "Database selection IoU threshold");
  flags.add<double>(gen, "--t-p", [](RunConfig& c, const double& v) { c.dataset.thresholds.t_p = v; },
                    "Positive coverage threshold");
  flags.add<double>(gen, "--t-n", [](RunConfig& c, const double& v) { c.dataset.thresholds.t_n = v; },
                    "Negative coverage threshold");
  flags.add<double>(gen, "--voxel", [](RunConfig& c, const double& v) { c.dataset.voxel_size = v; },
                    "Overlap voxel size (m)");
  flags.add<std::size_t>(gen, "--negative-cap",
                         [](RunConfig& c, const std::size_t& v) { c.dataset.negative_cap = v; },
                         "Stored negatives per frame");
  flags.add<std::string>(gen, "--split", [](RunConfig& c, const std::string& v) { c.split = v; },
                         "train | val | test");

  auto* init = app.add_subcommand("init-weights", "Write seeded initial weights");
  common(init);
  flags.add<std::string>(init, "--extractor", [](RunConfig& c, const std::string& v) { c.extractor = v; },
                         "Extractor preset: standard | small");

  auto* extract = app.add_subcommand("extract", "Compute global descriptors");
  common(extract);
  model_flags(extract);
  manifest_flag(extract);
  flags.add<std::string>(extract, "--cloud", [](RunConfig& c, const std::string& v) { c.cloud = v; },
                         "Single cloud file instead of a manifest");

  auto* retr = app.add_subcommand("retrieve", "Rank keyframes for one query");
  common(retr);
  model_flags(retr);
  manifest_flag(retr);
  query_flags(retr);

  auto* rer = app.add_subcommand("rerank", "Retrieve then rerank for one query");
  common(rer);
  model_flags(rer);
  manifest_flag(rer);
  query_flags(rer);
  rerank_flags(rer);

  auto* eval = app.add_subcommand("evaluate", "Recall@k over a manifest");
  common(eval);
  model_flags(eval);
  manifest_flag(eval);
  rerank_flags(eval);
  flags.add<std::size_t>(eval, "--top-n", [](RunConfig& c, const std::size_t& v) { c.pipeline.top_n = v; },
                         "Retrieval depth (0 = whole database)");
  flags.add<std::string>(eval, "--descriptors",
                         [](RunConfig& c, const std::string& v) { c.pipeline.descriptors = descriptor_mode_from_string(v); },
                         "network | oracle | random");
  flags.add<std::vector<std::size_t>>(eval, "--k",
                                      [](RunConfig& c, const std::vector<std::size_t>& v) { c.pipeline.recall_ks = v; },
                                      "Recall cutoffs (default 1 2 3)");
  eval->add_flag("--no-timing", no_timing, "Omit the timing_ms block");

  auto* grad = app.add_subcommand("grad-check", "Finite-difference check of the reranker gradients");
  common(grad);
  flags.add<std::size_t>(grad, "--instances", [](RunConfig& c, const std::size_t& v) { c.grad_instances = v; },
                         "Random instances");
  flags.add<double>(grad, "--tolerance", [](RunConfig& c, const double& v) { c.grad_tolerance = v; },
                    "Maximum relative error");

  auto* toy = app.add_subcommand("toy-train", "Train the reranker on the bundled toy set; CSV loss trajectory");
  common(toy);
  flags.add<std::size_t>(toy, "--steps", [](RunConfig& c, const std::size_t& v) { c.train.steps = v; }, "Steps");
  flags.add<double>(toy, "--lr-max", [](RunConfig& c, const double& v) { c.train.lr_max = v; }, "Initial rate");
  flags.add<double>(toy, "--lr-min", [](RunConfig& c, const double& v) { c.train.lr_min = v; }, "Final rate");
  flags.add<std::string>(toy, "--weights-out", [](RunConfig& c, const std::string& v) { c.weights = v; },
                         "Also write the trained weights");

  auto* self = app.add_subcommand("selftest", "Property checks on built-in synthetic data");
  common(self);

  std::vector<const char*> raw;
  for (const auto& a : argv) raw.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidation;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) {
      std::ifstream f(config_path, std::ios::binary);
      if (!f) throw IoError("cannot open config " + config_path);
      json j;
      try {
        j = json::parse(f);
      } catch (const json::parse_error& e) {
        throw ValidationError({config_path + ": " + e.what()});
      }
      apply_run_config_json(j, config);
    }
    flags.apply(config);
    config.sync();

    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "synth") return cmd_synth(config, out);
    if (name == "gen-dataset") return cmd_gen_dataset(config, out);
    if (name == "init-weights") return cmd_init_weights(config, out);
    if (name == "extract") return cmd_extract(config, out);
    if (name == "retrieve") return cmd_retrieve(config, out);
    if (name == "rerank") return cmd_rerank(config, out);
    if (name == "evaluate") return cmd_evaluate(config, !no_timing, out);
    if (name == "grad-check") return cmd_grad_check(config, out);
    if (name == "toy-train") return cmd_toy_train(config, out);
    if (name == "selftest") return run_selftest(config.seed, out) ? kOk : kValidation;
    err << "error: unknown subcommand " << name << '\n';
    return kValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  }
}

}  // namespace cscpr::cli
