#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cscpr/manifest.hpp"
#include "cscpr/pipeline.hpp"
#include "cscpr/toy_train.hpp"

namespace cscpr::cli {

inline constexpr const char* kRunSchema = "cscpr-run/1";

enum ExitCode : int { kOk = 0, kValidation = 1, kIo = 2, kNumeric = 3 };

/// Every knob of a run. Loaded from --config, then overridden by flags, and
/// echoed into every artifact.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string extractor = "standard";  // preset: standard | small

  GenerationConfig dataset;
  std::string split = "test";

  PipelineConfig pipeline;
  TrainConfig train;

  std::size_t synth_scenes = 2;
  std::size_t synth_frames = 50;
  std::size_t synth_points = 1024;

  std::size_t grad_instances = 20;
  double grad_tolerance = 1e-4;

  std::string scenes_dir;
  std::string manifest;
  std::string weights;
  std::string out;
  std::string query;
  std::string cloud;

  /// Copies seed and threads into the nested configs.
  void sync();
  ExtractorConfig extractor_config() const;
};

nlohmann::ordered_json run_config_to_json(const RunConfig& config);
/// Keys missing from `j` keep the values already in `config`.
void apply_run_config_json(const nlohmann::json& j, RunConfig& config);

/// Parses and runs one subcommand. argv[0] is the program name.
int run_subcommand(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace cscpr::cli
