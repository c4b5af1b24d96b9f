#include "cscpr/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cscpr/error.hpp"

namespace cscpr {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "weights I/O assumes little-endian");

RerankDims RerankDims::for_extractor(const ExtractorConfig& config) {
  config.validate();
  RerankDims d;
  d.source_dim = config.rerank_dim();
  d.center_dim = d.hidden_dim = 2 * config.rerank_dim();
  d.num_centers = config.layers[config.rerank_layer].centers;
  return d;
}

Model Model::init(const ExtractorConfig& config, const RerankDims& dims, std::uint64_t seed) {
  Model m;
  m.extractor = {config, ExtractorWeights::init(config, seed)};
  m.rerank.scc = SCCParams::init(config.rerank_dim(), dims.source_dim, dims.center_dim,
                                 dims.num_centers, dims.groups, seed);
  m.rerank.cscc = CSCCParams::init(dims.center_dim, dims.hidden_dim, dims.top_k, seed);
  m.seed = seed;
  return m;
}

ordered_json extractor_config_to_json(const ExtractorConfig& config) {
  ordered_json layers = ordered_json::array();
  for (const auto& l : config.layers) {
    layers.push_back(ordered_json{{"feature_dim", l.feature_dim},
                                  {"points_out", l.points_out},
                                  {"centers", l.centers},
                                  {"knn_k", l.knn_k},
                                  {"cluster_k", l.cluster_k}});
  }
  return ordered_json{{"layers", layers},
                      {"descriptor_dim", config.descriptor_dim},
                      {"rerank_layer", config.rerank_layer}};
}

ExtractorConfig extractor_config_from_json(const json& j) {
  ExtractorConfig c;
  try {
    for (const auto& l : j.at("layers")) {
      c.layers.push_back({l.at("feature_dim").get<std::size_t>(), l.at("points_out").get<std::size_t>(),
                          l.at("centers").get<std::size_t>(), l.at("knn_k").get<std::size_t>(),
                          l.at("cluster_k").get<std::size_t>()});
    }
    c.descriptor_dim = j.at("descriptor_dim").get<std::size_t>();
    c.rerank_layer = j.at("rerank_layer").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ValidationError({std::string("extractor config: ") + e.what()});
  }
  c.validate();
  return c;
}

namespace {

template <class F>
void for_each_model_tensor(Model& m, F&& f) {
  m.extractor.weights.for_each_tensor(f);
  m.rerank.for_each_tensor(f);
}

ordered_json header_json(Model& m) {
  const auto& scc = m.rerank.scc;
  const auto& cscc = m.rerank.cscc;
  ordered_json tensors = ordered_json::array();
  for_each_model_tensor(m, [&](const std::string& name, double*, Eigen::Index n) {
    tensors.push_back(ordered_json{{"name", name}, {"count", n}});
  });
  return ordered_json{
      {"schema", kWeightsSchema},
      {"seed", m.seed},
      {"extractor", extractor_config_to_json(m.extractor.config)},
      {"rerank",
       ordered_json{{"source_dim", scc.source_dim()},
                    {"center_dim", scc.out_dim()},
                    {"hidden_dim", cscc.l_c.out()},
                    {"num_centers", scc.num_centers},
                    {"knn_k", scc.knn_k},
                    {"groups", scc.gn_r.num_groups},
                    {"epsilon", scc.gn_r.epsilon},
                    {"top_k", cscc.top_k}}},
      {"tensors", tensors}};
}

}  // namespace

void write_model(const Model& model, const std::filesystem::path& path) {
  Model m = model;
  const std::string header = header_json(m).dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for_each_model_tensor(m, [&](const std::string&, double* data, Eigen::Index n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  });
  if (!out) throw IoError("failed writing " + path.string());
}

Model read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len == 0 || len > (std::uint64_t{1} << 24)) {
    throw IoError(path.string() + ": bad weights header length");
  }
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError(path.string() + ": truncated weights header");

  json h;
  try {
    h = json::parse(header);
  } catch (const json::parse_error& e) {
    throw ValidationError({path.string() + ": " + e.what()});
  }
  if (h.value("schema", std::string()) != kWeightsSchema) {
    throw ValidationError({path.string() + ": unsupported weights schema"});
  }

  Model m;
  try {
    const ExtractorConfig config = extractor_config_from_json(h.at("extractor"));
    const json& r = h.at("rerank");
    RerankDims dims;
    dims.source_dim = r.at("source_dim").get<std::size_t>();
    dims.center_dim = r.at("center_dim").get<std::size_t>();
    dims.hidden_dim = r.at("hidden_dim").get<std::size_t>();
    dims.num_centers = r.at("num_centers").get<std::size_t>();
    dims.groups = r.at("groups").get<std::size_t>();
    dims.top_k = r.at("top_k").get<std::size_t>();
    m = Model::init(config, dims, h.at("seed").get<std::uint64_t>());
    m.rerank.scc.knn_k = r.at("knn_k").get<std::size_t>();
    m.rerank.scc.gn_r.epsilon = m.rerank.scc.gn_s.epsilon = r.at("epsilon").get<double>();

    const json& table = h.at("tensors");
    std::size_t t = 0;
    for_each_model_tensor(m, [&](const std::string& name, double* data, Eigen::Index n) {
      if (t >= table.size() || table[t].at("name").get<std::string>() != name ||
          table[t].at("count").get<Eigen::Index>() != n) {
        throw ValidationError({path.string() + ": tensor table does not match " + name});
      }
      ++t;
      in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
      if (!in) throw IoError(path.string() + ": truncated tensor " + name);
    });
    if (t != table.size()) throw ValidationError({path.string() + ": extra tensors in table"});
  } catch (const json::exception& e) {
    throw ValidationError({path.string() + ": " + e.what()});
  }
  m.rerank.scc.validate();
  m.rerank.cscc.validate();
  return m;
}

}  // namespace cscpr
