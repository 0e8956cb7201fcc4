#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "wattplan/config.hpp"
#include "wattplan/errors.hpp"
#include "wattplan/pipeline.hpp"

namespace wattplan {

// Model bundle: a directory of versioned JSON files. The manifest carries
// everything except the neuron graphs, which get one file per device plus
// one for the domain level. Doubles serialize shortest-round-trip, so
// load(save(x)) reproduces bit-identical models.

constexpr int kBundleFormatVersion = 1;

namespace detail {

inline nlohmann::json gng_to_json(const GngGraph& g, const GngParams& params) {
  nlohmann::json neurons = nlohmann::json::array();
  for (const GngNeuron& n : g.neurons) neurons.push_back({{"p", n.position}, {"e", n.error}});
  nlohmann::json edges = nlohmann::json::array();
  for (const GngEdge& e : g.edges) edges.push_back({e.a, e.b, e.age});
  return {{"format_version", kBundleFormatVersion},
          {"dim", g.dim},
          {"metric", g.metric == GngMetric::euclidean ? "euclidean" : "manhattan"},
          {"params", gng_to_json(params)},
          {"neurons", neurons},
          {"edges", edges},
          {"component_labels", g.component_labels},
          {"component_count", g.component_count}};
}

inline GngGraph gng_graph_from_json(const nlohmann::json& j) {
  if (j.value("format_version", -1) != kBundleFormatVersion)
    fail(Errc::bad_version, "gng file: unsupported format version");
  GngGraph g;
  g.dim = j.at("dim").get<int>();
  g.metric = metric_from_string(j.value("metric", std::string("euclidean")));
  for (const auto& n : j.at("neurons"))
    g.neurons.push_back({n.at("p").get<std::vector<double>>(), n.at("e").get<double>()});
  for (const auto& e : j.at("edges")) g.edges.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<int>()});
  g.component_labels = j.at("component_labels").get<std::vector<int>>();
  g.component_count = j.at("component_count").get<int>();
  if (g.component_labels.size() != g.neurons.size())
    fail(Errc::bad_version, "gng file: label count does not match neuron count");
  return g;
}

inline nlohmann::json minmax_to_json(const MinMax& m) { return {{"lo", m.lo}, {"hi", m.hi}}; }
inline MinMax minmax_from_json(const nlohmann::json& j) {
  return {j.at("lo").get<double>(), j.at("hi").get<double>()};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out.good()) fail(Errc::io, "failed writing " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot read " + path.string());
  try {
    nlohmann::json doc;
    in >> doc;
    return doc;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, path.string() + ": invalid JSON: " + e.what());
  }
}

inline std::string device_file_name(std::size_t index) {
  return "device_" + std::to_string(index) + ".gng.json";
}

}  // namespace detail

inline void save_bundle(const std::string& dir, const ModelSet& models, const RunConfig& cfg,
                        const TrainingArtifacts* art = nullptr) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(Errc::io, "cannot create bundle directory: " + dir);

  nlohmann::json manifest;
  manifest["format_version"] = kBundleFormatVersion;
  manifest["config"] = to_json(cfg);
  manifest["registry"] = models.registry;

  GngParams device_params = cfg.gng_device;
  device_params.seed = derive_seed(cfg.seed, "gng.device");
  nlohmann::json devices = nlohmann::json::array();
  for (std::size_t d = 0; d < models.modes.size(); ++d) {
    const ModeModel& m = models.modes[d];
    GngParams p = device_params;
    p.seed = derive_seed(device_params.seed, "gng.device/" + m.device_id);
    detail::write_json(fs::path(dir) / detail::device_file_name(d), detail::gng_to_json(m.graph, p));
    devices.push_back({{"device_id", m.device_id},
                       {"graph_file", detail::device_file_name(d)},
                       {"mode_count", m.mode_count},
                       {"mode_mean_power", m.mode_mean_power},
                       {"stats",
                        {{"hour", detail::minmax_to_json(m.stats.hour)},
                         {"month", detail::minmax_to_json(m.stats.month)},
                         {"year", detail::minmax_to_json(m.stats.year)},
                         {"power", detail::minmax_to_json(m.stats.power)}}}});
  }
  manifest["devices"] = devices;

  GngParams domain_params = cfg.gng_domain;
  domain_params.seed = derive_seed(derive_seed(cfg.seed, "gng.domain"), "gng.domain");
  detail::write_json(fs::path(dir) / "domain.gng.json",
                     detail::gng_to_json(models.domain.graph, domain_params));
  nlohmann::json scale = nlohmann::json::array();
  for (const MinMax& m : models.domain.feature_scale) scale.push_back(detail::minmax_to_json(m));
  manifest["domain"] = {
      {"graph_file", "domain.gng.json"},
      {"state_count", models.domain.state_count},
      {"encoding",
       models.domain.encoding == DomainFeatureEncoding::mode_mean_power ? "mode_mean_power" : "one_hot"},
      {"device_mode_power", models.domain.device_mode_power},
      {"feature_scale", scale},
      {"representative", models.domain.representative},
      {"state_total_power", models.domain.state_total_power},
  };

  if (art) {
    nlohmann::json visits = nlohmann::json::array();
    for (const auto& [s, n] : art->classification.visit_counts) visits.push_back({s, n});
    manifest["classification"] = {{"top", art->classification.top},
                                  {"fix_hd", art->classification.fix_hd},
                                  {"fix_ld", art->classification.fix_ld},
                                  {"shd", art->classification.shd},
                                  {"lhd", art->classification.lhd},
                                  {"sld", art->classification.sld},
                                  {"lld", art->classification.lld},
                                  {"visit_counts", visits}};

    nlohmann::json cells = nlohmann::json::array();
    for (int d = 0; d < art->counts.state_count; ++d) {
      if (d >= static_cast<int>(art->counts.by_source.size())) break;
      for (const auto& [dp, cell] : art->counts.by_source[d])
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            if (cell[i][j] > 0) cells.push_back({d, dp, i, j, cell[i][j]});
    }
    manifest["counts"] = {{"state_count", art->counts.state_count},
                          {"total", art->counts.total},
                          {"cells", cells}};

    const TransitionModel& t = art->planner.transition;
    nlohmann::json rows = nlohmann::json::array();
    for (int s = 0; s < t.state_count(); ++s) {
      for (Action a : {Action::stay, Action::move}) {
        nlohmann::json entries = nlohmann::json::array();
        auto row = t.row(s, a);
        for (int sp = 0; sp < t.state_count(); ++sp)
          if (row[sp] != 0.0) entries.push_back({sp, row[sp]});
        rows.push_back({{"s", s}, {"a", to_string(a)}, {"p", entries}});
      }
    }
    nlohmann::json policy = nlohmann::json::array();
    for (Action a : art->planner.solution.policy) policy.push_back(to_string(a));
    manifest["planner"] = {{"smoothing", t.smoothing()},
                           {"transition", rows},
                           {"reward", art->planner.reward},
                           {"policy", policy},
                           {"utility", art->planner.solution.utility},
                           {"iterations", art->planner.solution.iterations},
                           {"gamma", art->planner.solution.gamma},
                           {"config",
                            {{"gamma", art->planner.config.gamma},
                             {"update_factor", art->planner.config.update_factor},
                             {"smoothing", art->planner.config.smoothing},
                             {"replan_interval", art->planner.config.replan_interval}}}};
  }

  detail::write_json(fs::path(dir) / "manifest.json", manifest);
}

struct LoadedBundle {
  ModelSet models;
  nlohmann::json config_echo;
  bool trained = false;
  StateClassification classification;
  JointTransitionCounts counts;
  PlannerState planner;
};

inline LoadedBundle load_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  const nlohmann::json manifest = detail::read_json(root / "manifest.json");
  if (manifest.value("format_version", -1) != kBundleFormatVersion)
    fail(Errc::bad_version, "bundle manifest: unsupported format version");

  LoadedBundle b;
  b.config_echo = manifest.value("config", nlohmann::json::object());
  b.models.registry = manifest.at("registry").get<std::vector<std::string>>();

  for (const auto& dev : manifest.at("devices")) {
    ModeModel m;
    m.device_id = dev.at("device_id").get<std::string>();
    if (b.models.modes.size() >= b.models.registry.size() ||
        b.models.registry[b.models.modes.size()] != m.device_id)
      fail(Errc::bad_version, "bundle manifest: device order does not match registry");
    m.mode_count = dev.at("mode_count").get<int>();
    m.mode_mean_power = dev.at("mode_mean_power").get<std::vector<double>>();
    const auto& stats = dev.at("stats");
    m.stats.hour = detail::minmax_from_json(stats.at("hour"));
    m.stats.month = detail::minmax_from_json(stats.at("month"));
    m.stats.year = detail::minmax_from_json(stats.at("year"));
    m.stats.power = detail::minmax_from_json(stats.at("power"));
    m.graph = detail::gng_graph_from_json(detail::read_json(root / dev.at("graph_file").get<std::string>()));
    b.models.modes.push_back(std::move(m));
  }

  const auto& dom = manifest.at("domain");
  b.models.domain.state_count = dom.at("state_count").get<int>();
  b.models.domain.encoding = dom.at("encoding").get<std::string>() == "one_hot"
                                 ? DomainFeatureEncoding::one_hot
                                 : DomainFeatureEncoding::mode_mean_power;
  b.models.domain.device_mode_power = dom.at("device_mode_power").get<std::vector<std::vector<double>>>();
  for (const auto& s : dom.at("feature_scale"))
    b.models.domain.feature_scale.push_back(detail::minmax_from_json(s));
  b.models.domain.representative = dom.at("representative").get<std::vector<ModeVector>>();
  b.models.domain.state_total_power = dom.at("state_total_power").get<std::vector<double>>();
  b.models.domain.graph =
      detail::gng_graph_from_json(detail::read_json(root / dom.at("graph_file").get<std::string>()));

  if (!manifest.contains("planner")) return b;
  b.trained = true;

  const auto& cls = manifest.at("classification");
  b.classification.top = cls.at("top").get<double>();
  b.classification.fix_hd = cls.at("fix_hd").get<double>();
  b.classification.fix_ld = cls.at("fix_ld").get<double>();
  b.classification.shd = cls.at("shd").get<std::vector<int>>();
  b.classification.lhd = cls.at("lhd").get<std::vector<int>>();
  b.classification.sld = cls.at("sld").get<std::vector<int>>();
  b.classification.lld = cls.at("lld").get<std::vector<int>>();
  for (const auto& v : cls.at("visit_counts"))
    b.classification.visit_counts[v[0].get<int>()] = v[1].get<std::uint64_t>();

  const auto& counts = manifest.at("counts");
  b.counts.state_count = counts.at("state_count").get<int>();
  b.counts.total = counts.at("total").get<std::uint64_t>();
  b.counts.by_source.resize(b.counts.state_count);
  for (const auto& c : counts.at("cells"))
    b.counts.by_source[c[0].get<int>()][c[1].get<int>()][c[2].get<int>()][c[3].get<int>()] =
        c[4].get<std::uint64_t>();

  const auto& planner = manifest.at("planner");
  const int m = b.models.domain.state_count;
  b.planner.transition = TransitionModel(m, planner.at("smoothing").get<double>());
  for (const auto& row : planner.at("transition")) {
    const int s = row.at("s").get<int>();
    const Action a = row.at("a").get<std::string>() == "MOVE" ? Action::move : Action::stay;
    auto dest = b.planner.transition.row(s, a);
    for (const auto& entry : row.at("p")) dest[entry[0].get<int>()] = entry[1].get<double>();
  }
  b.planner.transition.check_stochastic();
  b.planner.reward = planner.at("reward").get<std::vector<double>>();
  for (const auto& a : planner.at("policy"))
    b.planner.solution.policy.push_back(a.get<std::string>() == "MOVE" ? Action::move : Action::stay);
  b.planner.solution.utility = planner.at("utility").get<std::vector<double>>();
  b.planner.solution.iterations = planner.at("iterations").get<int>();
  b.planner.solution.gamma = planner.at("gamma").get<double>();
  const auto& pc = planner.at("config");
  b.planner.config.gamma = pc.at("gamma").get<double>();
  b.planner.config.update_factor = pc.at("update_factor").get<double>();
  b.planner.config.smoothing = pc.at("smoothing").get<double>();
  b.planner.config.replan_interval = pc.at("replan_interval").get<std::size_t>();
  return b;
}

}  // namespace wattplan
