#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <string>

#include "wattplan/errors.hpp"
#include "wattplan/gng.hpp"
#include "wattplan/planner.hpp"
#include "wattplan/state_models.hpp"
#include "wattplan/trace.hpp"

namespace wattplan {

/// Full run configuration. Defaults follow the evaluated setup: the GNG
/// hyper-parameter table per clustering level, k = 3 assignment, top = 22%,
/// fix = 30%, gamma = 0.9, update factor e = 0.1, 30% actuation flips and
/// 1000-reading slots. Every field maps to a dotted config key and CLI flag.
struct RunConfig {
  // paths
  std::string trace_path;
  std::string bundle_dir;
  std::string report_prefix;

  SchemaConfig schema;
  double train_fraction = 2.0 / 3.0;

  GngParams gng_device{10000, 100, 0.5, 0.995, 0.05, 0.006, 20, 150, 1000, 0};
  GngParams gng_domain{20000, 50, 0.3, 0.9, 0.05, 0.006, 20, 150, 1000, 0};
  int knn_k = kDefaultKnnK;
  DomainFeatureEncoding domain_encoding = DomainFeatureEncoding::mode_mean_power;

  double flip_fraction = 0.30;
  double top = 0.22;
  double fix_hd = 0.30;
  double fix_ld = 0.30;

  PlannerConfig planner;
  std::size_t slot_size = 1000;

  // synth subcommand
  std::string synth_preset = "standard";
  std::int64_t synth_length = 125200;
  double synth_noise = 0.01;
  double synth_jitter = 2.0;

  std::uint64_t seed = 42;
};

inline GngMetric metric_from_string(const std::string& name) {
  if (name == "euclidean") return GngMetric::euclidean;
  if (name == "manhattan") return GngMetric::manhattan;
  fail(Errc::config, "unknown gng metric: " + name);
}

namespace detail {

inline nlohmann::json gng_to_json(const GngParams& p) {
  return {{"max_nodes", p.max_nodes},
          {"max_edge_age", p.max_edge_age},
          {"alpha", p.alpha},
          {"error_decay", p.error_decay},
          {"eps_winner", p.eps_winner},
          {"eps_neighbor", p.eps_neighbor},
          {"insertion_interval", p.insertion_interval},
          {"epochs", p.epochs},
          {"start_nodes", p.start_nodes},
          {"metric", p.metric == GngMetric::euclidean ? "euclidean" : "manhattan"}};
}

inline void gng_from_json(const nlohmann::json& j, GngParams& p) {
  p.max_nodes = j.value("max_nodes", p.max_nodes);
  p.max_edge_age = j.value("max_edge_age", p.max_edge_age);
  p.alpha = j.value("alpha", p.alpha);
  p.error_decay = j.value("error_decay", p.error_decay);
  p.eps_winner = j.value("eps_winner", p.eps_winner);
  p.eps_neighbor = j.value("eps_neighbor", p.eps_neighbor);
  p.insertion_interval = j.value("insertion_interval", p.insertion_interval);
  p.epochs = j.value("epochs", p.epochs);
  p.start_nodes = j.value("start_nodes", p.start_nodes);
  if (j.contains("metric")) p.metric = metric_from_string(j["metric"].get<std::string>());
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  return {
      {"paths",
       {{"trace", c.trace_path}, {"bundle", c.bundle_dir}, {"report", c.report_prefix}}},
      {"schema",
       {{"timestamp_col", c.schema.timestamp_col},
        {"device_col", c.schema.device_col},
        {"power_col", c.schema.power_col},
        {"strict", c.schema.strict}}},
      {"split", {{"train_fraction", c.train_fraction}}},
      {"gng", {{"device", detail::gng_to_json(c.gng_device)}, {"domain", detail::gng_to_json(c.gng_domain)}}},
      {"knn", {{"k", c.knn_k}}},
      {"domain",
       {{"encoding",
         c.domain_encoding == DomainFeatureEncoding::mode_mean_power ? "mode_mean_power" : "one_hot"}}},
      {"behavior", {{"flip_fraction", c.flip_fraction}}},
      {"classify", {{"top", c.top}, {"fix_hd", c.fix_hd}, {"fix_ld", c.fix_ld}}},
      {"planner",
       {{"gamma", c.planner.gamma},
        {"update_factor", c.planner.update_factor},
        {"smoothing", c.planner.smoothing},
        {"replan_interval", c.planner.replan_interval}}},
      {"sim", {{"slot_size", c.slot_size}}},
      {"synth",
       {{"preset", c.synth_preset},
        {"length", c.synth_length},
        {"noise_prob", c.synth_noise},
        {"power_jitter", c.synth_jitter}}},
      {"seed", c.seed},
  };
}

inline RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {}) {
  RunConfig c = std::move(base);
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    c.trace_path = p.value("trace", c.trace_path);
    c.bundle_dir = p.value("bundle", c.bundle_dir);
    c.report_prefix = p.value("report", c.report_prefix);
  }
  if (j.contains("schema")) {
    const auto& s = j["schema"];
    c.schema.timestamp_col = s.value("timestamp_col", c.schema.timestamp_col);
    c.schema.device_col = s.value("device_col", c.schema.device_col);
    c.schema.power_col = s.value("power_col", c.schema.power_col);
    c.schema.strict = s.value("strict", c.schema.strict);
  }
  if (j.contains("split")) c.train_fraction = j["split"].value("train_fraction", c.train_fraction);
  if (j.contains("gng")) {
    if (j["gng"].contains("device")) detail::gng_from_json(j["gng"]["device"], c.gng_device);
    if (j["gng"].contains("domain")) detail::gng_from_json(j["gng"]["domain"], c.gng_domain);
  }
  if (j.contains("knn")) c.knn_k = j["knn"].value("k", c.knn_k);
  if (j.contains("domain")) {
    const std::string enc = j["domain"].value("encoding", std::string("mode_mean_power"));
    if (enc == "mode_mean_power")
      c.domain_encoding = DomainFeatureEncoding::mode_mean_power;
    else if (enc == "one_hot")
      c.domain_encoding = DomainFeatureEncoding::one_hot;
    else
      fail(Errc::config, "unknown domain encoding: " + enc);
  }
  if (j.contains("behavior")) c.flip_fraction = j["behavior"].value("flip_fraction", c.flip_fraction);
  if (j.contains("classify")) {
    const auto& k = j["classify"];
    c.top = k.value("top", c.top);
    c.fix_hd = k.value("fix_hd", c.fix_hd);
    c.fix_ld = k.value("fix_ld", c.fix_ld);
  }
  if (j.contains("planner")) {
    const auto& p = j["planner"];
    c.planner.gamma = p.value("gamma", c.planner.gamma);
    c.planner.update_factor = p.value("update_factor", c.planner.update_factor);
    c.planner.smoothing = p.value("smoothing", c.planner.smoothing);
    c.planner.replan_interval = p.value("replan_interval", c.planner.replan_interval);
  }
  if (j.contains("sim")) c.slot_size = j["sim"].value("slot_size", c.slot_size);
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    c.synth_preset = s.value("preset", c.synth_preset);
    c.synth_length = s.value("length", c.synth_length);
    c.synth_noise = s.value("noise_prob", c.synth_noise);
    c.synth_jitter = s.value("power_jitter", c.synth_jitter);
  }
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  return c;
}

inline RunConfig load_config_file(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot read config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, "invalid config JSON: " + std::string(e.what()));
  }
  return config_from_json(j, std::move(base));
}

}  // namespace wattplan
