// wattplan: smart-home energy planning pipeline.
//
//   synth    -> generate a synthetic smart-meter trace
//   cluster  -> two-step GNG clustering into device modes and domain states
//   train    -> behavior statistics, transition model, policy
//   simulate -> replay the test split live, score clashes, write reports
//   report   -> re-emit CSV/JSON from saved metrics

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include "wattplan/bundle.hpp"
#include "wattplan/config.hpp"
#include "wattplan/pipeline.hpp"
#include "wattplan/sim.hpp"

using namespace wattplan;

namespace {

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::config:
      return 1;
    case Errc::parse:
    case Errc::negative_power:
    case Errc::bad_timestamp:
    case Errc::empty_trace:
    case Errc::device_never_seen:
    case Errc::insufficient_data:
    case Errc::dimension_mismatch:
    case Errc::length_mismatch:
    case Errc::invalid_state:
    case Errc::not_stochastic:
    case Errc::io:
    case Errc::bad_version:
    case Errc::malformed_metrics:
      return 2;
  }
  return 3;
}

// Flag values land here only when given; precedence is defaults < bundle
// echo < --config file < explicit flags.
struct FlagOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> train_fraction;
  std::optional<std::string> ts_col, dev_col, pow_col;
  std::optional<bool> strict;
  std::optional<int> dev_max_nodes, dev_max_edge_age, dev_insertion, dev_epochs, dev_start;
  std::optional<double> dev_alpha, dev_error_decay, dev_eps_winner, dev_eps_neighbor;
  std::optional<std::string> dev_metric, dom_metric;
  std::optional<int> dom_max_nodes, dom_max_edge_age, dom_insertion, dom_epochs, dom_start;
  std::optional<double> dom_alpha, dom_error_decay, dom_eps_winner, dom_eps_neighbor;
  std::optional<int> knn_k;
  std::optional<std::string> encoding;
  std::optional<double> flip_fraction, top, fix_hd, fix_ld;
  std::optional<double> gamma, update_factor, smoothing;
  std::optional<std::size_t> replan_interval, slot_size;
  std::optional<std::string> synth_preset;
  std::optional<std::int64_t> synth_length;
  std::optional<double> synth_noise, synth_jitter;
};

void add_common_flags(CLI::App* cmd, FlagOverrides& f) {
  cmd->add_option("--seed", f.seed, "master seed; all module seeds derive from it");
  cmd->add_option("--split.train_fraction", f.train_fraction, "chronological train share in (0,1)");
  cmd->add_option("--schema.timestamp_col", f.ts_col, "timestamp column (name or index)");
  cmd->add_option("--schema.device_col", f.dev_col, "device column (name or index)");
  cmd->add_option("--schema.power_col", f.pow_col, "power column (name or index)");
  cmd->add_flag("--schema.strict", f.strict, "abort on malformed rows");

  cmd->add_option("--gng.device.max_nodes", f.dev_max_nodes);
  cmd->add_option("--gng.device.max_edge_age", f.dev_max_edge_age);
  cmd->add_option("--gng.device.alpha", f.dev_alpha);
  cmd->add_option("--gng.device.error_decay", f.dev_error_decay);
  cmd->add_option("--gng.device.eps_winner", f.dev_eps_winner);
  cmd->add_option("--gng.device.eps_neighbor", f.dev_eps_neighbor);
  cmd->add_option("--gng.device.insertion_interval", f.dev_insertion);
  cmd->add_option("--gng.device.epochs", f.dev_epochs);
  cmd->add_option("--gng.device.start_nodes", f.dev_start);
  cmd->add_option("--gng.device.metric", f.dev_metric, "euclidean | manhattan");

  cmd->add_option("--gng.domain.max_nodes", f.dom_max_nodes);
  cmd->add_option("--gng.domain.max_edge_age", f.dom_max_edge_age);
  cmd->add_option("--gng.domain.alpha", f.dom_alpha);
  cmd->add_option("--gng.domain.error_decay", f.dom_error_decay);
  cmd->add_option("--gng.domain.eps_winner", f.dom_eps_winner);
  cmd->add_option("--gng.domain.eps_neighbor", f.dom_eps_neighbor);
  cmd->add_option("--gng.domain.insertion_interval", f.dom_insertion);
  cmd->add_option("--gng.domain.epochs", f.dom_epochs);
  cmd->add_option("--gng.domain.start_nodes", f.dom_start);
  cmd->add_option("--gng.domain.metric", f.dom_metric, "euclidean | manhattan");

  cmd->add_option("--knn.k", f.knn_k, "neighbors for mode/state assignment");
  cmd->add_option("--domain.encoding", f.encoding, "mode_mean_power | one_hot");
  cmd->add_option("--behavior.flip_fraction", f.flip_fraction, "actuation flip share");
  cmd->add_option("--classify.top", f.top, "HD share of distinct states");
  cmd->add_option("--classify.fix_hd", f.fix_hd, "strict share of HD");
  cmd->add_option("--classify.fix_ld", f.fix_ld, "strict share of LD");
  cmd->add_option("--planner.gamma", f.gamma);
  cmd->add_option("--planner.update_factor", f.update_factor);
  cmd->add_option("--planner.smoothing", f.smoothing);
  cmd->add_option("--planner.replan_interval", f.replan_interval);
  cmd->add_option("--sim.slot_size", f.slot_size, "readings per evaluation slot");
  cmd->add_option("--synth.preset", f.synth_preset);
  cmd->add_option("--synth.length", f.synth_length, "time steps to generate");
  cmd->add_option("--synth.noise_prob", f.synth_noise, "per-step routine deviation chance");
  cmd->add_option("--synth.power_jitter", f.synth_jitter, "gaussian watt jitter");
}

void apply(const FlagOverrides& f, RunConfig& c) {
  if (f.seed) c.seed = *f.seed;
  if (f.train_fraction) c.train_fraction = *f.train_fraction;
  if (f.ts_col) c.schema.timestamp_col = *f.ts_col;
  if (f.dev_col) c.schema.device_col = *f.dev_col;
  if (f.pow_col) c.schema.power_col = *f.pow_col;
  if (f.strict) c.schema.strict = *f.strict;

  auto apply_gng = [](GngParams& p, const std::optional<int>& mn, const std::optional<int>& mea,
                      const std::optional<double>& alpha, const std::optional<double>& decay,
                      const std::optional<double>& ew, const std::optional<double>& en,
                      const std::optional<int>& ii, const std::optional<int>& ep,
                      const std::optional<int>& sn) {
    if (mn) p.max_nodes = *mn;
    if (mea) p.max_edge_age = *mea;
    if (alpha) p.alpha = *alpha;
    if (decay) p.error_decay = *decay;
    if (ew) p.eps_winner = *ew;
    if (en) p.eps_neighbor = *en;
    if (ii) p.insertion_interval = *ii;
    if (ep) p.epochs = *ep;
    if (sn) p.start_nodes = *sn;
  };
  apply_gng(c.gng_device, f.dev_max_nodes, f.dev_max_edge_age, f.dev_alpha, f.dev_error_decay,
            f.dev_eps_winner, f.dev_eps_neighbor, f.dev_insertion, f.dev_epochs, f.dev_start);
  apply_gng(c.gng_domain, f.dom_max_nodes, f.dom_max_edge_age, f.dom_alpha, f.dom_error_decay,
            f.dom_eps_winner, f.dom_eps_neighbor, f.dom_insertion, f.dom_epochs, f.dom_start);
  if (f.dev_metric) c.gng_device.metric = metric_from_string(*f.dev_metric);
  if (f.dom_metric) c.gng_domain.metric = metric_from_string(*f.dom_metric);

  if (f.knn_k) c.knn_k = *f.knn_k;
  if (f.encoding) {
    if (*f.encoding == "mode_mean_power")
      c.domain_encoding = DomainFeatureEncoding::mode_mean_power;
    else if (*f.encoding == "one_hot")
      c.domain_encoding = DomainFeatureEncoding::one_hot;
    else
      fail(Errc::config, "unknown domain encoding: " + *f.encoding);
  }
  if (f.flip_fraction) c.flip_fraction = *f.flip_fraction;
  if (f.top) c.top = *f.top;
  if (f.fix_hd) c.fix_hd = *f.fix_hd;
  if (f.fix_ld) c.fix_ld = *f.fix_ld;
  if (f.gamma) c.planner.gamma = *f.gamma;
  if (f.update_factor) c.planner.update_factor = *f.update_factor;
  if (f.smoothing) c.planner.smoothing = *f.smoothing;
  if (f.replan_interval) c.planner.replan_interval = *f.replan_interval;
  if (f.slot_size) c.slot_size = *f.slot_size;
  if (f.synth_preset) c.synth_preset = *f.synth_preset;
  if (f.synth_length) c.synth_length = *f.synth_length;
  if (f.synth_noise) c.synth_noise = *f.synth_noise;
  if (f.synth_jitter) c.synth_jitter = *f.synth_jitter;
}

RunConfig resolve_config(const std::string& config_file, const FlagOverrides& flags, RunConfig base = {}) {
  RunConfig cfg = std::move(base);
  if (!config_file.empty()) cfg = load_config_file(config_file, std::move(cfg));
  apply(flags, cfg);
  return cfg;
}

void check_registry(const ModelSet& models, const FrameSet& frames) {
  if (models.registry != frames.registry)
    fail(Errc::invalid_state, "trace devices do not match the bundle registry");
}

int cmd_synth(const RunConfig& cfg, const std::string& out, const std::string& truth_out) {
  auto spec = synth_spec_from_config(cfg);
  auto trace = generate_synthetic_trace(spec);
  std::ofstream os(out, std::ios::binary);
  if (!os) fail(Errc::io, "cannot write " + out);
  write_trace_csv(os, trace.readings);
  if (!os.good()) fail(Errc::io, "failed writing " + out);
  if (!truth_out.empty()) {
    std::ofstream ts(truth_out, std::ios::binary);
    if (!ts) fail(Errc::io, "cannot write " + truth_out);
    ts << "step";
    for (const auto& d : spec.devices) ts << ",mode_" << d.id;
    ts << '\n';
    for (std::size_t t = 0; t < trace.truth.size(); ++t) {
      ts << t;
      for (int m : trace.truth[t]) ts << ',' << m;
      ts << '\n';
    }
  }
  std::printf("synth: %zu readings over %lld steps -> %s\n", trace.readings.size(),
              static_cast<long long>(spec.length), out.c_str());
  return 0;
}

int cmd_cluster(RunConfig cfg, const std::string& trace, const std::string& bundle_dir) {
  cfg.trace_path = trace;
  cfg.bundle_dir = bundle_dir;
  FrameSet frames = load_frames(trace, cfg);
  if (frames.parse_report.rows_skipped > 0)
    std::fprintf(stderr, "cluster: skipped %zu malformed rows\n", frames.parse_report.rows_skipped);
  ModelSet models = fit_models(frames.train(), frames.registry, cfg);
  save_bundle(bundle_dir, models, cfg, nullptr);
  for (const ModeModel& m : models.modes)
    std::printf("device %-16s modes=%d\n", m.device_id.c_str(), m.mode_count);
  std::printf("domain states: %d\n", models.domain.state_count);
  return 0;
}

int cmd_train(const std::string& config_file, const FlagOverrides& flags, const std::string& trace,
              const std::string& bundle_dir) {
  LoadedBundle bundle = load_bundle(bundle_dir);
  // The bundle's config echo is the base so cluster-time choices flow through.
  RunConfig cfg = resolve_config(config_file, flags, config_from_json(bundle.config_echo));
  cfg.trace_path = trace;
  cfg.bundle_dir = bundle_dir;
  FrameSet frames = load_frames(trace, cfg);
  check_registry(bundle.models, frames);
  TrainingArtifacts art = train_planner(bundle.models, frames.train(), cfg);
  save_bundle(bundle_dir, bundle.models, cfg, &art);
  std::printf("train: %zu frames, %d states, policy solved in %d iterations\n",
              frames.train().size(), bundle.models.domain.state_count, art.planner.solution.iterations);
  std::printf("classified: SHD=%zu LHD=%zu SLD=%zu LLD=%zu\n", art.classification.shd.size(),
              art.classification.lhd.size(), art.classification.sld.size(),
              art.classification.lld.size());
  return 0;
}

int cmd_simulate(const std::string& config_file, const FlagOverrides& flags, const std::string& trace,
                 const std::string& bundle_dir, const std::string& report_prefix) {
  LoadedBundle bundle = load_bundle(bundle_dir);
  if (!bundle.trained) fail(Errc::invalid_state, "bundle is not trained; run `train` first");
  RunConfig cfg = resolve_config(config_file, flags, config_from_json(bundle.config_echo));
  cfg.trace_path = trace;
  cfg.bundle_dir = bundle_dir;
  cfg.report_prefix = report_prefix;
  FrameSet frames = load_frames(trace, cfg);
  check_registry(bundle.models, frames);

  SimConfig sim;
  sim.slot_size = cfg.slot_size;
  sim.knn_k = cfg.knn_k;
  auto metrics = run_simulation(bundle.models.modes, bundle.models.domain, bundle.classification,
                                bundle.planner, frames.test(), sim);
  emit_report(metrics, to_json(cfg), report_prefix + ".csv", report_prefix + ".json");

  const SimSummary s = summarize(metrics);
  std::printf("slots: %zu (slot size %zu)\n", metrics.size(), cfg.slot_size);
  std::printf("strict clashes, first decile mean: %.3f\n", s.first_decile_strict_mean);
  std::printf("strict clashes, last decile mean:  %.3f\n", s.last_decile_strict_mean);
  std::printf("actual power total:  %.1f\n", s.total_actual_power);
  std::printf("planned power total: %.1f\n", s.total_planned_power);
  std::printf("percent saved: %.2f%%\n", s.percent_saved);
  return 0;
}

int cmd_report(const std::string& metrics_path, const std::string& out_prefix) {
  LoadedReport loaded = load_report(metrics_path);
  emit_report(loaded.metrics, loaded.config, out_prefix + ".csv", out_prefix + ".json");
  std::printf("report: %zu slots -> %s.{csv,json}\n", loaded.metrics.size(), out_prefix.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smart-home energy planning: GNG clustering + online MDP"};
  app.require_subcommand(1);

  std::string config_file, trace, bundle_dir, report_prefix, out, truth_out, metrics_path;
  FlagOverrides flags;

  auto* synth = app.add_subcommand("synth", "generate a synthetic trace");
  synth->add_option("--config", config_file, "JSON config file");
  synth->add_option("--out", out, "output trace CSV")->required();
  synth->add_option("--truth-out", truth_out, "optional ground-truth mode CSV");
  add_common_flags(synth, flags);

  auto* cluster = app.add_subcommand("cluster", "fit device modes and domain states");
  cluster->add_option("--config", config_file, "JSON config file");
  cluster->add_option("--trace", trace, "input trace CSV")->required();
  cluster->add_option("--bundle", bundle_dir, "model bundle directory")->required();
  add_common_flags(cluster, flags);

  auto* train = app.add_subcommand("train", "estimate behavior and solve the policy");
  train->add_option("--config", config_file, "JSON config file");
  train->add_option("--trace", trace, "input trace CSV")->required();
  train->add_option("--bundle", bundle_dir, "model bundle directory")->required();
  add_common_flags(train, flags);

  auto* simulate = app.add_subcommand("simulate", "replay the test split and write reports");
  simulate->add_option("--config", config_file, "JSON config file");
  simulate->add_option("--trace", trace, "input trace CSV")->required();
  simulate->add_option("--bundle", bundle_dir, "model bundle directory")->required();
  simulate->add_option("--report", report_prefix, "report output prefix")->required();
  add_common_flags(simulate, flags);

  auto* report = app.add_subcommand("report", "re-emit reports from saved metrics");
  report->add_option("--metrics", metrics_path, "saved report JSON")->required();
  report->add_option("--out", out, "output prefix")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(resolve_config(config_file, flags), out, truth_out);
    if (cluster->parsed()) return cmd_cluster(resolve_config(config_file, flags), trace, bundle_dir);
    if (train->parsed()) return cmd_train(config_file, flags, trace, bundle_dir);
    if (simulate->parsed()) return cmd_simulate(config_file, flags, trace, bundle_dir, report_prefix);
    if (report->parsed()) return cmd_report(metrics_path, out);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
  return 1;
}
