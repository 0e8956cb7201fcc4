#pragma once

#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "wattplan/behavior.hpp"
#include "wattplan/config.hpp"
#include "wattplan/errors.hpp"
#include "wattplan/planner.hpp"
#include "wattplan/sim.hpp"
#include "wattplan/state_models.hpp"
#include "wattplan/trace.hpp"

namespace wattplan {

/// Parsed, aligned and split trace; `frames` owns storage, the spans view it.
struct FrameSet {
  std::vector<std::string> registry;
  std::vector<AlignedFrame> frames;
  std::size_t train_count = 0;
  ParseReport parse_report;

  std::span<const AlignedFrame> train() const {
    return {frames.data(), train_count};
  }
  std::span<const AlignedFrame> test() const {
    return {frames.data() + train_count, frames.size() - train_count};
  }
};

inline FrameSet prepare_frames(std::span<const Reading> readings, const RunConfig& cfg) {
  FrameSet fs;
  fs.registry = device_registry(readings);
  if (fs.registry.empty()) fail(Errc::empty_trace, "trace contains no readings");
  fs.frames = align_frames(group_by_device(readings), fs.registry);
  auto [train, test] = split_train_test(fs.frames, cfg.train_fraction);
  fs.train_count = train.size();
  return fs;
}

inline FrameSet load_frames(const std::string& path, const RunConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot read trace: " + path);
  ParseReport report;
  const auto readings = parse_trace(in, cfg.schema, &report);
  FrameSet fs = prepare_frames(readings, cfg);
  fs.parse_report = report;
  return fs;
}

/// Output of the cluster stage: both levels of the two-step clustering.
struct ModelSet {
  std::vector<std::string> registry;
  std::vector<ModeModel> modes;
  DomainStateModel domain;
};

inline ModelSet fit_models(std::span<const AlignedFrame> train, std::span<const std::string> registry,
                           const RunConfig& cfg) {
  ModelSet ms;
  ms.registry.assign(registry.begin(), registry.end());
  GngParams device = cfg.gng_device;
  device.seed = derive_seed(cfg.seed, "gng.device");
  ms.modes = fit_device_modes(train, registry, device);
  GngParams domain = cfg.gng_domain;
  domain.seed = derive_seed(cfg.seed, "gng.domain");
  ms.domain = fit_domain_states(train, ms.modes, domain, cfg.knn_k, cfg.domain_encoding);
  return ms;
}

/// Output of the train stage: behavior statistics and the initial planner.
struct TrainingArtifacts {
  std::vector<int> train_states;
  std::vector<Action> actions;
  std::vector<Actuation> actuations;
  StateClassification classification;
  JointTransitionCounts counts;
  PlannerState planner;
};

inline TrainingArtifacts train_planner(const ModelSet& models, std::span<const AlignedFrame> train,
                                       const RunConfig& cfg) {
  if (train.size() < 2) fail(Errc::insufficient_data, "training split needs at least two frames");
  TrainingArtifacts art;
  art.train_states.reserve(train.size());
  std::map<int, std::uint64_t> visits;
  for (const AlignedFrame& f : train) {
    const int s = assign_domain_state(models.domain, frame_mode_vector(models.modes, f, cfg.knn_k), cfg.knn_k);
    art.train_states.push_back(s);
    visits[s] += 1;
  }
  art.actions = label_actions(art.train_states);
  art.actuations = simulate_actuations(art.actions, cfg.flip_fraction, derive_seed(cfg.seed, "behavior.flip"));
  art.classification =
      classify_states(visits, cfg.top, cfg.fix_hd, cfg.fix_ld, derive_seed(cfg.seed, "classify.strict"));
  art.counts = joint_transition_counts(art.train_states, art.actions, art.actuations,
                                       models.domain.state_count);
  art.planner.transition =
      estimate_transition_model(art.counts, models.domain.state_count, cfg.planner.smoothing);
  art.planner.reward = build_reward_vector(models.domain);
  art.planner.config = cfg.planner;
  art.planner.solution =
      policy_iteration(art.planner.transition, art.planner.reward, cfg.planner.gamma);
  return art;
}

/// First/last-decile strict-clash means and power totals for the run summary.
struct SimSummary {
  double first_decile_strict_mean = 0.0;
  double last_decile_strict_mean = 0.0;
  double total_actual_power = 0.0;
  double total_planned_power = 0.0;
  double percent_saved = 0.0;
};

inline SimSummary summarize(std::span<const SlotMetrics> metrics) {
  SimSummary s;
  if (metrics.empty()) return s;
  const std::size_t decile = std::max<std::size_t>(1, metrics.size() / 10);
  for (std::size_t i = 0; i < decile; ++i)
    s.first_decile_strict_mean += static_cast<double>(metrics[i].strict_clashes);
  for (std::size_t i = metrics.size() - decile; i < metrics.size(); ++i)
    s.last_decile_strict_mean += static_cast<double>(metrics[i].strict_clashes);
  s.first_decile_strict_mean /= static_cast<double>(decile);
  s.last_decile_strict_mean /= static_cast<double>(decile);
  for (const SlotMetrics& m : metrics) {
    s.total_actual_power += m.actual_power;
    s.total_planned_power += m.planned_power;
  }
  if (s.total_actual_power > 0.0)
    s.percent_saved = 100.0 * (1.0 - s.total_planned_power / s.total_actual_power);
  return s;
}

/// Builds the synthetic spec selected by the config (`standard` preset).
inline SyntheticSpec synth_spec_from_config(const RunConfig& cfg) {
  if (cfg.synth_preset != "standard")
    fail(Errc::config, "unknown synth preset: " + cfg.synth_preset);
  SyntheticSpec spec = standard_scenario_spec(cfg.synth_length, derive_seed(cfg.seed, "synth"));
  spec.noise_prob = cfg.synth_noise;
  spec.power_jitter = cfg.synth_jitter;
  return spec;
}

}  // namespace wattplan
