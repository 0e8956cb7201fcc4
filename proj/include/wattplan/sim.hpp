#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wattplan/behavior.hpp"
#include "wattplan/errors.hpp"
#include "wattplan/planner.hpp"
#include "wattplan/state_models.hpp"
#include "wattplan/trace.hpp"

namespace wattplan {

enum class ClashKind {
  none,
  strict,      // actual state is SHD or SLD
  loose_low,   // actual state is LLD
  loose_high,  // mismatch on LHD (or unclassified); counted in totals only
};

inline ClashKind clash_kind(int recommended, int actual, const StateClassification& cls) {
  if (recommended == actual) return ClashKind::none;
  if (cls.is_strict(actual)) return ClashKind::strict;
  if (cls.is_lld(actual)) return ClashKind::loose_low;
  return ClashKind::loose_high;
}

/// Counterfactual watt value of one step: strict states are never overridden;
/// elsewhere the recommendation is adopted only when it saves power.
inline double planner_adjusted_power(int s_actual, int s_recommended, const StateClassification& cls,
                                     const DomainStateModel& model) {
  const double actual = state_power(model, s_actual);
  if (cls.is_strict(s_actual)) return actual;
  return std::min(actual, state_power(model, s_recommended));
}

/// Per-slot aggregates; one row of the report.
struct SlotMetrics {
  std::size_t slot_index = 0;
  std::size_t readings_in_slot = 0;
  std::uint64_t strict_clashes = 0;
  std::uint64_t ld_clashes = 0;
  std::uint64_t total_clashes = 0;
  double actual_power = 0.0;
  double planned_power = 0.0;
  std::uint64_t updates_applied = 0;

  bool operator==(const SlotMetrics&) const = default;
};

struct SimConfig {
  std::size_t slot_size = 1000;
  int knn_k = kDefaultKnnK;
};

/// Everything the online planner mutates during replay.
struct PlannerState {
  TransitionModel transition;
  std::vector<double> reward;
  PolicySolution solution;
  PlannerConfig config;
};

struct StepRecord {
  std::size_t t = 0;
  int state = -1;
  int recommended = -1;  // recommendation issued at t-1, judged at t
  ClashKind kind = ClashKind::none;
  double actual_power = 0.0;
  double planned_power = 0.0;
};

using RecommendOverride = std::function<int(int state, std::size_t t)>;

/// Replays the test stream as the live user: assign state, score the previous
/// recommendation, apply clash updates, accumulate slot metrics, replan on
/// the configured cadence. Deterministic given models and seeds.
inline std::vector<SlotMetrics> run_simulation(std::span<const ModeModel> modes,
                                               const DomainStateModel& domain,
                                               const StateClassification& cls, PlannerState& planner,
                                               std::span<const AlignedFrame> test_frames,
                                               const SimConfig& config,
                                               std::vector<StepRecord>* step_log = nullptr,
                                               const RecommendOverride& recommend_override = {}) {
  if (test_frames.empty()) fail(Errc::empty_trace, "run_simulation: empty test stream");
  if (config.slot_size == 0) fail(Errc::config, "run_simulation: slot_size must be positive");

  const std::vector<int> strict = cls.strict_states();
  const std::span<const double> powers(domain.state_total_power);
  std::vector<SlotMetrics> metrics;

  int prev_state = -1;
  int prev_rec = -1;
  Action prev_action = Action::stay;  // policy action behind prev_rec
  for (std::size_t t = 0; t < test_frames.size(); ++t) {
    const std::size_t slot = t / config.slot_size;
    if (slot >= metrics.size()) {
      metrics.push_back({});
      metrics.back().slot_index = slot;
    }
    SlotMetrics& m = metrics.back();

    const int s = assign_domain_state(domain, frame_mode_vector(modes, test_frames[t], config.knn_k),
                                      config.knn_k);
    const double actual = state_power(domain, s);
    double planned = actual;
    ClashKind kind = ClashKind::none;

    if (t > 0) {
      kind = clash_kind(prev_rec, s, cls);
      planned = planner_adjusted_power(s, prev_rec, cls, domain);
      switch (kind) {
        case ClashKind::none:
          break;
        case ClashKind::strict:
          m.strict_clashes += 1;
          m.total_clashes += 1;
          if (online_update(planner.transition, prev_state, prev_action, prev_rec, s, strict,
                            planner.config.update_factor))
            m.updates_applied += 1;
          break;
        case ClashKind::loose_low:
          m.ld_clashes += 1;
          m.total_clashes += 1;
          break;
        case ClashKind::loose_high:
          m.total_clashes += 1;
          break;
      }
    }

    m.readings_in_slot += 1;
    m.actual_power += actual;
    m.planned_power += planned;

    const int rec = recommend_override ? recommend_override(s, t)
                                       : recommend(planner.transition, planner.solution, powers, s);
    if (step_log) step_log->push_back({t, s, t > 0 ? prev_rec : -1, kind, actual, planned});

    prev_state = s;
    prev_rec = rec;
    prev_action = planner.solution.policy.empty() ? Action::stay : planner.solution.policy[s];
    if ((t + 1) % planner.config.replan_interval == 0)
      planner.solution = replan(planner.transition, planner.reward, planner.config.gamma, &planner.solution);
  }
  return metrics;
}

// ---------------------------------------------------------------------------
// Synthetic traces
// ---------------------------------------------------------------------------

struct SyntheticDevice {
  std::string id;
  std::vector<double> mode_powers;  // watts per mode
};

struct RoutineStep {
  ModeVector modes;  // one mode id per device
  int dwell = 1;     // time steps this tuple is held
};

/// Scripted user: a cyclic schedule over mode tuples with optional per-step
/// deviations and measurement jitter. A deviation visits another routine
/// tuple off-schedule (habitual states only, no novel mode combinations).
struct SyntheticSpec {
  std::vector<SyntheticDevice> devices;
  std::vector<RoutineStep> routine;
  double noise_prob = 0.0;    // chance a step jumps to another routine tuple
  double power_jitter = 0.0;  // gaussian sd on emitted watts
  std::int64_t length = 0;    // time steps
  std::int64_t start_timestamp = 1451606400;
  int cadence_seconds = 15;
  std::uint64_t seed = 0;
};

struct SyntheticTrace {
  std::vector<Reading> readings;       // devices interleaved per time step
  std::vector<ModeVector> truth;       // emitted tuple per time step
};

inline void validate(const SyntheticSpec& spec) {
  if (spec.devices.empty()) fail(Errc::config, "synthetic spec: need at least one device");
  for (const auto& d : spec.devices) {
    if (d.mode_powers.empty()) fail(Errc::config, "synthetic spec: device without modes: " + d.id);
    for (double p : d.mode_powers)
      if (p < 0.0) fail(Errc::config, "synthetic spec: negative mode power for " + d.id);
  }
  if (spec.routine.empty()) fail(Errc::config, "synthetic spec: empty routine");
  for (const auto& step : spec.routine) {
    if (step.modes.size() != spec.devices.size())
      fail(Errc::config, "synthetic spec: routine tuple length mismatch");
    if (step.dwell < 1) fail(Errc::config, "synthetic spec: dwell must be >= 1");
    for (std::size_t d = 0; d < step.modes.size(); ++d)
      if (step.modes[d] < 0 || step.modes[d] >= static_cast<int>(spec.devices[d].mode_powers.size()))
        fail(Errc::config, "synthetic spec: mode id out of range");
  }
  if (spec.length < 2) fail(Errc::config, "synthetic spec: length must be >= 2");
  if (spec.cadence_seconds < 1) fail(Errc::config, "synthetic spec: cadence must be >= 1");
  if (!(spec.noise_prob >= 0.0 && spec.noise_prob <= 1.0))
    fail(Errc::config, "synthetic spec: noise_prob must lie in [0,1]");
  if (spec.power_jitter < 0.0) fail(Errc::config, "synthetic spec: power_jitter must be >= 0");
}

inline SyntheticTrace generate_synthetic_trace(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  SyntheticTrace trace;
  trace.readings.reserve(static_cast<std::size_t>(spec.length) * spec.devices.size());
  trace.truth.reserve(spec.length);

  std::size_t pos = 0;
  int dwell_left = spec.routine[0].dwell;
  std::int64_t ts = spec.start_timestamp;
  for (std::int64_t t = 0; t < spec.length; ++t) {
    ModeVector tuple = spec.routine[pos].modes;
    if (spec.noise_prob > 0.0 && spec.routine.size() > 1 && rng.bernoulli(spec.noise_prob)) {
      const auto other = static_cast<std::size_t>(rng.uniform_below(spec.routine.size() - 1));
      tuple = spec.routine[other >= pos ? other + 1 : other].modes;
    }
    trace.truth.push_back(tuple);
    for (std::size_t d = 0; d < spec.devices.size(); ++d) {
      double watts = spec.devices[d].mode_powers[tuple[d]];
      if (spec.power_jitter > 0.0) watts = std::max(0.0, watts + rng.normal(0.0, spec.power_jitter));
      trace.readings.push_back({ts, spec.devices[d].id, watts});
    }
    ts += spec.cadence_seconds;
    if (--dwell_left == 0) {
      pos = (pos + 1) % spec.routine.size();
      dwell_left = spec.routine[pos].dwell;
    }
  }
  return trace;
}

/// The standard evaluation scenario: four appliances, eight frequent
/// low-power tuples (heater off) and twenty-eight infrequent wasteful
/// excursions (heater on) that dominate the timeline in aggregate.
///
/// The cycle holds four pairing blocks: one long block whose
/// core->excursion pairing matches the historical habits, then three
/// shorter blocks pairing the same states differently. A training prefix
/// of one long block (see standard_scenario_train_steps) captures only the
/// historical pairing, so the replayed remainder exercises the planner's
/// online adaptation.
inline SyntheticSpec standard_scenario_spec(std::int64_t length, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.devices = {
      {"fridge", {5.0, 120.0}},
      {"heater", {0.0, 750.0, 1500.0}},
      {"tv", {2.0, 100.0, 200.0}},
      {"computer", {10.0, 150.0, 400.0}},
  };

  // Cores: every heater-off tuple over the devices' two lowest modes.
  std::vector<ModeVector> cores;
  for (int f = 0; f < 2; ++f)
    for (int t = 0; t < 2; ++t)
      for (int c = 0; c < 2; ++c) cores.push_back({f, 0, t, c});

  // Excursions: heater half or full on, 14 device combinations per level.
  std::vector<ModeVector> excursions;
  for (int h = 1; h <= 2; ++h) {
    int taken = 0;
    for (int f = 0; f < 2 && taken < 14; ++f)
      for (int t = 0; t < 3 && taken < 14; ++t)
        for (int c = 0; c < 3 && taken < 14; ++c) {
          excursions.push_back({f, h, t, c});
          ++taken;
        }
  }

  // Historical blocks: identity pairing, long dwells. They occur once; the
  // cycle is longer than any generated trace, so the remainder follows the
  // live pairing throughout.
  for (int block = 0; block < 5; ++block) {
    for (std::size_t j = 0; j < excursions.size(); ++j) {
      spec.routine.push_back({cores[j % cores.size()], 60});
      spec.routine.push_back({excursions[j], 120});
    }
  }
  // Live blocks: one remapped pairing (multipliers coprime to the set sizes).
  for (int block = 0; block < 40; ++block) {
    for (std::size_t j = 0; j < excursions.size(); ++j) {
      spec.routine.push_back({cores[(j * 3 + 1) % cores.size()], 30});
      spec.routine.push_back({excursions[(j * 9 + 4) % excursions.size()], 60});
    }
  }
  spec.noise_prob = 0.01;
  spec.power_jitter = 2.0;
  spec.length = length;
  spec.seed = seed;
  return spec;
}

/// Steps covered by the historical blocks of the standard scenario.
constexpr std::int64_t standard_scenario_train_steps = 5 * 28 * (60 + 120);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

constexpr int kReportFormatVersion = 1;

inline void validate_metrics(std::span<const SlotMetrics> metrics) {
  if (metrics.empty()) fail(Errc::malformed_metrics, "report: no slot metrics");
  for (const SlotMetrics& m : metrics) {
    if (m.total_clashes < m.strict_clashes + m.ld_clashes)
      fail(Errc::malformed_metrics,
           "report: slot " + std::to_string(m.slot_index) + " has total < strict + ld");
  }
}

inline nlohmann::json metrics_to_json(std::span<const SlotMetrics> metrics) {
  nlohmann::json rows = nlohmann::json::array();
  for (const SlotMetrics& m : metrics) {
    rows.push_back({{"slot", m.slot_index},
                    {"readings", m.readings_in_slot},
                    {"strict_clashes", m.strict_clashes},
                    {"ld_clashes", m.ld_clashes},
                    {"total_clashes", m.total_clashes},
                    {"actual_power", m.actual_power},
                    {"planned_power", m.planned_power},
                    {"updates", m.updates_applied}});
  }
  return rows;
}

inline std::vector<SlotMetrics> metrics_from_json(const nlohmann::json& rows) {
  std::vector<SlotMetrics> metrics;
  for (const auto& row : rows) {
    SlotMetrics m;
    m.slot_index = row.at("slot").get<std::size_t>();
    m.readings_in_slot = row.at("readings").get<std::size_t>();
    m.strict_clashes = row.at("strict_clashes").get<std::uint64_t>();
    m.ld_clashes = row.at("ld_clashes").get<std::uint64_t>();
    m.total_clashes = row.at("total_clashes").get<std::uint64_t>();
    m.actual_power = row.at("actual_power").get<double>();
    m.planned_power = row.at("planned_power").get<double>();
    m.updates_applied = row.at("updates").get<std::uint64_t>();
    metrics.push_back(m);
  }
  return metrics;
}

/// Writes the slot metrics as CSV plus a JSON mirror embedding the run
/// config and seeds; both deterministic byte-for-byte.
inline void emit_report(std::span<const SlotMetrics> metrics, const nlohmann::json& run_config,
                        const std::string& csv_path, const std::string& json_path) {
  validate_metrics(metrics);

  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) fail(Errc::io, "cannot write " + csv_path);
  csv << "slot,strict_clashes,ld_clashes,total_clashes,actual_power,planned_power,updates\n";
  for (const SlotMetrics& m : metrics) {
    csv << m.slot_index << ',' << m.strict_clashes << ',' << m.ld_clashes << ',' << m.total_clashes
        << ',' << format_double(m.actual_power) << ',' << format_double(m.planned_power) << ','
        << m.updates_applied << '\n';
  }
  if (!csv.good()) fail(Errc::io, "failed writing " + csv_path);

  nlohmann::json doc;
  doc["format_version"] = kReportFormatVersion;
  doc["config"] = run_config;
  doc["metrics"] = metrics_to_json(metrics);
  std::ofstream js(json_path, std::ios::binary);
  if (!js) fail(Errc::io, "cannot write " + json_path);
  js << doc.dump(2) << '\n';
  if (!js.good()) fail(Errc::io, "failed writing " + json_path);
}

struct LoadedReport {
  nlohmann::json config;
  std::vector<SlotMetrics> metrics;
};

inline LoadedReport load_report(const std::string& json_path) {
  std::ifstream in(json_path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot read " + json_path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::malformed_metrics, "report: invalid JSON: " + std::string(e.what()));
  }
  if (!doc.contains("format_version") || doc["format_version"].get<int>() != kReportFormatVersion)
    fail(Errc::bad_version, "report: unsupported format version");
  LoadedReport out;
  out.config = doc.value("config", nlohmann::json::object());
  try {
    out.metrics = metrics_from_json(doc.at("metrics"));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::malformed_metrics, "report: bad metrics payload: " + std::string(e.what()));
  }
  validate_metrics(out.metrics);
  return out;
}

}  // namespace wattplan
