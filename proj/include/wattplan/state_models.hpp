#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wattplan/errors.hpp"
#include "wattplan/gng.hpp"
#include "wattplan/rng.hpp"
#include "wattplan/trace.hpp"

namespace wattplan {

constexpr int kDefaultKnnK = 3;

/// Per-device clusterer: readings -> operating modes.
struct ModeModel {
  std::string device_id;
  NormStats stats;  // fitted on this device's training readings
  GngGraph graph;
  int mode_count = 0;
  std::vector<double> mode_mean_power;  // watts, de-normalized neuron means
};

/// Device mode ids in registry order.
using ModeVector = std::vector<int>;

enum class DomainFeatureEncoding { mode_mean_power, one_hot };

/// Second-level clusterer: per-device mode summaries -> domain states.
struct DomainStateModel {
  GngGraph graph;
  int state_count = 0;
  DomainFeatureEncoding encoding = DomainFeatureEncoding::mode_mean_power;
  std::vector<std::vector<double>> device_mode_power;  // copy of each device's mode means
  std::vector<MinMax> feature_scale;                   // per device, over its mode means
  std::vector<ModeVector> representative;              // per state
  std::vector<double> state_total_power;               // per state, watts
};

namespace detail {

inline std::vector<double> domain_features(const DomainStateModel& model, const ModeVector& modes) {
  const std::size_t k = model.device_mode_power.size();
  if (modes.size() != k) fail(Errc::length_mismatch, "mode vector length does not match device count");
  std::vector<double> f;
  if (model.encoding == DomainFeatureEncoding::mode_mean_power) {
    f.resize(k);
    for (std::size_t d = 0; d < k; ++d) {
      const auto& means = model.device_mode_power[d];
      if (modes[d] < 0 || modes[d] >= static_cast<int>(means.size()))
        fail(Errc::invalid_state, "mode id out of range for device " + std::to_string(d));
      f[d] = model.feature_scale[d].norm(means[modes[d]]);
    }
  } else {
    for (std::size_t d = 0; d < k; ++d) {
      const auto& means = model.device_mode_power[d];
      if (modes[d] < 0 || modes[d] >= static_cast<int>(means.size()))
        fail(Errc::invalid_state, "mode id out of range for device " + std::to_string(d));
      for (std::size_t m = 0; m < means.size(); ++m) f.push_back(m == static_cast<std::size_t>(modes[d]) ? 1.0 : 0.0);
    }
  }
  return f;
}

inline std::vector<double> component_mean_power(const GngGraph& graph, const MinMax& power_scale) {
  std::vector<double> sum(graph.component_count, 0.0);
  std::vector<int> n(graph.component_count, 0);
  for (std::size_t i = 0; i < graph.neurons.size(); ++i) {
    const int c = graph.component_labels[i];
    sum[c] += power_scale.denorm(graph.neurons[i].position[kFeatureDim - 1]);
    n[c] += 1;
  }
  for (int c = 0; c < graph.component_count; ++c) sum[c] = std::max(0.0, sum[c] / n[c]);
  return sum;
}

}  // namespace detail

/// One independent GNG per device over its (hour, month, year, power)
/// features; per-device seeds derive from params.seed.
inline std::vector<ModeModel> fit_device_modes(std::span<const AlignedFrame> frames,
                                               std::span<const std::string> registry,
                                               const GngParams& params) {
  if (frames.empty()) fail(Errc::empty_trace, "fit_device_modes: no training frames");
  std::vector<ModeModel> models;
  models.reserve(registry.size());
  for (std::size_t d = 0; d < registry.size(); ++d) {
    ModeModel model;
    model.device_id = registry[d];

    std::vector<Reading> readings;
    readings.reserve(frames.size());
    for (const AlignedFrame& f : frames) {
      if (f.power.size() != registry.size())
        fail(Errc::length_mismatch, "frame width does not match registry");
      readings.push_back({f.timestamp, model.device_id, f.power[d]});
    }
    model.stats = compute_norm_stats(readings);

    std::vector<std::vector<double>> features;
    features.reserve(readings.size());
    for (const Reading& r : readings) features.push_back(extract_features(r, model.stats).normalized());

    GngParams p = params;
    p.seed = derive_seed(params.seed, "gng.device/" + model.device_id);
    try {
      model.graph = gng_train(features, p);
    } catch (const Error& e) {
      throw Error(e.code(), "device '" + model.device_id + "': " + e.what());
    }
    model.mode_count = model.graph.component_count;
    model.mode_mean_power = detail::component_mean_power(model.graph, model.stats.power);
    models.push_back(std::move(model));
  }
  return models;
}

/// k-NN mode assignment for one device value at one timestamp.
inline int assign_mode(const ModeModel& model, double watts, std::int64_t timestamp, int k = kDefaultKnnK) {
  const Reading r{timestamp, model.device_id, watts};
  const FeatureVector f = extract_features(r, model.stats);
  return knn_assign(model.graph, f.normalized(), k).cluster_id;
}

inline ModeVector frame_mode_vector(std::span<const ModeModel> models, const AlignedFrame& frame,
                                    int k = kDefaultKnnK) {
  if (frame.power.size() != models.size())
    fail(Errc::length_mismatch, "frame width does not match mode model count");
  ModeVector mv(models.size());
  for (std::size_t d = 0; d < models.size(); ++d)
    mv[d] = assign_mode(models[d], frame.power[d], frame.timestamp, k);
  return mv;
}

/// Clusters the per-device mode summaries of the training frames into domain
/// states and computes each state's representative mode tuple and power.
inline DomainStateModel fit_domain_states(std::span<const AlignedFrame> frames,
                                          std::span<const ModeModel> models, const GngParams& params,
                                          int k = kDefaultKnnK,
                                          DomainFeatureEncoding encoding = DomainFeatureEncoding::mode_mean_power) {
  if (frames.empty()) fail(Errc::empty_trace, "fit_domain_states: no training frames");
  DomainStateModel model;
  model.encoding = encoding;
  model.device_mode_power.reserve(models.size());
  model.feature_scale.reserve(models.size());
  for (const ModeModel& m : models) {
    model.device_mode_power.push_back(m.mode_mean_power);
    const auto [lo, hi] = std::minmax_element(m.mode_mean_power.begin(), m.mode_mean_power.end());
    model.feature_scale.push_back({*lo, *hi});
  }

  std::vector<ModeVector> mode_vectors;
  mode_vectors.reserve(frames.size());
  std::vector<std::vector<double>> features;
  features.reserve(frames.size());
  for (const AlignedFrame& f : frames) {
    mode_vectors.push_back(frame_mode_vector(models, f, k));
    features.push_back(detail::domain_features(model, mode_vectors.back()));
  }

  GngParams p = params;
  p.seed = derive_seed(params.seed, "gng.domain");
  model.graph = gng_train(features, p);
  model.state_count = model.graph.component_count;

  // Component centroids, then the nearest training example names the state's
  // concrete device modes (the planner must be able to enact a state).
  const int dim = model.graph.dim;
  std::vector<std::vector<double>> centroid(model.state_count, std::vector<double>(dim, 0.0));
  std::vector<int> members(model.state_count, 0);
  for (std::size_t i = 0; i < model.graph.neurons.size(); ++i) {
    const int c = model.graph.component_labels[i];
    for (int j = 0; j < dim; ++j) centroid[c][j] += model.graph.neurons[i].position[j];
    members[c] += 1;
  }
  for (int c = 0; c < model.state_count; ++c)
    for (int j = 0; j < dim; ++j) centroid[c][j] /= members[c];

  model.representative.resize(model.state_count);
  model.state_total_power.assign(model.state_count, 0.0);
  for (int c = 0; c < model.state_count; ++c) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < features.size(); ++i) {
      const double d = detail::sq_dist(features[i], centroid[c]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    model.representative[c] = mode_vectors[best];
    double total = 0.0;
    for (std::size_t d = 0; d < model.device_mode_power.size(); ++d)
      total += model.device_mode_power[d][model.representative[c][d]];
    model.state_total_power[c] = total;
  }
  return model;
}

/// k-NN domain-state assignment for a mode vector.
inline int assign_domain_state(const DomainStateModel& model, const ModeVector& modes, int k = kDefaultKnnK) {
  return knn_assign(model.graph, detail::domain_features(model, modes), k).cluster_id;
}

inline double state_power(const DomainStateModel& model, int state) {
  if (state < 0 || state >= model.state_count)
    fail(Errc::invalid_state, "state id out of range: " + std::to_string(state));
  return model.state_total_power[state];
}

}  // namespace wattplan
