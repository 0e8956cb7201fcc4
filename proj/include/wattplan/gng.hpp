#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wattplan/errors.hpp"
#include "wattplan/rng.hpp"

namespace wattplan {

enum class GngMetric { euclidean, manhattan };

/// Growing Neural Gas hyper-parameters.
struct GngParams {
  int max_nodes = 10000;
  int max_edge_age = 100;
  double alpha = 0.5;          // error scale applied to the split pair
  double error_decay = 0.995;  // global per-presentation error decay
  double eps_winner = 0.05;
  double eps_neighbor = 0.006;
  int insertion_interval = 20;  // presentations between node insertions
  int epochs = 150;
  int start_nodes = 1000;
  std::uint64_t seed = 0;
  GngMetric metric = GngMetric::euclidean;
};

inline void validate_params(const GngParams& p) {
  if (p.max_nodes < 2) fail(Errc::config, "gng: max_nodes must be >= 2");
  if (p.max_edge_age < 1) fail(Errc::config, "gng: max_edge_age must be >= 1");
  if (!(p.alpha > 0.0 && p.alpha < 1.0)) fail(Errc::config, "gng: alpha must lie in (0,1)");
  if (!(p.error_decay > 0.0 && p.error_decay < 1.0)) fail(Errc::config, "gng: error_decay must lie in (0,1)");
  if (!(p.eps_neighbor > 0.0 && p.eps_neighbor < p.eps_winner && p.eps_winner < 1.0))
    fail(Errc::config, "gng: require 0 < eps_neighbor < eps_winner < 1");
  if (p.insertion_interval < 1) fail(Errc::config, "gng: insertion_interval must be >= 1");
  if (p.epochs < 1) fail(Errc::config, "gng: epochs must be >= 1");
  // The training loop pairs a winner with a runner-up, so two seeds minimum.
  if (p.start_nodes < 2) fail(Errc::config, "gng: start_nodes must be >= 2");
  if (p.start_nodes > p.max_nodes) fail(Errc::config, "gng: start_nodes must not exceed max_nodes");
}

struct GngNeuron {
  std::vector<double> position;
  double error = 0.0;
};

struct GngEdge {
  int a = 0;
  int b = 0;
  int age = 0;
};

/// Trained neuron graph. Clusters are the connected components.
struct GngGraph {
  int dim = 0;
  GngMetric metric = GngMetric::euclidean;  // distance used in training and assignment
  std::vector<GngNeuron> neurons;
  std::vector<GngEdge> edges;
  std::vector<int> component_labels;  // one per neuron, filled by connected_components
  int component_count = 0;
};

struct ClusterAssignment {
  int cluster_id = 0;
  double distance = 0.0;  // to the nearest neuron
};

/// Labels components 0..C-1 in order of each component's lowest neuron index.
inline std::pair<std::vector<int>, int> connected_components(const GngGraph& graph) {
  const int n = static_cast<int>(graph.neurons.size());
  std::vector<std::vector<int>> adj(n);
  for (const GngEdge& e : graph.edges) {
    if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n)
      fail(Errc::invalid_state, "connected_components: edge endpoint out of range");
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::vector<int> labels(n, -1);
  int count = 0;
  std::vector<int> stack;
  for (int i = 0; i < n; ++i) {
    if (labels[i] != -1) continue;
    const int label = count++;
    stack.push_back(i);
    labels[i] = label;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj[v]) {
        if (labels[w] == -1) {
          labels[w] = label;
          stack.push_back(w);
        }
      }
    }
  }
  return {std::move(labels), count};
}

namespace detail {
inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Ranking distance: squared Euclidean or Manhattan. Both are monotone in
// their metric, which is all the winner searches need.
inline double rank_dist(std::span<const double> a, std::span<const double> b, GngMetric metric) {
  if (metric == GngMetric::euclidean) return sq_dist(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

inline double true_dist(double rank, GngMetric metric) {
  return metric == GngMetric::euclidean ? std::sqrt(rank) : rank;
}
}  // namespace detail

/// Majority component label among the k nearest neurons; ties fall back to
/// the closest neuron, then to proximity order.
inline ClusterAssignment knn_assign(const GngGraph& graph, std::span<const double> point, int k) {
  const int n = static_cast<int>(graph.neurons.size());
  if (n == 0) fail(Errc::invalid_state, "knn_assign: empty graph");
  if (k < 1) fail(Errc::config, "knn_assign: k must be >= 1");
  if (static_cast<int>(point.size()) != graph.dim)
    fail(Errc::dimension_mismatch, "knn_assign: point dimension mismatch");
  if (graph.component_labels.size() != graph.neurons.size())
    fail(Errc::invalid_state, "knn_assign: graph has no component labels");

  std::vector<std::pair<double, int>> dist(n);
  for (int i = 0; i < n; ++i)
    dist[i] = {detail::rank_dist(point, graph.neurons[i].position, graph.metric), i};
  const int kk = std::min(k, n);
  std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());

  int max_label = 0;
  for (int lbl : graph.component_labels) max_label = std::max(max_label, lbl);
  std::vector<int> votes(max_label + 1, 0);
  for (int i = 0; i < kk; ++i) votes[graph.component_labels[dist[i].second]]++;
  int best = 0;
  for (int v : votes) best = std::max(best, v);
  // First of the k (in proximity order) whose label holds the maximum vote;
  // for a full tie this is the nearest neuron's label.
  int winner = graph.component_labels[dist[0].second];
  for (int i = 0; i < kk; ++i) {
    int lbl = graph.component_labels[dist[i].second];
    if (votes[lbl] == best) {
      winner = lbl;
      break;
    }
  }
  return {winner, detail::true_dist(dist[0].first, graph.metric)};
}

using GngObserver = std::function<void(const GngGraph&, std::size_t /*presentations*/)>;

namespace detail {

// Training workspace. Slots are tomb-stoned on deletion and the lowest free
// slot is reused, so index-based tie-breaking stays deterministic.
class GngTrainer {
  struct Link {
    int neighbor;
    int age;
    std::size_t refreshed;  // presentation index of the last CHL reset
  };

 public:
  GngTrainer(std::span<const std::vector<double>> data, const GngParams& params)
      : data_(data), params_(params), dim_(static_cast<int>(data.front().size())), rng_(params.seed) {
    const auto seeds = rng_.sample_indices(data_.size(), static_cast<std::size_t>(params_.start_nodes));
    for (std::size_t idx : seeds) add_neuron(data_[idx], 0.0);
  }

  GngGraph run(const GngObserver& observer) {
    std::vector<std::size_t> order(data_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 0; epoch < params_.epochs; ++epoch) {
      rng_.shuffle(std::span<std::size_t>(order));
      for (std::size_t idx : order) {
        ++presentations_;
        present(data_[idx]);
        if (presentations_ % static_cast<std::size_t>(params_.insertion_interval) == 0) insert_node();
        decay_errors();
        if (observer) observer(snapshot(), presentations_);
      }
    }
    return finalize();
  }

 private:
  void add_neuron(std::span<const double> at, double err) {
    int slot;
    if (!free_.empty()) {
      slot = free_.top();
      free_.pop();
      pos_[slot].assign(at.begin(), at.end());
      err_[slot] = err;
      alive_[slot] = true;
      adj_[slot].clear();
    } else {
      slot = static_cast<int>(pos_.size());
      pos_.emplace_back(at.begin(), at.end());
      err_.push_back(err);
      alive_.push_back(true);
      adj_.emplace_back();
    }
    last_slot_ = slot;
    ++alive_count_;
  }

  void remove_neuron(int v) {
    alive_[v] = false;
    adj_[v].clear();
    free_.push(v);
    --alive_count_;
  }

  int find_adj(int v, int w) const {
    for (std::size_t i = 0; i < adj_[v].size(); ++i)
      if (adj_[v][i].neighbor == w) return static_cast<int>(i);
    return -1;
  }

  void refresh_edge(int a, int b) {
    int ia = find_adj(a, b);
    if (ia >= 0) {
      adj_[a][ia].age = 0;
      adj_[a][ia].refreshed = presentations_;
      int ib = find_adj(b, a);
      adj_[b][ib].age = 0;
      adj_[b][ib].refreshed = presentations_;
    } else {
      adj_[a].push_back({b, 0, presentations_});
      adj_[b].push_back({a, 0, presentations_});
    }
  }

  void remove_edge(int a, int b) {
    int ia = find_adj(a, b);
    if (ia < 0) return;
    adj_[a].erase(adj_[a].begin() + ia);
    adj_[b].erase(adj_[b].begin() + find_adj(b, a));
  }

  void present(std::span<const double> x) {
    // Two nearest neurons; distance ties break toward the lower index.
    int w1 = -1, w2 = -1;
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(pos_.size()); ++i) {
      if (!alive_[i]) continue;
      const double d = rank_dist(x, pos_[i], params_.metric);
      if (d < d1) {
        d2 = d1;
        w2 = w1;
        d1 = d;
        w1 = i;
      } else if (d < d2) {
        d2 = d;
        w2 = i;
      }
    }

    for (auto& link : adj_[w1]) {
      ++link.age;
      adj_[link.neighbor][find_adj(link.neighbor, w1)].age = link.age;
    }
    // Accumulate the squared metric distance on the winner.
    err_[w1] += params_.metric == GngMetric::euclidean ? d1 : d1 * d1;

    for (int j = 0; j < dim_; ++j) pos_[w1][j] += params_.eps_winner * (x[j] - pos_[w1][j]);
    for (const auto& link : adj_[w1])
      for (int j = 0; j < dim_; ++j)
        pos_[link.neighbor][j] += params_.eps_neighbor * (x[j] - pos_[link.neighbor][j]);

    refresh_edge(w1, w2);

    // Only w1's edges aged, so pruning is local. The fresh (w1,w2) edge keeps
    // both winners connected; only far endpoints can end up isolated.
    stale_.clear();
    for (const auto& link : adj_[w1])
      if (link.age > params_.max_edge_age) stale_.push_back(link.neighbor);
    for (int nb : stale_) {
      remove_edge(w1, nb);
      if (adj_[nb].empty()) remove_neuron(nb);
    }
  }

  void insert_node() {
    if (alive_count_ >= params_.max_nodes) return;
    int q = -1;
    double best = -1.0;
    for (int i = 0; i < static_cast<int>(pos_.size()); ++i) {
      if (!alive_[i]) continue;
      if (err_[i] > best) {
        best = err_[i];
        q = i;
      }
    }
    int f = -1;
    if (adj_[q].empty()) {
      // Neighborless maximum: split toward the globally second-highest error.
      double fbest = -1.0;
      for (int i = 0; i < static_cast<int>(pos_.size()); ++i) {
        if (!alive_[i] || i == q) continue;
        if (err_[i] > fbest) {
          fbest = err_[i];
          f = i;
        }
      }
    } else {
      double fbest = -1.0;
      for (const auto& link : adj_[q]) {
        if (err_[link.neighbor] > fbest) {
          fbest = err_[link.neighbor];
          f = link.neighbor;
        }
      }
      remove_edge(q, f);
    }
    if (f < 0) return;

    mid_.resize(dim_);
    for (int j = 0; j < dim_; ++j) mid_[j] = 0.5 * (pos_[q][j] + pos_[f][j]);
    err_[q] *= params_.alpha;
    err_[f] *= params_.alpha;
    add_neuron(mid_, err_[q]);
    const int r = last_slot_;
    refresh_edge(q, r);
    refresh_edge(r, f);
  }

  void decay_errors() {
    for (int i = 0; i < static_cast<int>(pos_.size()); ++i)
      if (alive_[i]) err_[i] *= params_.error_decay;
  }

  // Compacts live neurons into a plain graph, preserving index order.
  GngGraph snapshot(bool current_edges_only = false) const {
    // Edge ages only advance through winners, so edges between neurons that
    // stopped winning freeze instead of aging out. An edge whose CHL refresh
    // is older than one full data pass is not supported by any current
    // input; finalization treats those as relics.
    const std::size_t horizon =
        (current_edges_only && presentations_ > data_.size()) ? presentations_ - data_.size() : 0;
    GngGraph g;
    g.dim = dim_;
    g.metric = params_.metric;
    std::vector<int> remap(pos_.size(), -1);
    for (int i = 0; i < static_cast<int>(pos_.size()); ++i) {
      if (!alive_[i]) continue;
      remap[i] = static_cast<int>(g.neurons.size());
      g.neurons.push_back({pos_[i], err_[i]});
    }
    for (int i = 0; i < static_cast<int>(pos_.size()); ++i) {
      if (remap[i] < 0) continue;
      for (const auto& link : adj_[i]) {
        if (link.neighbor > i && link.refreshed > horizon)
          g.edges.push_back({remap[i], remap[link.neighbor], link.age});
      }
    }
    return g;
  }

  // Clusters must quantize data: components that own no training point under
  // nearest-neuron assignment are stranded debris and are dropped.
  GngGraph finalize() const {
    GngGraph all = snapshot(true);
    auto [labels, count] = connected_components(all);
    std::vector<char> owns(count, 0);
    for (const auto& x : data_) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int i = 0; i < static_cast<int>(all.neurons.size()); ++i) {
        const double d = rank_dist(x, all.neurons[i].position, params_.metric);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      owns[labels[best]] = 1;
    }

    GngGraph g;
    g.dim = dim_;
    g.metric = params_.metric;
    std::vector<int> remap(all.neurons.size(), -1);
    for (int i = 0; i < static_cast<int>(all.neurons.size()); ++i) {
      if (!owns[labels[i]]) continue;
      remap[i] = static_cast<int>(g.neurons.size());
      g.neurons.push_back(std::move(all.neurons[i]));
    }
    for (const GngEdge& e : all.edges) {
      if (remap[e.a] >= 0 && remap[e.b] >= 0) g.edges.push_back({remap[e.a], remap[e.b], e.age});
    }
    auto [final_labels, final_count] = connected_components(g);
    g.component_labels = std::move(final_labels);
    g.component_count = final_count;
    return g;
  }

  std::span<const std::vector<double>> data_;
  GngParams params_;
  int dim_;
  Rng rng_;
  std::vector<std::vector<double>> pos_;
  std::vector<double> err_;
  std::vector<char> alive_;
  std::vector<std::vector<Link>> adj_;
  std::priority_queue<int, std::vector<int>, std::greater<int>> free_;
  std::vector<int> stale_;
  std::vector<double> mid_;
  std::size_t presentations_ = 0;
  int alive_count_ = 0;
  int last_slot_ = -1;
};

}  // namespace detail

/// Trains a GNG graph over the data; deterministic for a fixed seed.
inline GngGraph gng_train(std::span<const std::vector<double>> data, const GngParams& params,
                          const GngObserver& observer = {}) {
  validate_params(params);
  if (data.empty()) fail(Errc::empty_trace, "gng_train: no data");
  const std::size_t dim = data.front().size();
  if (dim == 0) fail(Errc::dimension_mismatch, "gng_train: zero-dimensional data");
  for (const auto& v : data)
    if (v.size() != dim) fail(Errc::dimension_mismatch, "gng_train: inconsistent dimensions");
  if (static_cast<std::size_t>(params.start_nodes) > data.size())
    fail(Errc::insufficient_data, "gng_train: start_nodes exceeds available data points");

  detail::GngTrainer trainer(data, params);
  return trainer.run(observer);
}

}  // namespace wattplan
