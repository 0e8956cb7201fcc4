#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "oracles.hpp"
#include "wattplan/gng.hpp"

using namespace wattplan;

namespace {

GngParams desk_params(std::uint64_t seed) {
  GngParams p;
  p.max_nodes = 100;
  p.start_nodes = 6;
  p.max_edge_age = 50;
  p.alpha = 0.5;
  p.error_decay = 0.995;
  p.insertion_interval = 20;
  p.epochs = 150;
  p.seed = seed;
  return p;
}

const std::vector<std::vector<double>> kCenters{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};

}  // namespace

TEST_CASE("gng_train recovers three separated blobs") {
  auto blobs = oracles::gaussian_blobs(kCenters, 300, 0.02, 424242);
  auto graph = gng_train(blobs.points, desk_params(1));
  REQUIRE(graph.component_count == 3);

  // Every component's neurons must map to exactly one generator center.
  std::map<int, std::set<int>> component_to_center;
  for (std::size_t i = 0; i < graph.neurons.size(); ++i) {
    component_to_center[graph.component_labels[i]].insert(
        oracles::nearest_center(blobs.centers, graph.neurons[i].position));
  }
  for (const auto& [component, centers] : component_to_center) REQUIRE(centers.size() == 1);
}

TEST_CASE("gng_train on a single repeated point converges there") {
  std::vector<std::vector<double>> data(50, std::vector<double>{0.25, 0.75});
  GngParams p = desk_params(9);
  p.start_nodes = 2;
  p.max_nodes = 2;
  p.epochs = 30;
  auto graph = gng_train(data, p);
  REQUIRE(graph.component_count == 1);
  for (const auto& n : graph.neurons) {
    CHECK_THAT(n.position[0], Catch::Matchers::WithinAbs(0.25, 1e-6));
    CHECK_THAT(n.position[1], Catch::Matchers::WithinAbs(0.75, 1e-6));
  }
}

TEST_CASE("gng_train never exceeds max_nodes when insertion is suppressed") {
  auto blobs = oracles::gaussian_blobs(kCenters, 100, 0.02, 7);
  GngParams p = desk_params(5);
  p.start_nodes = 8;
  p.max_nodes = 8;
  p.epochs = 20;
  auto graph = gng_train(blobs.points, p);
  CHECK(graph.neurons.size() <= 8);
}

TEST_CASE("gng_train rejects bad inputs") {
  GngParams p = desk_params(1);
  CHECK_THROWS_AS(gng_train({}, p), Error);

  std::vector<std::vector<double>> ragged{{0.0, 0.0}, {1.0}};
  CHECK_THROWS_AS(gng_train(ragged, p), Error);

  std::vector<std::vector<double>> tiny{{0.0, 0.0}, {1.0, 1.0}};
  p.start_nodes = 6;  // more seeds than data points
  REQUIRE_THROWS_MATCHES(gng_train(tiny, p), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == Errc::insufficient_data;
                         }));
}

TEST_CASE("gng_train validates parameter ranges") {
  auto blobs = oracles::gaussian_blobs(kCenters, 30, 0.02, 7);
  GngParams p = desk_params(1);
  p.alpha = 1.5;
  CHECK_THROWS_AS(gng_train(blobs.points, p), Error);
  p = desk_params(1);
  p.eps_neighbor = 0.5;  // >= eps_winner
  p.eps_winner = 0.05;
  CHECK_THROWS_AS(gng_train(blobs.points, p), Error);
  p = desk_params(1);
  p.start_nodes = p.max_nodes + 1;
  CHECK_THROWS_AS(gng_train(blobs.points, p), Error);
}

TEST_CASE("gng_train is bit-for-bit deterministic in the seed") {
  auto blobs = oracles::gaussian_blobs(kCenters, 80, 0.02, 99);
  GngParams p = desk_params(1234);
  p.epochs = 25;
  auto g1 = gng_train(blobs.points, p);
  auto g2 = gng_train(blobs.points, p);
  REQUIRE(g1.neurons.size() == g2.neurons.size());
  for (std::size_t i = 0; i < g1.neurons.size(); ++i) {
    REQUIRE(g1.neurons[i].position == g2.neurons[i].position);
    REQUIRE(g1.neurons[i].error == g2.neurons[i].error);
  }
  REQUIRE(g1.component_labels == g2.component_labels);
  REQUIRE(g1.edges.size() == g2.edges.size());
}

TEST_CASE("training invariants hold at every presentation") {
  auto blobs = oracles::gaussian_blobs(kCenters, 60, 0.02, 55);
  GngParams p = desk_params(3);
  p.epochs = 8;
  std::size_t calls = 0;
  auto graph = gng_train(blobs.points, p, [&](const GngGraph& g, std::size_t) {
    ++calls;
    REQUIRE(g.neurons.size() <= static_cast<std::size_t>(p.max_nodes));
    std::set<std::pair<int, int>> seen;
    for (const auto& e : g.edges) {
      REQUIRE(e.age <= p.max_edge_age);
      REQUIRE(e.a != e.b);
      auto key = std::minmax(e.a, e.b);
      REQUIRE(seen.emplace(key.first, key.second).second);
    }
  });
  CHECK(calls == static_cast<std::size_t>(p.epochs) * blobs.points.size());

  // Final graph: no isolated neurons, labels form a valid partition.
  std::vector<int> degree(graph.neurons.size(), 0);
  for (const auto& e : graph.edges) {
    degree[e.a]++;
    degree[e.b]++;
  }
  for (int d : degree) REQUIRE(d >= 1);
  auto [labels, count] = connected_components(graph);
  REQUIRE(labels == graph.component_labels);
  REQUIRE(count == graph.component_count);
}

TEST_CASE("separated blobs are recovered across seeds") {
  // Statistical property at unit-test scale; the acceptance suite runs the
  // full 20-seed version.
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto blobs = oracles::gaussian_blobs(kCenters, 300, 0.02, 1000 + seed);
    GngParams p = desk_params(seed);
    p.epochs = 60;
    if (gng_train(blobs.points, p).component_count == 3) ++hits;
  }
  CHECK(hits >= 4);
}

TEST_CASE("connected_components labels by lowest neuron index") {
  GngGraph g;
  g.dim = 1;
  g.neurons.resize(3, {{0.0}, 0.0});
  g.edges = {{0, 1, 0}};
  auto [labels, count] = connected_components(g);
  CHECK(labels == std::vector<int>{0, 0, 1});
  CHECK(count == 2);
}

TEST_CASE("connected_components of a complete graph is one component") {
  GngGraph g;
  g.dim = 1;
  g.neurons.resize(4, {{0.0}, 0.0});
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) g.edges.push_back({a, b, 0});
  auto [labels, count] = connected_components(g);
  CHECK(count == 1);
  CHECK(labels == std::vector<int>(4, 0));
}

TEST_CASE("connected_components of an edgeless graph is all singletons") {
  GngGraph g;
  g.dim = 1;
  g.neurons.resize(5, {{0.0}, 0.0});
  auto [labels, count] = connected_components(g);
  CHECK(count == 5);
  CHECK(labels == std::vector<int>{0, 1, 2, 3, 4});
}

namespace {
GngGraph labeled_line_graph() {
  // Neurons at x = 0, 1, 2, 10; edges 0-1 and 1-2 leave x=10 as its own island.
  GngGraph g;
  g.dim = 1;
  g.neurons = {{{0.0}, 0.0}, {{1.0}, 0.0}, {{2.0}, 0.0}, {{10.0}, 0.0}};
  g.edges = {{0, 1, 0}, {1, 2, 0}};
  auto [labels, count] = connected_components(g);
  g.component_labels = labels;
  g.component_count = count;
  return g;
}
}  // namespace

TEST_CASE("knn_assign returns the component of an exact match at distance 0") {
  auto g = labeled_line_graph();
  auto a = knn_assign(g, std::vector<double>{1.0}, 3);
  CHECK(a.cluster_id == 0);
  CHECK(a.distance == 0.0);
}

TEST_CASE("knn_assign majority vote wins") {
  auto g = labeled_line_graph();
  // Nearest three to x=6: neurons at 10 (component 1), 2 and 1 (component 0).
  auto a = knn_assign(g, std::vector<double>{6.0}, 3);
  CHECK(a.cluster_id == 0);
}

TEST_CASE("knn_assign breaks full ties by the nearest neuron") {
  GngGraph g;
  g.dim = 1;
  g.neurons = {{{0.0}, 0.0}, {{1.0}, 0.0}, {{2.0}, 0.0}};
  g.component_labels = {0, 1, 2};
  g.component_count = 3;
  auto a = knn_assign(g, std::vector<double>{0.9}, 3);
  CHECK(a.cluster_id == 1);
}

TEST_CASE("knn_assign matches exhaustive nearest-component search on singletons") {
  Rng rng(31);
  GngGraph g;
  g.dim = 2;
  for (int i = 0; i < 12; ++i) {
    g.neurons.push_back({{rng.uniform01(), rng.uniform01()}, 0.0});
    g.component_labels.push_back(i);
  }
  g.component_count = 12;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p{rng.uniform01(), rng.uniform01()};
    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 12; ++i) {
      double dx = p[0] - g.neurons[i].position[0];
      double dy = p[1] - g.neurons[i].position[1];
      if (dx * dx + dy * dy < best) {
        best = dx * dx + dy * dy;
        nearest = i;
      }
    }
    REQUIRE(knn_assign(g, p, 3).cluster_id == nearest);
  }
}

TEST_CASE("knn_assign rejects an empty graph") {
  GngGraph g;
  g.dim = 1;
  CHECK_THROWS_AS(knn_assign(g, std::vector<double>{0.0}, 3), Error);
}

TEST_CASE("manhattan metric also recovers separated blobs") {
  auto blobs = oracles::gaussian_blobs(kCenters, 300, 0.02, 31337);
  GngParams p = desk_params(6);
  p.epochs = 60;
  p.metric = GngMetric::manhattan;
  auto graph = gng_train(blobs.points, p);
  CHECK(graph.metric == GngMetric::manhattan);
  CHECK(graph.component_count == 3);
  // Assignment distance reports the metric itself, not its square.
  auto a = knn_assign(graph, graph.neurons[0].position, 1);
  CHECK(a.distance == 0.0);
}
