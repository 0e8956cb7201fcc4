#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wattplan/errors.hpp"
#include "wattplan/rng.hpp"

namespace wattplan {

/// Ground-truth user action between consecutive domain states (M/S).
enum class Action : std::uint8_t { stay = 0, move = 1 };

/// User-signalled counterpart of an action (m/s); differs from the action at
/// the stochastic flip positions.
enum class Actuation : std::uint8_t { stay = 0, move = 1 };

inline const char* to_string(Action a) { return a == Action::stay ? "STAY" : "MOVE"; }

/// STAY iff the next domain state equals the current one.
inline std::vector<Action> label_actions(std::span<const int> states) {
  if (states.size() < 2) fail(Errc::insufficient_data, "label_actions: need at least two states");
  std::vector<Action> actions(states.size() - 1);
  for (std::size_t t = 0; t + 1 < states.size(); ++t)
    actions[t] = states[t + 1] == states[t] ? Action::stay : Action::move;
  return actions;
}

/// Copies the action sequence, flipping exactly round(flip_fraction * N)
/// positions chosen uniformly without replacement.
inline std::vector<Actuation> simulate_actuations(std::span<const Action> actions, double flip_fraction,
                                                  std::uint64_t seed) {
  if (!(flip_fraction >= 0.0 && flip_fraction <= 1.0))
    fail(Errc::config, "flip_fraction must lie in [0,1]");
  std::vector<Actuation> actuations(actions.size());
  for (std::size_t t = 0; t < actions.size(); ++t)
    actuations[t] = actions[t] == Action::stay ? Actuation::stay : Actuation::move;
  const auto flips = static_cast<std::size_t>(
      std::llround(flip_fraction * static_cast<double>(actions.size())));
  Rng rng(seed);
  for (std::size_t idx : rng.sample_indices(actions.size(), flips))
    actuations[idx] = actuations[idx] == Actuation::stay ? Actuation::move : Actuation::stay;
  return actuations;
}

/// The HD/LD split with the strict (user-enforced) subsets.
struct StateClassification {
  std::vector<int> shd, lhd, sld, lld;  // each sorted ascending
  double top = 0.22;
  double fix_hd = 0.30;
  double fix_ld = 0.30;
  std::map<int, std::uint64_t> visit_counts;

  bool is_strict(int s) const {
    return std::binary_search(shd.begin(), shd.end(), s) ||
           std::binary_search(sld.begin(), sld.end(), s);
  }
  bool is_lld(int s) const { return std::binary_search(lld.begin(), lld.end(), s); }

  std::vector<int> strict_states() const {
    std::vector<int> out;
    out.reserve(shd.size() + sld.size());
    out.insert(out.end(), shd.begin(), shd.end());
    out.insert(out.end(), sld.begin(), sld.end());
    std::sort(out.begin(), out.end());
    return out;
  }
};

namespace detail {
inline std::size_t share(double fraction, std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
}
}  // namespace detail

/// Splits visited states into HD/LD by visit frequency (top fraction of the
/// distinct states, ties by ascending id) and samples the strict subsets.
/// Strict membership is seeded-random: only the subset sizes are given, and
/// user authority is enforced without any ground-truth preference signal.
inline StateClassification classify_states(const std::map<int, std::uint64_t>& visit_counts, double top,
                                           double fix_hd, double fix_ld, std::uint64_t seed) {
  if (visit_counts.empty()) fail(Errc::empty_trace, "classify_states: no visited states");
  if (!(top > 0.0 && top <= 1.0)) fail(Errc::config, "classify_states: top must lie in (0,1]");
  if (!(fix_hd >= 0.0 && fix_hd <= 1.0) || !(fix_ld >= 0.0 && fix_ld <= 1.0))
    fail(Errc::config, "classify_states: fix fractions must lie in [0,1]");

  std::vector<std::pair<std::uint64_t, int>> ranked;  // (count, id)
  ranked.reserve(visit_counts.size());
  for (const auto& [state, count] : visit_counts) ranked.emplace_back(count, state);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  const std::size_t hd_size = std::min(ranked.size(), detail::share(top, ranked.size()));
  std::vector<int> hd, ld;
  for (std::size_t i = 0; i < ranked.size(); ++i)
    (i < hd_size ? hd : ld).push_back(ranked[i].second);

  StateClassification out;
  out.top = top;
  out.fix_hd = fix_hd;
  out.fix_ld = fix_ld;
  out.visit_counts = visit_counts;

  Rng rng(seed);
  auto pick_strict = [&rng](const std::vector<int>& pool, double fix, std::vector<int>& strict,
                            std::vector<int>& loose) {
    if (pool.empty()) return;
    const std::size_t n = std::min(pool.size(), detail::share(fix, pool.size()));
    std::vector<char> chosen(pool.size(), 0);
    for (std::size_t idx : rng.sample_indices(pool.size(), n)) chosen[idx] = 1;
    for (std::size_t i = 0; i < pool.size(); ++i) (chosen[i] ? strict : loose).push_back(pool[i]);
    std::sort(strict.begin(), strict.end());
    std::sort(loose.begin(), loose.end());
  };
  pick_strict(hd, fix_hd, out.shd, out.lhd);
  pick_strict(ld, fix_ld, out.sld, out.lld);
  return out;
}

/// Empirical joint transition counts over (d, d', actuation, action):
/// the data behind P_dd'(i n j).
struct JointTransitionCounts {
  using Cell = std::array<std::array<std::uint64_t, 2>, 2>;  // [actuation][action]

  int state_count = 0;
  std::vector<std::map<int, Cell>> by_source;  // [d] -> d' -> cell
  std::uint64_t total = 0;

  std::uint64_t action_count(int d, int dp, Action j) const {
    auto it = by_source[d].find(dp);
    if (it == by_source[d].end()) return 0;
    const auto a = static_cast<std::size_t>(j);
    return it->second[0][a] + it->second[1][a];
  }
};

inline JointTransitionCounts joint_transition_counts(std::span<const int> states,
                                                     std::span<const Action> actions,
                                                     std::span<const Actuation> actuations,
                                                     int state_count) {
  if (states.size() < 2) fail(Errc::insufficient_data, "joint_transition_counts: need two states");
  if (actions.size() != states.size() - 1 || actuations.size() != states.size() - 1)
    fail(Errc::length_mismatch, "joint_transition_counts: actions/actuations must have length N-1");

  JointTransitionCounts counts;
  counts.state_count = state_count;
  counts.by_source.resize(state_count);
  for (std::size_t t = 0; t + 1 < states.size(); ++t) {
    const int d = states[t];
    const int dp = states[t + 1];
    if (d < 0 || d >= state_count || dp < 0 || dp >= state_count)
      fail(Errc::invalid_state, "joint_transition_counts: state id out of range");
    auto& cell = counts.by_source[d][dp];
    cell[static_cast<std::size_t>(actuations[t])][static_cast<std::size_t>(actions[t])] += 1;
    counts.total += 1;
  }
  return counts;
}

}  // namespace wattplan
