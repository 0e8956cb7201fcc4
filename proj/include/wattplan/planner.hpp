#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wattplan/behavior.hpp"
#include "wattplan/errors.hpp"
#include "wattplan/state_models.hpp"

namespace wattplan {

constexpr double kRowSumTolerance = 1e-9;

struct PlannerConfig {
  double gamma = 0.9;
  double update_factor = 0.1;  // e, the clash penalty factor
  double smoothing = 1e-6;     // epsilon_c on transition estimation
  std::size_t replan_interval = 1000;
};

/// Row-stochastic T(s, a, s') over actions {STAY, MOVE}.
class TransitionModel {
 public:
  TransitionModel() = default;
  TransitionModel(int state_count, double smoothing)
      : m_(state_count), smoothing_(smoothing), probs_(static_cast<std::size_t>(state_count) * 2 * state_count, 0.0) {}

  int state_count() const { return m_; }
  double smoothing() const { return smoothing_; }

  std::span<double> row(int s, Action a) {
    return {probs_.data() + offset(s, a), static_cast<std::size_t>(m_)};
  }
  std::span<const double> row(int s, Action a) const {
    return {probs_.data() + offset(s, a), static_cast<std::size_t>(m_)};
  }
  double at(int s, Action a, int sp) const { return probs_[offset(s, a) + sp]; }

  void check_stochastic() const {
    for (int s = 0; s < m_; ++s) {
      for (Action a : {Action::stay, Action::move}) {
        double sum = 0.0;
        for (double p : row(s, a)) {
          if (p < -kRowSumTolerance) fail(Errc::not_stochastic, "negative transition probability");
          sum += p;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance)
          fail(Errc::not_stochastic, "transition row does not sum to 1 at state " + std::to_string(s));
      }
    }
  }

 private:
  std::size_t offset(int s, Action a) const {
    return (static_cast<std::size_t>(s) * 2 + static_cast<std::size_t>(a)) * m_;
  }

  int m_ = 0;
  double smoothing_ = 0.0;
  std::vector<double> probs_;
};

/// R(s) = -(total power of state s); always non-positive.
inline std::vector<double> build_reward_vector(const DomainStateModel& model) {
  std::vector<double> reward(model.state_count);
  for (int s = 0; s < model.state_count; ++s) reward[s] = -state_power(model, s);
  return reward;
}

/// Smoothed frequency estimate of T from the joint counts, marginalized over
/// actuations. Rows with no data default to a self-loop for STAY and to
/// uniform-over-others for MOVE.
inline TransitionModel estimate_transition_model(const JointTransitionCounts& counts, int state_count,
                                                 double smoothing) {
  if (state_count < 1) fail(Errc::config, "estimate_transition_model: need at least one state");
  if (smoothing < 0.0) fail(Errc::config, "estimate_transition_model: smoothing must be >= 0");
  TransitionModel model(state_count, smoothing);
  for (int s = 0; s < state_count; ++s) {
    for (Action a : {Action::stay, Action::move}) {
      auto row = model.row(s, a);
      const auto ai = static_cast<std::size_t>(a);
      std::uint64_t row_total = 0;
      if (s < static_cast<int>(counts.by_source.size())) {
        for (const auto& [dp, cell] : counts.by_source[s]) {
          const std::uint64_t n = cell[0][ai] + cell[1][ai];
          row[dp] = static_cast<double>(n);
          row_total += n;
        }
      }
      if (row_total == 0) {
        if (a == Action::stay || state_count == 1) {
          row[s] = 1.0;
        } else {
          const double p = 1.0 / (state_count - 1);
          for (int sp = 0; sp < state_count; ++sp) row[sp] = sp == s ? 0.0 : p;
        }
        continue;
      }
      const double denom = static_cast<double>(row_total) + smoothing * state_count;
      for (int sp = 0; sp < state_count; ++sp) row[sp] = (row[sp] + smoothing) / denom;
    }
  }
  model.check_stochastic();
  return model;
}

struct PolicySolution {
  std::vector<Action> policy;
  std::vector<double> utility;
  double gamma = 0.9;
  int iterations = 0;
};

namespace detail {

// Solves (I - gamma * T_pi) u = r by Gaussian elimination with partial
// pivoting; exact policy evaluation keeps the Bellman fixed point sharp.
inline std::vector<double> evaluate_policy(const TransitionModel& t, std::span<const double> reward,
                                           std::span<const Action> policy, double gamma) {
  const int m = t.state_count();
  std::vector<double> a(static_cast<std::size_t>(m) * (m + 1));
  for (int i = 0; i < m; ++i) {
    auto row = t.row(i, policy[i]);
    for (int j = 0; j < m; ++j) a[i * (m + 1) + j] = (i == j ? 1.0 : 0.0) - gamma * row[j];
    a[i * (m + 1) + m] = reward[i];
  }
  for (int col = 0; col < m; ++col) {
    int pivot = col;
    for (int r = col + 1; r < m; ++r)
      if (std::abs(a[r * (m + 1) + col]) > std::abs(a[pivot * (m + 1) + col])) pivot = r;
    if (pivot != col)
      for (int j = col; j <= m; ++j) std::swap(a[col * (m + 1) + j], a[pivot * (m + 1) + j]);
    const double diag = a[col * (m + 1) + col];
    for (int r = col + 1; r < m; ++r) {
      const double factor = a[r * (m + 1) + col] / diag;
      if (factor == 0.0) continue;
      for (int j = col; j <= m; ++j) a[r * (m + 1) + j] -= factor * a[col * (m + 1) + j];
    }
  }
  std::vector<double> u(m);
  for (int i = m - 1; i >= 0; --i) {
    double v = a[i * (m + 1) + m];
    for (int j = i + 1; j < m; ++j) v -= a[i * (m + 1) + j] * u[j];
    u[i] = v / a[i * (m + 1) + i];
  }
  return u;
}

inline double action_value(const TransitionModel& t, int s, Action a, std::span<const double> u) {
  double q = 0.0;
  auto row = t.row(s, a);
  for (int sp = 0; sp < t.state_count(); ++sp) q += row[sp] * u[sp];
  return q;
}

}  // namespace detail

/// Policy iteration under U(s) = R(s) + gamma * max_a sum T(s,a,s') U(s').
/// Improvement ties favor STAY (do not perturb the home when indifferent).
inline PolicySolution policy_iteration(const TransitionModel& t, std::span<const double> reward,
                                       double gamma, const PolicySolution* warm_start = nullptr,
                                       int max_iterations = 500) {
  if (!(gamma >= 0.0 && gamma < 1.0)) fail(Errc::config, "policy_iteration: gamma must lie in [0,1)");
  if (static_cast<int>(reward.size()) != t.state_count())
    fail(Errc::length_mismatch, "policy_iteration: reward length mismatch");
  t.check_stochastic();

  const int m = t.state_count();
  PolicySolution solution;
  solution.gamma = gamma;
  solution.policy.assign(m, Action::stay);
  if (warm_start && static_cast<int>(warm_start->policy.size()) == m)
    solution.policy = warm_start->policy;

  for (int it = 0; it < max_iterations; ++it) {
    solution.iterations = it + 1;
    solution.utility = detail::evaluate_policy(t, reward, solution.policy, gamma);
    bool stable = true;
    for (int s = 0; s < m; ++s) {
      const double q_stay = detail::action_value(t, s, Action::stay, solution.utility);
      const double q_move = detail::action_value(t, s, Action::move, solution.utility);
      const Action best = q_move > q_stay ? Action::move : Action::stay;
      if (best != solution.policy[s]) {
        solution.policy[s] = best;
        stable = false;
      }
    }
    if (stable) break;
  }
  return solution;
}

/// Identical contract to policy_iteration; the previous solution seeds the
/// search and must not change the fixed point.
inline PolicySolution replan(const TransitionModel& t, std::span<const double> reward, double gamma,
                             const PolicySolution* previous = nullptr) {
  return policy_iteration(t, reward, gamma, previous);
}

/// mdp(s): the most probable next state under the policy action; ties break
/// to the lower-power state, then the lower id.
inline int recommend(const TransitionModel& t, const PolicySolution& solution,
                     std::span<const double> state_powers, int s) {
  if (s < 0 || s >= t.state_count()) fail(Errc::invalid_state, "recommend: state out of range");
  if (static_cast<int>(state_powers.size()) != t.state_count() ||
      static_cast<int>(solution.policy.size()) != t.state_count())
    fail(Errc::length_mismatch, "recommend: powers/policy length mismatch");
  auto row = t.row(s, solution.policy[s]);
  int best = 0;
  for (int sp = 1; sp < t.state_count(); ++sp) {
    if (row[sp] > row[best]) {
      best = sp;
    } else if (row[sp] == row[best] && state_powers[sp] < state_powers[best]) {
      best = sp;
    }
  }
  return best;
}

/// Clash response: removes an e-fraction of the recommended entry's mass in
/// the acted row and spreads it equally over the strict states, then
/// renormalizes. Returns false (no-op) when the strict set is empty.
inline bool online_update(TransitionModel& t, int s, Action action, int recommended, int actual,
                          std::span<const int> strict_states, double e) {
  if (s < 0 || s >= t.state_count() || recommended < 0 || recommended >= t.state_count() ||
      actual < 0 || actual >= t.state_count())
    fail(Errc::invalid_state, "online_update: state out of range");
  if (!(e >= 0.0 && e <= 1.0)) fail(Errc::config, "online_update: e must lie in [0,1]");
  if (strict_states.empty()) return false;

  auto row = t.row(s, action);
  const double delta = e * row[recommended];
  row[recommended] -= delta;
  const double share = delta / static_cast<double>(strict_states.size());
  for (int strict : strict_states) row[strict] += share;

  // Mass moved, not created; renormalize only to absorb accumulation error.
  double sum = 0.0;
  for (double p : row) sum += p;
  for (double& p : row) p /= sum;
  return true;
}

}  // namespace wattplan
