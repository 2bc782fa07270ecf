#pragma once

#include "rbal/mdp.hpp"
#include "rbal/trace.hpp"

#include <optional>
#include <vector>

namespace rbal {

/// An incumbent action is kept during policy improvement unless another
/// action beats it by more than this margin; prevents cycling on rounding noise.
inline constexpr double kImprovementTol = 1e-12;

struct ViResult {
    Policy policy;       ///< greedy with respect to the final values
    ValueVector values;  ///< final iterate
    SolverTrace trace;   ///< record t: selections on V_{t-1}, delta = V_t - V_{t-1}
    std::size_t iterations = 0;
    bool converged = false; ///< false when maxIters was hit first
};

/// V_{t+1}(s) = max_a [r^a + gamma sum p^a V_t]; stops once
/// |V_{t+1} - V_t|_inf <= epsilon (1 - gamma) / (2 gamma).
ViResult value_iteration(const Mdp& mdp, std::span<const double> v0, double epsilon, std::size_t maxIters = 100000);

/// Stopping threshold on successive iterates used by value_iteration.
double vi_stopping_threshold(double epsilon, double gamma);

struct PiResult {
    Policy policy;
    ValueVector values;
    SolverTrace trace; ///< one record per evaluated policy, in order
    std::size_t iterations = 0;
};

/// Per-state argmax of the immediate reward.
Policy default_initial_policy(const Mdp& mdp);

/// Howard's policy iteration. Each record holds the evaluated policy, the
/// value change from the previous evaluation and, as rMin, the minimum over
/// states of the best advantage with respect to that policy.
PiResult policy_iteration(const Mdp& mdp, std::optional<Policy> pi0 = std::nullopt, std::size_t maxIters = 100000);

struct ErbResult {
    Policy policy;
    SolverTrace trace;     ///< one record per transformation: the policy zeroed and its delta
    DeltaVector cumulative; ///< sum of applied deltas (on the reward-shifted MDP)
    std::size_t iterations = 0;
};

/// Exact reward balancing: repeatedly pick the argmax-reward policy and apply
/// the transformation that makes its values zero, until every chosen reward is
/// zero within 1e-9. Rewards are shifted nonpositive first.
ErbResult exact_reward_balancing(const Mdp& mdp, std::size_t maxIters = 100000);

/// Sequence of policies visited, including the final one, with consecutive
/// repeats collapsed. Comparable across policy_iteration and
/// exact_reward_balancing.
std::vector<Policy> visited_policies(const SolverTrace& trace, const Policy& final_policy);

} // namespace rbal
