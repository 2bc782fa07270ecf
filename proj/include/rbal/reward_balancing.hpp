#pragma once

// Safe reward balancing (RB-S) and its convergence bounds.
//
// RB-S never computes values. Each iteration picks, per state,
//   delta_s = -max_{a in s} r^a / (1 - gamma p^a_s)
// and applies the advantage-preserving transformation with that increment.
// Rewards stay nonpositive, and the argmax-reward policy approaches optimality.

#include "rbal/mdp.hpp"
#include "rbal/trace.hpp"

#include <utility>
#include <vector>

namespace rbal {

/// Subtracts the global maximum reward from every reward. Returns the shifted
/// MDP and the shift.
std::pair<Mdp, double> shift_rewards_nonpositive(const Mdp& mdp);

/// Balancing increments for nonpositive rewards. The overload with `rewards`
/// reads rewards from the buffer instead of the MDP; `alive`, when non-empty,
/// restricts the per-state maximum to the flagged actions.
DeltaVector rbs_delta(const Mdp& mdp);
DeltaVector rbs_delta(const Mdp& mdp, std::span<const double> rewards, std::span<const char> alive = {});

struct RbBoundParams {
    double alpha = 0.0; ///< max_a (gamma - gamma p_self) / (1 - gamma p_self)
    double beta = 0.0;  ///< gamma * max_a p_self
    double l = 1.0;     ///< 1 - gamma * min_a p_self
    double rMax = 0.0;  ///< -min_s max_{a in s} r^a
};

/// Requires nonpositive rewards.
RbBoundParams rbs_bound_params(const Mdp& mdp);

/// alpha^t * l / ((1 - beta)(1 - gamma)) * rMax: suboptimality bound after t updates.
double rbs_epsilon_bound(const RbBoundParams& params, double gamma, std::size_t t);

/// 2 rMax gamma^t / (1 - gamma): bound on |r_t^a - adv(a, pi*)|.
double reward_advantage_bound(double rMax, double gamma, std::size_t t);

/// Iterations after which |R^m_t| / (1 - gamma) < epsilon is guaranteed:
/// ceil(log(eps (1-gamma)(1-beta) / (l rMax)) / log alpha) + 1, or 0 when rMax is 0.
std::size_t rbs_iteration_bound(const RbBoundParams& params, double gamma, double epsilon);

/// Stateful RB-S iteration over an in-place reward buffer. The constructor
/// shifts rewards nonpositive unless `shift` is false, in which case the input
/// must already be nonpositive.
class SafeRewardBalancer {
  public:
    explicit SafeRewardBalancer(const Mdp& mdp, bool shift = true);

    /// Structure of the problem; its rewards are the initial (shifted) ones.
    const Mdp& mdp() const { return mdp_; }
    double shift() const { return shift_; }
    std::size_t iteration() const { return iteration_; }
    std::span<const double> rewards() const { return rewards_; }
    const DeltaVector& cumulative() const { return cumulative_; }
    /// The r_max statistic frozen at construction.
    double r_max() const { return r_max_; }

    /// Per-state maximum reward over alive actions.
    std::vector<double> state_max() const;
    /// Minimum of state_max(): the R^m statistic.
    double rmin() const;

    /// Argmax-reward policy over alive actions; the solver's output candidate.
    Policy reward_policy() const;
    /// Actions attaining the delta maximum at the current rewards.
    Policy balancing_policy() const;

    /// Computes delta from the current rewards, applies it, returns it.
    DeltaVector step();

    std::span<const char> alive() const { return alive_; }
    /// Removes an action from consideration. The last alive action of a state
    /// cannot be removed; returns whether removal happened.
    bool remove(ActionId a);
    std::size_t alive_count(StateId s) const;
    std::size_t max_alive_actions() const;

    /// Current rewards as an MDP.
    Mdp current() const { return mdp_.with_rewards(rewards_); }

  private:
    Mdp mdp_;
    double shift_ = 0.0;
    double r_max_ = 0.0;
    std::size_t iteration_ = 0;
    std::vector<double> rewards_;
    std::vector<char> alive_;
    DeltaVector cumulative_;
};

struct RbsResult {
    Policy policy;
    DeltaVector cumulative;   ///< sum of applied deltas; -cumulative estimates V* of the shifted MDP
    std::vector<double> rewards; ///< final balanced rewards
    double shift = 0.0;
    double initialRmin = 0.0; ///< R^m before any update
    SolverTrace trace;
    std::size_t iterations = 0;
    bool converged = false;

    /// Estimated optimal values of the shifted MDP.
    ValueVector value_estimate() const;
};

/// RB-S: iterate until |R^m_t| / (1 - gamma) < epsilon, checking before the
/// first update as well. The returned policy is epsilon-optimal.
RbsResult rbs_solve(const Mdp& mdp, double epsilon, std::size_t maxIters = 100000);

struct FilteringResult {
    Policy policy;
    SolverTrace trace;
    std::size_t iterations = 0;
    bool exact = false; ///< true when every state was reduced to a single action
    std::vector<std::pair<ActionId, std::size_t>> removed; ///< (action, iteration)
};

/// RB-S with action filtering: after iteration t drops every action with
/// r_t^a < -2 rMax gamma^t / (1 - gamma). Terminates when one action per state
/// survives, which is then the optimal policy if the optimum is unique. On
/// hitting maxIters returns the argmax-reward policy with exact = false.
FilteringResult rbs_with_filtering(const Mdp& mdp, std::size_t maxIters = 100000);

struct EquivalenceStep {
    std::size_t t = 0;
    bool selectionsMatch = true;
    double deltaError = 0.0; ///< |cumulative_t + V_t|_inf
};

struct EquivalenceReport {
    std::vector<EquivalenceStep> steps;
    bool selections_identical() const;
    double max_delta_error() const;
    bool holds(double tol = kIdentityTol) const { return selections_identical() && max_delta_error() <= tol; }
};

/// Runs RB-S and value iteration from V0 = 0 side by side for T steps on a
/// diagonal-free MDP with nonpositive rewards. Throws InvalidArgument when the
/// precondition fails.
EquivalenceReport check_diagonal_free_equivalence(const Mdp& mdp, std::size_t T);

} // namespace rbal
