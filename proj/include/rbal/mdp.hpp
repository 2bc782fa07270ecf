#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rbal {

using StateId = std::size_t;
using ActionId = std::size_t;

/// Per-state real vector: policy values, optimal values, etc.
using ValueVector = std::vector<double>;
/// Per-state value increments of a reward transformation.
using DeltaVector = std::vector<double>;

inline constexpr double kProbabilityTol = 1e-12;
inline constexpr double kIdentityTol = 1e-9;

class InvalidArgument : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A linear solve whose residual exceeded its bound.
class NumericalFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Transition {
    StateId to = 0;
    double prob = 0.0;
};

/// An action is owned by exactly one state; its index in Mdp::actions() is
/// its permanent identity.
struct Action {
    StateId state = 0;
    double reward = 0.0;
    std::vector<Transition> transitions;

    /// Probability of landing in `s`; zero when `s` is not a listed destination.
    double prob_to(StateId s) const;
    double self_loop_prob() const { return prob_to(state); }
};

/// Finite discounted MDP with deterministic action rewards and sparse
/// transitions. Construction does not validate; see validate_mdp().
class Mdp {
  public:
    Mdp() = default;
    Mdp(std::size_t n, double gamma, std::vector<Action> actions);

    std::size_t num_states() const { return n_; }
    std::size_t num_actions() const { return actions_.size(); }
    double gamma() const { return gamma_; }

    const std::vector<Action>& actions() const { return actions_; }
    const Action& action(ActionId a) const { return actions_.at(a); }
    /// Action indices owned by `s`, in increasing order.
    std::span<const ActionId> actions_of(StateId s) const { return state_actions_.at(s); }

    std::vector<double> rewards() const;
    /// Same transitions and gamma, rewards replaced. `rewards.size()` must equal m.
    Mdp with_rewards(std::span<const double> rewards) const;

  private:
    std::size_t n_ = 0;
    double gamma_ = 0.0;
    std::vector<Action> actions_;
    std::vector<std::vector<ActionId>> state_actions_;
};

/// Deterministic stationary policy: one action per state.
struct Policy {
    std::vector<ActionId> choice;
    std::string source;        ///< producing solver, informational only
    std::size_t iteration = 0; ///< iteration at which the solver produced it

    friend bool operator==(const Policy& a, const Policy& b) { return a.choice == b.choice; }
};

/// FNV-1a over the action indices; stable across runs and platforms.
std::uint64_t policy_hash(const Policy& policy);
std::string policy_hash_hex(const Policy& policy);

struct Violation {
    std::string message;
    std::optional<StateId> state;
    std::optional<ActionId> action;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string to_string() const;
};

ValidationReport validate_mdp(const Mdp& mdp);
/// Throws InvalidArgument listing every violation.
void require_valid(const Mdp& mdp);
bool is_valid_policy(const Mdp& mdp, const Policy& policy);
void require_valid_policy(const Mdp& mdp, const Policy& policy);

/// (T^pi V)(s) = r(pi(s)) + gamma * sum_s' P(s'|pi(s)) V(s').
ValueVector bellman_apply(const Mdp& mdp, const Policy& policy, std::span<const double> v);

/// Solves (I - gamma P_pi) V = r_pi with a partial-pivot LU factorization.
/// Throws NumericalFailure when the residual exceeds 1e-10 * max(1, |r_pi|_inf).
ValueVector evaluate_policy(const Mdp& mdp, const Policy& policy);

/// Q-form of an action against values v: r^a + gamma * sum_i p^a_i v(i).
double action_backup(const Mdp& mdp, ActionId a, std::span<const double> v);

/// r^b + gamma * sum_i p^b_i v(i) - v(st(b)).
double advantage(const Mdp& mdp, std::span<const double> v, ActionId a);

/// Per state, the action with the largest advantage against v; ties go to the
/// lowest action index.
Policy greedy_policy(const Mdp& mdp, std::span<const double> v);

/// Per state, the action with the largest reward; ties go to the lowest index.
Policy argmax_reward_policy(const Mdp& mdp);
Policy argmax_reward_policy(const Mdp& mdp, std::span<const double> rewards);

/// |vStar - V^pi|_inf.
double policy_suboptimality(const Mdp& mdp, const Policy& policy, std::span<const double> vStar);

double inf_norm(std::span<const double> v);
double inf_distance(std::span<const double> a, std::span<const double> b);

} // namespace rbal
