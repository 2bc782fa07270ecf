#pragma once

// Action-space embedding of an MDP and the advantage-preserving reward
// transformations built on it.
//
// An action a owned by state s maps to the (n+1)-vector
//   a+ = (r^a, gamma*p^a_1, ..., gamma*p^a_s - 1, ..., gamma*p^a_n),
// and a policy pi maps to (1, V^pi(1), ..., V^pi(n)). Their dot product is
// the advantage of a with respect to pi.

#include "rbal/mdp.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace rbal {

/// coords[0] is the reward; coords[1..n] sum to gamma - 1.
struct ActionVector {
    std::vector<double> coords;
    double reward() const { return coords.front(); }
};

/// coords[0] == 1; coords[1..n] are the policy values.
struct PolicyVector {
    std::vector<double> coords;
};

double dot(const ActionVector& a, const PolicyVector& p);

ActionVector action_vector(const Mdp& mdp, ActionId a);

/// Normal of the hyperplane spanned by the policy's action vectors.
PolicyVector hyperplane_normal(const Mdp& mdp, const Policy& policy);

/// Reward coordinate where the hyperplane with normal `normal` meets the
/// self-loop line of each state, i.e. (1 - gamma) * V(s).
std::vector<double> selfloop_intersection_heights(const PolicyVector& normal, double gamma);
/// Heights divided by (1 - gamma): the values encoded by the hyperplane.
ValueVector selfloop_intersection_values(const PolicyVector& normal, double gamma);

/// Raises every policy's value at `s` by `delta`, leaving all advantages unchanged.
Mdp apply_transformation(const Mdp& mdp, StateId s, double delta);

/// Composition of apply_transformation over all states, in one pass:
/// r^a += delta[st(a)] - gamma * sum_s' p^a_s' delta[s'].
Mdp apply_delta(const Mdp& mdp, std::span<const double> delta);

/// In-place form of apply_delta over a reward buffer indexed by action.
void apply_delta_to_rewards(const Mdp& mdp, std::span<double> rewards, std::span<const double> delta);

struct Normalization {
    Mdp mdp;            ///< normal form: optimal values are all zero
    DeltaVector delta;  ///< applied increment, equal to -V*
    ValueVector vStar;  ///< optimal values of the input
    Policy optimal;     ///< optimal policy of the input (and of the output)
};

/// Shifts every state's optimal value to zero. V* comes from Policy Iteration.
Normalization normalize(const Mdp& mdp);

/// |V*|_inf <= tol with V* from Policy Iteration.
bool is_normal(const Mdp& mdp, double tol = kIdentityTol);

/// True iff no action's advantage with respect to V^pi exceeds tol.
bool certify_optimal(const Mdp& mdp, const Policy& policy, double tol = kIdentityTol);

struct ProjectionActionRow {
    ActionId id = 0;
    std::vector<double> coefficients; // c_1 .. c_n
    double reward = 0.0;
};

struct ProjectionPolicyRow {
    std::string name;
    StateId state = 0;
    double height = 0.0; // (1 - gamma) * V^pi(state)
};

struct Projection {
    std::size_t n = 0;
    std::vector<ProjectionActionRow> actions;
    std::vector<ProjectionPolicyRow> policies;
};

Projection export_projection(const Mdp& mdp, const std::vector<std::pair<std::string, Policy>>& policies);

/// Header "kind,id,c1,...,cn,reward"; policy rows are "policy,<name>,state,height".
void write_projection_csv(std::ostream& os, const Projection& projection);

} // namespace rbal
