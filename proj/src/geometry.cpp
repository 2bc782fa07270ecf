#include "rbal/geometry.hpp"

#include "rbal/exact_solvers.hpp"

#include <ostream>

namespace rbal {

double dot(const ActionVector& a, const PolicyVector& p) {
    if (a.coords.size() != p.coords.size()) throw InvalidArgument("dot: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.coords.size(); ++i) acc += a.coords[i] * p.coords[i];
    return acc;
}

ActionVector action_vector(const Mdp& mdp, ActionId a) {
    if (a >= mdp.num_actions()) throw InvalidArgument("action_vector: invalid action id " + std::to_string(a));
    const Action& act = mdp.action(a);
    ActionVector out;
    out.coords.assign(mdp.num_states() + 1, 0.0);
    out.coords[0] = act.reward;
    for (const auto& tr : act.transitions) out.coords[tr.to + 1] += mdp.gamma() * tr.prob;
    out.coords[act.state + 1] -= 1.0;
    return out;
}

PolicyVector hyperplane_normal(const Mdp& mdp, const Policy& policy) {
    const ValueVector v = evaluate_policy(mdp, policy);
    PolicyVector out;
    out.coords.reserve(v.size() + 1);
    out.coords.push_back(1.0);
    out.coords.insert(out.coords.end(), v.begin(), v.end());
    return out;
}

std::vector<double> selfloop_intersection_heights(const PolicyVector& normal, double gamma) {
    if (normal.coords.empty() || normal.coords[0] != 1.0)
        throw InvalidArgument("selfloop_intersection_heights: normal must have leading coordinate 1");
    // The self-loop line L_s is (h, 0, .., gamma - 1, .., 0); orthogonality to
    // the normal gives h + (gamma - 1) V(s) = 0.
    std::vector<double> heights(normal.coords.size() - 1);
    for (std::size_t s = 0; s < heights.size(); ++s) heights[s] = (1.0 - gamma) * normal.coords[s + 1];
    return heights;
}

ValueVector selfloop_intersection_values(const PolicyVector& normal, double gamma) {
    ValueVector values = selfloop_intersection_heights(normal, gamma);
    for (double& h : values) h /= (1.0 - gamma);
    return values;
}

Mdp apply_transformation(const Mdp& mdp, StateId s, double delta) {
    if (s >= mdp.num_states()) throw InvalidArgument("apply_transformation: invalid state " + std::to_string(s));
    const double gamma = mdp.gamma();
    std::vector<double> rewards = mdp.rewards();
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        const Action& act = mdp.action(a);
        const double p = act.prob_to(s);
        if (act.state == s) rewards[a] -= delta * (gamma * p - 1.0);
        else rewards[a] -= delta * gamma * p;
    }
    return mdp.with_rewards(rewards);
}

void apply_delta_to_rewards(const Mdp& mdp, std::span<double> rewards, std::span<const double> delta) {
    if (delta.size() != mdp.num_states()) throw InvalidArgument("apply_delta: delta length mismatch");
    if (rewards.size() != mdp.num_actions()) throw InvalidArgument("apply_delta: reward length mismatch");
    const double gamma = mdp.gamma();
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        const Action& act = mdp.action(a);
        double inflow = 0.0;
        for (const auto& tr : act.transitions) inflow += tr.prob * delta[tr.to];
        rewards[a] += delta[act.state] - gamma * inflow;
    }
}

Mdp apply_delta(const Mdp& mdp, std::span<const double> delta) {
    std::vector<double> rewards = mdp.rewards();
    apply_delta_to_rewards(mdp, rewards, delta);
    return mdp.with_rewards(rewards);
}

Normalization normalize(const Mdp& mdp) {
    PiResult pi = policy_iteration(mdp);
    DeltaVector delta(pi.values.size());
    for (std::size_t s = 0; s < delta.size(); ++s) delta[s] = -pi.values[s];
    return Normalization{apply_delta(mdp, delta), std::move(delta), std::move(pi.values), std::move(pi.policy)};
}

bool is_normal(const Mdp& mdp, double tol) { return inf_norm(policy_iteration(mdp).values) <= tol; }

bool certify_optimal(const Mdp& mdp, const Policy& policy, double tol) {
    const ValueVector v = evaluate_policy(mdp, policy);
    for (ActionId a = 0; a < mdp.num_actions(); ++a)
        if (advantage(mdp, v, a) > tol) return false;
    return true;
}

Projection export_projection(const Mdp& mdp, const std::vector<std::pair<std::string, Policy>>& policies) {
    Projection out;
    out.n = mdp.num_states();
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        ActionVector av = action_vector(mdp, a);
        out.actions.push_back({a, std::vector<double>(av.coords.begin() + 1, av.coords.end()), av.reward()});
    }
    for (const auto& [name, pi] : policies) {
        const auto heights = selfloop_intersection_heights(hyperplane_normal(mdp, pi), mdp.gamma());
        for (StateId s = 0; s < heights.size(); ++s) out.policies.push_back({name, s, heights[s]});
    }
    return out;
}

void write_projection_csv(std::ostream& os, const Projection& projection) {
    const auto old_precision = os.precision(17);
    os << "kind,id";
    for (std::size_t i = 1; i <= projection.n; ++i) os << ",c" << i;
    os << ",reward\n";
    for (const auto& row : projection.actions) {
        os << "action," << row.id;
        for (double c : row.coefficients) os << ',' << c;
        os << ',' << row.reward << '\n';
    }
    for (const auto& row : projection.policies) os << "policy," << row.name << ',' << row.state << ',' << row.height << '\n';
    os.precision(old_precision);
}

} // namespace rbal
