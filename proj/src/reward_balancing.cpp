#include "rbal/reward_balancing.hpp"

#include "rbal/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rbal {

std::pair<Mdp, double> shift_rewards_nonpositive(const Mdp& mdp) {
    std::vector<double> rewards = mdp.rewards();
    if (rewards.empty()) return {mdp, 0.0};
    const double shift = *std::max_element(rewards.begin(), rewards.end());
    for (double& r : rewards) r -= shift;
    return {mdp.with_rewards(rewards), shift};
}

DeltaVector rbs_delta(const Mdp& mdp, std::span<const double> rewards, std::span<const char> alive) {
    if (rewards.size() != mdp.num_actions()) throw InvalidArgument("rbs_delta: reward length mismatch");
    const double gamma = mdp.gamma();
    DeltaVector delta(mdp.num_states());
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (ActionId a : mdp.actions_of(s)) {
            if (!alive.empty() && !alive[a]) continue;
            best = std::max(best, rewards[a] / (1.0 - gamma * mdp.action(a).self_loop_prob()));
        }
        delta[s] = -best;
    }
    return delta;
}

DeltaVector rbs_delta(const Mdp& mdp) { return rbs_delta(mdp, mdp.rewards()); }

RbBoundParams rbs_bound_params(const Mdp& mdp) {
    const double gamma = mdp.gamma();
    RbBoundParams params;
    double pmax = 0.0;
    double pmin = 1.0;
    params.alpha = 0.0;
    for (const Action& a : mdp.actions()) {
        if (a.reward > 0.0) throw InvalidArgument("rbs_bound_params: rewards must be nonpositive");
        const double p = a.self_loop_prob();
        pmax = std::max(pmax, p);
        pmin = std::min(pmin, p);
        params.alpha = std::max(params.alpha, (gamma - gamma * p) / (1.0 - gamma * p));
    }
    params.beta = gamma * pmax;
    params.l = 1.0 - gamma * pmin;
    double rmin = std::numeric_limits<double>::infinity();
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (ActionId a : mdp.actions_of(s)) best = std::max(best, mdp.action(a).reward);
        rmin = std::min(rmin, best);
    }
    params.rMax = mdp.num_states() ? -rmin : 0.0;
    if (params.rMax == 0.0) params.rMax = 0.0; // normalise -0
    return params;
}

double rbs_epsilon_bound(const RbBoundParams& params, double gamma, std::size_t t) {
    return std::pow(params.alpha, static_cast<double>(t)) * params.l / ((1.0 - params.beta) * (1.0 - gamma)) *
           params.rMax;
}

double reward_advantage_bound(double rMax, double gamma, std::size_t t) {
    return 2.0 * rMax * std::pow(gamma, static_cast<double>(t)) / (1.0 - gamma);
}

std::size_t rbs_iteration_bound(const RbBoundParams& params, double gamma, double epsilon) {
    if (!(epsilon > 0.0)) throw InvalidArgument("rbs_iteration_bound: epsilon must be positive");
    if (params.rMax <= 0.0) return 0;
    const double target = epsilon * (1.0 - gamma) * (1.0 - params.beta) / (params.l * params.rMax);
    if (target >= 1.0) return 1;
    if (params.alpha <= 0.0) return 1;
    return static_cast<std::size_t>(std::ceil(std::log(target) / std::log(params.alpha))) + 1;
}

SafeRewardBalancer::SafeRewardBalancer(const Mdp& mdp, bool shift) {
    require_valid(mdp);
    if (shift) {
        auto [shifted, amount] = shift_rewards_nonpositive(mdp);
        mdp_ = std::move(shifted);
        shift_ = amount;
    } else {
        for (const Action& a : mdp.actions())
            if (a.reward > 0.0) throw InvalidArgument("SafeRewardBalancer: rewards must be nonpositive");
        mdp_ = mdp;
    }
    rewards_ = mdp_.rewards();
    alive_.assign(mdp_.num_actions(), 1);
    cumulative_.assign(mdp_.num_states(), 0.0);
    r_max_ = -rmin();
    if (r_max_ == 0.0) r_max_ = 0.0;
}

std::vector<double> SafeRewardBalancer::state_max() const {
    std::vector<double> out(mdp_.num_states(), -std::numeric_limits<double>::infinity());
    for (ActionId a = 0; a < rewards_.size(); ++a) {
        if (!alive_[a]) continue;
        auto& m = out[mdp_.action(a).state];
        m = std::max(m, rewards_[a]);
    }
    return out;
}

double SafeRewardBalancer::rmin() const {
    const auto maxima = state_max();
    return maxima.empty() ? 0.0 : *std::min_element(maxima.begin(), maxima.end());
}

Policy SafeRewardBalancer::reward_policy() const {
    Policy pi;
    pi.source = "rbs";
    pi.iteration = iteration_;
    pi.choice.resize(mdp_.num_states());
    for (StateId s = 0; s < mdp_.num_states(); ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (ActionId a : mdp_.actions_of(s)) {
            if (alive_[a] && rewards_[a] > best) {
                best = rewards_[a];
                pi.choice[s] = a;
            }
        }
    }
    return pi;
}

Policy SafeRewardBalancer::balancing_policy() const {
    const double gamma = mdp_.gamma();
    Policy pi;
    pi.source = "rbs-balancing";
    pi.iteration = iteration_;
    pi.choice.resize(mdp_.num_states());
    for (StateId s = 0; s < mdp_.num_states(); ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (ActionId a : mdp_.actions_of(s)) {
            if (!alive_[a]) continue;
            const double ratio = rewards_[a] / (1.0 - gamma * mdp_.action(a).self_loop_prob());
            if (ratio > best) {
                best = ratio;
                pi.choice[s] = a;
            }
        }
    }
    return pi;
}

DeltaVector SafeRewardBalancer::step() {
    DeltaVector delta = rbs_delta(mdp_, rewards_, alive_);
    apply_delta_to_rewards(mdp_, rewards_, delta);
    for (StateId s = 0; s < delta.size(); ++s) cumulative_[s] += delta[s];
    ++iteration_;
    return delta;
}

bool SafeRewardBalancer::remove(ActionId a) {
    if (a >= alive_.size()) throw InvalidArgument("remove: invalid action id");
    if (!alive_[a] || alive_count(mdp_.action(a).state) <= 1) return false;
    alive_[a] = 0;
    return true;
}

std::size_t SafeRewardBalancer::alive_count(StateId s) const {
    std::size_t c = 0;
    for (ActionId a : mdp_.actions_of(s)) c += alive_[a] ? 1 : 0;
    return c;
}

std::size_t SafeRewardBalancer::max_alive_actions() const {
    std::size_t m = 0;
    for (StateId s = 0; s < mdp_.num_states(); ++s) m = std::max(m, alive_count(s));
    return m;
}

ValueVector RbsResult::value_estimate() const {
    ValueVector v(cumulative.size());
    for (std::size_t s = 0; s < v.size(); ++s) v[s] = -cumulative[s];
    return v;
}

RbsResult rbs_solve(const Mdp& mdp, double epsilon, std::size_t maxIters) {
    if (!(epsilon > 0.0)) throw InvalidArgument("rbs_solve: epsilon must be positive");
    SafeRewardBalancer rb(mdp);
    const double gamma = rb.mdp().gamma();
    const RbBoundParams params = rbs_bound_params(rb.mdp());

    RbsResult result;
    result.shift = rb.shift();
    result.trace.solver = "rbs";
    result.trace.tolerance = epsilon;
    result.initialRmin = rb.rmin();

    bool done = std::abs(result.initialRmin) / (1.0 - gamma) < epsilon;
    while (!done && rb.iteration() < maxIters) {
        TraceRecord rec;
        rec.delta = rb.step();
        rec.rMin = rb.rmin();
        rec.policy = rb.reward_policy();
        rec.boundEpsilon = rbs_epsilon_bound(params, gamma, rb.iteration());
        rec.corollaryBound = reward_advantage_bound(params.rMax, gamma, rb.iteration());
        rec.maxAliveActions = rb.max_alive_actions();
        done = std::abs(rec.rMin) / (1.0 - gamma) < epsilon;
        result.trace.push(std::move(rec));
    }
    result.converged = done;
    result.iterations = rb.iteration();
    result.policy = rb.reward_policy();
    result.cumulative = rb.cumulative();
    result.rewards.assign(rb.rewards().begin(), rb.rewards().end());
    return result;
}

FilteringResult rbs_with_filtering(const Mdp& mdp, std::size_t maxIters) {
    SafeRewardBalancer rb(mdp);
    const double gamma = rb.mdp().gamma();
    const double rmax = rb.r_max();
    const RbBoundParams params = rbs_bound_params(rb.mdp());

    FilteringResult result;
    result.trace.solver = "rbs-filter";

    auto filter = [&] {
        const double threshold = -reward_advantage_bound(rmax, gamma, rb.iteration());
        const auto rewards = rb.rewards();
        // the best surviving action of a state is never dropped
        const Policy best = rb.reward_policy();
        for (ActionId a = 0; a < rewards.size(); ++a) {
            if (!rb.alive()[a] || best.choice[rb.mdp().action(a).state] == a) continue;
            if (rewards[a] < threshold && rb.remove(a)) result.removed.emplace_back(a, rb.iteration());
        }
    };

    filter();
    while (rb.max_alive_actions() > 1 && rb.iteration() < maxIters) {
        TraceRecord rec;
        rec.delta = rb.step();
        filter();
        rec.rMin = rb.rmin();
        rec.policy = rb.reward_policy();
        rec.boundEpsilon = rbs_epsilon_bound(params, gamma, rb.iteration());
        rec.corollaryBound = reward_advantage_bound(rmax, gamma, rb.iteration());
        rec.maxAliveActions = rb.max_alive_actions();
        result.trace.push(std::move(rec));
    }
    result.exact = rb.max_alive_actions() <= 1;
    result.iterations = rb.iteration();
    result.policy = rb.reward_policy();
    result.policy.source = "rbs-filter";
    return result;
}

bool EquivalenceReport::selections_identical() const {
    return std::all_of(steps.begin(), steps.end(), [](const EquivalenceStep& s) { return s.selectionsMatch; });
}

double EquivalenceReport::max_delta_error() const {
    double m = 0.0;
    for (const auto& s : steps) m = std::max(m, s.deltaError);
    return m;
}

EquivalenceReport check_diagonal_free_equivalence(const Mdp& mdp, std::size_t T) {
    require_valid(mdp);
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        if (mdp.action(a).self_loop_prob() != 0.0)
            throw InvalidArgument("check_diagonal_free_equivalence: action " + std::to_string(a) + " has a self-loop");
        if (mdp.action(a).reward > 0.0)
            throw InvalidArgument("check_diagonal_free_equivalence: rewards must be nonpositive");
    }
    const std::size_t n = mdp.num_states();
    SafeRewardBalancer rb(mdp, /*shift=*/false);
    ValueVector v(n, 0.0);
    ValueVector next(n);

    EquivalenceReport report;
    for (std::size_t t = 1; t <= T; ++t) {
        const Policy rbs_choice = rb.balancing_policy();
        std::vector<ActionId> vi_choice(n);
        for (StateId s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (ActionId a : mdp.actions_of(s)) {
                const double q = action_backup(mdp, a, v);
                if (q > best) {
                    best = q;
                    vi_choice[s] = a;
                }
            }
            next[s] = best;
        }
        v.swap(next);
        rb.step();

        EquivalenceStep step;
        step.t = t;
        step.selectionsMatch = rbs_choice.choice == vi_choice;
        for (StateId s = 0; s < n; ++s)
            step.deltaError = std::max(step.deltaError, std::abs(rb.cumulative()[s] + v[s]));
        report.steps.push_back(step);
    }
    return report;
}

} // namespace rbal
