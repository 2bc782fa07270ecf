#include "rbal/exact_solvers.hpp"

#include "rbal/geometry.hpp"
#include "rbal/reward_balancing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rbal {

double vi_stopping_threshold(double epsilon, double gamma) { return epsilon * (1.0 - gamma) / (2.0 * gamma); }

ViResult value_iteration(const Mdp& mdp, std::span<const double> v0, double epsilon, std::size_t maxIters) {
    if (!(epsilon > 0.0)) throw InvalidArgument("value_iteration: epsilon must be positive");
    if (v0.size() != mdp.num_states()) throw InvalidArgument("value_iteration: v0 length mismatch");
    require_valid(mdp);

    const std::size_t n = mdp.num_states();
    const double threshold = vi_stopping_threshold(epsilon, mdp.gamma());
    ViResult result;
    result.trace.solver = "vi";
    result.trace.tolerance = epsilon;

    ValueVector v(v0.begin(), v0.end());
    ValueVector next(n);
    while (result.iterations < maxIters) {
        Policy selection;
        selection.source = "vi";
        selection.iteration = result.iterations;
        selection.choice.resize(n);
        for (StateId s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (ActionId a : mdp.actions_of(s)) {
                const double q = action_backup(mdp, a, v);
                if (q > best) {
                    best = q;
                    selection.choice[s] = a;
                }
            }
            next[s] = best;
        }
        TraceRecord rec;
        rec.delta.resize(n);
        for (StateId s = 0; s < n; ++s) rec.delta[s] = next[s] - v[s];
        rec.rMin = *std::min_element(rec.delta.begin(), rec.delta.end());
        rec.policy = std::move(selection);
        const double change = inf_norm(rec.delta);
        result.trace.push(std::move(rec));
        v.swap(next);
        ++result.iterations;
        if (change <= threshold) {
            result.converged = true;
            break;
        }
    }
    result.policy = greedy_policy(mdp, v);
    result.policy.source = "vi";
    result.policy.iteration = result.iterations;
    result.values = std::move(v);
    return result;
}

Policy default_initial_policy(const Mdp& mdp) { return argmax_reward_policy(mdp); }

namespace {

/// Greedy improvement over per-action scores, keeping the incumbent unless
/// beaten by more than kImprovementTol; remaining ties go to the lowest index.
Policy improve(const Mdp& mdp, std::span<const double> score, const Policy* incumbent) {
    Policy next;
    next.choice.resize(mdp.num_states());
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        double best = -std::numeric_limits<double>::infinity();
        ActionId arg = 0;
        for (ActionId a : mdp.actions_of(s)) {
            if (score[a] > best) {
                best = score[a];
                arg = a;
            }
        }
        if (incumbent) {
            const ActionId cur = incumbent->choice[s];
            if (score[cur] >= best - kImprovementTol) arg = cur;
        }
        next.choice[s] = arg;
    }
    return next;
}

double min_of_state_max(const Mdp& mdp, std::span<const double> score) {
    double rmin = std::numeric_limits<double>::infinity();
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (ActionId a : mdp.actions_of(s)) best = std::max(best, score[a]);
        rmin = std::min(rmin, best);
    }
    return rmin;
}

} // namespace

PiResult policy_iteration(const Mdp& mdp, std::optional<Policy> pi0, std::size_t maxIters) {
    require_valid(mdp);
    Policy pi = pi0 ? std::move(*pi0) : default_initial_policy(mdp);
    require_valid_policy(mdp, pi);

    PiResult result;
    result.trace.solver = "pi";
    ValueVector prev(mdp.num_states(), 0.0);
    std::vector<double> adv(mdp.num_actions());
    while (true) {
        if (result.iterations >= maxIters)
            throw NumericalFailure("policy_iteration did not stabilise within maxIters");
        ValueVector v = evaluate_policy(mdp, pi);
        for (ActionId a = 0; a < mdp.num_actions(); ++a)
            adv[a] = action_backup(mdp, a, v) - v[mdp.action(a).state];

        TraceRecord rec;
        rec.delta.resize(v.size());
        for (std::size_t s = 0; s < v.size(); ++s) rec.delta[s] = v[s] - prev[s];
        rec.rMin = min_of_state_max(mdp, adv);
        pi.source = "pi";
        pi.iteration = result.iterations;
        rec.policy = pi;
        result.trace.push(std::move(rec));
        ++result.iterations;

        Policy next = improve(mdp, adv, &pi);
        if (next == pi) {
            result.values = std::move(v);
            break;
        }
        prev = std::move(v);
        pi = std::move(next);
    }
    result.policy = std::move(pi);
    return result;
}

ErbResult exact_reward_balancing(const Mdp& input, std::size_t maxIters) {
    require_valid(input);
    const auto [mdp, shift] = shift_rewards_nonpositive(input);
    (void)shift;
    const std::size_t n = mdp.num_states();

    ErbResult result;
    result.trace.solver = "erb";
    result.cumulative.assign(n, 0.0);
    std::vector<double> rewards = mdp.rewards();

    Policy pi = improve(mdp, rewards, nullptr);
    while (true) {
        bool balanced = true;
        for (StateId s = 0; s < n; ++s) balanced = balanced && std::abs(rewards[pi.choice[s]]) <= kIdentityTol;
        if (balanced) break;
        if (result.iterations >= maxIters)
            throw NumericalFailure("exact_reward_balancing did not terminate within maxIters");

        // delta = -V^pi under the current rewards zeroes every value of pi
        ValueVector v = evaluate_policy(mdp.with_rewards(rewards), pi);
        DeltaVector delta(n);
        for (StateId s = 0; s < n; ++s) delta[s] = -v[s];
        apply_delta_to_rewards(mdp, rewards, delta);
        for (StateId s = 0; s < n; ++s) result.cumulative[s] += delta[s];

        TraceRecord rec;
        rec.delta = std::move(delta);
        rec.rMin = min_of_state_max(mdp, rewards);
        pi.source = "erb";
        pi.iteration = result.iterations;
        rec.policy = pi;
        result.trace.push(std::move(rec));
        ++result.iterations;

        pi = improve(mdp, rewards, &pi);
    }
    pi.source = "erb";
    pi.iteration = result.iterations;
    result.policy = std::move(pi);
    return result;
}

std::vector<Policy> visited_policies(const SolverTrace& trace, const Policy& final_policy) {
    std::vector<Policy> seq;
    auto add = [&](const Policy& p) {
        if (seq.empty() || !(seq.back() == p)) seq.push_back(p);
    };
    for (const auto& rec : trace.iterations) add(rec.policy);
    add(final_policy);
    return seq;
}

} // namespace rbal
