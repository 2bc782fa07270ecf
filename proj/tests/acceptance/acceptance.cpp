// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "oracles.hpp"

#include "rbal/exact_solvers.hpp"
#include "rbal/generators.hpp"
#include "rbal/geometry.hpp"
#include "rbal/harness.hpp"
#include "rbal/random.hpp"
#include "rbal/reward_balancing.hpp"
#include "rbal/stochastic.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

using namespace rbal;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

Policy random_policy(const Mdp& m, std::mt19937_64& g) {
    Policy p;
    for (StateId s = 0; s < m.num_states(); ++s) {
        const auto ids = m.actions_of(s);
        p.choice.push_back(ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(g)]);
    }
    return p;
}

Outcome advantage_preservation() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Mdp m = oracle::random_small(seed);
        std::mt19937_64 g(seed);
        std::uniform_real_distribution<double> D(-10.0, 10.0);
        std::vector<double> delta(m.num_states());
        for (auto& d : delta) d = D(g);
        const Mdp t = apply_delta(m, delta);
        for (int i = 0; i < 50; ++i) {
            const Policy pi = random_policy(m, g);
            const ActionId a = std::uniform_int_distribution<std::size_t>(0, m.num_actions() - 1)(g);
            const double before = advantage(m, evaluate_policy(m, pi), a);
            const double after = advantage(t, evaluate_policy(t, pi), a);
            worst = std::max(worst, std::abs(before - after));
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-9 && secs < 5.0, fmt("max |d adv| = %.3g, %.2fs", worst, secs)};
}

Outcome normalization() {
    const auto t0 = Clock::now();
    double worstMax = 0.0, worstV = 0.0;
    int policyMismatch = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Mdp m = oracle::random_small(seed);
        const auto norm = normalize(m);
        for (StateId s = 0; s < m.num_states(); ++s) {
            double mx = -INFINITY;
            for (ActionId a : norm.mdp.actions_of(s)) mx = std::max(mx, norm.mdp.action(a).reward);
            worstMax = std::max(worstMax, std::abs(mx));
        }
        const Policy zero = argmax_reward_policy(norm.mdp);
        if (!(zero == policy_iteration(m).policy)) ++policyMismatch;
        worstV = std::max(worstV, inf_norm(evaluate_policy(norm.mdp, zero)));
    }
    const double secs = seconds_since(t0);
    std::ostringstream os;
    os << "max |state max| = " << worstMax << ", max |V*| = " << worstV << ", policy mismatches = " << policyMismatch
       << ", " << fmt("%.2fs", secs);
    return {worstMax <= 1e-9 && worstV <= 1e-9 && policyMismatch == 0 && secs < 5.0, os.str()};
}

Outcome selfloop_round_trip() {
    double worst = 0.0;
    std::size_t pairs = 0;
    for (std::uint64_t seed = 0; pairs < 500; ++seed) {
        const Mdp m = oracle::random_small(seed);
        std::mt19937_64 g(seed ^ 0xabcdef);
        for (int i = 0; i < 5; ++i, ++pairs) {
            const Policy pi = random_policy(m, g);
            const auto recovered = selfloop_intersection_values(hyperplane_normal(m, pi), m.gamma());
            worst = std::max(worst, inf_distance(recovered, evaluate_policy(m, pi)));
        }
    }
    return {worst <= 1e-9, fmt("%g pairs, max error %.3g", double(pairs), worst)};
}

Outcome hierarchical() {
    int bad = 0;
    std::size_t worstExcess = 0;
    for (std::size_t C = 1; C <= 6; ++C) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            SafeRewardBalancer rb(hierarchical_mdp(C, 4, seed, 0.9).mdp);
            std::size_t t = 0;
            while (std::abs(rb.rmin()) > 1e-12 && t < C + 10) {
                rb.step();
                ++t;
            }
            if (t > C) {
                ++bad;
                worstExcess = std::max(worstExcess, t - C);
            }
        }
    }
    return {bad == 0, fmt("120 runs, %g over budget (worst excess %g)", bad, double(worstExcess))};
}

/// Runs RB-S on the mixed self-loop corpus and calls `check` at every t.
template <class F>
void mixed_corpus(F check) {
    for (double gamma : {0.8, 0.9, 0.95}) {
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const Mdp m = oracle::mixed_self_loops(seed, 8, gamma);
            const auto opt = policy_iteration(m);
            SafeRewardBalancer rb(m);
            for (std::size_t t = 0; t <= 300; ++t) {
                check(m, opt, rb, t);
                if (std::abs(rb.rmin()) / (1.0 - gamma) < 1e-10) break;
                rb.step();
            }
        }
    }
}

Outcome rate_bound() {
    std::size_t checks = 0, violations = 0;
    double slack = INFINITY;
    RbBoundParams params;
    mixed_corpus([&](const Mdp& m, const PiResult& opt, const SafeRewardBalancer& rb, std::size_t t) {
        if (t == 0) params = rbs_bound_params(rb.mdp());
        const double gap = policy_suboptimality(m, rb.reward_policy(), opt.values);
        const double bound = rbs_epsilon_bound(params, m.gamma(), t);
        ++checks;
        if (gap > bound + 1e-12) ++violations;
        slack = std::min(slack, bound - gap);
    });
    std::ostringstream os;
    os << checks << " iterates, " << violations << " violations, min slack " << slack;
    return {violations == 0, os.str()};
}

Outcome reward_advantage() {
    std::size_t checks = 0, violations = 0;
    double ratio = 0.0;
    mixed_corpus([&](const Mdp& m, const PiResult& opt, const SafeRewardBalancer& rb, std::size_t t) {
        const double bound = reward_advantage_bound(rb.r_max(), m.gamma(), t);
        for (ActionId a = 0; a < m.num_actions(); ++a) {
            const double err = std::abs(rb.rewards()[a] - advantage(m, opt.values, a));
            ++checks;
            if (err > bound + 1e-12) ++violations;
            if (bound > 0) ratio = std::max(ratio, err / bound);
        }
    });
    std::ostringstream os;
    os << checks << " action checks, " << violations << " violations, max error/bound " << ratio;
    return {violations == 0, os.str()};
}

Outcome erb_matches_pi() {
    int mismatches = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Mdp m = oracle::random_small(seed);
        const auto erb = exact_reward_balancing(m);
        const auto pi = policy_iteration(m);
        if (visited_policies(erb.trace, erb.policy) != visited_policies(pi.trace, pi.policy)) ++mismatches;
    }
    return {mismatches == 0, fmt("100 MDPs, %g sequence mismatches", mismatches)};
}

Outcome diagonal_free() {
    int selection = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Mdp m =
            oracle::random_small(seed, {.minStates = 3, .maxStates = 10, .diagonalFree = true, .nonpositive = true});
        const auto rep = check_diagonal_free_equivalence(m, 30);
        if (!rep.selections_identical()) ++selection;
        worst = std::max(worst, rep.max_delta_error());
    }
    return {selection == 0 && worst <= 1e-9, fmt("%g selection mismatches, max |D + V| = %.3g", selection, worst)};
}

Outcome filtering() {
    int mismatches = 0, droppedOptimal = 0, inexact = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Mdp base = oracle::random_small(seed);
        std::mt19937_64 g(seed + 7);
        std::uniform_real_distribution<double> J(-1e-3, 1e-3);
        auto r = base.rewards();
        for (auto& x : r) x += J(g);
        const Mdp m = base.with_rewards(r);
        const auto pi = policy_iteration(m).policy;
        const auto res = rbs_with_filtering(m);
        if (!res.exact) ++inexact;
        if (!(res.policy == pi)) ++mismatches;
        for (const auto& [a, t] : res.removed)
            if (pi.choice[m.action(a).state] == a) ++droppedOptimal;
    }
    return {mismatches == 0 && droppedOptimal == 0 && inexact == 0,
            fmt("%g policy mismatches, %g optimal actions filtered, %g inexact", mismatches, droppedOptimal, inexact)};
}

Outcome stochastic_invariants() {
    std::size_t positive = 0, contraction = 0, rounds = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Mdp m = random_mdp(20, seed, {0.4, 0.4, 0.2}, 0.9);
        StochasticOptions o;
        o.schedule = {1, 500};
        o.rounds = 60;
        double prev = 0.0;
        o.observer = [&](const RoundView& v) {
            for (double r : v.rewards)
                if (r > 1e-12) ++positive;
            if (v.round > 0 && v.rMinOfMax < m.gamma() * prev - 1e-12) ++contraction;
            prev = v.rMinOfMax;
            ++rounds;
        };
        stochastic_rbs(GenerativeModel(m, seed), o);
    }
    std::ostringstream os;
    os << rounds << " rounds, " << positive << " positive rewards, " << contraction << " contraction violations";
    return {positive == 0 && contraction == 0, os.str()};
}

Outcome sample_size() {
    const auto t0 = Clock::now();
    const double eps = 0.2, tau = 0.2, gamma = 0.8;
    const Mdp m = random_mdp(20, 2024, {0.4, 0.4, 0.2}, gamma);
    const auto opt = policy_iteration(m);
    const double rMax = -SafeRewardBalancer(m).rmin();
    const auto plan = plan_samples(eps, tau, gamma, rMax, m.num_actions());
    int good = 0;
    const int trials = 50;
    for (int i = 0; i < trials; ++i) {
        StochasticOptions o;
        o.schedule = {1, plan.k};
        o.rounds = plan.t;
        o.epsilon = eps;
        const auto res = stochastic_rbs(GenerativeModel(m, derive_seed(77, {std::uint64_t(i)})), o);
        if (policy_suboptimality(m, res.policy, opt.values) < eps) ++good;
    }
    const double secs = seconds_since(t0);
    std::ostringstream os;
    os << "k = " << plan.k << ", t = " << plan.t << ", " << good << "/" << trials << " epsilon-optimal, "
       << fmt("%.2fs", secs);
    return {good >= 40 && secs < 120.0, os.str()};
}

Outcome federated() {
    const GenerativeModel model(random_mdp(20, 5, {0.3, 0.5, 0.2}, 0.9), 31);
    const std::size_t T = 40;
    int countMismatch = 0;
    for (std::uint64_t r = 0; r < T; ++r)
        if (!(sample_round(model, {4, 25}, r, true) == sample_round(model, {4, 25}, r, false))) ++countMismatch;
    StochasticOptions single;
    single.schedule = {4, 25}; // one thread, 100 samples per action in the pooled seed order
    single.rounds = T;
    const auto a = federated_rbs(model, 4, 25, T);
    const auto b = stochastic_rbs(model, single);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rewards.size(); ++i) worst = std::max(worst, std::abs(a.rewards[i] - b.rewards[i]));
    return {countMismatch == 0 && worst <= 1e-12,
            fmt("%g rounds with count mismatch, max reward difference %.3g", countMismatch, worst)};
}

ExperimentConfig known(const std::string& name) {
    ExperimentConfig c;
    c.name = name;
    c.kind = "grid";
    c.reps = 20;
    c.seed = 1;
    c.epsilon = 0.1;
    c.n = 100;
    c.gamma = 0.95;
    return c;
}

Outcome self_loop_sweep() {
    const auto t0 = Clock::now();
    auto c = known("exec-prob");
    c.xs = {1.0, 0.8, 0.6, 0.4, 0.2}; // self-loop 0, 0.2, ..., 0.8
    const auto res = run_experiment(c);
    const auto rbs = res.series("rbs");
    bool decreasing = true;
    std::ostringstream os;
    os << "RB-S means";
    for (std::size_t i = 0; i < rbs.size(); ++i) {
        os << ' ' << rbs[i].mean;
        if (i > 0 && !(rbs[i].mean < rbs[i - 1].mean)) decreasing = false;
    }
    // per-rep agreement at self-loop 0: rows are ordered by x then algo
    std::vector<double> rbs0, vi0;
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        if (res.rows[i].x != 1.0) continue;
        (res.rows[i].algo == "rbs" ? rbs0 : vi0) = res.samples[i];
    }
    const bool agree = !rbs0.empty() && rbs0 == vi0;
    const double secs = seconds_since(t0);
    os << "; self-loop 0 counts " << (agree ? "identical" : "differ") << " (VI mean " << mean_of(vi0) << "), "
       << fmt("%.2fs", secs);
    return {decreasing && agree && secs < 120.0, os.str()};
}

Outcome gamma_and_size() {
    double worst = 0.0;
    for (const std::string name : {"gamma-sweep", "size-sweep"}) {
        auto c = known(name);
        if (name == "gamma-sweep") c.n = 100;
        if (name == "size-sweep") c.gamma = 0.95;
        const auto res = run_experiment(c);
        const auto rbs = res.series("rbs");
        const auto vi = res.series("vi");
        for (std::size_t i = 0; i < rbs.size(); ++i) worst = std::max(worst, std::abs(rbs[i].mean - vi[i].mean));
    }
    return {worst <= 1.0, fmt("max |mean RB-S - mean VI| = %g iterations", worst)};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"advantage preservation", advantage_preservation},
        {"normalization", normalization},
        {"self-loop value round trip", selfloop_round_trip},
        {"hierarchical finite convergence", hierarchical},
        {"RB-S suboptimality rate bound", rate_bound},
        {"reward to advantage bound", reward_advantage},
        {"exact balancing visits the PI sequence", erb_matches_pi},
        {"diagonal-free RB-S and VI equivalence", diagonal_free},
        {"action filtering recovers the optimum", filtering},
        {"stochastic invariants", stochastic_invariants},
        {"planned sample size, desk scale", sample_size},
        {"federated pooling identity", federated},
        {"self-loop sweep on grid-world", self_loop_sweep},
        {"gamma and size sweeps", gamma_and_size},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS " : "FAIL ") << i + 1 << ". " << criteria[i].first << ": " << o.detail << std::endl;
    }
    std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
