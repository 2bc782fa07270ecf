#include "rbal/stochastic.hpp"

#include "rbal/exact_solvers.hpp"
#include "rbal/random.hpp"
#include "rbal/reward_balancing.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

namespace rbal {

GenerativeModel::GenerativeModel(Mdp truth, std::uint64_t seed_)
    : mdp(std::make_shared<const Mdp>(std::move(truth))), seed(seed_) {
    require_valid(*mdp);
}

StateId GenerativeModel::sample(ActionId a, Rng& rng) const {
    const auto& trs = mdp->action(a).transitions;
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& tr : trs) {
        acc += tr.prob;
        if (u < acc) return tr.to;
    }
    // rounding left a sliver above the last cumulative value
    for (auto it = trs.rbegin(); it != trs.rend(); ++it)
        if (it->prob > 0.0) return it->to;
    return trs.back().to;
}

double EmpiricalTransitions::expect(const Mdp& mdp, ActionId a, std::span<const double> values) const {
    const auto& trs = mdp.action(a).transitions;
    double sum = 0.0;
    for (std::size_t j = 0; j < trs.size(); ++j) sum += static_cast<double>(counts[a][j]) * values[trs[j].to];
    return sum / static_cast<double>(k);
}

void EmpiricalTransitions::merge(const EmpiricalTransitions& other) {
    if (counts.empty()) {
        *this = other;
        return;
    }
    if (counts.size() != other.counts.size()) throw InvalidArgument("EmpiricalTransitions::merge: shape mismatch");
    for (std::size_t a = 0; a < counts.size(); ++a) {
        if (counts[a].size() != other.counts[a].size())
            throw InvalidArgument("EmpiricalTransitions::merge: shape mismatch");
        for (std::size_t j = 0; j < counts[a].size(); ++j) counts[a][j] += other.counts[a][j];
    }
    k += other.k;
}

EmpiricalTransitions sample_empirical(const GenerativeModel& model, std::uint64_t k, std::uint64_t round,
                                      std::uint64_t worker) {
    if (k == 0) throw InvalidArgument("sample_empirical: k must be at least 1");
    Rng rng(derive_seed(model.seed, {worker, round}));
    const Mdp& mdp = *model.mdp;
    EmpiricalTransitions out;
    out.k = k;
    out.counts.resize(mdp.num_actions());
    // k i.i.d. categorical draws, realised as a multinomial through
    // conditional binomials so the cost does not grow with k
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        const auto& trs = mdp.action(a).transitions;
        auto& row = out.counts[a];
        row.assign(trs.size(), 0);
        std::uint64_t left = k;
        double mass = 1.0;
        for (std::size_t j = 0; j + 1 < trs.size() && left > 0; ++j) {
            const double p = mass > 0.0 ? std::clamp(trs[j].prob / mass, 0.0, 1.0) : 1.0;
            std::binomial_distribution<std::uint64_t> draw(left, p);
            row[j] = draw(rng.engine());
            left -= row[j];
            mass -= trs[j].prob;
        }
        row.back() += left;
    }
    return out;
}

EmpiricalTransitions sample_round(const GenerativeModel& model, const SampleSchedule& schedule, std::uint64_t round,
                                  bool parallel) {
    if (schedule.workers == 0) throw InvalidArgument("sample_round: at least one worker required");
    std::vector<EmpiricalTransitions> parts(schedule.workers);
    if (parallel && schedule.workers > 1) {
        std::vector<std::thread> pool;
        pool.reserve(schedule.workers);
        for (std::size_t w = 0; w < schedule.workers; ++w)
            pool.emplace_back([&, w] { parts[w] = sample_empirical(model, schedule.perWorker, round, w); });
        for (auto& th : pool) th.join();
    } else {
        for (std::size_t w = 0; w < schedule.workers; ++w)
            parts[w] = sample_empirical(model, schedule.perWorker, round, w);
    }
    EmpiricalTransitions total;
    for (const auto& p : parts) total.merge(p);
    return total;
}

namespace {

std::vector<double> per_state_max(const Mdp& mdp, std::span<const double> rewards) {
    std::vector<double> best(mdp.num_states(), -std::numeric_limits<double>::infinity());
    for (ActionId a = 0; a < mdp.num_actions(); ++a)
        best[mdp.action(a).state] = std::max(best[mdp.action(a).state], rewards[a]);
    return best;
}

std::int64_t elapsed_ns(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

StochasticResult stochastic_rbs(const GenerativeModel& model, const StochasticOptions& options) {
    if (options.epsilon && !(*options.epsilon > 0.0)) throw InvalidArgument("stochastic_rbs: epsilon must be positive");
    const auto start = std::chrono::steady_clock::now();
    const Mdp& truth = *model.mdp;
    const double gamma = truth.gamma();

    StochasticResult res;
    if (options.shiftRewards) {
        auto [shifted, shift] = shift_rewards_nonpositive(truth);
        res.shift = shift;
        res.rewards = shifted.rewards();
    } else {
        res.rewards = truth.rewards();
        if (std::any_of(res.rewards.begin(), res.rewards.end(), [](double r) { return r > 0.0; }))
            throw InvalidArgument("stochastic_rbs: unshifted rewards must be nonpositive");
    }
    std::vector<double> R = per_state_max(truth, res.rewards);
    double rmin = *std::min_element(R.begin(), R.end());
    res.rMax = -rmin;

    auto record = [&](std::size_t round, const EmpiricalTransitions* counts) {
        StochasticRound row;
        row.round = round;
        row.rMinOfMax = rmin;
        if (options.reference)
            row.metricGap = metric_optimal_action_gap(truth, *options.reference, argmax_reward_policy(truth, res.rewards));
        row.wallclockNs = elapsed_ns(start);
        res.trace.push_back(row);
        if (options.observer) options.observer(RoundView{round, res.rewards, rmin, counts});
    };
    auto done = [&] { return options.epsilon && std::abs(rmin) / (1.0 - gamma) < *options.epsilon; };

    record(0, nullptr);
    std::vector<double> next(res.rewards.size());
    while (res.rounds < options.rounds && !done()) {
        const std::size_t round = res.rounds + 1;
        std::optional<EmpiricalTransitions> est;
        if (!options.exactTransitions) est = sample_round(model, options.schedule, round, options.parallelWorkers);
        for (ActionId a = 0; a < truth.num_actions(); ++a) {
            const double pr = est ? est->expect(truth, a, R) : [&] {
                double s = 0.0;
                for (const auto& tr : truth.action(a).transitions) s += tr.prob * R[tr.to];
                return s;
            }();
            next[a] = res.rewards[a] - R[truth.action(a).state] + gamma * pr;
        }
        res.rewards.swap(next);
        R = per_state_max(truth, res.rewards);
        rmin = *std::min_element(R.begin(), R.end());
        res.rounds = round;
        record(round, est ? &*est : nullptr);
    }
    res.stoppedEarly = done() && res.rounds < options.rounds;
    res.policy = argmax_reward_policy(truth, res.rewards);
    res.policy.source = "stochastic-rbs";
    res.policy.iteration = res.rounds;
    return res;
}

StochasticResult federated_rbs(const GenerativeModel& model, std::size_t K, std::uint64_t kPerWorker, std::size_t T,
                               StochasticOptions options) {
    if (K == 0) throw InvalidArgument("federated_rbs: K must be at least 1");
    options.schedule = {K, kPerWorker};
    options.rounds = T;
    options.parallelWorkers = true;
    auto res = stochastic_rbs(model, options);
    res.policy.source = "federated-rbs";
    return res;
}

SamplePlan plan_samples(double epsilon, double tau, double gamma, double rMax, std::size_t m) {
    if (!(epsilon > 0.0)) throw InvalidArgument("plan_samples: epsilon must be positive");
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("plan_samples: tau must lie in (0,1)");
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("plan_samples: gamma must lie in (0,1)");
    if (!(rMax >= 0.0)) throw InvalidArgument("plan_samples: rMax must be nonnegative");
    if (m == 0) throw InvalidArgument("plan_samples: m must be positive");
    const double c = 1.0 - gamma;
    SamplePlan plan;
    plan.kRaw = 4.0 * rMax * rMax * std::log(2.0 * static_cast<double>(m) / (1.0 - tau)) /
                (epsilon * epsilon * c * c * c * (1.0 + gamma));
    plan.tRaw = std::log(std::max(rMax, 1.0) / (epsilon * c)) / c;
    plan.k = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(plan.kRaw)));
    plan.t = plan.tRaw > 0.0 ? static_cast<std::size_t>(std::ceil(plan.tRaw)) : 0;
    return plan;
}

LearningRate default_learning_rate(double gamma) {
    return [gamma](std::size_t t) { return 1.0 / (1.0 + (1.0 - gamma) * static_cast<double>(t)); };
}

QLearningResult synchronous_q_learning(const GenerativeModel& model, const SampleSchedule& schedule, std::size_t T,
                                       const LearningRate& rate, std::optional<Policy> reference,
                                       bool exactTransitions) {
    const auto start = std::chrono::steady_clock::now();
    const Mdp& truth = *model.mdp;
    const double gamma = truth.gamma();
    QLearningResult res;
    res.q.assign(truth.num_actions(), 0.0);

    auto record = [&](std::size_t round) {
        StochasticRound row;
        row.round = round;
        if (reference) row.metricGap = metric_optimal_action_gap(truth, *reference, argmax_reward_policy(truth, res.q));
        row.wallclockNs = elapsed_ns(start);
        res.trace.push_back(row);
    };

    record(0);
    std::vector<double> next(res.q.size());
    for (std::size_t t = 0; t < T; ++t) {
        const double alpha = rate(t);
        if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("synchronous_q_learning: learning rate outside (0,1]");
        const std::vector<double> vmax = per_state_max(truth, res.q);
        std::optional<EmpiricalTransitions> est;
        if (!exactTransitions) est = sample_round(model, schedule, t + 1);
        for (ActionId a = 0; a < truth.num_actions(); ++a) {
            double ev = 0.0;
            if (est) {
                ev = est->expect(truth, a, vmax);
            } else {
                for (const auto& tr : truth.action(a).transitions) ev += tr.prob * vmax[tr.to];
            }
            next[a] = (1.0 - alpha) * res.q[a] + alpha * (truth.action(a).reward + gamma * ev);
        }
        res.q.swap(next);
        record(t + 1);
    }
    // argmax over Q-values per state is the greedy policy
    res.policy = argmax_reward_policy(truth, res.q);
    res.policy.source = "q-learning";
    res.policy.iteration = T;
    return res;
}

double metric_optimal_action_gap(const Mdp& mdp, const Policy& optimal, const Policy& implied) {
    require_valid_policy(mdp, optimal);
    require_valid_policy(mdp, implied);
    double gap = 0.0;
    for (StateId s = 0; s < mdp.num_states(); ++s)
        gap = std::max(gap, std::abs(mdp.action(optimal.choice[s]).reward - mdp.action(implied.choice[s]).reward));
    return gap;
}

double metric_optimal_action_gap(const Mdp& mdp, const Policy& implied) {
    return metric_optimal_action_gap(mdp, policy_iteration(mdp).policy, implied);
}

nlohmann::json run_manifest(std::uint64_t seed, std::size_t K, std::uint64_t k, std::size_t T, double gamma,
                            std::optional<double> epsilon, std::optional<double> tau, double rMax) {
    nlohmann::json j{{"seed", seed}, {"K", K}, {"k", k}, {"T", T}, {"gamma", gamma}, {"rMax", rMax}};
    j["epsilon"] = epsilon ? nlohmann::json(*epsilon) : nlohmann::json(nullptr);
    j["tau"] = tau ? nlohmann::json(*tau) : nlohmann::json(nullptr);
    return j;
}

void write_stochastic_trace_csv(std::ostream& os, const std::vector<StochasticRound>& trace) {
    const auto old = os.precision(17);
    os << "round,rminofmax,metric_gap,wallclock_ns\n";
    for (const auto& row : trace) {
        os << row.round << ',';
        if (row.rMinOfMax) os << *row.rMinOfMax;
        os << ',';
        if (row.metricGap) os << *row.metricGap;
        os << ',' << row.wallclockNs << '\n';
    }
    os.precision(old);
}

} // namespace rbal
