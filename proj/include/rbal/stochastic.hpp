#pragma once

// Solvers that only see transitions through a generative model.
//
// Rewards are known. Each round every action is sampled k times; the
// empirical next-state frequencies replace P in the balancing update
//   r_{t+1}(a) = r_t(a) - R_t(st(a)) + gamma * sum_s' f_t(s'|a) R_t(s'),
// where R_t(s) is the largest current reward at s.

#include "rbal/mdp.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace rbal {

class Rng;

/// Hidden ground truth plus the master seed of every sample stream.
struct GenerativeModel {
    std::shared_ptr<const Mdp> mdp;
    std::uint64_t seed = 0;

    GenerativeModel(Mdp truth, std::uint64_t seed);

    /// One next-state draw for action a.
    StateId sample(ActionId a, Rng& rng) const;
};

/// Integer next-state counts per action, aligned with each action's
/// transition list. Merging sums counts, so pooled estimates are exact.
struct EmpiricalTransitions {
    std::vector<std::vector<std::uint64_t>> counts;
    std::uint64_t k = 0; ///< samples per action

    double frequency(ActionId a, std::size_t j) const { return static_cast<double>(counts[a][j]) / static_cast<double>(k); }
    /// sum_j f(j|a) * values[to_j]
    double expect(const Mdp& mdp, ActionId a, std::span<const double> values) const;
    void merge(const EmpiricalTransitions& other);

    friend bool operator==(const EmpiricalTransitions&, const EmpiricalTransitions&) = default;
};

/// k draws per action from the stream derive_seed(model.seed, {worker, round}).
/// Throws InvalidArgument when k == 0.
EmpiricalTransitions sample_empirical(const GenerativeModel& model, std::uint64_t k, std::uint64_t round,
                                      std::uint64_t worker = 0);

struct SampleSchedule {
    std::size_t workers = 1;
    std::uint64_t perWorker = 1;
    std::uint64_t total() const { return workers * perWorker; }
};

/// Sum of the workers' samples for one round. With `parallel` each worker
/// runs on its own thread; the result does not depend on completion order.
EmpiricalTransitions sample_round(const GenerativeModel& model, const SampleSchedule& schedule, std::uint64_t round,
                                  bool parallel = false);

struct StochasticRound {
    std::size_t round = 0;            ///< 0 is the state before any update
    std::optional<double> rMinOfMax;  ///< min over states of the largest reward
    std::optional<double> metricGap;  ///< filled when a reference policy is given
    std::int64_t wallclockNs = 0;     ///< since the start of the run
};

/// View handed to an observer after every round, including round 0.
struct RoundView {
    std::size_t round = 0;
    std::span<const double> rewards;
    double rMinOfMax = 0.0;
    const EmpiricalTransitions* counts = nullptr; ///< null at round 0 and with exact transitions
};

struct StochasticOptions {
    SampleSchedule schedule;
    std::size_t rounds = 0;                 ///< hard cap on updates
    std::optional<double> epsilon;          ///< stop once |R^m| / (1 - gamma) < epsilon
    bool exactTransitions = false;          ///< use the true P instead of samples
    bool parallelWorkers = false;
    bool shiftRewards = true;               ///< false requires nonpositive rewards
    std::optional<Policy> reference;        ///< optimal policy for the metric gap
    std::function<void(const RoundView&)> observer;
};

struct StochasticResult {
    Policy policy;                ///< per-state argmax of the final rewards
    std::vector<double> rewards;  ///< final balanced rewards (shifted scale)
    double shift = 0.0;
    double rMax = 0.0;            ///< -R^m after the shift, before any update
    std::vector<StochasticRound> trace;
    std::size_t rounds = 0;       ///< updates performed
    bool stoppedEarly = false;    ///< epsilon criterion met before the cap
};

/// Stochastic RB-S on the shifted rewards of the hidden MDP. Discount is the
/// hidden MDP's gamma.
StochasticResult stochastic_rbs(const GenerativeModel& model, const StochasticOptions& options);

/// K workers, each drawing kPerWorker samples per action per round on its own
/// thread; the coordinator sums counts and applies one update per round.
StochasticResult federated_rbs(const GenerativeModel& model, std::size_t K, std::uint64_t kPerWorker, std::size_t T,
                               StochasticOptions options = {});

struct SamplePlan {
    std::uint64_t k = 1;  ///< samples per action per round
    std::size_t t = 0;    ///< rounds
    double kRaw = 0.0;
    double tRaw = 0.0;
};

/// k = ceil(4 rMax^2 log(2m / (1 - tau)) / (eps^2 (1-gamma)^3 (1+gamma))), at least 1;
/// t = ceil(log(max(rMax, 1) / (eps (1-gamma))) / (1-gamma)), at least 0.
/// Throws InvalidArgument unless eps > 0, tau in (0,1), gamma in (0,1), rMax >= 0, m >= 1.
SamplePlan plan_samples(double epsilon, double tau, double gamma, double rMax, std::size_t m);

/// Learning rate as a function of the 0-based round.
using LearningRate = std::function<double(std::size_t)>;

/// 1 / (1 + (1 - gamma) t)
LearningRate default_learning_rate(double gamma);

struct QLearningResult {
    std::vector<double> q;
    Policy policy; ///< greedy in q
    std::vector<StochasticRound> trace;
};

/// Synchronous Q-learning from Q = 0 on the original rewards:
///   Q(a) <- (1 - alpha_t) Q(a) + alpha_t (r^a + gamma * mean over samples of max_b Q(b) at s').
/// Uses the same sample streams as stochastic_rbs.
QLearningResult synchronous_q_learning(const GenerativeModel& model, const SampleSchedule& schedule, std::size_t T,
                                       const LearningRate& rate, std::optional<Policy> reference = std::nullopt,
                                       bool exactTransitions = false);

/// max_s |r(pi*(s)) - r(pi(s))| on the given (original) rewards.
double metric_optimal_action_gap(const Mdp& mdp, const Policy& optimal, const Policy& implied);
/// Same, with pi* from policy iteration.
double metric_optimal_action_gap(const Mdp& mdp, const Policy& implied);

/// {seed, K, k, T, gamma, epsilon, tau, rMax}
nlohmann::json run_manifest(std::uint64_t seed, std::size_t K, std::uint64_t k, std::size_t T, double gamma,
                            std::optional<double> epsilon, std::optional<double> tau, double rMax);

/// CSV "round,rminofmax,metric_gap,wallclock_ns"; absent values are empty cells.
void write_stochastic_trace_csv(std::ostream& os, const std::vector<StochasticRound>& trace);

} // namespace rbal
