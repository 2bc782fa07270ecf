#pragma once

// Experiment runner behind `rbal experiment`. Every repetition derives its
// own seed from (master seed, x index, rep), reps run on a thread pool, and
// results are aggregated in rep order, so output does not depend on scheduling.

#include "rbal/generators.hpp"
#include "rbal/mdp.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rbal {

struct IterationsToEpsilon {
    std::size_t rbs = 0;
    std::size_t vi = 0;
};

/// How iterations-to-epsilon is counted.
///   Certificate: updates until the algorithm can certify an epsilon-optimal
///     policy by itself, i.e. |R^m_t| / (1 - gamma) < epsilon. For VI on the
///     reward-shifted MDP from V0 = 0 the same quantity is
///     ||V_{t+1} - V_t||_inf / (1 - gamma), so both share one stopping rule.
///   Oracle: first t at which the current policy is epsilon-optimal, checked
///     against policy iteration.
enum class ItersMetric { Certificate, Oracle };

/// RB-S reports its argmax-reward policy, VI runs on the reward-shifted MDP
/// from V0 = 0 and reports its greedy policy. Throws NumericalFailure if
/// either exceeds `cap`.
IterationsToEpsilon iterations_to_epsilon(const Mdp& mdp, double epsilon, ItersMetric metric = ItersMetric::Certificate,
                                          std::size_t cap = 1000000);

/// Builds one instance of a benchmark family; kind is grid, random or cycle.
/// For grid, n is rounded to a rows x cols rectangle with rows = floor(sqrt n).
Mdp make_instance(const std::string& kind, std::size_t n, const MixParams& mix, double gamma, std::uint64_t seed);

struct ExperimentConfig {
    std::string name;                ///< exec-prob | random-prob | gamma-sweep | size-sweep | stoch-random | stoch-grid | stoch-ring
    std::string kind = "grid";       ///< family for the known-MDP experiments
    std::size_t reps = 20;
    std::uint64_t seed = 1;
    double epsilon = 0.1;
    ItersMetric metric = ItersMetric::Certificate;
    bool paperScale = false;
    std::size_t threads = 0;         ///< 0: hardware concurrency
    std::optional<std::size_t> n;    ///< instance size override
    std::optional<double> gamma;     ///< discount override
    std::vector<double> xs;          ///< x-axis override
};

struct SeriesPoint {
    double x = 0.0;
    std::string algo;
    double mean = 0.0;
    double std = 0.0; ///< sample standard deviation; 0 for a single rep
    std::size_t reps = 0;
};

struct ExperimentResult {
    std::string name;
    std::string xLabel;
    std::string yLabel;
    std::vector<SeriesPoint> rows; ///< ordered by x, then algo
    /// Raw per-rep values, same order as rows.
    std::vector<std::vector<double>> samples;

    /// Rows of one algorithm, in x order.
    std::vector<SeriesPoint> series(const std::string& algo) const;
};

/// Names accepted by run_experiment.
const std::vector<std::string>& experiment_names();

/// Throws InvalidArgument for an unknown name or kind.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Header "x,algo,mean,std,reps".
void write_experiment_csv(std::ostream& os, const ExperimentResult& result);

/// Self-contained SVG line chart: one polyline per algorithm, mean +- std band.
void write_experiment_svg(std::ostream& os, const ExperimentResult& result);

double mean_of(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);

} // namespace rbal
