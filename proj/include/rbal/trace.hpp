#pragma once

#include "rbal/mdp.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rbal {

struct TraceRecord {
    std::size_t iteration = 0; // 1-based
    DeltaVector delta;         // increment applied this iteration (value change for VI)
    double rMin = 0.0;         // min over states of the per-state max reward after the update
    Policy policy;
    std::optional<double> boundEpsilon;
    std::optional<double> corollaryBound;
    std::optional<std::size_t> maxAliveActions;
    std::optional<double> suboptimality;
};

struct SolverTrace {
    std::string solver;
    double tolerance = 0.0;
    std::uint64_t seed = 0;
    std::vector<TraceRecord> iterations;

    std::size_t size() const { return iterations.size(); }
    bool empty() const { return iterations.empty(); }
    /// Appends a record, assigning the next contiguous iteration index.
    TraceRecord& push(TraceRecord record);
};

/// Fills `suboptimality` on every record against the supplied optimal values.
void annotate_suboptimality(SolverTrace& trace, const Mdp& mdp, const ValueVector& vStar);

/// CSV "iter,rmin,delta_inf_norm,policy_hash,suboptimality"; when any record
/// carries balancing bounds the columns
/// "epsilon_bound_thm6,corollary_bound,max_alive_actions" are appended.
void write_trace_csv(std::ostream& os, const SolverTrace& trace);

} // namespace rbal
