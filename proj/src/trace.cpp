#include "rbal/trace.hpp"

#include <map>
#include <ostream>

namespace rbal {

TraceRecord& SolverTrace::push(TraceRecord record) {
    record.iteration = iterations.size() + 1;
    iterations.push_back(std::move(record));
    return iterations.back();
}

void annotate_suboptimality(SolverTrace& trace, const Mdp& mdp, const ValueVector& vStar) {
    std::map<std::uint64_t, double> cache;
    for (auto& rec : trace.iterations) {
        const auto h = policy_hash(rec.policy);
        auto it = cache.find(h);
        if (it == cache.end()) it = cache.emplace(h, policy_suboptimality(mdp, rec.policy, vStar)).first;
        rec.suboptimality = it->second;
    }
}

namespace {

template <class T>
void put_optional(std::ostream& os, const std::optional<T>& v) {
    if (v) os << *v;
}

} // namespace

void write_trace_csv(std::ostream& os, const SolverTrace& trace) {
    bool balancing = false;
    for (const auto& rec : trace.iterations)
        balancing = balancing || rec.boundEpsilon || rec.corollaryBound || rec.maxAliveActions;

    const auto old_precision = os.precision(17);
    os << "iter,rmin,delta_inf_norm,policy_hash,suboptimality";
    if (balancing) os << ",epsilon_bound_thm6,corollary_bound,max_alive_actions";
    os << '\n';
    for (const auto& rec : trace.iterations) {
        os << rec.iteration << ',' << rec.rMin << ',' << inf_norm(rec.delta) << ',' << policy_hash_hex(rec.policy)
           << ',';
        put_optional(os, rec.suboptimality);
        if (balancing) {
            os << ',';
            put_optional(os, rec.boundEpsilon);
            os << ',';
            put_optional(os, rec.corollaryBound);
            os << ',';
            put_optional(os, rec.maxAliveActions);
        }
        os << '\n';
    }
    os.precision(old_precision);
}

} // namespace rbal
