#include "rbal/mdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace rbal {

double Action::prob_to(StateId s) const {
    for (const auto& tr : transitions)
        if (tr.to == s) return tr.prob;
    return 0.0;
}

Mdp::Mdp(std::size_t n, double gamma, std::vector<Action> actions)
    : n_(n), gamma_(gamma), actions_(std::move(actions)), state_actions_(n) {
    for (ActionId a = 0; a < actions_.size(); ++a) {
        // out-of-range owners are reported by validate_mdp, not indexed
        if (actions_[a].state < n_) state_actions_[actions_[a].state].push_back(a);
    }
}

std::vector<double> Mdp::rewards() const {
    std::vector<double> r(actions_.size());
    for (ActionId a = 0; a < actions_.size(); ++a) r[a] = actions_[a].reward;
    return r;
}

Mdp Mdp::with_rewards(std::span<const double> rewards) const {
    if (rewards.size() != actions_.size())
        throw InvalidArgument("with_rewards: expected " + std::to_string(actions_.size()) +
                              " rewards, got " + std::to_string(rewards.size()));
    Mdp out = *this;
    for (ActionId a = 0; a < actions_.size(); ++a) out.actions_[a].reward = rewards[a];
    return out;
}

std::uint64_t policy_hash(const Policy& policy) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (ActionId a : policy.choice) {
        auto x = static_cast<std::uint64_t>(a);
        for (int byte = 0; byte < 8; ++byte) {
            h ^= (x >> (8 * byte)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string policy_hash_hex(const Policy& policy) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(policy_hash(policy)));
    return buf;
}

std::string ValidationReport::to_string() const {
    if (ok()) return "ok";
    std::ostringstream os;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        const auto& v = violations[i];
        if (i) os << "; ";
        if (v.action) os << "action " << *v.action << ": ";
        else if (v.state) os << "state " << *v.state << ": ";
        os << v.message;
    }
    return os.str();
}

ValidationReport validate_mdp(const Mdp& mdp) {
    ValidationReport report;
    auto add = [&](std::string msg, std::optional<StateId> s, std::optional<ActionId> a) {
        report.violations.push_back({std::move(msg), s, a});
    };
    const std::size_t n = mdp.num_states();
    if (n == 0) add("state count must be at least 1", std::nullopt, std::nullopt);
    const double gamma = mdp.gamma();
    if (!(gamma > 0.0 && gamma < 1.0)) {
        std::ostringstream os;
        os << "gamma out of range (0,1): " << gamma;
        add(os.str(), std::nullopt, std::nullopt);
    }
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        const Action& act = mdp.action(a);
        if (act.state >= n) add("owning state " + std::to_string(act.state) + " out of range", std::nullopt, a);
        if (!std::isfinite(act.reward)) add("reward is not finite", act.state, a);
        if (act.transitions.empty()) add("no transitions", act.state, a);
        double sum = 0.0;
        std::vector<StateId> seen;
        for (const auto& tr : act.transitions) {
            if (tr.to >= n) add("destination " + std::to_string(tr.to) + " out of range", act.state, a);
            if (!(tr.prob >= 0.0 && tr.prob <= 1.0)) {
                std::ostringstream os;
                os << "probability " << tr.prob << " outside [0,1]";
                add(os.str(), act.state, a);
            }
            if (std::find(seen.begin(), seen.end(), tr.to) != seen.end())
                add("duplicate destination " + std::to_string(tr.to), act.state, a);
            seen.push_back(tr.to);
            sum += tr.prob;
        }
        if (!act.transitions.empty() && !(std::abs(sum - 1.0) <= kProbabilityTol)) {
            std::ostringstream os;
            os.precision(17);
            os << "probabilities sum " << sum << " != 1";
            add(os.str(), act.state, a);
        }
    }
    for (StateId s = 0; s < n; ++s)
        if (mdp.actions_of(s).empty()) add("state owns no action", s, std::nullopt);
    return report;
}

void require_valid(const Mdp& mdp) {
    auto report = validate_mdp(mdp);
    if (!report.ok()) throw InvalidArgument("invalid MDP: " + report.to_string());
}

bool is_valid_policy(const Mdp& mdp, const Policy& policy) {
    if (policy.choice.size() != mdp.num_states()) return false;
    for (StateId s = 0; s < policy.choice.size(); ++s) {
        const ActionId a = policy.choice[s];
        if (a >= mdp.num_actions() || mdp.action(a).state != s) return false;
    }
    return true;
}

void require_valid_policy(const Mdp& mdp, const Policy& policy) {
    if (!is_valid_policy(mdp, policy)) throw InvalidArgument("policy is not valid for this MDP");
}

namespace {

void require_length(const Mdp& mdp, std::span<const double> v, const char* what) {
    if (v.size() != mdp.num_states())
        throw InvalidArgument(std::string(what) + ": vector length " + std::to_string(v.size()) +
                              " does not match state count " + std::to_string(mdp.num_states()));
}

} // namespace

double action_backup(const Mdp& mdp, ActionId a, std::span<const double> v) {
    const Action& act = mdp.action(a);
    double acc = 0.0;
    for (const auto& tr : act.transitions) acc += tr.prob * v[tr.to];
    return act.reward + mdp.gamma() * acc;
}

ValueVector bellman_apply(const Mdp& mdp, const Policy& policy, std::span<const double> v) {
    require_length(mdp, v, "bellman_apply");
    require_valid_policy(mdp, policy);
    ValueVector out(mdp.num_states());
    for (StateId s = 0; s < out.size(); ++s) out[s] = action_backup(mdp, policy.choice[s], v);
    return out;
}

ValueVector evaluate_policy(const Mdp& mdp, const Policy& policy) {
    require_valid_policy(mdp, policy);
    const auto n = static_cast<Eigen::Index>(mdp.num_states());
    const double gamma = mdp.gamma();
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        const Action& act = mdp.action(policy.choice[static_cast<StateId>(s)]);
        rhs(s) = act.reward;
        for (const auto& tr : act.transitions) system(s, static_cast<Eigen::Index>(tr.to)) -= gamma * tr.prob;
    }
    Eigen::VectorXd v = system.partialPivLu().solve(rhs);
    const double residual = (system * v - rhs).lpNorm<Eigen::Infinity>();
    const double bound = 1e-10 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
    if (!(residual <= bound) || !v.allFinite()) {
        std::ostringstream os;
        os << "policy evaluation residual " << residual << " exceeds " << bound;
        throw NumericalFailure(os.str());
    }
    return ValueVector(v.data(), v.data() + n);
}

double advantage(const Mdp& mdp, std::span<const double> v, ActionId a) {
    require_length(mdp, v, "advantage");
    if (a >= mdp.num_actions()) throw InvalidArgument("advantage: invalid action id " + std::to_string(a));
    return action_backup(mdp, a, v) - v[mdp.action(a).state];
}

Policy greedy_policy(const Mdp& mdp, std::span<const double> v) {
    require_length(mdp, v, "greedy_policy");
    Policy pi;
    pi.source = "greedy";
    pi.choice.resize(mdp.num_states());
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        double best = -std::numeric_limits<double>::infinity();
        ActionId arg = 0;
        for (ActionId a : mdp.actions_of(s)) {
            const double adv = action_backup(mdp, a, v) - v[s];
            if (adv > best) {
                best = adv;
                arg = a;
            }
        }
        pi.choice[s] = arg;
    }
    return pi;
}

Policy argmax_reward_policy(const Mdp& mdp, std::span<const double> rewards) {
    if (rewards.size() != mdp.num_actions()) throw InvalidArgument("argmax_reward_policy: reward length mismatch");
    Policy pi;
    pi.source = "argmax-reward";
    pi.choice.resize(mdp.num_states());
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        double best = -std::numeric_limits<double>::infinity();
        ActionId arg = 0;
        for (ActionId a : mdp.actions_of(s)) {
            if (rewards[a] > best) {
                best = rewards[a];
                arg = a;
            }
        }
        pi.choice[s] = arg;
    }
    return pi;
}

Policy argmax_reward_policy(const Mdp& mdp) { return argmax_reward_policy(mdp, mdp.rewards()); }

double policy_suboptimality(const Mdp& mdp, const Policy& policy, std::span<const double> vStar) {
    require_length(mdp, vStar, "policy_suboptimality");
    return inf_distance(vStar, evaluate_policy(mdp, policy));
}

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double inf_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("inf_distance: length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace rbal
