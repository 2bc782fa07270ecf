#include "rbal/generators.hpp"

#include "rbal/random.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

namespace rbal {

void MixParams::validate() const {
    for (double p : {execProb, randomProb, selfLoopProb})
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("mix probabilities must lie in [0,1]");
    if (!(std::abs(execProb + randomProb + selfLoopProb - 1.0) <= kProbabilityTol))
        throw InvalidArgument("mix probabilities must sum to 1");
}

namespace {

void require_gamma(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in (0,1)");
}

/// exp(-i) weights over d destinations, assigned in a random order, normalised.
std::vector<double> exponential_weights(std::size_t d, Rng& rng) {
    std::vector<std::size_t> rank(d);
    std::iota(rank.begin(), rank.end(), 0);
    for (std::size_t i = d; i > 1; --i) std::swap(rank[i - 1], rank[rng.index(i)]);
    std::vector<double> w(d);
    double total = 0.0;
    for (std::size_t i = 0; i < d; ++i) total += (w[i] = std::exp(-static_cast<double>(rank[i])));
    for (double& x : w) x /= total;
    return w;
}

/// Builds one action per destination of `state` using the mixing model.
void add_mixed_actions(std::vector<Action>& out, StateId state, const std::vector<StateId>& dests,
                       const std::vector<double>& rewards, const MixParams& mix, Rng& rng) {
    const auto weights = exponential_weights(dests.size(), rng);
    for (std::size_t j = 0; j < dests.size(); ++j) {
        std::map<StateId, double> mass;
        mass[dests[j]] += mix.execProb;
        for (std::size_t i = 0; i < dests.size(); ++i) mass[dests[i]] += mix.randomProb * weights[i];
        mass[state] += mix.selfLoopProb;
        Action a;
        a.state = state;
        a.reward = rewards[j];
        for (const auto& [to, p] : mass)
            if (p > 0.0) a.transitions.push_back({to, p});
        out.push_back(std::move(a));
    }
}

} // namespace

Mdp random_mdp(std::size_t n, std::uint64_t seed, const MixParams& mix, double gamma) {
    if (n < 2) throw InvalidArgument("random_mdp: n must be at least 2");
    mix.validate();
    require_gamma(gamma);
    Rng rng(derive_seed(seed, {0x72616e64ULL}));
    std::vector<Action> actions;
    for (StateId s = 0; s < n; ++s) {
        const std::size_t d = std::min<std::size_t>(1 + rng.index(4), n - 1);
        // partial Fisher-Yates over the other states
        std::vector<StateId> pool;
        pool.reserve(n - 1);
        for (StateId o = 0; o < n; ++o)
            if (o != s) pool.push_back(o);
        for (std::size_t i = 0; i < d; ++i) std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
        std::vector<StateId> dests(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(d));

        const double state_reward = rng.uniform(0.0, 3.0);
        std::vector<double> rewards(d);
        for (double& r : rewards) r = state_reward + rng.uniform(-0.5, 0.5);
        add_mixed_actions(actions, s, dests, rewards, mix, rng);
    }
    return Mdp(n, gamma, std::move(actions));
}

Mdp grid_world(std::size_t rows, std::size_t cols, const MixParams& mix, double gamma, std::uint64_t seed) {
    if (rows < 2 || cols < 2) throw InvalidArgument("grid_world: rows and cols must be at least 2");
    mix.validate();
    require_gamma(gamma);
    Rng rng(derive_seed(seed, {0x67726964ULL}));
    std::vector<Action> actions;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const StateId s = i * cols + j;
            std::vector<StateId> dests;
            if (i > 0) dests.push_back(s - cols);        // up
            if (j > 0) dests.push_back(s - 1);           // left
            if (i + 1 < rows) dests.push_back(s + cols); // down
            if (j + 1 < cols) dests.push_back(s + 1);    // right
            std::vector<double> rewards(dests.size());
            for (double& r : rewards) r = 0.1 * static_cast<double>(i + j) + rng.uniform(-0.05, 0.05);
            add_mixed_actions(actions, s, dests, rewards, mix, rng);
        }
    }
    return Mdp(rows * cols, gamma, std::move(actions));
}

Mdp cycle_mdp(std::size_t n, const MixParams& mix, double gamma, std::uint64_t seed) {
    if (n < 4) throw InvalidArgument("cycle_mdp: n must be at least 4");
    mix.validate();
    require_gamma(gamma);
    Rng rng(derive_seed(seed, {0x6379636cULL}));
    std::vector<Action> actions;
    for (StateId s = 0; s < n; ++s) {
        const std::vector<StateId> dests{(s + 1) % n, (s + 2) % n, (s + 3) % n};
        std::vector<double> rewards(dests.size());
        for (double& r : rewards) r = 0.1 * static_cast<double>(s) + rng.uniform(-0.05, 0.05);
        add_mixed_actions(actions, s, dests, rewards, mix, rng);
    }
    return Mdp(n, gamma, std::move(actions));
}

HierarchicalMdp hierarchical_mdp(std::size_t classes, std::size_t statesPerClass, std::uint64_t seed, double gamma) {
    if (classes < 1) throw InvalidArgument("hierarchical_mdp: classes must be at least 1");
    if (statesPerClass < 1) throw InvalidArgument("hierarchical_mdp: statesPerClass must be at least 1");
    require_gamma(gamma);
    Rng rng(derive_seed(seed, {0x68696572ULL}));
    const std::size_t n = classes * statesPerClass;
    HierarchicalMdp out;
    out.stateClass.resize(n);
    std::vector<Action> actions;
    for (StateId s = 0; s < n; ++s) {
        const std::size_t c = s / statesPerClass + 1;
        out.stateClass[s] = c;
        const std::size_t count = 1 + rng.index(4);
        const double state_reward = rng.uniform(0.0, 3.0);
        for (std::size_t k = 0; k < count; ++k) {
            Action a;
            a.state = s;
            a.reward = state_reward + rng.uniform(-0.5, 0.5);
            if (c == 1) {
                a.transitions.push_back({s, 1.0});
            } else {
                const double self = rng.uniform(0.1, 0.5);
                const std::size_t lower = (c - 1) * statesPerClass;
                const std::size_t below_begin = (c - 2) * statesPerClass;
                std::vector<StateId> dests{below_begin + rng.index(statesPerClass)};
                const std::size_t extra = rng.index(std::min<std::size_t>(3, lower));
                for (std::size_t e = 0; e < extra; ++e) {
                    const StateId d = rng.index(lower);
                    if (std::find(dests.begin(), dests.end(), d) == dests.end()) dests.push_back(d);
                }
                std::sort(dests.begin(), dests.end());
                const double share = (1.0 - self) / static_cast<double>(dests.size());
                for (StateId d : dests) a.transitions.push_back({d, share});
                a.transitions.push_back({s, self});
            }
            actions.push_back(std::move(a));
        }
    }
    out.mdp = Mdp(n, gamma, std::move(actions));
    return out;
}

bool respects_hierarchy(const HierarchicalMdp& h) {
    for (const Action& a : h.mdp.actions())
        for (const auto& tr : a.transitions)
            if (tr.to != a.state && tr.prob > 0.0 && h.stateClass[tr.to] >= h.stateClass[a.state]) return false;
    return true;
}

nlohmann::json generator_meta(const std::string& name, const nlohmann::json& params, std::uint64_t seed) {
    return {{"generator", name},
            {"params", params},
            {"seed", seed},
            {"random_weights", "exp(-i), i=0..d-1, seeded per-state order, normalised"}};
}

double average_shortest_path(const Mdp& mdp) {
    const std::size_t n = mdp.num_states();
    std::vector<std::vector<StateId>> adj(n);
    for (const Action& a : mdp.actions())
        for (const auto& tr : a.transitions)
            if (tr.prob > 0.0 && tr.to != a.state) adj[a.state].push_back(tr.to);
    double total = 0.0;
    std::size_t pairs = 0;
    std::vector<std::size_t> dist(n);
    for (StateId src = 0; src < n; ++src) {
        std::fill(dist.begin(), dist.end(), SIZE_MAX);
        dist[src] = 0;
        std::deque<StateId> queue{src};
        while (!queue.empty()) {
            const StateId u = queue.front();
            queue.pop_front();
            for (StateId v : adj[u]) {
                if (dist[v] == SIZE_MAX) {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (StateId t = 0; t < n; ++t) {
            if (t != src && dist[t] != SIZE_MAX) {
                total += static_cast<double>(dist[t]);
                ++pairs;
            }
        }
    }
    return pairs ? total / static_cast<double>(pairs) : 0.0;
}

} // namespace rbal
