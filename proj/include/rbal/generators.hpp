#pragma once

// Seeded benchmark MDP families. Every action has an assigned destination;
// its transition distribution mixes three parts:
//   execProb     -> the assigned destination,
//   randomProb   -> spread over all destinations of the owning state with
//                   weights proportional to exp(-i), i = 0..d-1, in a seeded
//                   per-state order,
//   selfLoopProb -> the owning state.
// Destinations never include the owning state, so the self-loop probability
// of every action is exactly selfLoopProb.

#include "rbal/mdp.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace rbal {

struct MixParams {
    double execProb = 1.0;
    double randomProb = 0.0;
    double selfLoopProb = 0.0;

    /// Throws InvalidArgument unless each part is in [0,1] and they sum to 1.
    void validate() const;
};

/// Each state gets 1-4 distinct random destinations (other states) and one
/// action per destination. Reward = state reward U(0,3) + action noise U(-0.5,0.5).
Mdp random_mdp(std::size_t n, std::uint64_t seed, const MixParams& mix, double gamma);

/// Cells of a rows x cols grid; Up/Left/Down/Right where inside the grid.
/// Reward = 0.1 (row + col) + U(-0.05, 0.05).
Mdp grid_world(std::size_t rows, std::size_t cols, const MixParams& mix, double gamma, std::uint64_t seed);

/// Ring of n states; each state has actions to the 1st, 2nd and 3rd state ahead.
/// Reward = 0.1 * state index + U(-0.05, 0.05).
Mdp cycle_mdp(std::size_t n, const MixParams& mix, double gamma, std::uint64_t seed);

struct HierarchicalMdp {
    Mdp mdp;
    std::vector<std::size_t> stateClass; ///< 1-based class of every state
};

/// States partitioned into classes 1..C. Class-1 states own only pure
/// self-loops; every other action keeps self-loop mass U[0.1, 0.5] and sends
/// the rest uniformly to 1-3 states of strictly lower classes, at least one
/// of them in the class directly below.
HierarchicalMdp hierarchical_mdp(std::size_t classes, std::size_t statesPerClass, std::uint64_t seed, double gamma);

/// True iff every transition other than a self-loop goes to a strictly lower class.
bool respects_hierarchy(const HierarchicalMdp& h);

/// {"generator": name, "params": params, "seed": seed, "random_weights": convention}
nlohmann::json generator_meta(const std::string& name, const nlohmann::json& params, std::uint64_t seed);

/// Shortest-path hop counts (ignoring probabilities) averaged over all ordered
/// reachable pairs of distinct states.
double average_shortest_path(const Mdp& mdp);

} // namespace rbal
