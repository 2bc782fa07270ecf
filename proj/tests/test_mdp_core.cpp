#include "oracles.hpp"

#include "rbal/exact_solvers.hpp"
#include "rbal/mdp.hpp"
#include "rbal/mdp_json.hpp"
#include "rbal/random.hpp"
#include "rbal/trace.hpp"

#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

using namespace rbal;
using oracle::policy_of;

TEST_SUITE("validate_mdp") {
    TEST_CASE("single self-loop is legal") {
        CHECK(validate_mdp(oracle::self_loops({1.0}, 0.9)).ok());
    }

    TEST_CASE("probabilities that do not sum to one are reported") {
        Mdp m(2, 0.9, {Action{0, 0.0, {{0, 0.5}, {1, 0.4}}}, Action{1, 0.0, {{1, 1.0}}}});
        const auto r = validate_mdp(m);
        REQUIRE(r.violations.size() == 1);
        CHECK(r.violations[0].message.find("probabilities sum 0.9") != std::string::npos);
        CHECK(r.violations[0].action == 0);
        CHECK(r.violations[0].state == 0);
    }

    TEST_CASE("gamma of one is out of range") {
        const auto r = validate_mdp(oracle::self_loops({0.0}, 1.0));
        REQUIRE_FALSE(r.ok());
        CHECK(r.to_string().find("gamma out of range") != std::string::npos);
    }

    TEST_CASE("every structural violation is listed") {
        Mdp m(3, 0.5,
              {Action{0, 0.0, {{0, 0.5}, {0, 0.5}}}, Action{1, 0.0, {{7, 1.0}}}, Action{1, 0.0, {{1, 1.5}, {0, -0.5}}}});
        const auto r = validate_mdp(m);
        const auto text = r.to_string();
        CHECK(text.find("duplicate destination 0") != std::string::npos);
        CHECK(text.find("destination 7 out of range") != std::string::npos);
        CHECK(text.find("outside [0,1]") != std::string::npos);
        CHECK(text.find("state owns no action") != std::string::npos);
        CHECK_THROWS_AS(require_valid(m), InvalidArgument);
    }

    TEST_CASE("probability tolerance is 1e-12") {
        CHECK(validate_mdp(Mdp(2, 0.5, {Action{0, 0.0, {{0, 0.5}, {1, 0.5 + 5e-13}}}, Action{1, 0.0, {{1, 1.0}}}})).ok());
        CHECK_FALSE(validate_mdp(Mdp(1, 0.5, {Action{0, 0.0, {{0, 1.0 - 1e-11}}}})).ok());
    }

    TEST_CASE("policy validity requires ownership") {
        const Mdp m = oracle::two_state_example();
        CHECK(is_valid_policy(m, policy_of({0, 3})));
        CHECK_FALSE(is_valid_policy(m, policy_of({3, 0})));
        CHECK_FALSE(is_valid_policy(m, policy_of({0})));
        CHECK_THROWS_AS(evaluate_policy(m, policy_of({0, 9})), InvalidArgument);
    }
}

TEST_SUITE("bellman") {
    TEST_CASE("one application on a self-loop") {
        const Mdp m = oracle::self_loops({1.0}, 0.9);
        CHECK(bellman_apply(m, policy_of({0}), std::vector<double>{0.0})[0] == doctest::Approx(1.0));
        CHECK(bellman_apply(m, policy_of({0}), std::vector<double>{10.0})[0] == doctest::Approx(10.0));
    }

    TEST_CASE("two-state example from zero values returns the rewards") {
        const Mdp m = oracle::two_state_example();
        const auto v = bellman_apply(m, policy_of({0, 3}), std::vector<double>{0.0, 0.0});
        CHECK(v[0] == doctest::Approx(0.3));
        CHECK(v[1] == doctest::Approx(0.4));
    }

    TEST_CASE("dimension mismatch throws") {
        CHECK_THROWS_AS(bellman_apply(oracle::swap_mdp(), policy_of({0, 1}), std::vector<double>{0.0}), InvalidArgument);
    }

    TEST_CASE("policy operator is a gamma contraction") {
        std::mt19937_64 g(5);
        std::uniform_real_distribution<double> U(-10.0, 10.0);
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            const Mdp m = oracle::random_small(seed);
            const Policy pi = argmax_reward_policy(m);
            std::vector<double> a(m.num_states()), b(m.num_states());
            for (auto& x : a) x = U(g);
            for (auto& x : b) x = U(g);
            const double lhs = inf_distance(bellman_apply(m, pi, a), bellman_apply(m, pi, b));
            CHECK(lhs <= m.gamma() * inf_distance(a, b) + 1e-12);
        }
    }
}

TEST_SUITE("evaluate_policy") {
    TEST_CASE("self-loop value is r over one minus gamma") {
        CHECK(evaluate_policy(oracle::self_loops({1.0}, 0.9), policy_of({0}))[0] == doctest::Approx(10.0));
    }

    TEST_CASE("deterministic swap matches the hand-solved system") {
        // V0 = -1 + V1/2, V1 = -2 + V0/2
        const auto v = evaluate_policy(oracle::swap_mdp(), policy_of({0, 1}));
        CHECK(v[0] == doctest::Approx(-8.0 / 3.0).epsilon(1e-12));
        CHECK(v[1] == doctest::Approx(-10.0 / 3.0).epsilon(1e-12));
    }

    TEST_CASE("agrees with the Gauss-Jordan oracle on every policy of the two-state example") {
        const Mdp m = oracle::two_state_example();
        oracle::for_each_policy(m, [&](const std::vector<std::size_t>& c) {
            CHECK(oracle::inf_dist(evaluate_policy(m, policy_of(c)), oracle::values(m, c)) <= 1e-12);
        });
    }

    TEST_CASE("fixed point of the policy operator on random MDPs") {
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const Mdp m = oracle::random_small(seed, {.maxStates = 10});
            const Policy pi = argmax_reward_policy(m);
            const auto v = evaluate_policy(m, pi);
            CHECK(inf_distance(bellman_apply(m, pi, v), v) <= 1e-9);
            CHECK(oracle::inf_dist(v, oracle::values(m, pi.choice)) <= 1e-9);
        }
    }
}

TEST_SUITE("advantage and greedy") {
    TEST_CASE("actions of the evaluated policy have zero advantage") {
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            const Mdp m = oracle::random_small(seed);
            const Policy pi = argmax_reward_policy(m);
            const auto v = evaluate_policy(m, pi);
            for (ActionId a : pi.choice) CHECK(std::abs(advantage(m, v, a)) <= 1e-10);
        }
    }

    TEST_CASE("worse self-loop has advantage minus one") {
        const Mdp m = oracle::self_loops({1.0, 0.0}, 0.9);
        const auto v = evaluate_policy(m, policy_of({0}));
        CHECK(advantage(m, v, 1) == doctest::Approx(-1.0));
    }

    TEST_CASE("dominated action in the two-state example has negative advantage") {
        const Mdp m = oracle::two_state_example();
        const auto opt = oracle::brute_force(m);
        for (ActionId a : {0u, 2u, 3u, 5u}) CHECK(advantage(m, opt.v, a) < 0.0);
    }

    TEST_CASE("invalid action id throws") {
        CHECK_THROWS_AS(advantage(oracle::swap_mdp(), std::vector<double>{0, 0}, 5), InvalidArgument);
    }

    TEST_CASE("greedy on zero values is the argmax-reward policy") {
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            const Mdp m = oracle::random_small(seed);
            CHECK(greedy_policy(m, std::vector<double>(m.num_states(), 0.0)) == argmax_reward_policy(m));
        }
    }

    TEST_CASE("greedy on optimal values is optimal") {
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            const Mdp m = oracle::random_small(seed, {.maxStates = 5});
            const auto opt = oracle::brute_force(m);
            const Policy g = greedy_policy(m, opt.v);
            CHECK(oracle::inf_dist(oracle::values(m, g.choice), opt.v) <= 1e-9);
        }
    }

    TEST_CASE("single-action states leave greedy no choice") {
        const Mdp m = oracle::swap_mdp();
        CHECK(greedy_policy(m, std::vector<double>{-8.0 / 3.0, -10.0 / 3.0}).choice == std::vector<ActionId>{0, 1});
    }

    TEST_CASE("ties go to the lowest index") {
        const Mdp m = oracle::self_loops({0.5, 0.5, 0.5}, 0.9);
        CHECK(greedy_policy(m, std::vector<double>{0.0}).choice[0] == 0);
        CHECK(argmax_reward_policy(m).choice[0] == 0);
    }

    TEST_CASE("greedy ignores a constant added to the values") {
        std::mt19937_64 g(11);
        std::uniform_real_distribution<double> U(-5.0, 5.0);
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            const Mdp m = oracle::random_small(seed);
            std::vector<double> v(m.num_states());
            for (auto& x : v) x = U(g);
            auto shifted = v;
            for (auto& x : shifted) x += 3.0;
            // the advantages all move by (gamma - 1) * 3, so the argmax is kept
            CHECK(greedy_policy(m, v) == greedy_policy(m, shifted));
        }
    }
}

TEST_SUITE("policy_suboptimality") {
    TEST_CASE("optimal policy has zero gap") {
        const Mdp m = oracle::two_state_example();
        const auto opt = oracle::brute_force(m);
        CHECK(policy_suboptimality(m, policy_of(opt.policies.front()), opt.v) <= 1e-12);
    }

    TEST_CASE("worse self-loop at gamma one half") {
        const Mdp m = oracle::self_loops({0.0, -1.0}, 0.5);
        CHECK(policy_suboptimality(m, policy_of({1}), std::vector<double>{0.0}) == doctest::Approx(2.0));
    }

    TEST_CASE("value iteration output on a seeded 5-state MDP") {
        const Mdp m = oracle::random_small(77, {.minStates = 5, .maxStates = 5});
        const auto opt = oracle::brute_force(m);
        const auto vi = value_iteration(m, std::vector<double>(5, 0.0), 0.1);
        CHECK(policy_suboptimality(m, vi.policy, opt.v) < 0.1);
    }
}

TEST_SUITE("policy hash") {
    TEST_CASE("stable and choice-sensitive") {
        CHECK(policy_hash(policy_of({0, 3})) == policy_hash(policy_of({0, 3})));
        CHECK(policy_hash(policy_of({0, 3})) != policy_hash(policy_of({3, 0})));
        CHECK(policy_hash_hex(policy_of({1})).size() == 16);
        // FNV-1a of the empty sequence is the offset basis
        CHECK(policy_hash(policy_of({})) == 0xcbf29ce484222325ULL);
    }
}

TEST_SUITE("mdp json") {
    TEST_CASE("round trip is bit exact") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const Mdp m = oracle::random_small(seed);
            const Mdp back = parse_mdp(dump_mdp(m));
            REQUIRE(back.num_actions() == m.num_actions());
            CHECK(back.gamma() == m.gamma());
            for (ActionId a = 0; a < m.num_actions(); ++a) {
                CHECK(back.action(a).state == m.action(a).state);
                CHECK(back.action(a).reward == m.action(a).reward);
                REQUIRE(back.action(a).transitions.size() == m.action(a).transitions.size());
                for (std::size_t j = 0; j < m.action(a).transitions.size(); ++j) {
                    CHECK(back.action(a).transitions[j].to == m.action(a).transitions[j].to);
                    CHECK(back.action(a).transitions[j].prob == m.action(a).transitions[j].prob);
                }
            }
            CHECK(dump_mdp(back) == dump_mdp(m));
        }
    }

    TEST_CASE("meta block is emitted and ignored") {
        const Mdp m = oracle::swap_mdp();
        const auto text = dump_mdp(m, {{"generator", "test"}});
        CHECK(text.find("\"meta\"") != std::string::npos);
        CHECK(dump_mdp(parse_mdp(text)) == dump_mdp(m));
    }

    TEST_CASE("schema errors") {
        CHECK_THROWS_AS(parse_mdp(R"({"version":2,"n":1,"gamma":0.5,"actions":[]})"), InvalidArgument);
        CHECK_THROWS_AS(parse_mdp(R"({"version":1,"gamma":0.5,"actions":[]})"), InvalidArgument);
        CHECK_THROWS_AS(parse_mdp(R"({"version":1,"n":1,"gamma":0.5,"actions":[{"state":0,"reward":1}]})"),
                        InvalidArgument);
        CHECK_THROWS_AS(parse_mdp("not json"), InvalidArgument);
    }

    TEST_CASE("file round trip and missing file") {
        const auto path = std::filesystem::temp_directory_path() / "rbal_core_roundtrip.json";
        save_mdp(path, oracle::two_state_example());
        CHECK(dump_mdp(load_mdp(path)) == dump_mdp(oracle::two_state_example()));
        std::filesystem::remove(path);
        CHECK_THROWS(load_mdp(path));
    }
}

TEST_SUITE("trace") {
    TEST_CASE("indices are contiguous from one") {
        SolverTrace t;
        t.push({});
        t.push({});
        t.push({});
        for (std::size_t i = 0; i < t.size(); ++i) CHECK(t.iterations[i].iteration == i + 1);
    }

    TEST_CASE("csv header grows with bound columns") {
        SolverTrace t;
        TraceRecord r;
        r.policy = policy_of({0});
        r.delta = {0.5};
        t.push(r);
        std::ostringstream plain;
        write_trace_csv(plain, t);
        CHECK(plain.str().rfind("iter,rmin,delta_inf_norm,policy_hash,suboptimality\n", 0) == 0);
        t.iterations[0].boundEpsilon = 1.0;
        std::ostringstream bounded;
        write_trace_csv(bounded, t);
        CHECK(bounded.str().rfind(
                  "iter,rmin,delta_inf_norm,policy_hash,suboptimality,epsilon_bound_thm6,corollary_bound,max_alive_actions\n",
                  0) == 0);
    }

    TEST_CASE("suboptimality annotation") {
        const Mdp m = oracle::self_loops({0.0, -1.0}, 0.5);
        SolverTrace t;
        TraceRecord r;
        r.policy = policy_of({1});
        t.push(r);
        annotate_suboptimality(t, m, {0.0});
        REQUIRE(t.iterations[0].suboptimality);
        CHECK(*t.iterations[0].suboptimality == doctest::Approx(2.0));
    }
}

TEST_SUITE("random") {
    TEST_CASE("derived seeds are deterministic and order sensitive") {
        CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
        CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
        CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
        std::set<std::uint64_t> seen;
        for (std::uint64_t w = 0; w < 16; ++w)
            for (std::uint64_t t = 0; t < 16; ++t) seen.insert(derive_seed(42, {w, t}));
        CHECK(seen.size() == 256);
    }

    TEST_CASE("uniform draws stay in range") {
        Rng r(3);
        for (int i = 0; i < 10000; ++i) {
            const double u = r.uniform();
            CHECK((u >= 0.0 && u < 1.0));
            const double x = r.uniform(-2.0, 5.0);
            CHECK((x >= -2.0 && x < 5.0));
        }
    }

    TEST_CASE("index is roughly uniform") {
        Rng r(9);
        std::vector<int> counts(7, 0);
        const int N = 70000;
        for (int i = 0; i < N; ++i) ++counts[r.index(7)];
        // each bucket has sd sqrt(N p (1-p)) ~ 92; allow 5 sd
        for (int c : counts) CHECK(std::abs(c - N / 7) < 460);
        CHECK_THROWS(r.index(0));
    }
}
