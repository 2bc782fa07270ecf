#include "rbal/cli.hpp"

#include "rbal/exact_solvers.hpp"
#include "rbal/generators.hpp"
#include "rbal/geometry.hpp"
#include "rbal/harness.hpp"
#include "rbal/mdp_json.hpp"
#include "rbal/reward_balancing.hpp"
#include "rbal/stochastic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace rbal {

namespace {

using nlohmann::json;

/// A solver result contradicted the oracle or a guaranteed bound.
struct AssertionFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Ordered key/value report, printed as "key,value" lines or one JSON object.
class Report {
  public:
    void add(const std::string& key, json value) { items_.emplace_back(key, std::move(value)); }

    void print(std::ostream& os, const std::string& format) const {
        if (format == "json") {
            json j = json::object();
            for (const auto& [k, v] : items_) j[k] = v;
            os << j.dump(2) << '\n';
            return;
        }
        for (const auto& [k, v] : items_) os << k << ',' << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
    }

  private:
    std::vector<std::pair<std::string, json>> items_;
};

std::string join(const std::vector<ActionId>& ids) {
    std::ostringstream os;
    for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? " " : "") << ids[i];
    return os.str();
}

std::string join(const std::vector<double>& xs) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? " " : "") << xs[i];
    return os.str();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f.precision(17);
    return f;
}

json read_meta(const std::string& path) {
    std::ifstream f(path);
    if (!f) return nullptr;
    try {
        const json j = json::parse(f);
        return j.contains("meta") ? j["meta"] : json(nullptr);
    } catch (const json::exception&) {
        return nullptr;
    }
}

struct Globals {
    std::uint64_t seed = 1;
    std::string out;
    std::string format = "csv";
};

struct GenerateArgs {
    std::string kind;
    std::size_t n = 0, rows = 0, cols = 0, classes = 0, perClass = 1;
    double exec = 1.0, random = 0.0, self = 0.0, gamma = 0.0;
};

int cmd_generate(const GenerateArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
    const MixParams mix{a.exec, a.random, a.self};
    Mdp mdp;
    json params{{"gamma", a.gamma}};
    if (a.kind == "hierarchical") {
        if (a.classes == 0) throw InvalidArgument("generate: --classes is required for hierarchical");
        auto h = hierarchical_mdp(a.classes, a.perClass, g.seed, a.gamma);
        mdp = std::move(h.mdp);
        params["classes"] = a.classes;
        params["per_class"] = a.perClass;
        params["state_class"] = h.stateClass;
    } else {
        params.update({{"exec", a.exec}, {"random", a.random}, {"self", a.self}});
        if (a.kind == "grid") {
            if (a.rows == 0 || a.cols == 0) throw InvalidArgument("generate: --rows and --cols are required for grid");
            mdp = grid_world(a.rows, a.cols, mix, a.gamma, g.seed);
            params["rows"] = a.rows;
            params["cols"] = a.cols;
        } else {
            if (a.n == 0) throw InvalidArgument("generate: --n is required for " + a.kind);
            mdp = a.kind == "random" ? random_mdp(a.n, g.seed, mix, a.gamma) : cycle_mdp(a.n, mix, a.gamma, g.seed);
            params["n"] = a.n;
        }
    }
    const json meta = generator_meta(a.kind, params, g.seed);
    const auto report = validate_mdp(mdp);
    Report r;
    r.add("n", mdp.num_states());
    r.add("m", mdp.num_actions());
    r.add("valid", report.ok());
    if (g.out.empty()) {
        out << dump_mdp(mdp, meta) << '\n';
        r.print(err, g.format);
    } else {
        save_mdp(g.out, mdp, meta);
        r.add("out", g.out);
        r.print(out, g.format);
    }
    if (!report.ok()) {
        err << report.to_string() << '\n';
        return kExitAssertion;
    }
    return kExitOk;
}

struct SolveArgs {
    std::string in, algo, trace;
    double epsilon = 0.1;
    bool oracle = false;
    std::size_t maxIters = 100000;
};

int cmd_solve(const SolveArgs& a, const Globals& g, std::ostream& out) {
    const Mdp mdp = load_mdp(a.in);
    require_valid(mdp);
    Policy policy;
    SolverTrace trace;
    std::size_t iterations = 0;
    Report r;
    r.add("algo", a.algo);
    r.add("n", mdp.num_states());
    r.add("m", mdp.num_actions());

    if (a.algo == "vi") {
        const std::vector<double> v0(mdp.num_states(), 0.0);
        auto res = value_iteration(mdp, v0, a.epsilon, a.maxIters);
        policy = res.policy, trace = std::move(res.trace), iterations = res.iterations;
        r.add("converged", res.converged);
    } else if (a.algo == "pi") {
        auto res = policy_iteration(mdp, std::nullopt, a.maxIters);
        policy = res.policy, trace = std::move(res.trace), iterations = res.iterations;
    } else if (a.algo == "erb") {
        auto res = exact_reward_balancing(mdp, a.maxIters);
        policy = res.policy, trace = std::move(res.trace), iterations = res.iterations;
    } else if (a.algo == "rbs") {
        auto res = rbs_solve(mdp, a.epsilon, a.maxIters);
        policy = res.policy, trace = std::move(res.trace), iterations = res.iterations;
        r.add("converged", res.converged);
        r.add("initial_rmin", res.initialRmin);
    } else if (a.algo == "rbs-filter") {
        auto res = rbs_with_filtering(mdp, a.maxIters);
        policy = res.policy, trace = std::move(res.trace), iterations = res.iterations;
        r.add("exact", res.exact);
        r.add("removed", res.removed.size());
    } else {
        throw InvalidArgument("unknown algo '" + a.algo + "'");
    }
    trace.tolerance = a.epsilon;
    trace.seed = g.seed;
    r.add("iterations", iterations);
    r.add("policy_hash", policy_hash_hex(policy));
    r.add("policy", join(policy.choice));

    std::optional<std::string> failure;
    if (a.oracle) {
        const auto oracle = policy_iteration(mdp);
        const double gap = policy_suboptimality(mdp, policy, oracle.values);
        r.add("oracle_policy_hash", policy_hash_hex(oracle.policy));
        r.add("suboptimality", gap);
        annotate_suboptimality(trace, mdp, oracle.values);
        const bool approximate = a.algo == "vi" || a.algo == "rbs";
        const double allowed = approximate ? a.epsilon : kIdentityTol;
        if (!(gap < allowed || (!approximate && gap <= allowed)))
            failure = "suboptimality " + std::to_string(gap) + " exceeds " + std::to_string(allowed);
        const json meta = read_meta(a.in);
        if (a.algo == "rbs" && meta.is_object() && meta.value("generator", "") == "hierarchical") {
            const auto classes = meta["params"].value("classes", std::size_t{0});
            r.add("classes", classes);
            if (iterations > classes)
                failure = "RB-S used " + std::to_string(iterations) + " iterations on " + std::to_string(classes) + " classes";
        }
    }
    if (!a.trace.empty()) {
        auto f = open_out(a.trace);
        write_trace_csv(f, trace);
    }
    if (!g.out.empty()) {
        auto f = open_out(g.out);
        r.print(f, g.format);
    }
    r.print(out, g.format);
    if (failure) throw AssertionFailure(*failure);
    return kExitOk;
}

int cmd_normalize(const std::string& in, const Globals& g, std::ostream& out, std::ostream& err) {
    const Mdp mdp = load_mdp(in);
    require_valid(mdp);
    const auto norm = normalize(mdp);
    Report r;
    r.add("v_star", join(norm.vStar));
    r.add("delta", join(norm.delta));
    r.add("optimal_policy_hash", policy_hash_hex(norm.optimal));
    const bool ok = is_normal(norm.mdp);
    r.add("is_normal", ok);
    if (g.out.empty()) {
        out << dump_mdp(norm.mdp) << '\n';
        r.print(err, g.format);
    } else {
        save_mdp(g.out, norm.mdp);
        r.add("out", g.out);
        r.print(out, g.format);
    }
    if (!ok) throw AssertionFailure("normalized MDP failed the normal-form check");
    return kExitOk;
}

struct StochArgs {
    std::string in, algo = "rbs", trace, manifest;
    std::optional<std::uint64_t> k;
    std::optional<std::size_t> rounds;
    std::optional<double> epsilon, tau;
    std::size_t workers = 1;
    bool pooled = false;
};

int cmd_stoch(const StochArgs& a, const Globals& g, std::ostream& out) {
    const Mdp mdp = load_mdp(a.in);
    require_valid(mdp);
    if (a.workers == 0) throw InvalidArgument("stoch: --workers must be at least 1");
    const double rMax = -SafeRewardBalancer(mdp).rmin();
    Report r;
    r.add("algo", a.algo);
    r.add("r_max", rMax);

    std::uint64_t k = a.k.value_or(0);
    std::size_t rounds = a.rounds.value_or(0);
    if (!a.k || !a.rounds) {
        if (!a.epsilon || !a.tau) throw CLI::ValidationError("stoch", "give --k and --rounds, or --epsilon and --tau");
        const auto plan = plan_samples(*a.epsilon, *a.tau, mdp.gamma(), rMax, mdp.num_actions());
        r.add("planned_k", plan.k);
        r.add("planned_t", plan.t);
        if (!a.k) k = plan.k;
        if (!a.rounds) rounds = plan.t;
    }
    if (k == 0) throw InvalidArgument("stoch: --k must be at least 1");

    const GenerativeModel model(mdp, g.seed);
    const Policy optimal = policy_iteration(mdp).policy;
    const SampleSchedule schedule{a.workers, k};
    Policy policy;
    std::vector<StochasticRound> trace;
    std::vector<double> finalValues;
    if (a.algo == "rbs") {
        StochasticOptions opt;
        opt.schedule = schedule;
        opt.rounds = rounds;
        opt.epsilon = a.epsilon;
        opt.parallelWorkers = !a.pooled;
        opt.reference = optimal;
        auto res = stochastic_rbs(model, opt);
        policy = res.policy, trace = std::move(res.trace), finalValues = std::move(res.rewards);
        r.add("rounds", res.rounds);
        r.add("stopped_early", res.stoppedEarly);
    } else if (a.algo == "q") {
        auto res = synchronous_q_learning(model, schedule, rounds, default_learning_rate(mdp.gamma()), optimal);
        policy = res.policy, trace = std::move(res.trace), finalValues = std::move(res.q);
        r.add("rounds", rounds);
    } else {
        throw InvalidArgument("unknown stochastic algo '" + a.algo + "'");
    }
    r.add("k", k);
    r.add("workers", a.workers);
    r.add("policy_hash", policy_hash_hex(policy));
    r.add("metric_gap", metric_optimal_action_gap(mdp, optimal, policy));
    r.add("final_vector", join(finalValues));

    if (!a.trace.empty()) {
        auto f = open_out(a.trace);
        write_stochastic_trace_csv(f, trace);
    }
    if (!a.manifest.empty()) {
        auto f = open_out(a.manifest);
        f << run_manifest(g.seed, a.workers, k, rounds, mdp.gamma(), a.epsilon, a.tau, rMax).dump(2) << '\n';
    }
    r.print(out, g.format);
    return kExitOk;
}

struct ExperimentArgs {
    ExperimentConfig cfg;
    std::string svg;
    std::optional<std::size_t> n;
    std::optional<double> gamma;
    std::string metric = "certificate";
};

int cmd_experiment(ExperimentArgs a, const Globals& g, std::ostream& out) {
    a.cfg.seed = g.seed;
    a.cfg.n = a.n;
    a.cfg.gamma = a.gamma;
    a.cfg.metric = a.metric == "oracle" ? ItersMetric::Oracle : ItersMetric::Certificate;
    const auto res = run_experiment(a.cfg);
    if (g.out.empty()) {
        write_experiment_csv(out, res);
    } else {
        auto f = open_out(g.out);
        write_experiment_csv(f, res);
    }
    if (!a.svg.empty()) {
        auto f = open_out(a.svg);
        write_experiment_svg(f, res);
    }
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Finite discounted MDP solvers built on advantage-preserving reward shifts", "rbal"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
    app.add_option("--out", g.out, "Output file");
    app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Generate a benchmark MDP as JSON");
    generate->add_option("--kind", gen.kind)->required()->check(CLI::IsMember({"random", "grid", "cycle", "hierarchical"}));
    generate->add_option("--n", gen.n, "States (random, cycle)");
    generate->add_option("--rows", gen.rows);
    generate->add_option("--cols", gen.cols);
    generate->add_option("--classes", gen.classes, "Classes (hierarchical)");
    generate->add_option("--per-class", gen.perClass, "States per class (hierarchical)");
    generate->add_option("--exec", gen.exec)->capture_default_str();
    generate->add_option("--random", gen.random)->capture_default_str();
    generate->add_option("--self", gen.self)->capture_default_str();
    generate->add_option("--gamma", gen.gamma)->required();

    SolveArgs sol;
    auto* solve = app.add_subcommand("solve", "Solve an MDP file");
    solve->add_option("--in", sol.in)->required();
    solve->add_option("--algo", sol.algo)->required()->check(CLI::IsMember({"vi", "pi", "erb", "rbs", "rbs-filter"}));
    solve->add_option("--epsilon", sol.epsilon)->capture_default_str();
    solve->add_flag("--oracle", sol.oracle, "Compare against policy iteration");
    solve->add_option("--trace", sol.trace, "Trace CSV path");
    solve->add_option("--max-iters", sol.maxIters)->capture_default_str();

    std::string normIn;
    auto* norm = app.add_subcommand("normalize", "Write the normal form of an MDP");
    norm->add_option("--in", normIn)->required();

    StochArgs st;
    auto* stoch = app.add_subcommand("stoch", "Solve through a generative model of an MDP file");
    stoch->add_option("--in", st.in)->required();
    stoch->add_option("--algo", st.algo)->check(CLI::IsMember({"rbs", "q"}))->capture_default_str();
    stoch->add_option("--k", st.k, "Samples per action per round, per worker");
    stoch->add_option("--rounds", st.rounds);
    stoch->add_option("--epsilon", st.epsilon);
    stoch->add_option("--tau", st.tau);
    stoch->add_option("--workers", st.workers)->capture_default_str();
    stoch->add_flag("--pooled", st.pooled, "Draw all worker streams on one thread");
    stoch->add_option("--trace", st.trace, "Per-round trace CSV path");
    stoch->add_option("--manifest", st.manifest, "Run manifest JSON path");

    ExperimentArgs ex;
    auto* exp = app.add_subcommand("experiment", "Run a convergence comparison");
    exp->add_option("name", ex.cfg.name)->required()->check(CLI::IsMember(experiment_names()));
    exp->add_option("--kind", ex.cfg.kind)->check(CLI::IsMember({"grid", "random", "cycle"}))->capture_default_str();
    exp->add_option("--reps", ex.cfg.reps)->capture_default_str();
    exp->add_option("--epsilon", ex.cfg.epsilon)->capture_default_str();
    exp->add_option("--threads", ex.cfg.threads, "0 uses every core");
    exp->add_option("--n", ex.n);
    exp->add_option("--gamma", ex.gamma);
    exp->add_option("--xs", ex.cfg.xs, "x-axis values");
    exp->add_flag("--paper-scale", ex.cfg.paperScale);
    exp->add_option("--metric", ex.metric, "Iteration count for the known-MDP experiments")
        ->check(CLI::IsMember({"certificate", "oracle"}))
        ->capture_default_str();
    exp->add_option("--svg", ex.svg, "SVG chart path");

    std::vector<const char*> argv;
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*generate) return cmd_generate(gen, g, out, err);
        if (*solve) return cmd_solve(sol, g, out);
        if (*norm) return cmd_normalize(normIn, g, out, err);
        if (*stoch) return cmd_stoch(st, g, out);
        return cmd_experiment(ex, g, out);
    } catch (const CLI::Error& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const AssertionFailure& e) {
        err << "assertion failed: " << e.what() << '\n';
        return kExitAssertion;
    } catch (const NumericalFailure& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "input error: " << e.what() << '\n';
        return kExitInput;
    }
}

} // namespace rbal
