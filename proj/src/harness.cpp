#include "rbal/harness.hpp"

#include "rbal/exact_solvers.hpp"
#include "rbal/random.hpp"
#include "rbal/reward_balancing.hpp"
#include "rbal/stochastic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace rbal {

namespace {

/// Memoised epsilon-optimality test against fixed optimal values.
class OptimalityCheck {
  public:
    OptimalityCheck(const Mdp& mdp, double epsilon)
        : mdp_(mdp), epsilon_(epsilon), vStar_(policy_iteration(mdp).values) {}

    bool operator()(const Policy& p) {
        const auto h = policy_hash(p);
        if (auto it = cache_.find(h); it != cache_.end()) return it->second;
        const bool ok = policy_suboptimality(mdp_, p, vStar_) <= epsilon_;
        cache_.emplace(h, ok);
        return ok;
    }

  private:
    const Mdp& mdp_;
    double epsilon_;
    ValueVector vStar_;
    std::unordered_map<std::uint64_t, bool> cache_;
};

} // namespace

IterationsToEpsilon iterations_to_epsilon(const Mdp& mdp, double epsilon, ItersMetric metric, std::size_t cap) {
    if (!(epsilon > 0.0)) throw InvalidArgument("iterations_to_epsilon: epsilon must be positive");
    const double scale = 1.0 - mdp.gamma();
    std::optional<OptimalityCheck> optimal;
    if (metric == ItersMetric::Oracle) optimal.emplace(mdp, epsilon);
    IterationsToEpsilon out;

    SafeRewardBalancer rb(mdp);
    auto rbsDone = [&] {
        return optimal ? (*optimal)(rb.reward_policy()) : std::abs(rb.rmin()) / scale < epsilon;
    };
    while (!rbsDone()) {
        if (out.rbs == cap) throw NumericalFailure("iterations_to_epsilon: RB-S exceeded the iteration cap");
        rb.step();
        ++out.rbs;
    }

    const Mdp shifted = shift_rewards_nonpositive(mdp).first;
    std::vector<double> v(mdp.num_states(), 0.0), next(mdp.num_states());
    auto sweep = [&] {
        std::fill(next.begin(), next.end(), -std::numeric_limits<double>::infinity());
        for (ActionId a = 0; a < shifted.num_actions(); ++a) {
            const StateId s = shifted.action(a).state;
            next[s] = std::max(next[s], action_backup(shifted, a, v));
        }
    };
    while (true) {
        if (optimal) {
            if ((*optimal)(greedy_policy(shifted, v))) break;
            sweep();
        } else {
            sweep();
            if (inf_distance(next, v) / scale < epsilon) break;
        }
        if (out.vi == cap) throw NumericalFailure("iterations_to_epsilon: VI exceeded the iteration cap");
        v.swap(next);
        ++out.vi;
    }
    return out;
}

Mdp make_instance(const std::string& kind, std::size_t n, const MixParams& mix, double gamma, std::uint64_t seed) {
    if (kind == "random") return random_mdp(n, seed, mix, gamma);
    if (kind == "cycle" || kind == "ring") return cycle_mdp(n, mix, gamma, seed);
    if (kind == "grid") {
        const auto rows = std::max<std::size_t>(2, static_cast<std::size_t>(std::sqrt(static_cast<double>(n))));
        const auto cols = std::max<std::size_t>(2, (n + rows - 1) / rows);
        return grid_world(rows, cols, mix, gamma, seed);
    }
    throw InvalidArgument("unknown MDP kind '" + kind + "' (expected grid, random or cycle)");
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"exec-prob",    "random-prob", "gamma-sweep", "size-sweep",
                                                "stoch-random", "stoch-grid",  "stoch-ring"};
    return names;
}

std::vector<SeriesPoint> ExperimentResult::series(const std::string& algo) const {
    std::vector<SeriesPoint> out;
    for (const auto& r : rows)
        if (r.algo == algo) out.push_back(r);
    return out;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

namespace {

/// One rep yields one value per algorithm, in `algos` order.
using RepFn = std::function<std::vector<double>(std::size_t xi, double x, std::uint64_t seed)>;

void run_pool(std::size_t tasks, std::size_t threads, const std::function<void(std::size_t)>& body) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, tasks);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = tasks; // stop handing out work
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
}

ExperimentResult aggregate(const ExperimentConfig& cfg, const std::vector<double>& xs,
                           const std::vector<std::string>& algos, const RepFn& rep) {
    if (cfg.reps == 0) throw InvalidArgument("experiment: reps must be at least 1");
    const std::size_t tasks = xs.size() * cfg.reps;
    std::vector<std::vector<double>> values(tasks);
    run_pool(tasks, cfg.threads, [&](std::size_t i) {
        const std::size_t xi = i / cfg.reps, r = i % cfg.reps;
        values[i] = rep(xi, xs[xi], derive_seed(cfg.seed, {xi, r}));
    });

    ExperimentResult res;
    res.name = cfg.name;
    for (std::size_t xi = 0; xi < xs.size(); ++xi) {
        for (std::size_t k = 0; k < algos.size(); ++k) {
            std::vector<double> column;
            for (std::size_t r = 0; r < cfg.reps; ++r) column.push_back(values[xi * cfg.reps + r].at(k));
            res.rows.push_back({xs[xi], algos[k], mean_of(column), sample_std(column), column.size()});
            res.samples.push_back(std::move(column));
        }
    }
    return res;
}

ExperimentResult known_experiment(const ExperimentConfig& cfg) {
    std::vector<double> xs = cfg.xs;
    std::function<void(double, MixParams&, double&, std::size_t&)> setup;
    std::string xLabel;
    std::size_t n0 = cfg.n.value_or(100);
    double gamma0 = cfg.gamma.value_or(0.95);

    if (cfg.name == "exec-prob") {
        if (xs.empty()) xs = {0.2, 0.4, 0.6, 0.8, 1.0};
        xLabel = "execution probability (rest self-loop)";
        setup = [](double x, MixParams& m, double&, std::size_t&) { m = {x, 0.0, 1.0 - x}; };
    } else if (cfg.name == "random-prob") {
        if (xs.empty()) xs = {0.2, 0.4, 0.6, 0.8, 1.0};
        xLabel = "random probability (rest self-loop)";
        setup = [](double x, MixParams& m, double&, std::size_t&) { m = {0.0, x, 1.0 - x}; };
    } else if (cfg.name == "gamma-sweep") {
        if (xs.empty()) xs = {0.8, 0.85, 0.9, 0.95, 0.98};
        xLabel = "gamma";
        setup = [](double x, MixParams& m, double& g, std::size_t&) {
            m = {0.5, 0.5, 0.0};
            g = x;
        };
    } else {
        if (xs.empty()) {
            xs = cfg.kind == "grid" ? std::vector<double>{25, 100, 225, 400} : std::vector<double>{50, 100, 200, 400};
        }
        xLabel = "number of states";
        setup = [](double x, MixParams& m, double&, std::size_t& n) {
            m = {0.5, 0.5, 0.0};
            n = static_cast<std::size_t>(x);
        };
    }

    auto res = aggregate(cfg, xs, {"rbs", "vi"}, [&](std::size_t, double x, std::uint64_t seed) {
        MixParams mix;
        double gamma = gamma0;
        std::size_t n = n0;
        setup(x, mix, gamma, n);
        const Mdp mdp = make_instance(cfg.kind, n, mix, gamma, seed);
        const auto its = iterations_to_epsilon(mdp, cfg.epsilon, cfg.metric);
        return std::vector<double>{static_cast<double>(its.rbs), static_cast<double>(its.vi)};
    });
    res.xLabel = xLabel;
    res.yLabel = "iterations to epsilon-optimal policy";
    return res;
}

ExperimentResult stochastic_experiment(const ExperimentConfig& cfg) {
    const std::string kind = cfg.name == "stoch-random" ? "random" : cfg.name == "stoch-grid" ? "grid" : "cycle";
    std::vector<double> xs = cfg.xs;
    if (xs.empty()) xs = cfg.paperScale ? std::vector<double>{100, 1000, 10000, 100000, 1000000}
                                        : std::vector<double>{10, 100, 1000, 10000};
    const std::size_t n = cfg.n.value_or(cfg.paperScale ? 100 : 20);
    const double gamma = cfg.gamma.value_or(0.95);
    const MixParams mix{0.0, 1.0, 0.0};

    auto res = aggregate(cfg, xs, {"rbs", "q"}, [&](std::size_t, double x, std::uint64_t seed) {
        const Mdp mdp = make_instance(kind, n, mix, gamma, seed);
        const Policy optimal = policy_iteration(mdp).policy;
        const double rMax = -SafeRewardBalancer(mdp).rmin();
        // round count from the deterministic rate with this instance's rMax
        const double c = 1.0 - gamma;
        const auto T = static_cast<std::size_t>(std::ceil(std::log(std::max(rMax, 1e-12) / (cfg.epsilon * c)) / c));
        const GenerativeModel model(mdp, derive_seed(seed, {0x73616d70ULL}));
        StochasticOptions opt;
        opt.schedule = {1, static_cast<std::uint64_t>(x)};
        opt.rounds = std::max<std::size_t>(T, 1);
        const auto rbs = stochastic_rbs(model, opt);
        const auto q = synchronous_q_learning(model, opt.schedule, opt.rounds, default_learning_rate(gamma));
        return std::vector<double>{metric_optimal_action_gap(mdp, optimal, rbs.policy),
                                   metric_optimal_action_gap(mdp, optimal, q.policy)};
    });
    res.xLabel = "samples per action per round";
    res.yLabel = "optimal-action reward gap";
    return res;
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), config.name) == names.end())
        throw InvalidArgument("unknown experiment '" + config.name + "'");
    if (config.kind != "grid" && config.kind != "random" && config.kind != "cycle")
        throw InvalidArgument("unknown MDP kind '" + config.kind + "'");
    if (config.name.rfind("stoch-", 0) == 0) return stochastic_experiment(config);
    return known_experiment(config);
}

void write_experiment_csv(std::ostream& os, const ExperimentResult& result) {
    const auto old = os.precision(17);
    os << "x,algo,mean,std,reps\n";
    for (const auto& r : result.rows) os << r.x << ',' << r.algo << ',' << r.mean << ',' << r.std << ',' << r.reps << '\n';
    os.precision(old);
}

void write_experiment_svg(std::ostream& os, const ExperimentResult& result) {
    constexpr double W = 640, H = 400, L = 70, R = 20, T = 40, B = 60;
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    if (result.rows.empty()) {
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\"/>\n";
        return;
    }
    double x0 = result.rows.front().x, x1 = x0, y0 = 0.0, y1 = 0.0;
    for (const auto& r : result.rows) {
        x0 = std::min(x0, r.x);
        x1 = std::max(x1, r.x);
        y0 = std::min(y0, r.mean - r.std);
        y1 = std::max(y1, r.mean + r.std);
    }
    if (x1 == x0) x1 = x0 + 1.0;
    if (y1 == y0) y1 = y0 + 1.0;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    std::vector<std::string> algos;
    for (const auto& r : result.rows)
        if (std::find(algos.begin(), algos.end(), r.algo) == algos.end()) algos.push_back(r.algo);

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\">" << result.name << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << result.xLabel << "</text>\n";
    os << "<text x=\"15\" y=\"" << H / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " << H / 2 << ")\">"
       << result.yLabel << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
        os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << xv << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << yv << "</text>\n";
    }
    for (std::size_t k = 0; k < algos.size(); ++k) {
        const auto pts = result.series(algos[k]);
        const char* color = colors[k % 4];
        os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
        for (const auto& p : pts) os << px(p.x) << ',' << py(p.mean + p.std) << ' ';
        for (auto it = pts.rbegin(); it != pts.rend(); ++it) os << px(it->x) << ',' << py(it->mean - it->std) << ' ';
        os << "\"/>\n<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& p : pts) os << px(p.x) << ',' << py(p.mean) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << W - R - 60 << "\" y=\"" << T + 16 * (k + 1) << "\" fill=\"" << color << "\">" << algos[k]
           << "</text>\n";
    }
    os << "</svg>\n";
}

} // namespace rbal
