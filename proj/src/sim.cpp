#include "spillover/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <thread>

#include "spillover/errors.hpp"
#include "spillover/rng.hpp"
#include "spillover/variance.hpp"

namespace spillover {

namespace {

// Stream ids for the world draws; replications use ids >= kRepBase.
constexpr std::uint64_t kCoefStream = 2;
constexpr std::uint64_t kEpsStream = 3;
constexpr std::uint64_t kCovStream = 4;
constexpr std::uint64_t kRepBase = 16;

std::uint64_t world_seed(std::uint64_t seed, int K) {
    return splitmix64(seed ^ splitmix64(0x5eedULL + static_cast<std::uint64_t>(K)));
}

}  // namespace

World make_world(const SimConfig& cfg, int K) {
    World w;
    const std::uint64_t ws = world_seed(cfg.seed, K);
    w.net = generate(cfg.network.kind, K, cfg.network.n, cfg.network.param, ws);
    const int N = w.net.total_units();

    w.model.kind = cfg.model;
    w.model.symmetric_exposure = cfg.symmetric_interference;
    w.model.zetas = Eigen::MatrixXd::Zero(N, 6);
    w.model.eps = Eigen::VectorXd::Zero(N);
    w.model.X = Eigen::VectorXd::Zero(N);

    RngStream coef(ws, kCoefStream);
    for (int g = 0; g < N; ++g) {
        switch (cfg.model) {
            case OutcomeModelKind::model1:
                w.model.zetas(g, 0) = coef.normal(0.8, 0.2);
                w.model.zetas(g, 1) = coef.normal(2.0, 0.5);
                w.model.zetas(g, 2) = coef.normal(1.0, 0.1);
                break;
            case OutcomeModelKind::model2:
                w.model.zetas(g, 0) = coef.normal(0.8, 0.2);
                w.model.zetas(g, 1) = coef.normal(2.0, 0.5);
                w.model.zetas(g, 2) = coef.normal(0.5, 0.1);
                w.model.zetas(g, 3) = coef.normal(1.0, 0.2);
                break;
            case OutcomeModelKind::model3:
                w.model.zetas.row(g) << 0.8, 2.0, 0.5, 0.7, 0.5, 0.4;
                break;
            case OutcomeModelKind::custom:
                throw BadParam("simulation worlds use the built-in models");
        }
    }
    RngStream eps(ws, kEpsStream);
    for (int g = 0; g < N; ++g) w.model.eps[g] = eps.normal(0.0, 0.2);
    if (cfg.model == OutcomeModelKind::model3) {
        RngStream cov(ws, kCovStream);
        for (int g = 0; g < N; ++g) w.model.X[g] = cov.bernoulli(cfg.x_prob) ? 1.0 : 0.0;
    }
    return w;
}

Eigen::VectorXd evaluate_outcomes(const PotentialOutcomeModel& model, const ClusteredNetwork& net,
                                  const Eigen::VectorXd& Z) {
    if (Z.size() != net.total_units()) throw LengthMismatch("Z must have one value per unit");
    Eigen::VectorXd y(net.total_units());
    for (int k = 0; k < net.cluster_count(); ++k) {
        const int off = net.unit_offset(k);
        const int n = net.cluster(k).size;
        y.segment(off, n) = evaluate_cluster(model, net, k, Z.segment(off, n));
    }
    return y;
}

double analytic_truth(const SimConfig& cfg, const World& world, const EstimandWeights& w) {
    const ThetaMap theta = theta_map(world.model, world.net, cfg.alpha);
    if (!cfg.cse) {
        double tau = 0.0;
        for (int k = 0; k < w.cluster_count(); ++k) {
            const int off = w.unit_offset(k);
            for (const auto& e : w.cluster_entries(k)) {
                const auto [t3, t4] = theta(k, e.receiver, e.sender);
                tau += e.w * (t3 + t4 * world.model.X[off + e.sender]);
            }
        }
        return tau;
    }
    double num = 0.0, den = 0.0;
    for (int k = 0; k < w.cluster_count(); ++k) {
        const int off = w.unit_offset(k);
        for (const auto& e : w.cluster_entries(k)) {
            if (world.model.X[off + e.sender] != cfg.x) continue;
            const auto [t3, t4] = theta(k, e.receiver, e.sender);
            num += e.w * (t3 + t4 * cfg.x);
            den += e.w;
        }
    }
    if (den <= 0.0) throw EmptyConditional("no weighted sender carries the conditioning value");
    return w.s_n() * num / den;
}

std::uint64_t world_hash(const World& world) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    auto mix_bytes = [&h](const void* p, std::size_t bytes) {
        const unsigned char* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < bytes; ++i) {
            h ^= c[i];
            h *= 1099511628211ULL;
        }
    };
    for (int k = 0; k < world.net.cluster_count(); ++k) {
        const Cluster& c = world.net.cluster(k);
        mix_bytes(&c.size, sizeof(c.size));
        for (auto [s, d] : c.edges) {
            mix_bytes(&s, sizeof(s));
            mix_bytes(&d, sizeof(d));
        }
    }
    mix_bytes(world.model.zetas.data(), sizeof(double) * world.model.zetas.size());
    mix_bytes(world.model.eps.data(), sizeof(double) * world.model.eps.size());
    mix_bytes(world.model.X.data(), sizeof(double) * world.model.X.size());
    return h;
}

namespace {

struct RepResult {
    bool failed = false;
    double est = 0.0;
    double se = 0.0;
    bool covered = false;
};

}  // namespace

SimulationTable monte_carlo(const SimConfig& cfg) {
    if (cfg.replications < 1) throw BadParam("replications must be >= 1");
    SimulationTable table;
    const int F = static_cast<int>(cfg.formulations.size());
    const Mode mode = cfg.cse ? Mode::cse : Mode::ase;

    for (int K : cfg.k_values) {
        const World world = make_world(cfg, K);
        const std::uint64_t ws = world_seed(cfg.seed, K);
        EstimandWeights weights = build_weights(world.net, cfg.estimand, cfg.direction_variant);
        if (cfg.cse) weights = rescale(weights);
        const double truth = analytic_truth(cfg, world, weights);
        const int M = cfg.replications;
        std::vector<RepResult> results(static_cast<std::size_t>(M) * F);

        auto run_range = [&](int lo, int hi) {
            for (int r = lo; r < hi; ++r) {
                RngStream rng(ws, kRepBase + static_cast<std::uint64_t>(r));
                const Eigen::VectorXd Z = cfg.beta.sample(world.net, rng);
                const Eigen::VectorXd Y = evaluate_outcomes(world.model, world.net, Z);
                for (int f = 0; f < F; ++f) {
                    RepResult& res = results[static_cast<std::size_t>(r) * F + f];
                    try {
                        const EstimateReport rep = estimate(
                            mode, cfg.formulations[f], world.net, weights, cfg.alpha, cfg.beta, Z,
                            Y, cfg.cse ? &world.model.X : nullptr,
                            cfg.cse ? std::optional<double>(cfg.x) : std::nullopt, cfg.level);
                        res.est = rep.estimate;
                        res.se = rep.se;
                        res.covered = rep.ci_lower <= truth && truth <= rep.ci_upper;
                    } catch (const Error&) {
                        res.failed = true;
                    }
                }
            }
        };

        const int threads = std::max(1, cfg.threads);
        if (threads == 1 || M < 2 * threads) {
            run_range(0, M);
        } else {
            std::vector<std::thread> pool;
            const int chunk = (M + threads - 1) / threads;
            for (int t = 0; t < threads; ++t) {
                const int lo = t * chunk;
                const int hi = std::min(M, lo + chunk);
                if (lo < hi) pool.emplace_back(run_range, lo, hi);
            }
            for (auto& th : pool) th.join();
        }

        // Aggregate in replication order so sums do not depend on scheduling.
        for (int f = 0; f < F; ++f) {
            SimulationRow row;
            row.k = K;
            row.formulation = to_string(cfg.formulations[f]);
            double sum = 0.0, sum_se = 0.0;
            int used = 0, covered = 0;
            for (int r = 0; r < M; ++r) {
                const RepResult& res = results[static_cast<std::size_t>(r) * F + f];
                if (res.failed) {
                    ++row.n_failed;
                    continue;
                }
                sum += res.est;
                sum_se += res.se;
                covered += res.covered ? 1 : 0;
                ++used;
            }
            if (used > 0) {
                row.mean_est = sum / used;
                row.bias = row.mean_est - truth;
                double ss = 0.0;
                for (int r = 0; r < M; ++r) {
                    const RepResult& res = results[static_cast<std::size_t>(r) * F + f];
                    if (!res.failed) ss += (res.est - row.mean_est) * (res.est - row.mean_est);
                }
                row.emp_sd = used > 1 ? std::sqrt(ss / (used - 1)) : 0.0;
                row.mean_se = sum_se / used;
                row.coverage = static_cast<double>(covered) / used;
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

std::string table_csv(const SimulationTable& table) {
    std::string out = "K,formulation,mean_est,bias,emp_sd,mean_se,coverage,n_failed\n";
    char buf[256];
    for (const auto& r : table.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n", r.k,
                      r.formulation.c_str(), r.mean_est, r.bias, r.emp_sd, r.mean_se, r.coverage,
                      r.n_failed);
        out += buf;
    }
    return out;
}

void write_table_csv(const SimulationTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << table_csv(table);
}

}  // namespace spillover
