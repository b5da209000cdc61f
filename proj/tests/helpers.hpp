#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "spillover/design.hpp"
#include "spillover/estimands.hpp"
#include "spillover/network.hpp"
#include "spillover/oracle.hpp"
#include "spillover/rng.hpp"

namespace testutil {

inline bool rel_close(double a, double b, double tol = 1e-9) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

struct Instance {
    spillover::ClusteredNetwork net;
    spillover::EstimandWeights weights;
    spillover::AssignmentDesign alpha;
    spillover::AssignmentDesign beta;
    Eigen::VectorXd Z, Y, X;
    spillover::PotentialOutcomeModel model;
};

/// Random small instance with both arms and both covariate values present on
/// the weight support. Outcomes are plain noise; the model is a random
/// linear-in-z world for oracle checks.
inline Instance random_instance(std::uint64_t seed, int idx, int max_n = 8, int max_k = 3) {
    using namespace spillover;
    static const double probs[3] = {0.3, 0.5, 0.22};
    static const WeightScheme schemes[3] = {WeightScheme::outward, WeightScheme::inward,
                                            WeightScheme::pairwise};
    for (std::uint64_t attempt = 0;; ++attempt) {
        RngStream rng(seed, (static_cast<std::uint64_t>(idx) << 20) + attempt);
        const int K = 1 + static_cast<int>(rng.uniform_int(max_k));
        std::vector<int> sizes(K);
        std::vector<std::vector<std::pair<int, int>>> edges(K);
        for (int k = 0; k < K; ++k) {
            sizes[k] = 2 + static_cast<int>(rng.uniform_int(max_n - 1));
            for (int i = 0; i < sizes[k]; ++i)
                for (int j = 0; j < sizes[k]; ++j)
                    if (i != j && rng.bernoulli(0.5)) edges[k].emplace_back(i, j);
        }
        Instance inst{ClusteredNetwork(),
                      EstimandWeights({}, {}, 1.0, ""),
                      AssignmentDesign::bernoulli(0.5),
                      AssignmentDesign::bernoulli(0.5),
                      {}, {}, {}, {}};
        try {
            inst.net = ClusteredNetwork::build(sizes, edges);
            inst.weights = build_weights(inst.net, schemes[idx % 3], false);
        } catch (const Error&) {
            continue;
        }
        const double p = probs[idx % 3];
        inst.alpha = AssignmentDesign::bernoulli(p);
        inst.beta = AssignmentDesign::bernoulli(p);
        const int N = inst.net.total_units();
        inst.Z.resize(N);
        inst.Y.resize(N);
        inst.X.resize(N);
        for (int g = 0; g < N; ++g) {
            inst.Z[g] = rng.bernoulli(p) ? 1.0 : 0.0;
            inst.Y[g] = rng.normal();
            inst.X[g] = rng.bernoulli(0.5) ? 1.0 : 0.0;
        }
        double t = 0, c = 0, x1 = 0, x0 = 0;
        for (int k = 0; k < inst.weights.cluster_count(); ++k) {
            const int off = inst.weights.unit_offset(k);
            for (const auto& e : inst.weights.cluster_entries(k)) {
                (inst.Z[off + e.sender] == 1.0 ? t : c) += e.w;
                (inst.X[off + e.sender] == 1.0 ? x1 : x0) += e.w;
            }
        }
        if (t == 0 || c == 0 || x1 == 0 || x0 == 0) continue;
        try {
            const EstimandWeights wr = rescale(inst.weights);
            solve(build_stats(Mode::cse, Formulation::dyadic, inst.net, wr, inst.alpha, inst.beta,
                              inst.Z, inst.Y, &inst.X));
            solve(build_stats(Mode::cse, Formulation::receiver, inst.net, wr, inst.alpha,
                              inst.beta, inst.Z, inst.Y, &inst.X));
        } catch (const Error&) {
            continue;
        }
        inst.model.kind = OutcomeModelKind::model2;
        inst.model.zetas = Eigen::MatrixXd::Zero(N, 6);
        inst.model.eps = Eigen::VectorXd::Zero(N);
        inst.model.X = inst.X;
        for (int g = 0; g < N; ++g) {
            inst.model.zetas(g, 0) = rng.normal(0.5, 1.0);
            inst.model.zetas(g, 1) = rng.normal(1.0, 0.5);
            inst.model.zetas(g, 2) = rng.normal(0.8, 0.3);
            inst.model.zetas(g, 3) = rng.normal(0.4, 0.2);
            inst.model.eps[g] = rng.normal(0.0, 0.3);
        }
        return inst;
    }
}

}  // namespace testutil
