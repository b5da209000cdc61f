#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spillover/design.hpp"
#include "spillover/estimands.hpp"
#include "spillover/network.hpp"
#include "spillover/oracle.hpp"

namespace spillover {

struct NetworkSpec {
    GraphKind kind = GraphKind::er_directed;
    int n = 20;
    double param = 0.2;  // edge probability or circulant degree
};

/// Design-based Monte Carlo configuration: one fixed world per K (graph,
/// coefficients, shocks, covariates all drawn once from the seed), treatment
/// resampled every replication.
struct SimConfig {
    NetworkSpec network;
    OutcomeModelKind model = OutcomeModelKind::model2;
    WeightScheme estimand = WeightScheme::outward;
    bool direction_variant = false;
    bool cse = false;
    double x = 1.0;
    double x_prob = 0.5;  // P(X = 1) for the binary covariate draw
    bool symmetric_interference = false;  // exposure sums over in+out neighbors
    std::vector<Formulation> formulations = {Formulation::dyadic, Formulation::sender,
                                             Formulation::receiver};
    AssignmentDesign alpha = AssignmentDesign::bernoulli(0.5);
    AssignmentDesign beta = AssignmentDesign::bernoulli(0.5);
    std::vector<int> k_values = {50, 200, 500};
    int replications = 500;
    std::uint64_t seed = 1;
    double level = 0.95;
    int threads = 1;
};

struct World {
    ClusteredNetwork net;
    PotentialOutcomeModel model;
};

/// Draw the fixed world for one K. Draw order is pinned: graph, then
/// coefficients unit by unit, then shocks, then covariates, each from its
/// own stream, so worlds are identical across runs and thread counts.
World make_world(const SimConfig& cfg, int K);

/// Outcomes for the whole network under assignment Z.
Eigen::VectorXd evaluate_outcomes(const PotentialOutcomeModel& model, const ClusteredNetwork& net,
                                  const Eigen::VectorXd& Z);

/// Exact estimand value in a fixed world, using the linearity of the
/// built-in models in z: the pairwise effect of sender j on receiver i is
/// zeta3_i (+ zeta4_i times the receiver's own-treatment probability) on
/// edges, or zeta5 + zeta6 X_j for the covariate model.
double analytic_truth(const SimConfig& cfg, const World& world, const EstimandWeights& w);

/// Byte hash of a world; replications must leave it untouched.
std::uint64_t world_hash(const World& world);

struct SimulationRow {
    int k = 0;
    std::string formulation;
    double mean_est = 0.0;
    double bias = 0.0;
    double emp_sd = 0.0;
    double mean_se = 0.0;
    double coverage = 0.0;
    int n_failed = 0;
};

struct SimulationTable {
    std::vector<SimulationRow> rows;
};

/// Run the configured grid. Replication r draws from the stream (seed, r),
/// so any thread schedule gives identical tables; failed replications are
/// counted and excluded from the aggregates.
SimulationTable monte_carlo(const SimConfig& cfg);

std::string table_csv(const SimulationTable& table);
void write_table_csv(const SimulationTable& table, const std::string& path);

}  // namespace spillover
