#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "spillover/network.hpp"

namespace spillover {

class RngStream;

/// A randomization mechanism over within-cluster treatment vectors, with
/// exact probability evaluation. Two built-in kinds:
///  iid_bernoulli: every unit treated independently with probability p;
///  complete_randomization: exactly m_k of the n_k units treated, uniformly.
/// Probabilities are evaluated in log space; the importance ratio W is formed
/// from log differences. Immutable; queries are pure.
class AssignmentDesign {
public:
    enum class Kind { iid_bernoulli, complete_randomization };

    static AssignmentDesign bernoulli(double p);
    /// Scalar m applied to every cluster.
    static AssignmentDesign complete_randomization(int m);
    /// Per-cluster treated counts.
    static AssignmentDesign complete_randomization(std::vector<int> m_per_cluster);

    Kind kind() const { return kind_; }
    double p() const { return p_; }
    int treated_count(int k) const;

    /// P(Z_k = z) for cluster k. Entries of z must be 0 or 1.
    double prob_cluster(int k, const Eigen::VectorXd& z) const;
    double log_prob_cluster(int k, const Eigen::VectorXd& z) const;

    /// Marginal P(Z_{-jk} = z_minus_j) for cluster k; z_minus_j has length
    /// n_k - 1 (unit j removed).
    double prob_excluding(int k, int j, const Eigen::VectorXd& z_minus_j) const;

    /// Count-based kernels used by the estimators and the enumeration oracle:
    /// probabilities depend on z only through the number of treated units.
    double log_prob_cluster_counts(int k, int n, int treated) const;
    /// log P(Z_{-jk}) where the n-1 retained units contain `treated_excl` ones.
    double log_prob_excluding_counts(int k, int n, int treated_excl) const;

    /// P(Z_ik = 1) for a unit in cluster k of size n.
    double marginal_treated_prob(int k, int n) const;

    /// One treatment draw for the whole network; clusters are sampled
    /// independently in index order.
    Eigen::VectorXd sample(const ClusteredNetwork& net, RngStream& rng) const;

private:
    AssignmentDesign() = default;
    Kind kind_ = Kind::iid_bernoulli;
    double p_ = 0.5;
    std::vector<int> m_;  // per-cluster counts; size 1 means scalar broadcast
};

/// W_jk(Z_k) = P_alpha(Z_{-jk}) / P_beta(Z_k); throws ZeroRealizedProbability
/// when the realized assignment has zero probability under beta.
double estimator_weight(const AssignmentDesign& alpha, const AssignmentDesign& beta, int k, int j,
                        const Eigen::VectorXd& z_k);

/// All W_jk for one cluster in one pass (counts computed once).
Eigen::VectorXd estimator_weights_cluster(const AssignmentDesign& alpha,
                                          const AssignmentDesign& beta, int k,
                                          const Eigen::VectorXd& z_k);

/// Assumption-2 support check by enumeration: every assignment with positive
/// alpha-probability has positive beta-probability. Cluster size capped.
bool overlap_holds(const AssignmentDesign& alpha, const AssignmentDesign& beta, int k, int n,
                   int enumeration_cap = 20);

}  // namespace spillover
