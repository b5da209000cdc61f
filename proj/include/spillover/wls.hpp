#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "spillover/design.hpp"
#include "spillover/estimands.hpp"
#include "spillover/network.hpp"

namespace spillover {

enum class Mode { ase, cse };
enum class Formulation { dyadic, receiver, sender };

const char* to_string(Mode m);
const char* to_string(Formulation f);

struct DemeanedCovariates {
    double x_bar;
    Eigen::VectorXd x_tilde;  // per unit
};

/// Weighted mean of the sender covariate over dyads and its removal from
/// every unit. Weights are normalized internally, so any scale works.
DemeanedCovariates demeaned_covariates(const EstimandWeights& w, const Eigen::VectorXd& X);

struct TransformedRegressors {
    Eigen::VectorXd z_star;   // Z - 1/2
    Eigen::VectorXd zx_star;  // Z*x_tilde - x_tilde/2
};

/// Orthogonalized causal regressors; the projection of (Z, Z x_tilde) onto
/// (1, x_tilde) under the estimator weights is the constant 1/2.
TransformedRegressors transformed_regressors(const Eigen::VectorXd& Z,
                                             const Eigen::VectorXd& x_tilde);

/// Receiver-side covariate aggregate: each receiver's conditionally-weighted
/// sender covariate, centered by its marginal-weighted mean. Requires the
/// weights to carry a decomposition.
Eigen::VectorXd aggregated_covariate(const EstimandWeights& w, const Eigen::VectorXd& X);

/// One WLS formulation materialized: outcome vector, diagonal weight vector,
/// design matrix, and per-cluster row ranges. Rows are laid out cluster by
/// cluster. Intended for small data and tests; production estimation uses
/// the streaming sufficient statistics below.
struct WlsSystem {
    Mode mode;
    Formulation formulation;
    Eigen::VectorXd y;
    Eigen::VectorXd b;
    Eigen::MatrixXd v;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> cluster_rows;  // [begin,end)
    double s_n = 1.0;
    double x_bar = 0.0;
};

/// Sufficient statistics of a WLS formulation: total and per-cluster
/// V'BV / V'BY blocks plus the arm totals. Everything the solver and the
/// cluster-robust variance need, in O(dim^2) memory per cluster.
struct WlsStats {
    Mode mode;
    Formulation formulation;
    int dim = 2;
    Eigen::MatrixXd a;     // V'BV
    Eigen::VectorXd bvec;  // V'BY
    std::vector<Eigen::MatrixXd> a_k;
    std::vector<Eigen::VectorXd> b_k;
    double treated_weight = 0.0;  // sum of B over treated-sender rows
    double control_weight = 0.0;
    double s_n = 1.0;
    double x_bar = 0.0;
};

/// z-independent covariate data of one formulation, built once per
/// estimation or enumeration run.
struct DesignContext {
    Mode mode = Mode::ase;
    Formulation f = Formulation::dyadic;
    double x_bar = 0.0;
    Eigen::VectorXd x_tilde;   // per unit; empty in ase mode
    Eigen::VectorXd x_dagger;  // per unit; receiver cse only
};

DesignContext make_design_context(Mode mode, Formulation f, const EstimandWeights& w,
                                  const Eigen::VectorXd* X);

/// Add cluster k's V'BV and V'BY contributions under assignment z_k, scaled
/// by `scale` (1 for realized data, an assignment probability inside the
/// enumeration oracle's expectation sums). Only the upper triangle of `a` is
/// written. Arm weights accumulate into treated/control when non-null.
void accumulate_cluster_moments(const DesignContext& ctx, const EstimandWeights& w, int k,
                                const Eigen::VectorXd& z_k, const Eigen::VectorXd& y_k,
                                const Eigen::VectorXd& wts, double scale, Eigen::MatrixXd& a,
                                Eigen::VectorXd& b, double* treated = nullptr,
                                double* control = nullptr);

/// Assemble one formulation. mode=cse requires X and rescaled weights;
/// mode=ase uses the weights as given. w_perturb_treated multiplies the
/// estimator weight W of treated senders in majority-treated clusters
/// (identity checks with injected faults only; leave at 1).
WlsSystem build_system(Mode mode, Formulation f, const ClusteredNetwork& net,
                       const EstimandWeights& w, const AssignmentDesign& alpha,
                       const AssignmentDesign& beta, const Eigen::VectorXd& Z,
                       const Eigen::VectorXd& Y, const Eigen::VectorXd* X = nullptr,
                       double w_perturb_treated = 1.0);

WlsStats build_stats(Mode mode, Formulation f, const ClusteredNetwork& net,
                     const EstimandWeights& w, const AssignmentDesign& alpha,
                     const AssignmentDesign& beta, const Eigen::VectorXd& Z,
                     const Eigen::VectorXd& Y, const Eigen::VectorXd* X = nullptr,
                     double w_perturb_treated = 1.0);

/// Reduce an explicit system to the same sufficient statistics. The two
/// construction paths must agree to float roundoff; tests assert it.
WlsStats reduce(const WlsSystem& sys);

/// Weighted normal-equations solution. Throws SingularDesign when the
/// reciprocal condition number of V'BV falls below rcond_min.
Eigen::VectorXd solve(const WlsStats& stats, double rcond_min = 1e-12);

/// Closed-form Hajek difference of weighted means, streaming over dyads.
/// Equals every WLS formulation's (scaled) treatment coefficient.
double hajek_ase(const ClusteredNetwork& net, const EstimandWeights& w,
                 const AssignmentDesign& alpha, const AssignmentDesign& beta,
                 const Eigen::VectorXd& Z, const Eigen::VectorXd& Y);

/// Dyad-weighted second moments used by the variance comparison.
double weighted_mean_sq_sender(const EstimandWeights& w, const Eigen::VectorXd& per_unit);
double weighted_mean_sq_receiver(const EstimandWeights& w, const Eigen::VectorXd& per_unit);

}  // namespace spillover
