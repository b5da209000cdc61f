#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>

#include "spillover/wls.hpp"

namespace spillover {

/// Point estimate with its cluster-robust uncertainty. sigma is the sandwich
/// for the raw coefficient vector; the estimate's variance applies the
/// contrast and the S_N factor on top, so sigma itself stays unscaled.
struct EstimateReport {
    double estimate = 0.0;
    Eigen::VectorXd beta;
    Eigen::MatrixXd sigma;
    double se = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    double level = 0.95;
    Mode mode = Mode::ase;
    Formulation formulation = Formulation::dyadic;
    std::string estimand;
    std::optional<double> x;
    std::map<std::string, double> diagnostics;
    std::map<std::string, std::string> notes;
};

/// Per-cluster score outer products: Gamma = sum_k g_k g_k' with
/// g_k = V_k' B_k (Y_k - V_k beta).
Eigen::MatrixXd cluster_gamma(const WlsStats& stats, const Eigen::VectorXd& beta_hat);

/// Sandwich (V'BV)^-1 Gamma (V'BV)^-1; symmetric positive semidefinite.
Eigen::MatrixXd cluster_robust_sigma(const WlsStats& stats, const Eigen::VectorXd& beta_hat,
                                     double rcond_min = 1e-12);

/// Normal-quantile interval around the estimate.
std::pair<double, double> confidence_interval(double estimate, double variance, double level);

/// Signed comparison of the dyadic/sender and receiver conservative
/// variances for a conditional estimate at x_tilde = x - X_bar. Negative
/// means the dyadic/sender variance is the smaller one at this x.
/// gamma_ds and gamma_r are the 4x4 score matrices of the two systems;
/// x_tilde_sq_ave and x_dagger_sq_ave are the dyad-weighted mean squares of
/// the demeaned and aggregated covariates.
double variance_gap(const Eigen::MatrixXd& gamma_ds, const Eigen::MatrixXd& gamma_r,
                    double x_tilde, double x_tilde_sq_ave, double x_dagger_sq_ave);

/// Full estimation pass for one formulation: solve, sandwich, interval.
/// mode=cse requires X and the conditioning value x; weights are rescaled
/// internally for cse and used as-is for ase.
EstimateReport estimate(Mode mode, Formulation f, const ClusteredNetwork& net,
                        const EstimandWeights& w, const AssignmentDesign& alpha,
                        const AssignmentDesign& beta, const Eigen::VectorXd& Z,
                        const Eigen::VectorXd& Y, const Eigen::VectorXd* X = nullptr,
                        std::optional<double> x = std::nullopt, double level = 0.95);

}  // namespace spillover
