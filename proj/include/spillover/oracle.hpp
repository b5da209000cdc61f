#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spillover/design.hpp"
#include "spillover/estimands.hpp"
#include "spillover/network.hpp"
#include "spillover/wls.hpp"

namespace spillover {

enum class OutcomeModelKind { model1, model2, model3, custom };

/// A fixed potential-outcome world: deterministic map from a cluster's
/// treatment vector to its outcomes. Coefficients, shocks and covariates are
/// all frozen; treatment is the only source of randomness downstream.
///
/// model1: Y = zeta1 + zeta2 z_i + zeta3 sum_{h in-nbrs} z_h + eps
/// model2: model1 + zeta4 z_i sum_{h in-nbrs} z_h
/// model3: Y = zeta1 + zeta2 X_i + zeta3 z_i + zeta4 z_i X_i
///             + zeta5 sum_{h} z_h + zeta6 sum_{h} z_h X_h + eps
struct PotentialOutcomeModel {
    OutcomeModelKind kind = OutcomeModelKind::custom;
    Eigen::MatrixXd zetas;  // N x 6, unused columns zero
    Eigen::VectorXd eps;    // per-unit fixed shock
    Eigen::VectorXd X;      // per-unit covariate (zeros when unused)
    /// Sum exposures over in-neighbors (the default) or over the union of
    /// in- and out-neighbors.
    bool symmetric_exposure = false;
    /// Custom evaluator: outcomes of cluster k under z_k. Required for
    /// kind == custom; ignored otherwise.
    std::function<Eigen::VectorXd(int k, const Eigen::VectorXd& z_k)> custom_eval;
};

/// Outcomes of cluster k under assignment z_k.
Eigen::VectorXd evaluate_cluster(const PotentialOutcomeModel& model, const ClusteredNetwork& net,
                                 int k, const Eigen::VectorXd& z_k);

/// Structural coefficients (theta3, theta4) of one dyad: the sender-treatment
/// and sender-treatment-by-covariate slopes of the dyadic average potential
/// outcome. Analytic for the built-in models; custom models must supply one.
using ThetaMap = std::function<std::pair<double, double>(int k, int i, int j)>;

ThetaMap theta_map(const PotentialOutcomeModel& model, const ClusteredNetwork& net,
                   const AssignmentDesign& alpha);

/// Exact dyadic average potential outcomes by enumerating the 2^(n_k - 1)
/// completions: apo[k](i, 2 j + z) is unit i's average outcome with unit j
/// held at z. Clusters larger than the cap throw ClusterTooLargeForOracle.
struct ApoTable {
    std::vector<Eigen::MatrixXd> apo;
    double value(int k, int i, int j, int z) const { return apo[k](i, 2 * j + z); }
    double pairwise_effect(int k, int i, int j) const {
        return apo[k](i, 2 * j + 1) - apo[k](i, 2 * j);
    }
};

ApoTable exact_apo(const PotentialOutcomeModel& model, const ClusteredNetwork& net,
                   const AssignmentDesign& alpha, int cap = 14);

/// Weighted sum of exact pairwise effects. Without x: sum of S times the
/// effect (the average estimand). With x: the weights are restricted to
/// senders at x, renormalized, and scaled back by the unrestricted S_N, the
/// target of the parametric conditional estimators.
double exact_estimand(const PotentialOutcomeModel& model, const ClusteredNetwork& net,
                      const EstimandWeights& w, const AssignmentDesign& alpha,
                      std::optional<double> x = std::nullopt, int cap = 14);

struct ExactMoments {
    Eigen::MatrixXd a;       // E[V'BV]
    Eigen::VectorXd b;       // E[V'BY]
    Eigen::VectorXd beta_r;  // a^-1 b
};

/// Expected WLS moments by full enumeration of cluster assignments under
/// beta. cse mode takes rescaled weights and covariates from the model.
ExactMoments exact_moments(const PotentialOutcomeModel& model, const ClusteredNetwork& net,
                           const EstimandWeights& w, const AssignmentDesign& alpha,
                           const AssignmentDesign& beta, Mode mode, Formulation f, int cap = 14,
                           double w_perturb_treated = 1.0);

/// beta_r from its closed forms in the dyadic average potential outcomes,
/// independent of the moment enumeration (valid under a full-support beta).
Eigen::VectorXd beta_r_closed_form(const PotentialOutcomeModel& model,
                                   const ClusteredNetwork& net, const EstimandWeights& w,
                                   const AssignmentDesign& alpha, Mode mode, Formulation f,
                                   int cap = 14);

/// max_column |E[V'B (Y - V beta_r)]| with beta_r from the closed forms and
/// the expectation from enumeration; exact algebra puts it at zero.
double residual_moment_check(const PotentialOutcomeModel& model, const ClusteredNetwork& net,
                             const EstimandWeights& w, const AssignmentDesign& alpha,
                             const AssignmentDesign& beta, Mode mode, Formulation f, int cap = 14,
                             double w_perturb_treated = 1.0);

struct PopulationQuantities {
    double beta_p3 = 0.0;
    double beta_p4_ds = 0.0;
    double beta_p4_r = 0.0;
};

/// Population-weighted coefficient averages: beta_p3 weights theta3 +
/// theta4 X_bar by the rescaled dyad weights; the slope averages weight
/// theta4 by squared demeaned sender covariates (dyadic/sender) or squared
/// aggregated receiver covariates (receiver).
PopulationQuantities population_quantities(const ThetaMap& theta, const EstimandWeights& w,
                                           const Eigen::VectorXd& X);

/// Magnitudes of the heterogeneity and covariate-independence conditions the
/// conditional estimators rely on; reported, never asserted.
std::map<std::string, double> assumption_diagnostics(const ThetaMap& theta,
                                                     const EstimandWeights& w,
                                                     const Eigen::VectorXd& X, double x);

struct OracleTruth {
    double tau_ase = 0.0;
    std::map<double, double> tau_cse;
    std::map<std::string, Eigen::VectorXd> beta_r;  // keyed by formulation name
    PopulationQuantities beta_p;
    std::map<std::string, double> diagnostics;
    double residual_moment_max = 0.0;
};

std::string oracle_report_json(const OracleTruth& t);

}  // namespace spillover
