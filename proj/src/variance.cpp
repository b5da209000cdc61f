#include "spillover/variance.hpp"

#include <cmath>

#include "spillover/errors.hpp"
#include "spillover/rng.hpp"

namespace spillover {

Eigen::MatrixXd cluster_gamma(const WlsStats& stats, const Eigen::VectorXd& beta_hat) {
    const int dim = stats.dim;
    Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t k = 0; k < stats.a_k.size(); ++k) {
        const Eigen::VectorXd g = stats.b_k[k] - stats.a_k[k] * beta_hat;
        gamma.noalias() += g * g.transpose();
    }
    return gamma;
}

Eigen::MatrixXd cluster_robust_sigma(const WlsStats& stats, const Eigen::VectorXd& beta_hat,
                                     double rcond_min) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(stats.a);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double lmax = ev.cwiseAbs().maxCoeff();
    if (!(lmax > 0.0) || ev.cwiseAbs().minCoeff() / lmax < rcond_min)
        throw SingularDesign("V'BV is singular; no variance available");
    const Eigen::MatrixXd inv =
        es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    const Eigen::MatrixXd gamma = cluster_gamma(stats, beta_hat);
    Eigen::MatrixXd sigma = inv * gamma * inv;
    return 0.5 * (sigma + sigma.transpose());
}

std::pair<double, double> confidence_interval(double estimate, double variance, double level) {
    if (variance < 0.0) throw BadParam("variance must be nonnegative");
    if (!(level > 0.0 && level < 1.0)) throw BadParam("level must lie in (0,1)");
    const double z = normal_quantile(0.5 + level / 2.0);
    const double half = z * std::sqrt(variance);
    return {estimate - half, estimate + half};
}

double variance_gap(const Eigen::MatrixXd& gamma_ds, const Eigen::MatrixXd& gamma_r,
                    double x_tilde, double x_tilde_sq_ave, double x_dagger_sq_ave) {
    if (gamma_ds.rows() != 4 || gamma_ds.cols() != 4 || gamma_r.rows() != 4 || gamma_r.cols() != 4)
        throw LengthMismatch("variance_gap expects 4x4 score matrices");
    const double it = 1.0 / x_tilde_sq_ave;
    const double id = 1.0 / x_dagger_sq_ave;
    const double b_const =
        4.0 * gamma_ds(2, 2) - (gamma_r(0, 0) - 4.0 * gamma_r(0, 2) + 4.0 * gamma_r(2, 2));
    const double b_lin =
        4.0 * it * gamma_ds(3, 2) -
        id * (gamma_r(1, 0) - 2.0 * gamma_r(1, 2) - 2.0 * gamma_r(0, 3) + 4.0 * gamma_r(2, 3));
    const double b_quad =
        4.0 * it * it * gamma_ds(3, 3) -
        id * id * (gamma_r(1, 1) - 4.0 * gamma_r(1, 3) + 4.0 * gamma_r(3, 3));
    return b_const + 2.0 * x_tilde * b_lin + x_tilde * x_tilde * b_quad;
}

EstimateReport estimate(Mode mode, Formulation f, const ClusteredNetwork& net,
                        const EstimandWeights& w, const AssignmentDesign& alpha,
                        const AssignmentDesign& beta, const Eigen::VectorXd& Z,
                        const Eigen::VectorXd& Y, const Eigen::VectorXd* X,
                        std::optional<double> x, double level) {
    EstimateReport rep;
    rep.mode = mode;
    rep.formulation = f;
    rep.estimand = w.kind();
    rep.level = level;

    WlsStats stats;
    double tau_scale;
    if (mode == Mode::cse) {
        if (!x.has_value()) throw MissingCovariate("cse mode needs the conditioning value x");
        std::optional<EstimandWeights> storage;
        const EstimandWeights* wr = &w;
        if (!w.rescaled()) {
            storage = rescale(w);
            wr = &*storage;
        }
        tau_scale = wr->original_s_n();
        stats = build_stats(mode, f, net, *wr, alpha, beta, Z, Y, X);
        rep.x = x;
        if (wr->has_decomposition())
            rep.notes["x_dagger_split"] =
                wr->decomposition().scheme == DecomposeScheme::paper_builtin ? "paper_builtin"
                                                                             : "generic";
    } else {
        tau_scale = w.s_n();
        stats = build_stats(mode, f, net, w, alpha, beta, Z, Y);
    }

    const Eigen::VectorXd beta_hat = solve(stats);
    rep.beta = beta_hat;
    rep.sigma = cluster_robust_sigma(stats, beta_hat);

    Eigen::VectorXd contrast = Eigen::VectorXd::Zero(stats.dim);
    if (mode == Mode::ase) {
        contrast[1] = 1.0;
        rep.estimate = tau_scale * beta_hat[1];
    } else {
        const double xt = *x - stats.x_bar;
        contrast[2] = 1.0;
        contrast[3] = xt;
        rep.estimate = tau_scale * (beta_hat[2] + beta_hat[3] * xt);
        rep.diagnostics["x_tilde"] = xt;
    }
    const double var = tau_scale * tau_scale * contrast.dot(rep.sigma * contrast);
    rep.se = std::sqrt(std::max(0.0, var));
    std::tie(rep.ci_lower, rep.ci_upper) = confidence_interval(rep.estimate, var, level);
    rep.diagnostics["s_n"] = tau_scale;
    rep.diagnostics["x_bar"] = stats.x_bar;
    rep.diagnostics["treated_weight"] = stats.treated_weight;
    rep.diagnostics["control_weight"] = stats.control_weight;
    rep.diagnostics["n_clusters"] = static_cast<double>(stats.a_k.size());
    return rep;
}

}  // namespace spillover
