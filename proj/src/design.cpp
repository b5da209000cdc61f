#include "spillover/design.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "spillover/errors.hpp"
#include "spillover/rng.hpp"

namespace spillover {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_choose(int n, int m) { return std::lgamma(n + 1) - std::lgamma(m + 1) - std::lgamma(n - m + 1); }

int count_treated(const Eigen::VectorXd& z) {
    int c = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double v = z[i];
        if (v == 1.0)
            ++c;
        else if (v != 0.0)
            throw BadParam("treatment entries must be 0 or 1");
    }
    return c;
}

}  // namespace

AssignmentDesign AssignmentDesign::bernoulli(double p) {
    if (!(p > 0.0 && p < 1.0)) throw BadParam("bernoulli design needs p in (0,1)");
    AssignmentDesign d;
    d.kind_ = Kind::iid_bernoulli;
    d.p_ = p;
    return d;
}

AssignmentDesign AssignmentDesign::complete_randomization(int m) {
    if (m <= 0) throw BadParam("complete randomization needs m > 0");
    AssignmentDesign d;
    d.kind_ = Kind::complete_randomization;
    d.m_ = {m};
    return d;
}

AssignmentDesign AssignmentDesign::complete_randomization(std::vector<int> m_per_cluster) {
    if (m_per_cluster.empty()) throw BadParam("empty treated-counts vector");
    for (int m : m_per_cluster)
        if (m <= 0) throw BadParam("complete randomization needs m > 0");
    AssignmentDesign d;
    d.kind_ = Kind::complete_randomization;
    d.m_ = std::move(m_per_cluster);
    return d;
}

int AssignmentDesign::treated_count(int k) const {
    if (m_.size() == 1) return m_[0];
    if (k < 0 || k >= static_cast<int>(m_.size()))
        throw BadParam("no treated count for cluster " + std::to_string(k));
    return m_[k];
}

double AssignmentDesign::log_prob_cluster_counts(int k, int n, int treated) const {
    if (kind_ == Kind::iid_bernoulli)
        return treated * std::log(p_) + (n - treated) * std::log1p(-p_);
    const int m = treated_count(k);
    if (m >= n) throw BadParam("complete randomization needs 0 < m_k < n_k");
    return treated == m ? -log_choose(n, m) : kNegInf;
}

double AssignmentDesign::log_prob_excluding_counts(int k, int n, int treated_excl) const {
    if (kind_ == Kind::iid_bernoulli)
        return treated_excl * std::log(p_) + (n - 1 - treated_excl) * std::log1p(-p_);
    const int m = treated_count(k);
    if (m >= n) throw BadParam("complete randomization needs 0 < m_k < n_k");
    // The excluded unit's assignment completes the count to m either way.
    const int hits = (treated_excl == m ? 1 : 0) + (treated_excl == m - 1 ? 1 : 0);
    return hits == 0 ? kNegInf : std::log(static_cast<double>(hits)) - log_choose(n, m);
}

double AssignmentDesign::marginal_treated_prob(int k, int n) const {
    if (kind_ == Kind::iid_bernoulli) return p_;
    return static_cast<double>(treated_count(k)) / n;
}

double AssignmentDesign::log_prob_cluster(int k, const Eigen::VectorXd& z) const {
    return log_prob_cluster_counts(k, static_cast<int>(z.size()), count_treated(z));
}

double AssignmentDesign::prob_cluster(int k, const Eigen::VectorXd& z) const {
    return std::exp(log_prob_cluster(k, z));
}

double AssignmentDesign::prob_excluding(int k, int j, const Eigen::VectorXd& z_minus_j) const {
    const int n = static_cast<int>(z_minus_j.size()) + 1;
    if (j < 0 || j >= n) throw LengthMismatch("unit index out of range for excluding-marginal");
    return std::exp(log_prob_excluding_counts(k, n, count_treated(z_minus_j)));
}

Eigen::VectorXd AssignmentDesign::sample(const ClusteredNetwork& net, RngStream& rng) const {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(net.total_units());
    for (int k = 0; k < net.cluster_count(); ++k) {
        const int n = net.cluster(k).size;
        const int off = net.unit_offset(k);
        if (kind_ == Kind::iid_bernoulli) {
            for (int i = 0; i < n; ++i) z[off + i] = rng.bernoulli(p_) ? 1.0 : 0.0;
        } else {
            const int m = treated_count(k);
            if (m >= n) throw BadParam("complete randomization needs 0 < m_k < n_k");
            std::vector<int> idx(n);
            std::iota(idx.begin(), idx.end(), 0);
            for (int i = 0; i < m; ++i)
                std::swap(idx[i], idx[i + static_cast<int>(rng.uniform_int(n - i))]);
            for (int i = 0; i < m; ++i) z[off + idx[i]] = 1.0;
        }
    }
    return z;
}

double estimator_weight(const AssignmentDesign& alpha, const AssignmentDesign& beta, int k, int j,
                        const Eigen::VectorXd& z_k) {
    const int n = static_cast<int>(z_k.size());
    if (j < 0 || j >= n) throw LengthMismatch("sender index out of range");
    const int treated = count_treated(z_k);
    const double log_beta = beta.log_prob_cluster_counts(k, n, treated);
    if (log_beta == -std::numeric_limits<double>::infinity())
        throw ZeroRealizedProbability("realized assignment has zero probability under beta");
    const int treated_excl = treated - (z_k[j] == 1.0 ? 1 : 0);
    const double log_alpha = alpha.log_prob_excluding_counts(k, n, treated_excl);
    return std::exp(log_alpha - log_beta);
}

Eigen::VectorXd estimator_weights_cluster(const AssignmentDesign& alpha,
                                          const AssignmentDesign& beta, int k,
                                          const Eigen::VectorXd& z_k) {
    const int n = static_cast<int>(z_k.size());
    const int treated = count_treated(z_k);
    const double log_beta = beta.log_prob_cluster_counts(k, n, treated);
    if (log_beta == -std::numeric_limits<double>::infinity())
        throw ZeroRealizedProbability("realized assignment has zero probability under beta");
    // W depends on z only through z_j and the cluster count.
    const double w_treated = std::exp(alpha.log_prob_excluding_counts(k, n, treated - 1) - log_beta);
    const double w_control = std::exp(alpha.log_prob_excluding_counts(k, n, treated) - log_beta);
    Eigen::VectorXd w(n);
    for (int j = 0; j < n; ++j) w[j] = z_k[j] == 1.0 ? w_treated : w_control;
    return w;
}

bool overlap_holds(const AssignmentDesign& alpha, const AssignmentDesign& beta, int k, int n,
                   int enumeration_cap) {
    if (n > enumeration_cap)
        throw ClusterTooLargeForOracle("overlap check capped at n_k <= " +
                                       std::to_string(enumeration_cap));
    for (int treated = 0; treated <= n; ++treated) {
        const bool pos_alpha =
            alpha.log_prob_cluster_counts(k, n, treated) > -std::numeric_limits<double>::infinity();
        const bool pos_beta =
            beta.log_prob_cluster_counts(k, n, treated) > -std::numeric_limits<double>::infinity();
        if (pos_alpha && !pos_beta) return false;
    }
    return true;
}

}  // namespace spillover
