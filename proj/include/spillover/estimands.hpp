#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "spillover/network.hpp"

namespace spillover {

/// Built-in weighting schemes: outward averages a sender's effect over its
/// receivers, inward averages the effects arriving at a receiver over its
/// senders, pairwise weighs every ordered within-cluster pair equally.
enum class WeightScheme { outward, inward, pairwise };

enum class DecomposeScheme { paper_builtin, generic };

/// Product split of the dyad weights: S_{ik,jk} = S_{ik|jk} S_jk
/// = S_{jk|ik} S_ik, entrywise. Marginals are per-unit (global indexing,
/// current weight scale); conditionals are per-entry and scale free.
struct Decomposition {
    DecomposeScheme scheme = DecomposeScheme::generic;
    std::vector<double> sender_marginal;    // S_jk
    std::vector<double> receiver_marginal;  // S_ik
    std::vector<std::vector<double>> recv_given_sender;  // S_{ik|jk}, aligned with entries
    std::vector<std::vector<double>> sender_given_recv;  // S_{jk|ik}, aligned with entries
    std::vector<double> s_tilde;  // per unit, sum_i S_{ik|jk}
};

/// Sparse nonnegative dyad weights S_{ik,jk} over ordered within-cluster
/// pairs (receiver ik, sender jk), with their normalizer S_N. Only strictly
/// positive weights are stored. Immutable after construction.
class EstimandWeights {
public:
    struct Entry {
        int receiver;
        int sender;
        double w;
    };

    EstimandWeights(std::vector<std::vector<Entry>> clusters, std::vector<int> cluster_sizes,
                    double s_n, std::string kind);

    int cluster_count() const { return static_cast<int>(clusters_.size()); }
    const std::vector<Entry>& cluster_entries(int k) const { return clusters_[k]; }
    int cluster_size(int k) const { return sizes_[k]; }
    int unit_offset(int k) const { return offsets_[k]; }
    int total_units() const { return total_units_; }

    double s_n() const { return s_n_; }
    /// Normalizer before rescaling; equals s_n() until rescale() is applied.
    double original_s_n() const { return original_s_n_; }
    bool rescaled() const { return rescaled_; }
    const std::string& kind() const { return kind_; }

    bool has_decomposition() const { return decomp_.has_value(); }
    const Decomposition& decomposition() const;

    double entry_sum() const;

    // Internal setters used by the builder functions in this module.
    void set_decomposition(Decomposition d) { decomp_ = std::move(d); }
    void set_scale_state(double original_s_n, bool rescaled) {
        original_s_n_ = original_s_n;
        rescaled_ = rescaled;
    }
    void set_s_n(double s) { s_n_ = s; }
    void set_kind(std::string kind) { kind_ = std::move(kind); }

private:
    std::vector<std::vector<Entry>> clusters_;
    std::vector<int> sizes_;
    std::vector<int> offsets_;
    int total_units_ = 0;
    double s_n_ = 0.0;
    double original_s_n_ = 0.0;
    bool rescaled_ = false;
    std::string kind_;
    std::optional<Decomposition> decomp_;
};

/// Construct the weights of one of the built-in estimands on a network.
/// direction_variant swaps the neighbor set used on the aggregated side:
/// outward then averages over the sender's in-neighbors, inward over the
/// receiver's out-neighbors. A paper-style decomposition is attached for
/// outward/inward, a row/column-normalized one for pairwise.
EstimandWeights build_weights(const ClusteredNetwork& net, WeightScheme scheme,
                              bool direction_variant = false);

/// Keep only entries whose sender has covariate value x; the new normalizer
/// is the sum of the retained weights. Throws EmptyConditional when no
/// positive-weight sender carries value x.
EstimandWeights conditional_restrict(const EstimandWeights& w, const Eigen::VectorXd& covariates,
                                     double x);

/// Recompute the product split. paper_builtin uses the scheme-specific split
/// where one is stated (outward, inward and its conditional restriction) and
/// falls back to the generic row/column-normalized split elsewhere.
EstimandWeights decompose(const EstimandWeights& w, DecomposeScheme scheme);

/// Divide all weights by S_N so entries sum to one; the original S_N is kept
/// as metadata because the conditional estimators re-apply it.
EstimandWeights rescale(const EstimandWeights& w);

/// Replace the recorded normalizer (the tau scale applied by estimators).
/// Used when a restricted estimand should inherit its base normalizer.
EstimandWeights with_normalizer(const EstimandWeights& w, double s_n);

/// Custom sparse weights, CSV "cluster_id,receiver,sender,weight" with a
/// header row; weights must be strictly positive. Generic decomposition.
EstimandWeights load_custom_weights(const std::string& path, const ClusteredNetwork& net);

}  // namespace spillover
