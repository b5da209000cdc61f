#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spillover {

/// One cluster of a partial-interference network: a fixed directed graph on
/// units 0..size-1. Edges never cross clusters.
struct Cluster {
    int size = 0;
    std::vector<std::pair<int, int>> edges;  // (src, dst), sorted, unique
    std::vector<std::vector<int>> out_adj;   // out_adj[i]: units i points to
    std::vector<std::vector<int>> in_adj;    // in_adj[i]: units pointing to i
};

/// K fixed directed within-cluster graphs. Immutable after construction;
/// safe to share across threads.
class ClusteredNetwork {
public:
    ClusteredNetwork() = default;

    /// Validates and builds. Throws InvalidEdge (out-of-range endpoint,
    /// self-loop, duplicate) or ClusterTooSmall (n_k < 2).
    static ClusteredNetwork build(const std::vector<int>& cluster_sizes,
                                  const std::vector<std::vector<std::pair<int, int>>>& edge_lists);

    int cluster_count() const { return static_cast<int>(clusters_.size()); }
    int total_units() const { return total_units_; }
    int unit_offset(int k) const { return offsets_[k]; }
    int global_index(int k, int i) const { return offsets_[k] + i; }
    const Cluster& cluster(int k) const { return clusters_[k]; }
    int max_cluster_size() const;
    std::int64_t total_edges() const;
    std::int64_t total_ordered_dyads() const;  // sum_k n_k (n_k - 1)

private:
    std::vector<Cluster> clusters_;
    std::vector<int> offsets_;
    int total_units_ = 0;
};

enum class GraphKind { er_directed, regular_circulant };

/// Random directed graphs, K clusters of n units each.
///  er_directed: every ordered pair (i,j), i != j, kept independently with
///  probability `param`; pairs are scanned in a fixed row-major order so a
///  seed pins the graph exactly.
///  regular_circulant: unit i points to (i+1..i+d) mod n; every unit has
///  out- and in-degree exactly d; the seed is unused.
ClusteredNetwork generate(GraphKind kind, int K, int n, double param, std::uint64_t seed);

struct DegreeStats {
    Eigen::VectorXi out_degree;  // per unit, global indexing
    Eigen::VectorXi in_degree;
    int n_out = 0;  // units with out-degree > 0
    int n_in = 0;   // units with in-degree > 0
    // Present when a covariate vector and value x were supplied: neighbor
    // counts restricted to neighbors with X = x, and the counts of units
    // with at least one such neighbor.
    std::optional<Eigen::VectorXi> out_degree_x;
    std::optional<Eigen::VectorXi> in_degree_x;
    int n_out_x = 0;
    int n_in_x = 0;
};

DegreeStats degree_stats(const ClusteredNetwork& net);
DegreeStats degree_stats(const ClusteredNetwork& net, const Eigen::VectorXd& covariates, double x);

/// Edge-list text format: header "cluster_id,src_unit,dst_unit", one record
/// per line, comma separated. Cluster sizes are inferred as one plus the
/// largest unit index seen per cluster unless explicit sizes are given.
ClusteredNetwork read_edge_list(const std::string& path,
                                const std::vector<int>* cluster_sizes = nullptr);
void write_edge_list(const ClusteredNetwork& net, const std::string& path);

}  // namespace spillover
