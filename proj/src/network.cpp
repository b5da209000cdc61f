#include "spillover/network.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "spillover/errors.hpp"
#include "spillover/rng.hpp"

namespace spillover {

ClusteredNetwork ClusteredNetwork::build(
    const std::vector<int>& cluster_sizes,
    const std::vector<std::vector<std::pair<int, int>>>& edge_lists) {
    if (cluster_sizes.size() != edge_lists.size())
        throw LengthMismatch("cluster_sizes and edge_lists length differ");
    ClusteredNetwork net;
    net.clusters_.resize(cluster_sizes.size());
    net.offsets_.resize(cluster_sizes.size());
    int offset = 0;
    for (std::size_t k = 0; k < cluster_sizes.size(); ++k) {
        const int n = cluster_sizes[k];
        if (n < 2)
            throw ClusterTooSmall("cluster " + std::to_string(k) + " has size " +
                                  std::to_string(n) + "; need n_k >= 2");
        Cluster& c = net.clusters_[k];
        c.size = n;
        c.edges = edge_lists[k];
        std::sort(c.edges.begin(), c.edges.end());
        for (std::size_t e = 0; e < c.edges.size(); ++e) {
            auto [src, dst] = c.edges[e];
            if (src < 0 || src >= n || dst < 0 || dst >= n)
                throw InvalidEdge("edge (" + std::to_string(src) + "," + std::to_string(dst) +
                                  ") out of range in cluster " + std::to_string(k));
            if (src == dst)
                throw InvalidEdge("self-loop at unit " + std::to_string(src) + " in cluster " +
                                  std::to_string(k));
            if (e > 0 && c.edges[e] == c.edges[e - 1])
                throw InvalidEdge("duplicate edge (" + std::to_string(src) + "," +
                                  std::to_string(dst) + ") in cluster " + std::to_string(k));
        }
        c.out_adj.assign(n, {});
        c.in_adj.assign(n, {});
        for (auto [src, dst] : c.edges) {
            c.out_adj[src].push_back(dst);
            c.in_adj[dst].push_back(src);
        }
        net.offsets_[k] = offset;
        offset += n;
    }
    net.total_units_ = offset;
    return net;
}

int ClusteredNetwork::max_cluster_size() const {
    int m = 0;
    for (const auto& c : clusters_) m = std::max(m, c.size);
    return m;
}

std::int64_t ClusteredNetwork::total_edges() const {
    std::int64_t m = 0;
    for (const auto& c : clusters_) m += static_cast<std::int64_t>(c.edges.size());
    return m;
}

std::int64_t ClusteredNetwork::total_ordered_dyads() const {
    std::int64_t m = 0;
    for (const auto& c : clusters_) m += static_cast<std::int64_t>(c.size) * (c.size - 1);
    return m;
}

ClusteredNetwork generate(GraphKind kind, int K, int n, double param, std::uint64_t seed) {
    if (K < 1) throw BadParam("K must be positive");
    std::vector<int> sizes(K, n);
    std::vector<std::vector<std::pair<int, int>>> edges(K);
    switch (kind) {
        case GraphKind::er_directed: {
            if (!(param > 0.0 && param <= 1.0))
                throw BadParam("er_directed needs edge probability in (0,1]");
            for (int k = 0; k < K; ++k) {
                RngStream rng(seed, static_cast<std::uint64_t>(k));
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        if (i != j && rng.bernoulli(param)) edges[k].emplace_back(i, j);
            }
            break;
        }
        case GraphKind::regular_circulant: {
            const int d = static_cast<int>(param);
            if (d <= 0 || d >= n || static_cast<double>(d) != param)
                throw BadParam("regular_circulant needs integer degree d with 0 < d < n");
            for (int k = 0; k < K; ++k)
                for (int i = 0; i < n; ++i)
                    for (int s = 1; s <= d; ++s) edges[k].emplace_back(i, (i + s) % n);
            break;
        }
    }
    return ClusteredNetwork::build(sizes, edges);
}

DegreeStats degree_stats(const ClusteredNetwork& net) {
    DegreeStats st;
    const int N = net.total_units();
    st.out_degree = Eigen::VectorXi::Zero(N);
    st.in_degree = Eigen::VectorXi::Zero(N);
    for (int k = 0; k < net.cluster_count(); ++k) {
        const Cluster& c = net.cluster(k);
        const int off = net.unit_offset(k);
        for (int i = 0; i < c.size; ++i) {
            st.out_degree[off + i] = static_cast<int>(c.out_adj[i].size());
            st.in_degree[off + i] = static_cast<int>(c.in_adj[i].size());
        }
    }
    st.n_out = static_cast<int>((st.out_degree.array() > 0).count());
    st.n_in = static_cast<int>((st.in_degree.array() > 0).count());
    return st;
}

DegreeStats degree_stats(const ClusteredNetwork& net, const Eigen::VectorXd& covariates, double x) {
    if (covariates.size() != net.total_units())
        throw LengthMismatch("covariate vector must have one value per unit");
    DegreeStats st = degree_stats(net);
    const int N = net.total_units();
    Eigen::VectorXi outx = Eigen::VectorXi::Zero(N);
    Eigen::VectorXi inx = Eigen::VectorXi::Zero(N);
    for (int k = 0; k < net.cluster_count(); ++k) {
        const Cluster& c = net.cluster(k);
        const int off = net.unit_offset(k);
        for (auto [src, dst] : c.edges) {
            if (covariates[off + dst] == x) ++outx[off + src];
            if (covariates[off + src] == x) ++inx[off + dst];
        }
    }
    st.out_degree_x = outx;
    st.in_degree_x = inx;
    st.n_out_x = static_cast<int>((outx.array() > 0).count());
    st.n_in_x = static_cast<int>((inx.array() > 0).count());
    return st;
}

ClusteredNetwork read_edge_list(const std::string& path, const std::vector<int>* cluster_sizes) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open edge-list file: " + path);
    std::string line;
    int lineno = 0;
    if (!std::getline(in, line)) throw ParseError("empty edge-list file: " + path);
    ++lineno;  // header row required
    std::map<int, std::vector<std::pair<int, int>>> by_cluster;
    std::map<int, int> max_unit;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        long cid, src, dst;
        char c1, c2;
        if (!(ss >> cid >> c1 >> src >> c2 >> dst) || c1 != ',' || c2 != ',')
            throw ParseError("bad edge record '" + line + "'", lineno);
        if (cid < 0 || src < 0 || dst < 0) throw ParseError("negative id", lineno);
        by_cluster[static_cast<int>(cid)].emplace_back(static_cast<int>(src),
                                                       static_cast<int>(dst));
        auto& m = max_unit[static_cast<int>(cid)];
        m = std::max({m, static_cast<int>(src), static_cast<int>(dst)});
    }
    int K;
    if (cluster_sizes) {
        K = static_cast<int>(cluster_sizes->size());
    } else {
        K = by_cluster.empty() ? 0 : by_cluster.rbegin()->first + 1;
    }
    if (K == 0) throw ParseError("edge-list file has no records and no sizes given: " + path);
    std::vector<int> sizes(K, 2);
    if (cluster_sizes) sizes = *cluster_sizes;
    std::vector<std::vector<std::pair<int, int>>> edges(K);
    for (auto& [cid, es] : by_cluster) {
        if (cid >= K) throw ParseError("cluster id " + std::to_string(cid) + " out of range");
        if (!cluster_sizes) sizes[cid] = std::max(sizes[cid], max_unit[cid] + 1);
        edges[cid] = std::move(es);
    }
    return ClusteredNetwork::build(sizes, edges);
}

void write_edge_list(const ClusteredNetwork& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << "cluster_id,src_unit,dst_unit\n";
    for (int k = 0; k < net.cluster_count(); ++k)
        for (auto [src, dst] : net.cluster(k).edges) out << k << ',' << src << ',' << dst << '\n';
}

}  // namespace spillover
