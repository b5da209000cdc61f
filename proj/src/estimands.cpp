#include "spillover/estimands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "spillover/errors.hpp"

namespace spillover {

EstimandWeights::EstimandWeights(std::vector<std::vector<Entry>> clusters,
                                 std::vector<int> cluster_sizes, double s_n, std::string kind)
    : clusters_(std::move(clusters)),
      sizes_(std::move(cluster_sizes)),
      s_n_(s_n),
      original_s_n_(s_n),
      kind_(std::move(kind)) {
    if (clusters_.size() != sizes_.size())
        throw LengthMismatch("weight clusters and sizes disagree");
    offsets_.resize(sizes_.size());
    int off = 0;
    for (std::size_t k = 0; k < sizes_.size(); ++k) {
        offsets_[k] = off;
        off += sizes_[k];
        auto& es = clusters_[k];
        std::sort(es.begin(), es.end(), [](const Entry& a, const Entry& b) {
            return std::tie(a.sender, a.receiver) < std::tie(b.sender, b.receiver);
        });
        for (const Entry& e : es) {
            if (e.receiver == e.sender) throw InvalidEdge("diagonal weight entry");
            if (e.receiver < 0 || e.sender < 0 || e.receiver >= sizes_[k] || e.sender >= sizes_[k])
                throw InvalidEdge("weight entry out of range");
            if (!(e.w > 0.0)) throw BadParam("stored weights must be strictly positive");
        }
    }
    total_units_ = off;
}

const Decomposition& EstimandWeights::decomposition() const {
    if (!decomp_) throw MissingDecomposition("weights carry no marginal/conditional split");
    return *decomp_;
}

double EstimandWeights::entry_sum() const {
    double s = 0.0;
    for (const auto& es : clusters_)
        for (const auto& e : es) s += e.w;
    return s;
}

namespace {

Decomposition generic_split(const EstimandWeights& w) {
    Decomposition d;
    d.scheme = DecomposeScheme::generic;
    const int N = w.total_units();
    d.sender_marginal.assign(N, 0.0);
    d.receiver_marginal.assign(N, 0.0);
    d.s_tilde.assign(N, 0.0);
    d.recv_given_sender.resize(w.cluster_count());
    d.sender_given_recv.resize(w.cluster_count());
    for (int k = 0; k < w.cluster_count(); ++k) {
        const int off = w.unit_offset(k);
        for (const auto& e : w.cluster_entries(k)) {
            d.sender_marginal[off + e.sender] += e.w;
            d.receiver_marginal[off + e.receiver] += e.w;
        }
    }
    for (int k = 0; k < w.cluster_count(); ++k) {
        const int off = w.unit_offset(k);
        const auto& es = w.cluster_entries(k);
        auto& rgs = d.recv_given_sender[k];
        auto& sgr = d.sender_given_recv[k];
        rgs.resize(es.size());
        sgr.resize(es.size());
        for (std::size_t t = 0; t < es.size(); ++t) {
            rgs[t] = es[t].w / d.sender_marginal[off + es[t].sender];
            sgr[t] = es[t].w / d.receiver_marginal[off + es[t].receiver];
            d.s_tilde[off + es[t].sender] += rgs[t];
        }
    }
    return d;
}

void check_split(const EstimandWeights& w, const Decomposition& d) {
    for (int k = 0; k < w.cluster_count(); ++k) {
        const int off = w.unit_offset(k);
        const auto& es = w.cluster_entries(k);
        for (std::size_t t = 0; t < es.size(); ++t) {
            const double lhs = d.recv_given_sender[k][t] * d.sender_marginal[off + es[t].sender];
            const double rhs = d.sender_given_recv[k][t] * d.receiver_marginal[off + es[t].receiver];
            if (std::abs(lhs - es[t].w) > 1e-12 || std::abs(rhs - es[t].w) > 1e-12)
                throw BadParam("weight decomposition does not reproduce the entries");
        }
    }
}

}  // namespace

EstimandWeights build_weights(const ClusteredNetwork& net, WeightScheme scheme,
                              bool direction_variant) {
    const DegreeStats st = degree_stats(net);
    const int K = net.cluster_count();
    const int N = net.total_units();
    std::vector<std::vector<EstimandWeights::Entry>> entries(K);
    std::vector<int> sizes(K);
    for (int k = 0; k < K; ++k) sizes[k] = net.cluster(k).size;

    auto finish = [&](double s_n, const std::string& label) {
        return EstimandWeights(std::move(entries), std::move(sizes), s_n, label);
    };

    switch (scheme) {
        case WeightScheme::pairwise: {
            double s_n = 0.0;
            for (int k = 0; k < K; ++k) {
                const int n = sizes[k];
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        if (i != j) entries[k].push_back({i, j, 1.0 / N});
                s_n += static_cast<double>(n) * (n - 1) / N;
            }
            EstimandWeights w = finish(s_n, "pairwise");
            w.set_decomposition(generic_split(w));
            return w;
        }
        case WeightScheme::outward: {
            // Aggregation runs over the sender's out-neighbors (default) or
            // in-neighbors (variant); the normalizer counts eligible senders.
            const Eigen::VectorXi& deg = direction_variant ? st.in_degree : st.out_degree;
            const int n_senders = direction_variant ? st.n_in : st.n_out;
            if (n_senders == 0) throw EmptyEstimand("no sender with positive degree");
            for (int k = 0; k < K; ++k) {
                const Cluster& c = net.cluster(k);
                const int off = net.unit_offset(k);
                for (int j = 0; j < c.size; ++j) {
                    const auto& recvs = direction_variant ? c.in_adj[j] : c.out_adj[j];
                    if (recvs.empty()) continue;
                    const double wv = 1.0 / (static_cast<double>(n_senders) * deg[off + j]);
                    for (int i : recvs) entries[k].push_back({i, j, wv});
                }
            }
            EstimandWeights w = finish(1.0, direction_variant ? "outward_variant" : "outward");
            Decomposition d;
            d.scheme = DecomposeScheme::paper_builtin;
            d.sender_marginal.assign(N, 0.0);
            d.receiver_marginal.assign(N, 1.0 / n_senders);
            d.s_tilde.assign(N, 0.0);
            d.recv_given_sender.resize(K);
            d.sender_given_recv.resize(K);
            for (int k = 0; k < K; ++k) {
                const int off = w.unit_offset(k);
                const auto& es = w.cluster_entries(k);
                d.recv_given_sender[k].resize(es.size());
                d.sender_given_recv[k].resize(es.size());
                for (std::size_t t = 0; t < es.size(); ++t) {
                    const int gj = off + es[t].sender;
                    d.sender_marginal[gj] = 1.0 / n_senders;
                    d.recv_given_sender[k][t] = 1.0 / deg[gj];
                    d.sender_given_recv[k][t] = 1.0 / deg[gj];
                    d.s_tilde[gj] += d.recv_given_sender[k][t];
                }
            }
            check_split(w, d);
            w.set_decomposition(std::move(d));
            return w;
        }
        case WeightScheme::inward: {
            const Eigen::VectorXi& deg = direction_variant ? st.out_degree : st.in_degree;
            const int n_recv = direction_variant ? st.n_out : st.n_in;
            if (n_recv == 0) throw EmptyEstimand("no receiver with positive degree");
            for (int k = 0; k < K; ++k) {
                const Cluster& c = net.cluster(k);
                const int off = net.unit_offset(k);
                for (int i = 0; i < c.size; ++i) {
                    const auto& senders = direction_variant ? c.out_adj[i] : c.in_adj[i];
                    if (senders.empty()) continue;
                    const double wv = 1.0 / (static_cast<double>(n_recv) * deg[off + i]);
                    for (int j : senders) entries[k].push_back({i, j, wv});
                }
            }
            EstimandWeights w = finish(1.0, direction_variant ? "inward_variant" : "inward");
            // Receiver side is the stated split; the sender side uses the
            // row-normalized one.
            Decomposition d = generic_split(w);
            d.scheme = DecomposeScheme::paper_builtin;
            std::fill(d.receiver_marginal.begin(), d.receiver_marginal.end(), 0.0);
            for (int k = 0; k < K; ++k) {
                const int off = w.unit_offset(k);
                const auto& es = w.cluster_entries(k);
                for (std::size_t t = 0; t < es.size(); ++t) {
                    const int gi = off + es[t].receiver;
                    d.receiver_marginal[gi] = 1.0 / n_recv;
                    d.sender_given_recv[k][t] = 1.0 / deg[gi];
                }
            }
            check_split(w, d);
            w.set_decomposition(std::move(d));
            return w;
        }
    }
    throw BadParam("unknown weight scheme");
}

EstimandWeights conditional_restrict(const EstimandWeights& w, const Eigen::VectorXd& covariates,
                                     double x) {
    if (covariates.size() != w.total_units())
        throw LengthMismatch("covariate vector must have one value per unit");
    const int K = w.cluster_count();
    std::vector<std::vector<EstimandWeights::Entry>> entries(K);
    std::vector<int> sizes(K);
    double s_n_x = 0.0;
    for (int k = 0; k < K; ++k) {
        sizes[k] = w.cluster_size(k);
        const int off = w.unit_offset(k);
        for (const auto& e : w.cluster_entries(k)) {
            if (covariates[off + e.sender] == x) {
                entries[k].push_back(e);
                s_n_x += e.w;
            }
        }
    }
    if (s_n_x <= 0.0)
        throw EmptyConditional("no positive-weight sender with covariate value " +
                               std::to_string(x));
    EstimandWeights out(std::move(entries), std::move(sizes), s_n_x,
                        "conditional_" + w.kind());
    out.set_scale_state(s_n_x, w.rescaled());

    if (w.kind() == "inward") {
        // The restricted inward estimand keeps a receiver split whose
        // conditional weights sum to one: uniform over retained senders.
        Decomposition d = generic_split(out);
        d.scheme = DecomposeScheme::paper_builtin;
        std::vector<int> cnt(out.total_units(), 0);
        for (int k = 0; k < K; ++k) {
            const int off = out.unit_offset(k);
            for (const auto& e : out.cluster_entries(k)) ++cnt[off + e.receiver];
        }
        std::fill(d.receiver_marginal.begin(), d.receiver_marginal.end(), 0.0);
        for (int k = 0; k < K; ++k) {
            const int off = out.unit_offset(k);
            const auto& es = out.cluster_entries(k);
            for (std::size_t t = 0; t < es.size(); ++t) {
                const int gi = off + es[t].receiver;
                d.sender_given_recv[k][t] = 1.0 / cnt[gi];
                d.receiver_marginal[gi] = es[t].w * cnt[gi];
            }
        }
        check_split(out, d);
        out.set_decomposition(std::move(d));
    } else {
        out.set_decomposition(generic_split(out));
    }
    return out;
}

EstimandWeights decompose(const EstimandWeights& w, DecomposeScheme scheme) {
    EstimandWeights out = w;
    if (scheme == DecomposeScheme::generic) {
        out.set_decomposition(generic_split(out));
        return out;
    }
    // paper_builtin: keep a stated split when one is attached, otherwise the
    // generic one (pairwise and custom weights have no stated split).
    if (w.has_decomposition() && w.decomposition().scheme == DecomposeScheme::paper_builtin)
        return out;
    out.set_decomposition(generic_split(out));
    return out;
}

EstimandWeights rescale(const EstimandWeights& w) {
    if (w.rescaled()) return w;
    const double s = w.s_n();
    if (!(s > 0.0)) throw BadParam("cannot rescale weights with nonpositive normalizer");
    const int K = w.cluster_count();
    std::vector<std::vector<EstimandWeights::Entry>> entries(K);
    std::vector<int> sizes(K);
    for (int k = 0; k < K; ++k) {
        sizes[k] = w.cluster_size(k);
        entries[k] = w.cluster_entries(k);
        for (auto& e : entries[k]) e.w /= s;
    }
    EstimandWeights out(std::move(entries), std::move(sizes), 1.0, w.kind());
    out.set_scale_state(s, true);
    if (w.has_decomposition()) {
        Decomposition d = w.decomposition();
        for (double& v : d.sender_marginal) v /= s;
        for (double& v : d.receiver_marginal) v /= s;
        check_split(out, d);
        out.set_decomposition(std::move(d));
    }
    return out;
}

EstimandWeights with_normalizer(const EstimandWeights& w, double s_n) {
    if (!(s_n > 0.0)) throw BadParam("normalizer must be positive");
    EstimandWeights out = w;
    out.set_s_n(s_n);
    return out;
}

EstimandWeights load_custom_weights(const std::string& path, const ClusteredNetwork& net) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open weights file: " + path);
    std::string line;
    int lineno = 0;
    if (!std::getline(in, line)) throw ParseError("empty weights file: " + path);
    ++lineno;
    const int K = net.cluster_count();
    std::vector<std::vector<EstimandWeights::Entry>> entries(K);
    std::vector<int> sizes(K);
    for (int k = 0; k < K; ++k) sizes[k] = net.cluster(k).size;
    std::map<std::tuple<int, int, int>, bool> seen;
    double s_n = 0.0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        long cid, recv, send;
        double wv;
        char c1, c2, c3;
        if (!(ss >> cid >> c1 >> recv >> c2 >> send >> c3 >> wv) || c1 != ',' || c2 != ',' ||
            c3 != ',')
            throw ParseError("bad weight record '" + line + "'", lineno);
        if (cid < 0 || cid >= K) throw ParseError("cluster id out of range", lineno);
        if (recv == send) throw ParseError("diagonal weight not allowed", lineno);
        if (recv < 0 || send < 0 || recv >= sizes[cid] || send >= sizes[cid])
            throw ParseError("unit index out of range", lineno);
        if (!(wv > 0.0)) throw ParseError("weights must be strictly positive", lineno);
        if (seen[{static_cast<int>(cid), static_cast<int>(recv), static_cast<int>(send)}])
            throw ParseError("duplicate weight entry", lineno);
        seen[{static_cast<int>(cid), static_cast<int>(recv), static_cast<int>(send)}] = true;
        entries[cid].push_back({static_cast<int>(recv), static_cast<int>(send), wv});
        s_n += wv;
    }
    if (s_n <= 0.0) throw ParseError("weights file has no entries: " + path);
    EstimandWeights w(std::move(entries), std::move(sizes), s_n, "custom");
    w.set_decomposition(generic_split(w));
    return w;
}

}  // namespace spillover
