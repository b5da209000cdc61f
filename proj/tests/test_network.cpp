#include <doctest.h>

#include <cstdio>

#include "spillover/errors.hpp"
#include "spillover/network.hpp"

using namespace spillover;

TEST_CASE("minimal valid cluster") {
    auto net = ClusteredNetwork::build({2}, {{{0, 1}}});
    CHECK(net.cluster_count() == 1);
    CHECK(net.total_units() == 2);
    auto st = degree_stats(net);
    CHECK(st.n_out == 1);
    CHECK(st.n_in == 1);
    CHECK(st.out_degree[0] == 1);
    CHECK(st.in_degree[1] == 1);
}

TEST_CASE("edge validation") {
    CHECK_THROWS_AS(ClusteredNetwork::build({3}, {{{0, 0}}}), InvalidEdge);
    CHECK_THROWS_AS(ClusteredNetwork::build({3}, {{{0, 3}}}), InvalidEdge);
    CHECK_THROWS_AS(ClusteredNetwork::build({3}, {{{0, 1}, {0, 1}}}), InvalidEdge);
    CHECK_THROWS_AS(ClusteredNetwork::build({1}, {{}}), ClusterTooSmall);
}

TEST_CASE("circulant is d-regular in and out") {
    auto net = generate(GraphKind::regular_circulant, 2, 5, 2, 0);
    auto st = degree_stats(net);
    for (int g = 0; g < net.total_units(); ++g) {
        CHECK(st.out_degree[g] == 2);
        CHECK(st.in_degree[g] == 2);
    }
    CHECK(st.n_out == 10);
}

TEST_CASE("complete graph at p = 1") {
    auto net = generate(GraphKind::er_directed, 1, 20, 1.0, 123);
    CHECK(net.total_edges() == 380);
}

TEST_CASE("generator parameter validation") {
    CHECK_THROWS_AS(generate(GraphKind::er_directed, 1, 5, 0.0, 1), BadParam);
    CHECK_THROWS_AS(generate(GraphKind::er_directed, 1, 5, 1.5, 1), BadParam);
    CHECK_THROWS_AS(generate(GraphKind::regular_circulant, 1, 5, 5, 1), BadParam);
    CHECK_THROWS_AS(generate(GraphKind::regular_circulant, 1, 5, 0, 1), BadParam);
}

TEST_CASE("er generation is seed-reproducible") {
    auto a = generate(GraphKind::er_directed, 3, 10, 0.3, 99);
    auto b = generate(GraphKind::er_directed, 3, 10, 0.3, 99);
    auto c = generate(GraphKind::er_directed, 3, 10, 0.3, 100);
    for (int k = 0; k < 3; ++k) CHECK(a.cluster(k).edges == b.cluster(k).edges);
    bool same = true;
    for (int k = 0; k < 3; ++k) same = same && a.cluster(k).edges == c.cluster(k).edges;
    CHECK_FALSE(same);
}

TEST_CASE("er mean out-degree matches the binomial mean") {
    // (n-1) p = 19 * 0.2 = 3.8; assert within three standard errors over the
    // generated unit pool.
    double total = 0.0;
    long units = 0;
    for (int seed = 0; seed < 1000; ++seed) {
        auto net = generate(GraphKind::er_directed, 1, 20, 0.2, seed);
        total += static_cast<double>(net.total_edges());
        units += 20;
    }
    const double mean = total / units;
    const double se = std::sqrt(19 * 0.2 * 0.8 / static_cast<double>(units));
    CHECK(std::abs(mean - 3.8) <= 3 * se);
}

TEST_CASE("degree sums equal edge counts per cluster") {
    auto net = generate(GraphKind::er_directed, 4, 12, 0.25, 5);
    auto st = degree_stats(net);
    for (int k = 0; k < net.cluster_count(); ++k) {
        long out = 0, in = 0;
        for (int i = 0; i < net.cluster(k).size; ++i) {
            out += st.out_degree[net.unit_offset(k) + i];
            in += st.in_degree[net.unit_offset(k) + i];
        }
        CHECK(out == static_cast<long>(net.cluster(k).edges.size()));
        CHECK(in == out);
    }
}

TEST_CASE("covariate-restricted degrees") {
    // Chain 0 -> 1 -> 2 in one cluster.
    auto net = ClusteredNetwork::build({3}, {{{0, 1}, {1, 2}}});
    Eigen::VectorXd x(3);
    x << 1.0, 0.0, 1.0;
    auto st = degree_stats(net, x, 1.0);
    CHECK((*st.out_degree_x)[0] == 0);  // 0 points at unit 1 which has x = 0
    CHECK((*st.out_degree_x)[1] == 1);
    CHECK((*st.in_degree_x)[1] == 1);
    CHECK((*st.in_degree_x)[2] == 0);
    CHECK(st.n_out_x == 1);
    CHECK(st.n_in_x == 1);
}

TEST_CASE("edge-list round trip") {
    auto net = generate(GraphKind::er_directed, 3, 8, 0.3, 17);
    const std::string path = "/tmp/spillover_test_edges.csv";
    write_edge_list(net, path);
    std::vector<int> sizes(3, 8);
    auto back = read_edge_list(path, &sizes);
    for (int k = 0; k < 3; ++k) CHECK(net.cluster(k).edges == back.cluster(k).edges);
    std::remove(path.c_str());
}
