#include <doctest.h>

#include <bit>
#include <cmath>

#include "helpers.hpp"
#include "spillover/design.hpp"
#include "spillover/errors.hpp"
#include "spillover/rng.hpp"

using namespace spillover;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

}  // namespace

TEST_CASE("cluster probabilities") {
    auto b = AssignmentDesign::bernoulli(0.5);
    CHECK(b.prob_cluster(0, vec({1, 0, 1})) == doctest::Approx(0.125));
    auto cr = AssignmentDesign::complete_randomization(1);
    CHECK(cr.prob_cluster(0, vec({0, 1, 0})) == doctest::Approx(1.0 / 3));
    CHECK(cr.prob_cluster(0, vec({1, 1, 0})) == doctest::Approx(0.0));
    auto b22 = AssignmentDesign::bernoulli(0.22);
    CHECK(b22.prob_cluster(0, vec({1, 0})) == doctest::Approx(0.22 * 0.78));
}

TEST_CASE("excluding-marginal probabilities") {
    auto b = AssignmentDesign::bernoulli(0.5);
    CHECK(b.prob_excluding(0, 1, vec({0, 1})) == doctest::Approx(0.25));
    auto cr = AssignmentDesign::complete_randomization(1);
    CHECK(cr.prob_excluding(0, 0, vec({0, 0})) == doctest::Approx(1.0 / 3));
    CHECK(cr.prob_excluding(0, 0, vec({1, 1})) == doctest::Approx(0.0));
}

TEST_CASE("probabilities sum to one over all assignments") {
    for (int n : {2, 5, 10}) {
        for (auto d : {AssignmentDesign::bernoulli(0.3),
                       AssignmentDesign::complete_randomization(n / 2)}) {
            double total = 0.0;
            for (std::uint32_t mask = 0; mask < (1u << n); ++mask)
                total += std::exp(d.log_prob_cluster_counts(0, n, std::popcount(mask)));
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("marginalization identity") {
    const int n = 6;
    for (auto d : {AssignmentDesign::bernoulli(0.22),
                   AssignmentDesign::complete_randomization(2)}) {
        RngStream rng(3, 0);
        for (int rep = 0; rep < 10; ++rep) {
            Eigen::VectorXd zm(n - 1);
            for (int i = 0; i < n - 1; ++i) zm[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
            const int j = static_cast<int>(rng.uniform_int(n));
            double direct = d.prob_excluding(0, j, zm);
            double summed = 0.0;
            for (double zj : {0.0, 1.0}) {
                Eigen::VectorXd z(n);
                int t = 0;
                for (int i = 0; i < n; ++i) z[i] = i == j ? zj : zm[t++];
                summed += d.prob_cluster(0, z);
            }
            CHECK(direct == doctest::Approx(summed).epsilon(1e-12));
        }
    }
}

TEST_CASE("estimator weight closed forms") {
    auto b5 = AssignmentDesign::bernoulli(0.5);
    CHECK(estimator_weight(b5, b5, 0, 1, vec({1, 0, 1, 0})) == doctest::Approx(2.0));
    auto b22 = AssignmentDesign::bernoulli(0.22);
    CHECK(estimator_weight(b22, b22, 0, 0, vec({1, 0})) == doctest::Approx(1.0 / 0.22));
    CHECK(estimator_weight(b22, b22, 0, 1, vec({1, 0})) == doctest::Approx(1.0 / 0.78));
    // CR(2 of 4) hypothetical over Bernoulli(1/2): only the z_0 = 1
    // completion of (1,0,0) reaches the CR support, so the marginal is 1/6.
    auto cr = AssignmentDesign::complete_randomization(2);
    const double w = estimator_weight(cr, b5, 0, 0, vec({1, 1, 0, 0}));
    CHECK(w == doctest::Approx((1.0 / 6) / 0.0625));
}

TEST_CASE("weight moments by enumeration") {
    // For any alpha and a full-support beta: E[W] = 2, E[W Z] = E[W(1-Z)] = 1.
    const int n = 8;
    auto beta = AssignmentDesign::bernoulli(0.3);
    for (auto alpha : {AssignmentDesign::bernoulli(0.7), AssignmentDesign::bernoulli(0.3),
                       AssignmentDesign::complete_randomization(3)}) {
        const int j = 2;
        double ew = 0.0, ewz = 0.0;
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            const int treated = std::popcount(mask);
            const double pb = std::exp(beta.log_prob_cluster_counts(0, n, treated));
            const int zj = (mask >> j) & 1u;
            const double w =
                std::exp(alpha.log_prob_excluding_counts(0, n, treated - zj) -
                         beta.log_prob_cluster_counts(0, n, treated));
            ew += pb * w;
            ewz += pb * w * zj;
        }
        CHECK(ew == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(ewz == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ew - ewz == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("importance identity: E_beta[W f(Z_-j)] = 2 E_alpha[f(Z_-j)]") {
    const int n = 7, j = 3;
    auto d = AssignmentDesign::bernoulli(0.4);
    // f = indicator of each z_{-j} pattern.
    for (std::uint32_t target = 0; target < (1u << (n - 1)); target += 13) {
        double lhs = 0.0, rhs = 0.0;
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            const std::uint32_t low = mask & ((1u << j) - 1);
            const std::uint32_t high = (mask >> (j + 1)) << j;
            const std::uint32_t zmj = low | high;
            if (zmj != target) continue;
            const int treated = std::popcount(mask);
            const int zj = (mask >> j) & 1u;
            const double pb = std::exp(d.log_prob_cluster_counts(0, n, treated));
            const double w = std::exp(d.log_prob_excluding_counts(0, n, treated - zj) -
                                      d.log_prob_cluster_counts(0, n, treated));
            lhs += pb * w;
            if (zj == 0)  // count each z_{-j} pattern once for the alpha law
                rhs += std::exp(d.log_prob_excluding_counts(0, n, treated));
        }
        CHECK(lhs == doctest::Approx(2.0 * rhs).epsilon(1e-12));
    }
}

TEST_CASE("zero realized probability raises") {
    auto cr = AssignmentDesign::complete_randomization(1);
    auto b = AssignmentDesign::bernoulli(0.5);
    CHECK_THROWS_AS(estimator_weight(b, cr, 0, 0, vec({1, 1, 0})), ZeroRealizedProbability);
}

TEST_CASE("overlap check") {
    // CR hypothetical within full-support Bernoulli: fine. The reverse fails.
    auto cr = AssignmentDesign::complete_randomization(2);
    auto b = AssignmentDesign::bernoulli(0.5);
    CHECK(overlap_holds(cr, b, 0, 4));
    CHECK_FALSE(overlap_holds(b, cr, 0, 4));
    CHECK_THROWS_AS(overlap_holds(b, cr, 0, 30), ClusterTooLargeForOracle);
}

TEST_CASE("sampler respects the design") {
    auto net = generate(GraphKind::regular_circulant, 5, 20, 2, 0);
    auto cr = AssignmentDesign::complete_randomization(10);
    RngStream rng(11, 0);
    const Eigen::VectorXd z = cr.sample(net, rng);
    for (int k = 0; k < 5; ++k) CHECK(z.segment(net.unit_offset(k), 20).sum() == 10.0);

    RngStream r1(12, 5), r2(12, 5);
    auto b = AssignmentDesign::bernoulli(0.4);
    CHECK(b.sample(net, r1) == b.sample(net, r2));
}

TEST_CASE("near-one bernoulli treats almost everyone") {
    std::vector<int> sizes(50, 20);
    std::vector<std::vector<std::pair<int, int>>> edges(50, {{0, 1}});
    auto net = ClusteredNetwork::build(sizes, edges);
    auto b = AssignmentDesign::bernoulli(0.999999);
    for (std::uint64_t s = 0; s < 20; ++s) {
        RngStream rng(s, 0);
        CHECK(b.sample(net, rng).sum() >= 999.0);
    }
}

TEST_CASE("weights for a whole cluster match the scalar path") {
    auto alpha = AssignmentDesign::complete_randomization(3);
    auto beta = AssignmentDesign::bernoulli(0.4);
    const Eigen::VectorXd z = vec({1, 0, 1, 1, 0, 0});
    const Eigen::VectorXd w = estimator_weights_cluster(alpha, beta, 0, z);
    for (int j = 0; j < 6; ++j)
        CHECK(w[j] == doctest::Approx(estimator_weight(alpha, beta, 0, j, z)).epsilon(1e-14));
}
