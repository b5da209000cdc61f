#include <doctest.h>

#include <cmath>

#include "spillover/rng.hpp"

using namespace spillover;

namespace {

// Independent quantile oracle: bisection on the erfc-based normal CDF.
double quantile_by_bisection(double p) {
    double lo = -10.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("normal quantile matches a bisection oracle") {
    for (double p : {0.001, 0.01, 0.025, 0.25, 0.5, 0.75, 0.975, 0.99, 0.999}) {
        CHECK(normal_quantile(p) == doctest::Approx(quantile_by_bisection(p)).epsilon(1e-10));
    }
    CHECK(normal_quantile(0.975) == doctest::Approx(1.95996).epsilon(1e-4));
    CHECK(normal_quantile(0.75) == doctest::Approx(0.67449).epsilon(1e-4));
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
}

TEST_CASE("streams are deterministic and distinct") {
    RngStream a(42, 3), b(42, 3), c(42, 4);
    bool all_equal_c = true;
    for (int i = 0; i < 64; ++i) {
        const std::uint64_t va = a.next_u64();
        CHECK(va == b.next_u64());
        all_equal_c = all_equal_c && va == c.next_u64();
    }
    CHECK_FALSE(all_equal_c);
}

TEST_CASE("normal draws have the requested moments") {
    RngStream rng(7, 0);
    double sum = 0.0, sum2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal(2.0, 0.5);
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
    CHECK(var == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("bounded integers cover their range") {
    RngStream rng(1, 1);
    int seen[5] = {0, 0, 0, 0, 0};
    for (int i = 0; i < 500; ++i) ++seen[rng.uniform_int(5)];
    for (int v : seen) CHECK(v > 0);
}
