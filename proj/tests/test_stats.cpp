#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cresta/stats.hpp"

using namespace cresta::stats;

namespace {
struct TPair {
    double t;
    double df;
    double p;  // two-sided, computed with a 50-digit reference implementation
};
}  // namespace

TEST_CASE("student t two-sided p against high-precision fixtures") {
    // Frozen from an arbitrary-precision regularized-incomplete-beta oracle.
    const TPair pairs[20] = {
        {0.000000, 1, 1.0},
        {0.500000, 1, 0.70483276469913345},
        {1.000000, 1, 0.5},
        {2.000000, 2, 0.18350341907227397},
        {-1.500000, 3, 0.23058386524482305},
        {0.750000, 4, 0.49495943333176537},
        {2.500000, 5, 0.054490099342376241},
        {-3.000000, 7, 0.019942126131992538},
        {1.217900, 10, 0.25121795451018855},
        {0.300000, 12, 0.76931047408825233},
        {-0.900000, 15, 0.38234213350098631},
        {1.960000, 20, 0.064078253003576901},
        {2.576000, 30, 0.015162993761018669},
        {-1.645000, 50, 0.1062430764088088},
        {3.768600, 83, 0.00030613109412186409},
        {1.217900, 120, 0.22565127686342356},
        {-2.000000, 120, 0.047758527340328378},
        {0.050000, 200, 0.96017228687326657},
        {4.500000, 500, 8.4603507664878324e-6},
        {-1.000000, 1000, 0.31755241808467231},
    };
    for (const auto& [t, df, p] : pairs) {
        CAPTURE(t, df);
        CHECK(students_t_two_sided_p(t, df) == Catch::Approx(p).margin(1e-8));
    }
}

TEST_CASE("student t cdf basic identities") {
    CHECK(students_t_cdf(0.0, 7) == Catch::Approx(0.5).margin(1e-15));
    // Symmetry: F(-t) = 1 - F(t).
    for (double t : {0.3, 1.1, 2.7}) {
        for (double df : {2.0, 11.0, 120.0}) {
            CHECK(students_t_cdf(-t, df) ==
                  Catch::Approx(1.0 - students_t_cdf(t, df)).margin(1e-14));
        }
    }
}

TEST_CASE("student t quantile inverts the cdf") {
    // Reference values from the same high-precision oracle.
    CHECK(students_t_ppf(0.975, 120) == Catch::Approx(1.9799304050824408).margin(1e-10));
    CHECK(students_t_ppf(0.975, 83) == Catch::Approx(1.9889597801751628).margin(1e-10));
    for (double p : {0.01, 0.25, 0.5, 0.9, 0.999}) {
        for (double df : {3.0, 30.0, 300.0}) {
            const double x = students_t_ppf(p, df);
            CHECK(students_t_cdf(x, df) == Catch::Approx(p).margin(1e-12));
        }
    }
}

TEST_CASE("normal quantile round-trips through the cdf") {
    for (double p : {1e-8, 0.001, 0.025, 0.4, 0.5, 0.6, 0.975, 0.999, 1 - 1e-8}) {
        const double x = normal_ppf(p);
        CHECK(normal_cdf(x) == Catch::Approx(p).epsilon(1e-12).margin(1e-14));
    }
    CHECK(normal_ppf(0.5) == Catch::Approx(0.0).margin(1e-14));
    CHECK(normal_ppf(0.975) == Catch::Approx(1.959963984540054).margin(1e-10));
}

TEST_CASE("regularized incomplete beta endpoints and symmetry") {
    CHECK(regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0);
    CHECK(regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0);
    // I_x(a,b) = 1 - I_{1-x}(b,a)
    CHECK(regularized_incomplete_beta(2.5, 1.5, 0.3) ==
          Catch::Approx(1.0 - regularized_incomplete_beta(1.5, 2.5, 0.7)).margin(1e-14));
    // I_x(1,1) = x
    CHECK(regularized_incomplete_beta(1.0, 1.0, 0.42) == Catch::Approx(0.42).margin(1e-14));
}
