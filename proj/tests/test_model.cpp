#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "cresta/model.hpp"

using namespace cresta;

TEST_CASE("semivariance closed forms") {
    // Sill reached exactly at the range for the spherical family.
    auto sph01 = VariogramModel::make(VariogramFamily::spherical, 0, 1, 1);
    CHECK(semivariance(sph01, 1.0) == Catch::Approx(1.0));

    // gamma(0) = nugget for every family.
    for (auto fam : {VariogramFamily::spherical, VariogramFamily::exponential,
                     VariogramFamily::gaussian}) {
        auto m = VariogramModel::make(fam, 0.3, 2.0, 5.0);
        CHECK(semivariance(m, 0.0) == Catch::Approx(0.3));
    }

    // Spherical closed form at half range: 2*(1.5*0.5 - 0.5*0.125) = 1.375.
    auto sph = VariogramModel::make(VariogramFamily::spherical, 0, 2, 10);
    CHECK(semivariance(sph, 5.0) == Catch::Approx(1.375).epsilon(1e-12));

    // Practical-range scaling: ~95% of the sill at h = range.
    auto expm = VariogramModel::make(VariogramFamily::exponential, 0, 1, 7);
    CHECK(semivariance(expm, 7.0) == Catch::Approx(1.0 - std::exp(-3.0)).epsilon(1e-12));
    auto gsm = VariogramModel::make(VariogramFamily::gaussian, 0, 1, 7);
    CHECK(semivariance(gsm, 7.0) == Catch::Approx(1.0 - std::exp(-3.0)).epsilon(1e-12));
}

TEST_CASE("semivariance is nondecreasing and bounded by the sill") {
    Rng rng(991);
    for (int trial = 0; trial < 50; ++trial) {
        const double nugget = rng.next_double() * 2.0;
        const double sill = nugget + rng.next_double() * 3.0;
        const double range = 0.1 + rng.next_double() * 20.0;
        const auto fam = static_cast<VariogramFamily>(rng.next_below(3));
        auto m = VariogramModel::make(fam, nugget, sill, range);

        const double hmax = 3.0 * range;
        double prev = -1.0;
        for (int i = 0; i < 1000; ++i) {
            const double h = hmax * i / 999.0;
            const double g = semivariance(m, h);
            CHECK(g >= prev - 1e-12);
            CHECK(g <= sill + 1e-12);
            prev = g;
        }
    }
}

TEST_CASE("variogram model validation") {
    CHECK_THROWS_AS(VariogramModel::make(VariogramFamily::spherical, -0.1, 1, 1), Error);
    CHECK_THROWS_AS(VariogramModel::make(VariogramFamily::spherical, 0.5, 0.4, 1), Error);
    CHECK_THROWS_AS(VariogramModel::make(VariogramFamily::spherical, 0, 1, 0), Error);
}

TEST_CASE("rng golden values and determinism") {
    // First three doubles of the documented SplitMix64 stream.
    Rng r1(1);
    CHECK(r1.next_double() == Catch::Approx(0.5665615751722809).margin(1e-16));
    CHECK(r1.next_double() == Catch::Approx(0.74578175726270113).margin(1e-16));
    CHECK(r1.next_double() == Catch::Approx(0.97100275358679622).margin(1e-16));

    Rng a(1), b(1);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());

    Rng s1(1), s2(2);
    bool differs = false;
    for (int i = 0; i < 10; ++i)
        if (s1.next_u64() != s2.next_u64()) differs = true;
    CHECK(differs);
}

TEST_CASE("rng uniform mean", "[montecarlo]") {
    Rng r(7);
    double sum = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += r.next_double();
    const double mean = sum / n;
    CHECK(mean > 0.49);
    CHECK(mean < 0.51);
}

TEST_CASE("country id parsing") {
    CHECK(CountryId::parse("UGA").code == "UGA");
    CHECK(CountryId::parse("uga").code == "UGA");
    CHECK_THROWS_AS(CountryId::parse("UG"), Error);
    CHECK_THROWS_AS(CountryId::parse("U1A"), Error);
}

TEST_CASE("panel enforces key uniqueness and sorted order") {
    std::vector<Variable> reg = {{"temperature", "C"}, {"yield", "t/ha"}};
    auto obs = [&](const char* c, int y, Sector s, double t, double v) {
        PanelObservation o;
        o.country = CountryId::parse(c);
        o.year = y;
        o.sector = s;
        o.cells = {t, v};
        return o;
    };

    std::vector<PanelObservation> rows = {
        obs("KEN", 2011, Sector::agriculture, 22.0, 1.5),
        obs("UGA", 2010, Sector::agriculture, 25.0, 2.0),
        obs("KEN", 2010, Sector::agriculture, 21.0, 1.2),
    };
    auto p = Panel::build(reg, rows);
    REQUIRE(p.n_rows() == 3);
    CHECK(p.observations()[0].country.code == "KEN");
    CHECK(p.observations()[0].year == 2010);
    CHECK(p.observations()[2].country.code == "UGA");
    CHECK(p.entity_index().at("KEN").size() == 2);
    CHECK(p.time_index().at(2010).size() == 2);

    rows.push_back(obs("UGA", 2010, Sector::agriculture, 1.0, 1.0));
    CHECK_THROWS_AS(Panel::build(reg, rows), Error);

    std::vector<PanelObservation> bad_year = {obs("UGA", 1800, Sector::agriculture, 1.0, 1.0)};
    CHECK_THROWS_AS(Panel::build(reg, bad_year), Error);
}

TEST_CASE("geo sample set sorts and merges coincident points") {
    std::vector<GeoSample> pts = {
        {1.0, 1.0, 4.0, {}},
        {0.0, 0.0, 1.0, {}},
        {1.0, 1.0, 2.0, {}},  // coincides with the first
    };
    auto set = GeoSampleSet::build(pts);
    REQUIRE(set.size() == 2);
    CHECK(set.samples()[0].x == 0.0);
    CHECK(set.samples()[1].value == Catch::Approx(3.0));  // mean of 4 and 2

    CHECK_THROWS_AS(GeoSampleSet::build({}), Error);
}
