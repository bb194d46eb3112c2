#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "cresta/ingest.hpp"

using namespace cresta;
using namespace cresta::ingest;

namespace {
const char* kSmallCsv =
    "country,year,sector,temperature (C),precipitation (mm)\n"
    "UGA,2010,agriculture,25.0,1200\n"
    "KEN,2010,agriculture,22.5,800\n";
}

TEST_CASE("parse_panel_csv happy path") {
    auto p = parse_panel_csv(kSmallCsv);
    REQUIRE(p.n_rows() == 2);
    REQUIRE(p.registry().size() == 2);
    CHECK(p.registry()[0].name == "temperature");
    CHECK(p.registry()[0].unit == "C");
    CHECK(p.registry()[1].name == "precipitation");
    // KEN sorts before UGA
    CHECK(p.observations()[0].country.code == "KEN");
    CHECK(*p.observations()[0].cells[0] == Catch::Approx(22.5));
    CHECK(*p.observations()[1].cells[1] == Catch::Approx(1200));
}

TEST_CASE("missing tokens set missing cells") {
    auto p = parse_panel_csv(
        "country,year,sector,precipitation\n"
        "UGA,2010,agriculture,NA\n"
        "UGA,2011,agriculture,\n"
        "UGA,2012,agriculture,nan\n"
        "UGA,2013,agriculture,900\n");
    REQUIRE(p.n_rows() == 4);
    CHECK_FALSE(p.observations()[0].cells[0].has_value());
    CHECK_FALSE(p.observations()[1].cells[0].has_value());
    CHECK_FALSE(p.observations()[2].cells[0].has_value());
    CHECK(p.observations()[3].cells[0].has_value());
}

TEST_CASE("duplicate key names both line numbers") {
    const char* text =
        "country,year,sector,yield\n"
        "UGA,2010,agriculture,1.0\n"
        "KEN,2010,agriculture,2.0\n"
        "UGA,2010,agriculture,3.0\n";
    try {
        parse_panel_csv(text);
        FAIL("expected DuplicateKey");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::duplicate_key);
        const std::string what = e.what();
        CHECK(what.find("2") != std::string::npos);
        CHECK(what.find("4") != std::string::npos);
        CHECK(what.find("UGA") != std::string::npos);
    }
}

TEST_CASE("parse errors cite rows") {
    CHECK_THROWS_AS(parse_panel_csv("country,year,sector,v\nU,2010,agriculture,1\n"), Error);
    CHECK_THROWS_AS(parse_panel_csv("country,year,sector,v\nUGA,20x0,agriculture,1\n"), Error);
    try {
        parse_panel_csv("country,year,sector,v\nUGA,2010,mining,1\n");
        FAIL("expected UnknownSector");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unknown_sector);
    }
    try {
        parse_panel_csv("country,year,sector,v\nUGA,2010,agriculture,12.3.4\n");
        FAIL("expected MalformedCsv");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::malformed_csv);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("quoted fields and CRLF") {
    auto p = parse_panel_csv(
        "country,year,sector,\"temperature (C)\"\r\n"
        "UGA,2010,\"agriculture\",25.5\r\n");
    REQUIRE(p.n_rows() == 1);
    CHECK(p.registry()[0].name == "temperature");
    CHECK(*p.observations()[0].cells[0] == Catch::Approx(25.5));
}

TEST_CASE("rename and alias rules") {
    HarmonizationRules rules;
    rules.rename["temp"] = "temperature";
    rules.country_aliases["Uganda"] = "UGA";
    auto p = parse_panel_csv(
        "country,year,sector,temp\n"
        "Uganda,2010,agriculture,25\n",
        rules);
    CHECK(p.registry()[0].name == "temperature");
    CHECK(p.observations()[0].country.code == "UGA");
}

TEST_CASE("harmonize identity on one panel") {
    auto base = parse_panel_csv(
        "country,year,sector,precipitation,temperature\n"
        "UGA,2010,agriculture,1200,25\n"
        "UGA,2011,agriculture,1100,24\n");
    auto merged = harmonize({base});
    CHECK(merged == base);
}

TEST_CASE("harmonize applies affine unit conversion") {
    auto tenths = parse_panel_csv(
        "country,year,sector,temperature (0.1C)\n"
        "UGA,2010,agriculture,253\n");
    HarmonizationRules rules;
    rules.unit_conversions["temperature"] = {0.1, 0.0, "0.1C", "C"};
    auto merged = harmonize({tenths}, rules);
    CHECK(*merged.observations()[0].cells[0] == Catch::Approx(25.3));
    CHECK(merged.registry()[0].unit == "C");
}

TEST_CASE("harmonize merges disjoint panels and is order invariant") {
    auto a = parse_panel_csv(
        "country,year,sector,temperature\n"
        "UGA,2010,agriculture,25\n"
        "UGA,2011,agriculture,26\n");
    auto b = parse_panel_csv(
        "country,year,sector,rainfall,temperature\n"
        "KEN,2010,agriculture,800,22\n");
    auto ab = harmonize({a, b});
    auto ba = harmonize({b, a});
    CHECK(ab == ba);
    CHECK(ab.n_rows() == 3);
    REQUIRE(ab.registry().size() == 2);
    // Union registry is name-sorted.
    CHECK(ab.registry()[0].name == "rainfall");
    CHECK(ab.registry()[1].name == "temperature");
    // Variable absent in a source is missing for its rows.
    CHECK_FALSE(ab.observations()[2].cells[0].has_value());
}

TEST_CASE("harmonize rejects conflicting keys and incompatible units") {
    auto a = parse_panel_csv("country,year,sector,v\nUGA,2010,agriculture,1\n");
    auto b = parse_panel_csv("country,year,sector,v\nUGA,2010,agriculture,2\n");
    try {
        harmonize({a, b});
        FAIL("expected ConflictingKeys");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::conflicting_keys);
    }

    auto c = parse_panel_csv("country,year,sector,v (kg)\nKEN,2010,agriculture,1\n");
    auto d = parse_panel_csv("country,year,sector,v (lb)\nTZA,2010,agriculture,2\n");
    try {
        harmonize({c, d});
        FAIL("expected IncompatibleUnits");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::incompatible_units);
    }
}

TEST_CASE("impute linear_time interior gap") {
    auto p = parse_panel_csv(
        "country,year,sector,yield\n"
        "UGA,2000,agriculture,2\n"
        "UGA,2001,agriculture,NA\n"
        "UGA,2002,agriculture,4\n");
    auto [filled, report] = impute(p, ImputeMethod::linear_time);
    CHECK(*filled.observations()[1].cells[0] == Catch::Approx(3.0));
    CHECK(filled.observations()[1].imputed[0]);
    CHECK_FALSE(filled.observations()[0].imputed[0]);
    CHECK(report.cells_imputed == 1);
    CHECK(report.per_variable.at("yield") == 1);
}

TEST_CASE("impute linear_time respects year distance") {
    auto p = parse_panel_csv(
        "country,year,sector,yield\n"
        "UGA,2000,agriculture,1\n"
        "UGA,2002,agriculture,NA\n"
        "UGA,2003,agriculture,NA\n"
        "UGA,2006,agriculture,7\n");
    auto [filled, report] = impute(p, ImputeMethod::linear_time);
    // Interpolated in the year coordinate: value = 1 + (y-2000).
    CHECK(*filled.observations()[1].cells[0] == Catch::Approx(3.0));
    CHECK(*filled.observations()[2].cells[0] == Catch::Approx(4.0));
}

TEST_CASE("impute boundary gap carries nearest value") {
    auto p = parse_panel_csv(
        "country,year,sector,yield\n"
        "UGA,2000,agriculture,NA\n"
        "UGA,2001,agriculture,5\n"
        "UGA,2002,agriculture,NA\n");
    auto [filled, report] = impute(p, ImputeMethod::linear_time);
    CHECK(*filled.observations()[0].cells[0] == Catch::Approx(5.0));
    CHECK(*filled.observations()[2].cells[0] == Catch::Approx(5.0));
    CHECK(report.cells_imputed == 2);
}

TEST_CASE("impute entity_mean") {
    auto p = parse_panel_csv(
        "country,year,sector,yield\n"
        "UGA,2000,agriculture,2\n"
        "UGA,2001,agriculture,NA\n"
        "UGA,2002,agriculture,6\n");
    auto [filled, report] = impute(p, ImputeMethod::entity_mean);
    CHECK(*filled.observations()[1].cells[0] == Catch::Approx(4.0));
}

TEST_CASE("impute with nothing missing is the identity") {
    auto p = parse_panel_csv(kSmallCsv);
    auto [filled, report] = impute(p, ImputeMethod::linear_time);
    CHECK(filled == p);
    CHECK(report.cells_imputed == 0);
}

TEST_CASE("impute is idempotent and never alters observed cells") {
    auto p = parse_panel_csv(
        "country,year,sector,yield,temp\n"
        "UGA,2000,agriculture,2,NA\n"
        "UGA,2001,agriculture,NA,20\n"
        "UGA,2002,agriculture,4,22\n"
        "KEN,2000,agriculture,1,15\n"
        "KEN,2001,agriculture,NA,NA\n"
        "KEN,2002,agriculture,2,17\n");
    auto [once, r1] = impute(p, ImputeMethod::linear_time);
    auto [twice, r2] = impute(once, ImputeMethod::linear_time);
    CHECK(once == twice);
    CHECK(r2.cells_imputed == 0);
    // Observed cells unchanged.
    for (std::size_t i = 0; i < p.n_rows(); ++i)
        for (std::size_t v = 0; v < p.registry().size(); ++v)
            if (p.observations()[i].cells[v])
                CHECK(*once.observations()[i].cells[v] == *p.observations()[i].cells[v]);
}

TEST_CASE("impute fails on an all-missing series") {
    auto p = parse_panel_csv(
        "country,year,sector,yield\n"
        "UGA,2000,agriculture,NA\n"
        "UGA,2001,agriculture,NA\n");
    try {
        impute(p, ImputeMethod::linear_time);
        FAIL("expected AllMissingSeries");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::all_missing_series);
        CHECK(std::string(e.what()).find("UGA") != std::string::npos);
        CHECK(std::string(e.what()).find("yield") != std::string::npos);
    }
}

TEST_CASE("year_range filters rows") {
    HarmonizationRules rules;
    rules.year_range = {{2005, 2010}};
    auto p = parse_panel_csv(
        "country,year,sector,v\n"
        "UGA,2000,agriculture,1\n"
        "UGA,2007,agriculture,2\n",
        rules);
    REQUIRE(p.n_rows() == 1);
    CHECK(p.observations()[0].year == 2007);
}
