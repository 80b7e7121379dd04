#include "support.hpp"

#include "driftdr/csv.hpp"
#include "driftdr/data_model.hpp"

#include <doctest.h>

#include <sstream>

using namespace driftdr;

TEST_SUITE("data_model") {

TEST_CASE("blank outcome cell means missing") {
    std::istringstream in("x,arm,y\n0.1,1,0.3\n0.2,1,\n0.3,0,0.9\n");
    const auto d = load_csv(in, {"arm", "y", std::nullopt, {"x"}, std::nullopt});
    REQUIRE(d.n() == 3);
    CHECK(d[0].m == 1);
    CHECK(d[1].m == 0);
    CHECK(d[2].m == 1);
    CHECK_FALSE(d[1].y.has_value());
}

TEST_CASE("explicit missingness column overrides blank detection") {
    std::istringstream in("x,arm,y,obs\n0.1,1,0.3,1\n0.2,1,,0\n");
    const auto d = load_csv(in, {"arm", "y", std::string("obs"), {"x"}, std::nullopt});
    CHECK(d[0].m == 1);
    CHECK(d[1].m == 0);
}

TEST_CASE("arm value 2 is rejected as non-binary") {
    std::istringstream in("x,arm,y\n0.1,1,0.3\n0.2,2,0.4\n");
    try {
        (void)load_csv(in, {"arm", "y", std::nullopt, {"x"}, std::nullopt});
        FAIL("expected an error");
    } catch (const csv::CsvError& e) {
        CHECK(std::string(e.what()).find("non-binary arm") != std::string::npos);
        CHECK(e.row() == 2);
    }
}

TEST_CASE("target arm recodes multi-arm files") {
    std::istringstream in("x,arm,y\n0.1,B,0.3\n0.2,A,0.4\n0.3,C,\n");
    const auto d = load_csv(in, {"arm", "y", std::nullopt, {"x"}, std::string("A")});
    CHECK(d[0].a == 0);
    CHECK(d[1].a == 1);
    CHECK(d[2].a == 0);
}

TEST_CASE("records violate the observed/outcome invariant") {
    ObservationRecord bad{{0.1}, 1, 1, std::nullopt};
    CHECK_THROWS_AS(Dataset({bad}, {"x"}), std::invalid_argument);
    ObservationRecord bad2{{0.1}, 1, 0, 0.5};
    CHECK_THROWS_AS(Dataset({bad2}, {"x"}), std::invalid_argument);
}

TEST_CASE("write_csv then load_csv reproduces random datasets") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 5 + rng.below(60);
        const std::size_t p = 1 + rng.below(5);
        const auto d = testing::random_dataset(rng, n, p, trial % 2 == 0);
        CsvSchema schema{"arm", "outcome", std::nullopt, d.covariate_names(), std::nullopt};
        if (trial % 3 == 0) schema.miss_col = "observed";
        std::stringstream buf;
        write_csv(buf, d, schema);
        const auto back = load_csv(buf, schema);
        REQUIRE(back == d);
    }
}

TEST_CASE("user bounds map affinely and clip into the open interval") {
    std::vector<ObservationRecord> recs = {{{0.0}, 1, 1, 10.0}, {{0.0}, 1, 1, 20.0}, {{0.0}, 1, 1, 30.0}};
    const Dataset d(recs, {"x"});
    const auto [bd, b] = bound_outcomes(d, OutcomeBounds{10.0, 30.0, BoundsSource::user_supplied});
    CHECK(*bd[0].y == 0.0005);
    CHECK(*bd[1].y == 0.5);
    CHECK(*bd[2].y == 0.9995);
    CHECK(b.to_raw(0.25) == doctest::Approx(15.0).epsilon(1e-15));
}

TEST_CASE("automatic bounds widen the observed range") {
    std::vector<ObservationRecord> recs = {{{0.0}, 1, 1, 10.0}, {{0.0}, 1, 1, 30.0}, {{0.0}, 0, 0, std::nullopt}};
    const auto [bd, b] = bound_outcomes(Dataset(recs, {"x"}), std::nullopt);
    CHECK(b.source == BoundsSource::data_min_max);
    CHECK(b.lo == doctest::Approx(9.98));
    CHECK(b.hi == doctest::Approx(30.02));
    CHECK(*bd[0].y > 0.0);
    CHECK(*bd[1].y < 1.0);
    CHECK(b.to_raw(*bd[1].y) == doctest::Approx(30.0).epsilon(1e-14));
}

TEST_CASE("already-unit bounds are the identity") {
    Rng rng(3);
    const auto d = testing::random_dataset(rng, 40, 2);
    const auto [bd, b] = bound_outcomes(d, OutcomeBounds{0.0, 1.0, BoundsSource::already_unit});
    CHECK(bd == d);
    CHECK(b.to_raw(0.37) == 0.37);
}

TEST_CASE("bounds reject outcomes outside the supplied range and constant outcomes") {
    std::vector<ObservationRecord> recs = {{{0.0}, 1, 1, 5.0}, {{0.0}, 1, 1, 5.0}};
    const Dataset d(recs, {"x"});
    CHECK_THROWS(bound_outcomes(d, OutcomeBounds{0.0, 1.0, BoundsSource::user_supplied}));
    CHECK_THROWS(bound_outcomes(d, std::nullopt));
}

TEST_CASE("csv reader handles quotes, CRLF and comment lines") {
    std::istringstream in("# produced by a test\n\"a\",b\r\n\"x,\"\"y\"\"\",2\r\n");
    const auto t = csv::read(in);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.comments.size() == 1);
    CHECK(t.rows[0][0] == "x,\"y\"");
    CHECK(t.rows[0][1] == "2");
    std::istringstream ragged("a,b\n1\n");
    CHECK_THROWS_AS(csv::read(ragged), csv::CsvError);
}

TEST_CASE("format_double round-trips") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.below(20)) - 10.0);
        double back = 0.0;
        REQUIRE(csv::parse_double(csv::format_double(v), back));
        REQUIRE(back == v);
    }
}

}
