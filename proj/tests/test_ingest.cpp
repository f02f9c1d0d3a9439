#include "flexclust/error.hpp"
#include "flexclust/ingest.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace flexclust;
using flexclust::testing::TempDir;

TEST_CASE("parse_reading binds the three columns")
{
    const auto r = parse_reading("h001,2011-03-14T13:02:00,350");
    CHECK(r.household_id == "h001");
    CHECK(r.timestamp == make_timestamp(make_date(2011, 3, 14), 13, 2, 0));
    CHECK(r.watts == 350.0);

    const auto crlf = parse_reading("h001,2011-03-14T13:02:00,12.5\r");
    CHECK(crlf.watts == 12.5);
}

TEST_CASE("parse_reading error families")
{
    CHECK_THROWS_AS(parse_reading("h001,2011-03-14T13:02:00,-5"), ValidationError);
    CHECK_THROWS_AS(parse_reading("h001,not-a-time,350"), ParseError);
    CHECK_THROWS_AS(parse_reading("h001,2011-02-30T13:02:00,350"), ParseError);
    CHECK_THROWS_AS(parse_reading("h001,2011-03-14T24:00:00,350"), ParseError);
    CHECK_THROWS_AS(parse_reading("h001,2011-03-14T13:02:00,abc"), ValidationError);
    CHECK_THROWS_AS(parse_reading("h001,2011-03-14T13:02:00,nan"), ValidationError);
    CHECK_THROWS_AS(parse_reading("h001,2011-03-14T13:02:00,"), ValidationError);
    CHECK_THROWS_AS(parse_reading("h001,2011-03-14T13:02:00"), FormatError);
    CHECK_THROWS_AS(parse_reading("h001,2011-03-14T13:02:00,1,2"), FormatError);

    try {
        parse_reading("h001,bad,1", 17);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 17") != std::string::npos);
    }
}

TEST_CASE("load_cohort merges files and keeps the first duplicate")
{
    TempDir dir("ingest");
    const auto a = dir.write("a.csv", "household_id,timestamp,watts\n"
                                      "h001,2011-03-14T13:07:00,200\n"
                                      "h001,2011-03-14T13:02:00,350\n"
                                      "h001,2011-03-14T13:02:00,360\n");
    const auto b = dir.write("b.csv", "household_id,timestamp,watts\r\n"
                                      "h001,2011-03-14T13:12:00,210\r\n"
                                      "h002,2011-03-14T13:00:00,50\r\n"
                                      "h001,2011-03-14T13:02:00,999\r\n"
                                      "garbage line\r\n");
    const std::vector<std::filesystem::path> paths{b, a};
    const auto result = load_cohort(paths);

    const auto& h1 = result.cohort.readings.at("h001");
    REQUIRE(h1.size() == 3);
    CHECK(h1[0].watts == 350.0);
    CHECK(h1[1].watts == 200.0);
    CHECK(h1[2].watts == 210.0);
    CHECK(result.cohort.readings.at("h002").size() == 1);

    CHECK(result.report.input_lines == 7);
    CHECK(result.report.accepted == 6);
    CHECK(result.report.rejected == 1);
    CHECK(result.report.duplicates == 2);
    CHECK(result.report.readings_per_household.at("h001") == 3);
    REQUIRE(result.report.rejections.size() == 1);
    CHECK(result.report.rejections[0].line == 5);
}

TEST_CASE("empty file leaves the cohort unchanged and warns")
{
    TempDir dir("ingest_empty");
    const auto a = dir.write("a.csv", "household_id,timestamp,watts\nh001,2011-03-14T13:02:00,350\n");
    const auto empty = dir.write("empty.csv", "");
    const std::vector<std::filesystem::path> one{a};
    const std::vector<std::filesystem::path> both{a, empty};
    const auto base = load_cohort(one);
    const auto with_empty = load_cohort(both);
    CHECK(base.cohort.readings == with_empty.cohort.readings);
    CHECK(with_empty.report.warnings.size() == 1);
}

TEST_CASE("missing file is an I/O error")
{
    const std::vector<std::filesystem::path> paths{"/nonexistent/flexclust/none.csv"};
    CHECK_THROWS_AS(load_cohort(paths), IoError);
}

TEST_CASE("property: loading is order-insensitive and lines are conserved")
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        TempDir dir("ingest_perm");
        std::vector<std::filesystem::path> files;
        std::size_t data_lines = 0;
        std::uniform_int_distribution<int> minute(0, 59);
        std::uniform_int_distribution<int> house(1, 4);
        std::uniform_int_distribution<int> watts(-20, 500);
        std::uniform_int_distribution<int> junk(0, 9);
        for (int f = 0; f < 4; ++f) {
            std::string text = "household_id,timestamp,watts\n";
            for (int l = 0; l < 40; ++l) {
                char buf[64];
                if (junk(rng) == 0) {
                    std::snprintf(buf, sizeof buf, "h%d,2011-03-14T13:%02d:00\n", house(rng), minute(rng));
                } else {
                    std::snprintf(buf, sizeof buf, "h%d,2011-03-14T13:%02d:00,%d\n", house(rng), minute(rng),
                                  watts(rng));
                }
                text += buf;
                ++data_lines;
            }
            files.push_back(dir.write("f" + std::to_string(f) + ".csv", text));
        }
        const auto reference = load_cohort(files);
        CHECK(reference.report.accepted + reference.report.rejected == data_lines);
        CHECK(reference.report.input_lines == data_lines);
        CHECK(reference.cohort.reading_count() == reference.report.accepted - reference.report.duplicates);
        for (const auto& [id, samples] : reference.cohort.readings) {
            for (std::size_t i = 1; i < samples.size(); ++i) {
                CHECK(samples[i - 1].timestamp < samples[i].timestamp);
            }
        }

        auto shuffled = files;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto again = load_cohort(shuffled, 3);
        CHECK(again.cohort == reference.cohort);
    }
}
