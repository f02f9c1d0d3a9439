#include "flexclust/error.hpp"
#include "flexclust/timegrid.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace flexclust;
using namespace std::chrono_literals;

namespace {

const Date day = make_date(2011, 3, 14);

Sample at(int h, int m, double w, int s = 0)
{
    return {make_timestamp(day, h, m, s), w};
}

} // namespace

TEST_CASE("align interpolates linearly between bracketing readings")
{
    const std::vector<Sample> s{at(13, 2, 100), at(13, 7, 200)};
    const auto series = align("h001", s);
    REQUIRE(series.size() == 1);
    CHECK(series.first_slot() == make_timestamp(day, 13, 5));
    CHECK(*series.at(0) == doctest::Approx(160.0).epsilon(1e-12));
}

TEST_CASE("align uses a reading on a boundary verbatim")
{
    const std::vector<Sample> one{at(13, 0, 50)};
    const auto series = align("h001", one);
    REQUIRE(series.size() == 1);
    CHECK(*series.value_at(make_timestamp(day, 13, 0)) == 50.0);

    const std::vector<Sample> three{at(12, 58, 10), at(13, 0, 50), at(13, 3, 90)};
    const auto s3 = align("h001", three);
    CHECK(*s3.value_at(make_timestamp(day, 13, 0)) == 50.0);
}

TEST_CASE("align leaves slots missing across gaps longer than max_gap")
{
    const std::vector<Sample> s{at(13, 2, 100), at(13, 50, 120)};
    const auto series = align("h001", s, 30min);
    CHECK(series.size() == 10); // 13:05 .. 13:50
    CHECK(series.present_count() == 1); // 13:50 coincides with a reading
    for (int m = 5; m <= 45; m += 5) {
        CHECK_FALSE(series.value_at(make_timestamp(day, 13, m)).has_value());
    }
    // The same gap within max_gap is bridged.
    CHECK(align("h001", s, 60min).present_count() == 10);
}

TEST_CASE("align never extrapolates and rejects bad input")
{
    const std::vector<Sample> s{at(13, 1, 100), at(13, 4, 200)};
    CHECK(align("h001", s).empty());
    CHECK(align("h001", std::vector<Sample>{}).empty());

    const std::vector<Sample> unsorted{at(13, 7, 1), at(13, 2, 1)};
    CHECK_THROWS_AS(align("h001", unsorted), ContractViolation);
    const std::vector<Sample> repeated{at(13, 2, 1), at(13, 2, 1)};
    CHECK_THROWS_AS(align("h001", repeated), ContractViolation);
    CHECK_THROWS_AS(align("h001", s, 0s), ContractViolation);
}

TEST_CASE("property: affine signals are reproduced exactly and values stay bracketed")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    std::uniform_int_distribution<int> step(1, 400);
    std::uniform_real_distribution<double> power(0.0, 3000.0);
    const Timestamp origin = make_timestamp(day, 0, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const double a = coef(rng);
        const double b = 5000.0;
        auto signal = [&](Timestamp t) { return a * static_cast<double>((t - origin).count()) / 60.0 + b; };
        std::vector<Sample> samples;
        Timestamp t = origin + std::chrono::seconds{step(rng)};
        for (int i = 0; i < 300; ++i) {
            samples.push_back({t, signal(t)});
            t += std::chrono::seconds{step(rng)};
        }
        const auto series = align("h", samples, 1h);
        REQUIRE(series.present_count() == series.size());
        for (std::size_t i = 0; i < series.size(); ++i) {
            const double expected = signal(series.slot_time(i));
            CHECK(std::abs(*series.at(i) - expected) <= 1e-9 * std::abs(expected));
        }

        // Arbitrary (non-affine) data: every slot lies within its bracket.
        std::vector<Sample> noisy = samples;
        for (auto& smp : noisy) {
            smp.watts = power(rng);
        }
        const auto ns = align("h", noisy, 1h);
        std::size_t j = 0;
        for (std::size_t i = 0; i < ns.size(); ++i) {
            const Timestamp slot = ns.slot_time(i);
            while (j + 1 < noisy.size() && noisy[j + 1].timestamp <= slot) {
                ++j;
            }
            const double lo = noisy[j].timestamp == slot ? noisy[j].watts
                                                         : std::min(noisy[j].watts, noisy[j + 1].watts);
            const double hi = noisy[j].timestamp == slot ? noisy[j].watts
                                                         : std::max(noisy[j].watts, noisy[j + 1].watts);
            CHECK(*ns.at(i) >= lo);
            CHECK(*ns.at(i) <= hi);
        }
    }
}

TEST_CASE("property: aligning an aligned series is the identity")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> power(0.0, 2000.0);
    std::vector<double> values(500);
    for (auto& v : values) {
        v = power(rng);
    }
    const AlignedSeries grid("h", make_timestamp(day, 0, 0), values);
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        samples.push_back({grid.slot_time(i), *grid.at(i)});
    }
    CHECK(align("h", samples) == grid);
}

TEST_CASE("classify_day weekday, season and holiday rules")
{
    const std::set<Date> none;
    CHECK(classify_day(make_date(2011, 3, 14), none) == DayClass{make_date(2011, 3, 14), true, Season::spring});
    CHECK(classify_day(make_date(2011, 7, 2), none) == DayClass{make_date(2011, 7, 2), false, Season::summer});
    const std::set<Date> boxing{make_date(2011, 12, 26)};
    CHECK(classify_day(make_date(2011, 12, 26), boxing)
          == DayClass{make_date(2011, 12, 26), false, Season::winter});
    CHECK(classify_day(make_date(2011, 10, 3), none).season == Season::autumn);
    CHECK(classify_day(make_date(2011, 2, 28), none).season == Season::winter);
}

TEST_CASE("property: any 7 consecutive non-holiday days hold 5 working days")
{
    const std::set<Date> none;
    for (Date start = make_date(2010, 12, 1); start < make_date(2012, 3, 1); start += std::chrono::days{1}) {
        int working = 0;
        for (int i = 0; i < 7; ++i) {
            working += classify_day(start + std::chrono::days{i}, none).working ? 1 : 0;
        }
        CHECK(working == 5);
    }
}

TEST_CASE("holiday file parsing")
{
    std::istringstream good("# bank holidays\n2011-12-26\n\n2011-12-27\r\n");
    const auto h = parse_holidays(good);
    CHECK(h.size() == 2);
    CHECK(h.contains(make_date(2011, 12, 27)));
    std::istringstream bad("2011-12-26\n26/12/2011\n");
    CHECK_THROWS_AS(parse_holidays(bad), ParseError);
}

namespace {

// `days` consecutive calendar days starting Monday 2011-03-14, each with the
// evening window fully populated except `drop` slots removed per day.
AlignedSeries evenings(std::size_t days, std::size_t drop = 0)
{
    const Timestamp first = make_timestamp(day, 0, 0);
    const std::size_t n = days * 288;
    std::vector<double> values(n, std::nan(""));
    for (std::size_t d = 0; d < days; ++d) {
        for (std::size_t s = 0; s < peak_slot_count; ++s) {
            if (s >= drop) {
                values[d * 288 + 16 * 12 + s] = 100.0;
            }
        }
    }
    return AlignedSeries("h", first, values);
}

} // namespace

TEST_CASE("clean_cohort thresholds")
{
    const Calendar cal;
    std::vector<AlignedSeries> series;
    series.push_back(evenings(280));            // 200 working days
    series.emplace_back("empty");
    const auto result = clean_cohort(series, cal, 20, 0.9);
    REQUIRE(result.retained.size() == 1);
    CHECK(result.retained[0].valid_days == 200);
    REQUIRE(result.rejected.size() == 1);
    CHECK(result.rejected[0] == HouseholdDays{"empty", 0});

    // Exactly min_valid_days is enough: 28 calendar days = 20 working days.
    const std::vector<AlignedSeries> four_weeks{evenings(28)};
    CHECK(clean_cohort(four_weeks, cal, 20, 0.9).retained.size() == 1);
    CHECK(clean_cohort(four_weeks, cal, 21, 0.9).rejected.size() == 1);

    // 40 of 48 slots is below 0.9; 44 of 48 is above.
    const std::vector<AlignedSeries> sparse{evenings(28, 8)};
    CHECK(clean_cohort(sparse, cal, 1, 0.9).rejected[0].valid_days == 0);
    const std::vector<AlignedSeries> nearly{evenings(28, 4)};
    CHECK(clean_cohort(nearly, cal, 1, 0.9).retained[0].valid_days == 20);

    CHECK_THROWS_AS(clean_cohort(sparse, cal, 1, 0.0), ContractViolation);
}

TEST_CASE("aligned debug export marks missing slots with an empty field")
{
    const std::vector<AlignedSeries> series{AlignedSeries("h1", make_timestamp(day, 13, 0), {1.5, std::nan("")})};
    std::ostringstream out;
    write_aligned_csv(out, series);
    CHECK(out.str() == "household_id,slot_timestamp,watts\nh1,2011-03-14T13:00:00,1.5\nh1,2011-03-14T13:05:00,\n");
}
