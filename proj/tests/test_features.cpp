#include "flexclust/error.hpp"
#include "flexclust/features.hpp"
#include "flexclust/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace flexclust;

namespace {

// Sakamoto's day-of-week, 0 = Sunday. Independent of std::chrono.
int day_of_week(int y, int m, int d)
{
    static const int t[] = {0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4};
    if (m < 3) {
        y -= 1;
    }
    return (y + y / 4 - y / 100 + y / 400 + t[m - 1] + d) % 7;
}

int weekdays_in_year(int y)
{
    static const int len[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    int count = 0;
    for (int m = 1; m <= 12; ++m) {
        const int days = len[m - 1] + (m == 2 && leap ? 1 : 0);
        for (int d = 1; d <= days; ++d) {
            const int w = day_of_week(y, m, d);
            count += (w != 0 && w != 6) ? 1 : 0;
        }
    }
    return count;
}

PeakDayProfile profile_from(const std::vector<double>& values)
{
    PeakDayProfile p;
    p.household_id = "h";
    p.date = make_date(2011, 3, 14);
    for (std::size_t s = 0; s < values.size(); ++s) {
        if (!std::isnan(values[s])) {
            p.slots[s] = values[s];
            ++p.present;
        }
    }
    p.valid = true;
    return p;
}

HouseholdProfiles household(const std::string& id, double level, const std::vector<int>& max_slots)
{
    HouseholdProfiles h{id, {}};
    for (std::size_t d = 0; d < max_slots.size(); ++d) {
        std::vector<double> v(peak_slot_count, level);
        v[static_cast<std::size_t>(max_slots[d])] = level + 500.0;
        v[47 - static_cast<std::size_t>(max_slots[d]) % 48] -= 1.0;
        auto p = profile_from(v);
        p.household_id = id;
        p.mean_power = level;
        p.time_of_max = time_of_extreme(p, Extreme::max);
        p.time_of_min = time_of_extreme(p, Extreme::min);
        h.days.push_back(p);
    }
    return h;
}

} // namespace

TEST_CASE("extract_peak_days: a full year yields one profile per weekday")
{
    const Timestamp first = make_timestamp(make_date(2011, 1, 1), 0, 0);
    const std::vector<double> values(365 * 288, 250.0);
    const AlignedSeries series("h", first, values);
    const auto days = extract_peak_days(series, Calendar{}, 0.9);
    const int expected = weekdays_in_year(2011);
    CHECK(expected == 260);
    CHECK(days.size() == static_cast<std::size_t>(expected));
    for (const auto& d : days) {
        CHECK(d.valid);
        CHECK(d.present == peak_slot_count);
        CHECK(d.time_of_max == 0);
        CHECK(d.mean_power == 250.0);
    }
}

TEST_CASE("extract_peak_days skips weekends and flags sparse days")
{
    // Saturday 2011-03-12 only.
    const std::vector<double> sat(288, 1.0);
    CHECK(extract_peak_days(AlignedSeries("h", make_timestamp(make_date(2011, 3, 12), 0, 0), sat), Calendar{})
              .empty());

    std::vector<double> monday(288, 1.0);
    for (std::size_t s = 0; s < 8; ++s) {
        monday[16 * 12 + s] = std::nan("");
    }
    const auto days =
        extract_peak_days(AlignedSeries("h", make_timestamp(make_date(2011, 3, 14), 0, 0), monday), Calendar{}, 0.9);
    REQUIRE(days.size() == 1);
    CHECK(days[0].present == 40);
    CHECK_FALSE(days[0].valid);
    CHECK_FALSE(days[0].time_of_max.has_value());

    const Calendar holiday{{make_date(2011, 3, 14)}};
    CHECK(extract_peak_days(AlignedSeries("h", make_timestamp(make_date(2011, 3, 14), 0, 0), monday), holiday)
              .empty());
}

TEST_CASE("time_of_extreme")
{
    std::vector<double> v(peak_slot_count, 100.0);
    v[25] = 900.0; // 18:05
    v[7] = 3.0;
    const auto p = profile_from(v);
    CHECK(time_of_extreme(p, Extreme::max) == 125);
    CHECK(time_of_extreme(p, Extreme::min) == 35);

    const auto flat = profile_from(std::vector<double>(peak_slot_count, 42.0));
    CHECK(time_of_extreme(flat, Extreme::max) == 0);
    CHECK(time_of_extreme(flat, Extreme::min) == 0);

    std::vector<double> last(peak_slot_count, 1.0);
    last[47] = 2.0;
    CHECK(time_of_extreme(profile_from(last), Extreme::max) == 235);

    auto invalid = flat;
    invalid.valid = false;
    CHECK_THROWS_AS(time_of_extreme(invalid, Extreme::max), ContractViolation);
}

TEST_CASE("property: time_of_extreme indexes the extreme present slot")
{
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> level(0, 20);
    std::bernoulli_distribution gone(0.1);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> v(peak_slot_count);
        for (auto& x : v) {
            x = gone(rng) ? std::nan("") : static_cast<double>(level(rng));
        }
        v[0] = 5.0;
        const auto p = profile_from(v);
        const auto imax = static_cast<std::size_t>(time_of_extreme(p, Extreme::max) / 5);
        const auto imin = static_cast<std::size_t>(time_of_extreme(p, Extreme::min) / 5);
        for (std::size_t s = 0; s < peak_slot_count; ++s) {
            if (p.slots[s]) {
                CHECK(*p.slots[imax] >= *p.slots[s]);
                CHECK(*p.slots[imin] <= *p.slots[s]);
                if (*p.slots[s] == *p.slots[imax]) {
                    CHECK(s >= imax);
                }
            }
        }
    }
}

TEST_CASE("flexibility_sd examples")
{
    CHECK(flexibility_sd(std::vector<double>{120, 120, 120}) == 0.0);
    CHECK(flexibility_sd(std::vector<double>{100, 140}) == doctest::Approx(20.0).epsilon(1e-15));

    const std::vector<double> spread{60, 90, 120, 150, 180};
    // Frozen from the two-pass oracle: sqrt(9000 / 5).
    const double frozen = 42.426406871192853;
    CHECK(std::abs(oracle_sd(spread) - frozen) < 1e-12);
    CHECK(std::abs(flexibility_sd(spread) - frozen) < 1e-12);

    CHECK(flexibility_sd(std::vector<double>{100, 140}, SdKind::sample) == doctest::Approx(std::sqrt(800.0)));
    CHECK_THROWS_AS(flexibility_sd(std::vector<double>{}), ContractViolation);
    CHECK_THROWS_AS(flexibility_sd(std::vector<double>{1.0}, SdKind::sample), ContractViolation);
}

TEST_CASE("property: flexibility_sd is translation invariant and matches the oracle")
{
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> slot(0, 47);
    std::uniform_int_distribution<int> len(1, 300);
    std::uniform_real_distribution<double> shift(-1000.0, 1000.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> t(static_cast<std::size_t>(len(rng)));
        for (auto& x : t) {
            x = 5.0 * slot(rng);
        }
        const double sd = flexibility_sd(t);
        const double ref = oracle_sd(t);
        CHECK(std::abs(sd - ref) <= 1e-9 * std::max(1.0, ref));
        const double c = shift(rng);
        auto moved = t;
        for (auto& x : moved) {
            x += c;
        }
        CHECK(std::abs(flexibility_sd(moved) - sd) <= 1e-9 * std::max(1.0, sd));
    }
}

TEST_CASE("build_features")
{
    const std::vector<HouseholdProfiles> hs{
        household("b", 400.0, {20, 20, 20, 20}),
        household("a", 800.0, {10, 14, 10, 14}),
    };
    const auto two = build_features(hs, FeatureMode::two_attr);
    REQUIRE(two.size() == 2);
    CHECK(two[0].household_id == "a");
    CHECK(two[0].usage_rank == 1);
    CHECK(two[1].usage_rank == 2);
    CHECK(two[0].mean_evening_power == 800.0);
    CHECK(two[0].sd_time_of_max == doctest::Approx(10.0));
    CHECK(two[1].sd_time_of_max == 0.0);
    CHECK(two[0].n_days == 4);
    CHECK_FALSE(two[0].sd_time_of_min.has_value());

    const auto three = build_features(hs, FeatureMode::three_attr);
    REQUIRE(three[1].sd_time_of_min.has_value());
    CHECK(*three[1].sd_time_of_min == 0.0);

    // Equal usage ties on id.
    const std::vector<HouseholdProfiles> tie{household("z", 500.0, {1}), household("y", 500.0, {1})};
    const auto ranked = build_features(tie, FeatureMode::two_attr);
    CHECK(ranked[0].household_id == "y");
    CHECK(ranked[0].usage_rank == 1);

    const std::vector<HouseholdProfiles> none{HouseholdProfiles{"x", {}}};
    CHECK_THROWS_AS(build_features(none, FeatureMode::two_attr), ContractViolation);
}

TEST_CASE("property: ranks are consistent and removal only changes ranks")
{
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> level(1, 10);
    std::uniform_int_distribution<int> slot(0, 40);
    std::vector<HouseholdProfiles> hs;
    for (int i = 0; i < 30; ++i) {
        std::vector<int> slots;
        for (int d = 0; d < 12; ++d) {
            slots.push_back(slot(rng));
        }
        hs.push_back(household("h" + std::to_string(100 + i), 100.0 * level(rng), slots));
    }
    const auto all = build_features(hs, FeatureMode::three_attr);
    std::vector<std::size_t> ranks;
    for (const auto& a : all) {
        ranks.push_back(a.usage_rank);
        for (const auto& b : all) {
            if (a.usage_rank < b.usage_rank) {
                CHECK((a.mean_evening_power > b.mean_evening_power
                       || (a.mean_evening_power == b.mean_evening_power && a.household_id < b.household_id)));
            }
        }
    }
    std::sort(ranks.begin(), ranks.end());
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        CHECK(ranks[i] == i + 1);
    }

    auto fewer = hs;
    fewer.erase(fewer.begin() + 7);
    const auto reduced = build_features(fewer, FeatureMode::three_attr);
    for (const auto& r : reduced) {
        const auto it = std::find_if(all.begin(), all.end(), [&](const auto& f) { return f.household_id == r.household_id; });
        REQUIRE(it != all.end());
        CHECK(it->mean_evening_power == r.mean_evening_power);
        CHECK(it->sd_time_of_max == r.sd_time_of_max);
        CHECK(it->sd_time_of_min == r.sd_time_of_min);
        CHECK(it->n_days == r.n_days);
    }
}

TEST_CASE("features CSV round trip and row order")
{
    std::vector<FeatureVector> fs{{"h2", 400.5, 12.25, std::nullopt, 30, 2}, {"h1", 800.0, 3.0, std::nullopt, 25, 1}};
    std::ostringstream out;
    write_features_csv(out, fs);
    CHECK(out.str()
          == "household_id,mean_evening_power_w,sd_time_of_max_min,sd_time_of_min_min,n_days,usage_rank\n"
             "h1,800,3,,25,1\nh2,400.5,12.25,,30,2\n");
    std::istringstream in(out.str());
    const auto table = read_features_csv(in);
    CHECK(table.mode == FeatureMode::two_attr);
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[1] == fs[0]);

    std::istringstream mixed(std::string(features_csv_header) + "\nh1,1,2,3,4,1\nh2,1,2,,4,2\n");
    CHECK_THROWS_AS(read_features_csv(mixed), FormatError);
}
