#pragma once

#include "flexclust/civil_time.hpp"
#include "flexclust/ingest.hpp"

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace flexclust {

inline constexpr std::chrono::seconds grid_step{300};

// Evening peak window: 48 five-minute slots labelled 16:00 .. 19:55.
inline constexpr int peak_start_hour = 16;
inline constexpr std::size_t peak_slot_count = 48;
inline constexpr int peak_window_minutes = 5 * static_cast<int>(peak_slot_count);

inline constexpr std::chrono::minutes default_max_gap{30};
inline constexpr std::size_t default_min_valid_days = 20;
inline constexpr double default_min_slot_fraction = 0.9;

/// A household's power on an exact five-minute grid. Slots run contiguously
/// from first_slot(); a missing slot is stored as NaN and surfaced as nullopt.
class AlignedSeries {
public:
    AlignedSeries() = default;
    explicit AlignedSeries(std::string household_id);
    AlignedSeries(std::string household_id, Timestamp first_slot, std::vector<double> values);

    const std::string& household_id() const { return household_id_; }
    bool empty() const { return values_.empty(); }
    std::size_t size() const { return values_.size(); }
    Timestamp first_slot() const { return first_slot_; }
    Timestamp last_slot() const { return slot_time(size() - 1); }
    Timestamp slot_time(std::size_t i) const { return first_slot_ + grid_step * static_cast<long>(i); }

    std::optional<double> at(std::size_t i) const;
    /// Value at a grid timestamp; nullopt when off-grid, out of range or missing.
    std::optional<double> value_at(Timestamp t) const;
    std::size_t present_count() const;

    std::span<const double> raw() const { return values_; }

    friend bool operator==(const AlignedSeries& a, const AlignedSeries& b);

private:
    std::string household_id_;
    Timestamp first_slot_{};
    std::vector<double> values_;
};

/// True when `t` lies exactly on a five-minute boundary.
bool on_grid(Timestamp t);

/// Linear interpolation of `samples` (strictly increasing) onto every grid
/// boundary in [first reading, last reading]. A reading that falls exactly on
/// a boundary is used verbatim. Boundaries whose bracketing readings are more
/// than `max_gap` apart are left missing. No extrapolation.
///
/// Throws ContractViolation for unsorted input or a non-positive max_gap.
AlignedSeries align(const std::string& household_id, std::span<const Sample> samples,
                    std::chrono::seconds max_gap = default_max_gap);

enum class Season { spring, summer, autumn, winter };

const char* to_string(Season s);

struct DayClass {
    Date date;
    bool working = false;
    Season season = Season::winter;

    friend bool operator==(const DayClass&, const DayClass&) = default;
};

/// Working = Monday..Friday and not a holiday. Seasons follow meteorological
/// months (Dec-Feb winter, Mar-May spring, Jun-Aug summer, Sep-Nov autumn).
DayClass classify_day(Date date, const std::set<Date>& holidays);

class Calendar {
public:
    Calendar() = default;
    explicit Calendar(std::set<Date> holidays) : holidays_(std::move(holidays)) {}

    DayClass classify(Date d) const { return classify_day(d, holidays_); }
    bool is_working(Date d) const { return classify(d).working; }
    const std::set<Date>& holidays() const { return holidays_; }

private:
    std::set<Date> holidays_;
};

/// One ISO date per line; blank lines and lines starting with '#' are skipped.
/// Throws ParseError naming the offending line.
std::set<Date> parse_holidays(std::istream& in);
std::set<Date> load_holidays(const std::filesystem::path& path);

/// A peak-window day is valid when present / 48 >= min_slot_fraction.
bool peak_day_valid(std::size_t present_slots, double min_slot_fraction);

/// Number of valid working-day peak windows in the series.
std::size_t count_valid_peak_days(const AlignedSeries& series, const Calendar& calendar,
                                  double min_slot_fraction);

struct HouseholdDays {
    std::string household_id;
    std::size_t valid_days = 0;

    friend bool operator==(const HouseholdDays&, const HouseholdDays&) = default;
};

struct CleaningResult {
    std::vector<HouseholdDays> retained;
    std::vector<HouseholdDays> rejected;
};

/// Keeps households with at least `min_valid_days` valid working-day peak
/// windows (inclusive). Both lists are ordered by household id.
CleaningResult clean_cohort(std::span<const AlignedSeries> series, const Calendar& calendar,
                            std::size_t min_valid_days, double min_slot_fraction);

/// Same rule applied to precomputed valid-day counts.
CleaningResult clean_by_counts(std::vector<HouseholdDays> counts, std::size_t min_valid_days);

/// Debug export: `household_id,slot_timestamp,watts`, empty watts when missing.
void write_aligned_csv(std::ostream& out, std::span<const AlignedSeries> series);

} // namespace flexclust
