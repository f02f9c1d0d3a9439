#pragma once

#include "flexclust/civil_time.hpp"
#include "flexclust/timegrid.hpp"

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flexclust {

enum class FeatureMode { two_attr, three_attr };
enum class SdKind { population, sample };
enum class Extreme { max, min };

const char* to_string(FeatureMode m);
const char* to_string(SdKind k);
/// Accepts "2attr"/"two_attr" and "3attr"/"three_attr".
std::optional<FeatureMode> parse_feature_mode(std::string_view text);
std::optional<SdKind> parse_sd_kind(std::string_view text);

inline std::size_t attribute_count(FeatureMode m) { return m == FeatureMode::two_attr ? 2 : 3; }

/// One working day's evening window (16:00 .. 19:55) for one household.
struct PeakDayProfile {
    std::string household_id;
    Date date;
    std::array<std::optional<double>, peak_slot_count> slots{};
    std::size_t present = 0;
    bool valid = false;
    std::optional<int> time_of_max; ///< minutes after 16:00, set only when valid
    std::optional<int> time_of_min;
    double mean_power = 0.0;        ///< mean of present slots
};

/// One profile per working day with any data in the window; weekend and
/// holiday dates are skipped entirely.
std::vector<PeakDayProfile> extract_peak_days(const AlignedSeries& series, const Calendar& calendar,
                                              double min_slot_fraction = default_min_slot_fraction);

/// Minutes after 16:00 of the extreme present slot, earliest slot on ties.
/// Throws ContractViolation for an invalid profile.
int time_of_extreme(const PeakDayProfile& profile, Extreme kind);

/// Standard deviation of time-of-extreme values, in minutes. Population
/// (divide by n) unless `kind` says otherwise.
/// Throws ContractViolation on empty input, or fewer than two values for
/// the sample form.
double flexibility_sd(std::span<const double> times, SdKind kind = SdKind::population);

struct FeatureVector {
    std::string household_id;
    double mean_evening_power = 0.0; ///< watts
    double sd_time_of_max = 0.0;     ///< minutes
    std::optional<double> sd_time_of_min;
    std::size_t n_days = 0;
    std::size_t usage_rank = 0;      ///< 1 = highest consumer

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct HouseholdProfiles {
    std::string household_id;
    std::vector<PeakDayProfile> days;
};

/// Features for one household from its valid days; usage_rank is left 0.
FeatureVector household_features(const HouseholdProfiles& household, FeatureMode mode,
                                 SdKind sd_kind = SdKind::population);

/// Ranks by descending mean_evening_power, ties by ascending household id.
void assign_usage_ranks(std::span<FeatureVector> features);

/// Features for every household, ranked, ordered by household id.
std::vector<FeatureVector> build_features(std::span<const HouseholdProfiles> households, FeatureMode mode,
                                          SdKind sd_kind = SdKind::population, unsigned threads = 1);

inline constexpr std::string_view features_csv_header =
    "household_id,mean_evening_power_w,sd_time_of_max_min,sd_time_of_min_min,n_days,usage_rank";

/// Rows are written in household-id order regardless of input order.
void write_features_csv(std::ostream& out, std::span<const FeatureVector> features);

struct FeatureTable {
    FeatureMode mode = FeatureMode::two_attr;
    std::vector<FeatureVector> rows;
};

/// Reads a features CSV. The mode is three_attr when every row carries
/// sd_time_of_min and two_attr when none does; a mix is a FormatError.
FeatureTable read_features_csv(std::istream& in);

} // namespace flexclust
