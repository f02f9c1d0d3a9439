#include "flexclust/timegrid.hpp"

#include "flexclust/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace flexclust {

namespace {

constexpr double missing = std::numeric_limits<double>::quiet_NaN();

long long floor_div(long long a, long long b)
{
    long long q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

Timestamp grid_floor(Timestamp t)
{
    const long long step = grid_step.count();
    return Timestamp{std::chrono::seconds{floor_div(t.time_since_epoch().count(), step) * step}};
}

Timestamp grid_ceil(Timestamp t)
{
    const Timestamp f = grid_floor(t);
    return f == t ? f : f + grid_step;
}

} // namespace

AlignedSeries::AlignedSeries(std::string household_id) : household_id_(std::move(household_id)) {}

AlignedSeries::AlignedSeries(std::string household_id, Timestamp first_slot, std::vector<double> values)
    : household_id_(std::move(household_id)), first_slot_(first_slot), values_(std::move(values))
{
    if (!values_.empty() && !on_grid(first_slot_)) {
        throw ContractViolation("aligned series must start on a five-minute boundary");
    }
}

std::optional<double> AlignedSeries::at(std::size_t i) const
{
    if (i >= values_.size() || std::isnan(values_[i])) {
        return std::nullopt;
    }
    return values_[i];
}

std::optional<double> AlignedSeries::value_at(Timestamp t) const
{
    if (values_.empty() || !on_grid(t) || t < first_slot_) {
        return std::nullopt;
    }
    return at(static_cast<std::size_t>((t - first_slot_) / grid_step));
}

std::size_t AlignedSeries::present_count() const
{
    return static_cast<std::size_t>(
        std::count_if(values_.begin(), values_.end(), [](double v) { return !std::isnan(v); }));
}

bool operator==(const AlignedSeries& a, const AlignedSeries& b)
{
    if (a.household_id_ != b.household_id_ || a.values_.size() != b.values_.size()) {
        return false;
    }
    if (a.values_.empty()) {
        return true;
    }
    if (a.first_slot_ != b.first_slot_) {
        return false;
    }
    for (std::size_t i = 0; i < a.values_.size(); ++i) {
        const double x = a.values_[i];
        const double y = b.values_[i];
        if (std::isnan(x) != std::isnan(y) || (!std::isnan(x) && x != y)) {
            return false;
        }
    }
    return true;
}

bool on_grid(Timestamp t)
{
    return grid_floor(t) == t;
}

AlignedSeries align(const std::string& household_id, std::span<const Sample> samples,
                    std::chrono::seconds max_gap)
{
    if (max_gap <= std::chrono::seconds::zero()) {
        throw ContractViolation("align: max_gap must be positive");
    }
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (!(samples[i - 1].timestamp < samples[i].timestamp)) {
            throw ContractViolation("align: readings for " + household_id
                                    + " are not strictly increasing at "
                                    + format_timestamp(samples[i].timestamp));
        }
    }
    if (samples.empty()) {
        return AlignedSeries(household_id);
    }

    const Timestamp first = grid_ceil(samples.front().timestamp);
    const Timestamp last = grid_floor(samples.back().timestamp);
    if (last < first) {
        return AlignedSeries(household_id);
    }
    const auto n = static_cast<std::size_t>((last - first) / grid_step) + 1;
    std::vector<double> values(n, missing);

    std::size_t j = 0; // samples[j].timestamp <= slot < samples[j + 1].timestamp
    for (std::size_t i = 0; i < n; ++i) {
        const Timestamp slot = first + grid_step * static_cast<long>(i);
        while (j + 1 < samples.size() && samples[j + 1].timestamp <= slot) {
            ++j;
        }
        const Sample& lo = samples[j];
        if (lo.timestamp == slot) {
            values[i] = lo.watts;
            continue;
        }
        // slot > lo.timestamp here, and slot <= last reading, so j + 1 exists.
        const Sample& hi = samples[j + 1];
        const auto span = hi.timestamp - lo.timestamp;
        if (span > max_gap) {
            continue;
        }
        const double frac = static_cast<double>((slot - lo.timestamp).count())
                            / static_cast<double>(span.count());
        const double v = lo.watts + (hi.watts - lo.watts) * frac;
        values[i] = std::clamp(v, std::min(lo.watts, hi.watts), std::max(lo.watts, hi.watts));
    }
    return AlignedSeries(household_id, first, std::move(values));
}

const char* to_string(Season s)
{
    switch (s) {
    case Season::spring: return "spring";
    case Season::summer: return "summer";
    case Season::autumn: return "autumn";
    case Season::winter: return "winter";
    }
    return "unknown";
}

DayClass classify_day(Date date, const std::set<Date>& holidays)
{
    const std::chrono::weekday wd{date};
    const bool weekend = wd == std::chrono::Saturday || wd == std::chrono::Sunday;
    const unsigned month = static_cast<unsigned>(std::chrono::year_month_day{date}.month());
    Season season = Season::winter;
    if (month >= 3 && month <= 5) {
        season = Season::spring;
    } else if (month >= 6 && month <= 8) {
        season = Season::summer;
    } else if (month >= 9 && month <= 11) {
        season = Season::autumn;
    }
    return DayClass{date, !weekend && !holidays.contains(date), season};
}

std::set<Date> parse_holidays(std::istream& in)
{
    std::set<Date> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        while (!view.empty() && (view.back() == '\r' || view.back() == ' ' || view.back() == '\t')) {
            view.remove_suffix(1);
        }
        while (!view.empty() && (view.front() == ' ' || view.front() == '\t')) {
            view.remove_prefix(1);
        }
        if (view.empty() || view.front() == '#') {
            continue;
        }
        const auto d = parse_date(view);
        if (!d) {
            throw ParseError("holidays line " + std::to_string(line_no) + ": malformed date '"
                             + std::string(view) + "'");
        }
        out.insert(*d);
    }
    return out;
}

std::set<Date> load_holidays(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open holiday file " + path.string());
    }
    return parse_holidays(in);
}

bool peak_day_valid(std::size_t present_slots, double min_slot_fraction)
{
    return static_cast<double>(present_slots) / static_cast<double>(peak_slot_count) >= min_slot_fraction;
}

std::size_t count_valid_peak_days(const AlignedSeries& series, const Calendar& calendar,
                                  double min_slot_fraction)
{
    if (series.empty()) {
        return 0;
    }
    std::size_t valid = 0;
    for (Date d = date_of(series.first_slot()); d <= date_of(series.last_slot()); d += std::chrono::days{1}) {
        if (!calendar.is_working(d)) {
            continue;
        }
        const Timestamp start = make_timestamp(d, peak_start_hour, 0);
        std::size_t present = 0;
        for (std::size_t s = 0; s < peak_slot_count; ++s) {
            if (series.value_at(start + grid_step * static_cast<long>(s))) {
                ++present;
            }
        }
        if (present > 0 && peak_day_valid(present, min_slot_fraction)) {
            ++valid;
        }
    }
    return valid;
}

CleaningResult clean_by_counts(std::vector<HouseholdDays> counts, std::size_t min_valid_days)
{
    std::sort(counts.begin(), counts.end(),
              [](const HouseholdDays& a, const HouseholdDays& b) { return a.household_id < b.household_id; });
    CleaningResult result;
    for (auto& c : counts) {
        (c.valid_days >= min_valid_days ? result.retained : result.rejected).push_back(std::move(c));
    }
    return result;
}

CleaningResult clean_cohort(std::span<const AlignedSeries> series, const Calendar& calendar,
                            std::size_t min_valid_days, double min_slot_fraction)
{
    if (!(min_slot_fraction > 0.0 && min_slot_fraction <= 1.0)) {
        throw ContractViolation("clean_cohort: min_slot_fraction must lie in (0, 1]");
    }
    std::vector<HouseholdDays> counts;
    counts.reserve(series.size());
    for (const auto& s : series) {
        counts.push_back({s.household_id(), count_valid_peak_days(s, calendar, min_slot_fraction)});
    }
    return clean_by_counts(std::move(counts), min_valid_days);
}

void write_aligned_csv(std::ostream& out, std::span<const AlignedSeries> series)
{
    out << "household_id,slot_timestamp,watts\n";
    char buf[32];
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            out << s.household_id() << ',' << format_timestamp(s.slot_time(i)) << ',';
            if (const auto v = s.at(i)) {
                std::snprintf(buf, sizeof buf, "%.9g", *v);
                out << buf;
            }
            out << '\n';
        }
    }
}

} // namespace flexclust
