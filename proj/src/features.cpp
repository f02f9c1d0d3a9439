#include "flexclust/features.hpp"

#include "flexclust/error.hpp"
#include "flexclust/parallel.hpp"
#include "flexclust/text.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

namespace flexclust {

const char* to_string(FeatureMode m)
{
    return m == FeatureMode::two_attr ? "2attr" : "3attr";
}

const char* to_string(SdKind k)
{
    return k == SdKind::population ? "population" : "sample";
}

std::optional<FeatureMode> parse_feature_mode(std::string_view text)
{
    if (text == "2attr" || text == "two_attr") {
        return FeatureMode::two_attr;
    }
    if (text == "3attr" || text == "three_attr") {
        return FeatureMode::three_attr;
    }
    return std::nullopt;
}

std::optional<SdKind> parse_sd_kind(std::string_view text)
{
    if (text == "population") {
        return SdKind::population;
    }
    if (text == "sample") {
        return SdKind::sample;
    }
    return std::nullopt;
}

std::vector<PeakDayProfile> extract_peak_days(const AlignedSeries& series, const Calendar& calendar,
                                              double min_slot_fraction)
{
    std::vector<PeakDayProfile> out;
    if (series.empty()) {
        return out;
    }
    for (Date d = date_of(series.first_slot()); d <= date_of(series.last_slot()); d += std::chrono::days{1}) {
        if (!calendar.is_working(d)) {
            continue;
        }
        PeakDayProfile p;
        p.household_id = series.household_id();
        p.date = d;
        const Timestamp start = make_timestamp(d, peak_start_hour, 0);
        double sum = 0.0;
        for (std::size_t s = 0; s < peak_slot_count; ++s) {
            p.slots[s] = series.value_at(start + grid_step * static_cast<long>(s));
            if (p.slots[s]) {
                ++p.present;
                sum += *p.slots[s];
            }
        }
        if (p.present == 0) {
            continue;
        }
        p.mean_power = sum / static_cast<double>(p.present);
        p.valid = peak_day_valid(p.present, min_slot_fraction);
        if (p.valid) {
            p.time_of_max = time_of_extreme(p, Extreme::max);
            p.time_of_min = time_of_extreme(p, Extreme::min);
        }
        out.push_back(std::move(p));
    }
    return out;
}

int time_of_extreme(const PeakDayProfile& profile, Extreme kind)
{
    if (!profile.valid) {
        throw ContractViolation("time_of_extreme: profile for " + profile.household_id + " on "
                                + format_date(profile.date) + " is not valid");
    }
    std::optional<std::size_t> best;
    for (std::size_t s = 0; s < peak_slot_count; ++s) {
        const auto& v = profile.slots[s];
        if (!v) {
            continue;
        }
        if (!best || (kind == Extreme::max ? *v > *profile.slots[*best] : *v < *profile.slots[*best])) {
            best = s;
        }
    }
    if (!best) {
        throw ContractViolation("time_of_extreme: profile has no present slots");
    }
    return 5 * static_cast<int>(*best);
}

double flexibility_sd(std::span<const double> times, SdKind kind)
{
    if (times.empty()) {
        throw ContractViolation("flexibility_sd: empty sequence");
    }
    if (kind == SdKind::sample && times.size() < 2) {
        throw ContractViolation("flexibility_sd: sample sd needs at least two values");
    }
    // Welford's running update.
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t n = 0;
    for (double t : times) {
        ++n;
        const double delta = t - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (t - mean);
    }
    const double divisor = kind == SdKind::population ? static_cast<double>(n) : static_cast<double>(n - 1);
    return std::sqrt(std::max(0.0, m2 / divisor));
}

FeatureVector household_features(const HouseholdProfiles& household, FeatureMode mode, SdKind sd_kind)
{
    std::vector<double> max_times;
    std::vector<double> min_times;
    double usage_sum = 0.0;
    for (const auto& day : household.days) {
        if (!day.valid) {
            continue;
        }
        usage_sum += day.mean_power;
        max_times.push_back(static_cast<double>(time_of_extreme(day, Extreme::max)));
        if (mode == FeatureMode::three_attr) {
            min_times.push_back(static_cast<double>(time_of_extreme(day, Extreme::min)));
        }
    }
    if (max_times.empty()) {
        throw ContractViolation("build_features: household " + household.household_id + " has no valid days");
    }
    FeatureVector f;
    f.household_id = household.household_id;
    f.n_days = max_times.size();
    f.mean_evening_power = usage_sum / static_cast<double>(f.n_days);
    f.sd_time_of_max = flexibility_sd(max_times, sd_kind);
    if (mode == FeatureMode::three_attr) {
        f.sd_time_of_min = flexibility_sd(min_times, sd_kind);
    }
    return f;
}

void assign_usage_ranks(std::span<FeatureVector> features)
{
    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& fa = features[a];
        const auto& fb = features[b];
        if (fa.mean_evening_power != fb.mean_evening_power) {
            return fa.mean_evening_power > fb.mean_evening_power;
        }
        return fa.household_id < fb.household_id;
    });
    for (std::size_t r = 0; r < order.size(); ++r) {
        features[order[r]].usage_rank = r + 1;
    }
}

std::vector<FeatureVector> build_features(std::span<const HouseholdProfiles> households, FeatureMode mode,
                                          SdKind sd_kind, unsigned threads)
{
    std::vector<FeatureVector> out(households.size());
    parallel_for(households.size(), threads,
                 [&](std::size_t i) { out[i] = household_features(households[i], mode, sd_kind); });
    std::sort(out.begin(), out.end(),
              [](const FeatureVector& a, const FeatureVector& b) { return a.household_id < b.household_id; });
    assign_usage_ranks(out);
    return out;
}

void write_features_csv(std::ostream& out, std::span<const FeatureVector> features)
{
    std::vector<const FeatureVector*> rows;
    rows.reserve(features.size());
    for (const auto& f : features) {
        rows.push_back(&f);
    }
    std::sort(rows.begin(), rows.end(),
              [](const FeatureVector* a, const FeatureVector* b) { return a->household_id < b->household_id; });

    out << features_csv_header << '\n';
    for (const auto* f : rows) {
        out << f->household_id << ',' << format_number(f->mean_evening_power) << ','
            << format_number(f->sd_time_of_max) << ','
            << (f->sd_time_of_min ? format_number(*f->sd_time_of_min) : std::string{}) << ',' << f->n_days
            << ',' << f->usage_rank << '\n';
    }
}

FeatureTable read_features_csv(std::istream& in)
{
    FeatureTable table;
    std::string line;
    std::size_t line_no = 0;
    std::size_t with_min = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = trim(line);
        if (line_no == 1) {
            if (view != features_csv_header) {
                throw FormatError("features CSV: unexpected header '" + std::string(view) + "'");
            }
            continue;
        }
        if (view.empty()) {
            continue;
        }
        const auto cols = split(view, ',');
        const std::string where = "features CSV line " + std::to_string(line_no) + ": ";
        if (cols.size() != 6) {
            throw FormatError(where + "expected 6 columns, got " + std::to_string(cols.size()));
        }
        FeatureVector f;
        f.household_id = std::string(cols[0]);
        if (f.household_id.empty()) {
            throw FormatError(where + "empty household_id");
        }
        if (!parse_double(cols[1], f.mean_evening_power) || !parse_double(cols[2], f.sd_time_of_max)
            || !parse_size(cols[4], f.n_days) || !parse_size(cols[5], f.usage_rank)) {
            throw ParseError(where + "malformed number");
        }
        if (!cols[3].empty()) {
            double v = 0.0;
            if (!parse_double(cols[3], v)) {
                throw ParseError(where + "malformed sd_time_of_min");
            }
            f.sd_time_of_min = v;
            ++with_min;
        }
        table.rows.push_back(std::move(f));
    }
    if (line_no == 0) {
        throw FormatError("features CSV: empty file");
    }
    if (with_min != 0 && with_min != table.rows.size()) {
        throw FormatError("features CSV: sd_time_of_min present on some rows only");
    }
    table.mode = (with_min != 0) ? FeatureMode::three_attr : FeatureMode::two_attr;
    return table;
}

} // namespace flexclust
