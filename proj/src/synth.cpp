#include "flexclust/synth.hpp"

#include "flexclust/error.hpp"
#include "flexclust/parallel.hpp"
#include "flexclust/text.hpp"
#include "flexclust/timegrid.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <set>

#include <json.hpp>

namespace flexclust {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::string household_name(std::size_t index)
{
    char buf[24];
    std::snprintf(buf, sizeof buf, "h%04zu", index + 1);
    return buf;
}

double gaussian_bump(double x, double centre, double width)
{
    const double z = (x - centre) / width;
    return std::exp(-0.5 * z * z);
}

std::vector<Sample> generate_household(const GroupSpec& g, const SynthOptions& opt, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit_normal(0.0, 1.0);
    std::uniform_real_distribution<double> offset(-g.reading_interval_jitter, g.reading_interval_jitter);

    constexpr long slots_per_day = 288;
    const long first_slot = opt.full_day ? 0 : 15 * 12;
    const long last_slot = opt.full_day ? slots_per_day - 1 : 21 * 12;

    std::vector<Sample> out;
    out.reserve(opt.days * static_cast<std::size_t>(last_slot - first_slot + 1));
    for (std::size_t day = 0; day < opt.days; ++day) {
        const Date date = opt.start_date + std::chrono::days{static_cast<long>(day)};
        const std::chrono::weekday wd{date};
        const bool working = wd != std::chrono::Saturday && wd != std::chrono::Sunday;

        // Drawn every day so the random stream does not depend on the weekday pattern.
        const double peak_centre = g.peak_time_mean + g.peak_time_jitter_sd * unit_normal(rng);
        const double trough_centre = g.trough_time_mean + g.trough_time_jitter_sd * unit_normal(rng);

        const Timestamp evening = make_timestamp(date, peak_start_hour, 0);
        for (long slot = first_slot; slot <= last_slot; ++slot) {
            const long nominal = slot * 300;
            const long jitter = g.reading_interval_jitter > 0.0 ? std::lround(offset(rng)) : 0;
            const Timestamp t = Timestamp{date} + std::chrono::seconds{nominal + jitter};
            const double minutes = static_cast<double>((t - evening).count()) / 60.0;

            double watts = g.base_power;
            if (working) {
                watts += g.peak_power * gaussian_bump(minutes, peak_centre, g.peak_width);
                watts -= g.trough_depth * gaussian_bump(minutes, trough_centre, g.trough_width);
            }
            watts += g.noise_sd * unit_normal(rng);
            out.push_back({t, std::max(0.0, watts)});
        }
    }
    return out;
}

} // namespace

void validate(const GroupSpec& g)
{
    auto fail = [&](const std::string& what) {
        throw ConfigError("group '" + g.name + "': " + what);
    };
    if (g.name.empty()) {
        throw ConfigError("group with empty name");
    }
    if (g.n_households == 0) {
        fail("n_households must be at least 1");
    }
    auto non_negative = [&](double v, const char* field) {
        if (!std::isfinite(v) || v < 0.0) {
            fail(std::string(field) + " must be a finite value >= 0");
        }
    };
    non_negative(g.base_power, "base_power");
    non_negative(g.peak_power, "peak_power");
    non_negative(g.peak_time_jitter_sd, "peak_time_jitter_sd");
    non_negative(g.noise_sd, "noise_sd");
    non_negative(g.reading_interval_jitter, "reading_interval_jitter");
    non_negative(g.trough_depth, "trough_depth");
    non_negative(g.trough_time_jitter_sd, "trough_time_jitter_sd");
    if (!(g.peak_time_mean >= 0.0 && g.peak_time_mean <= 235.0)) {
        fail("peak_time_mean must lie in [0, 235]");
    }
    if (!(g.trough_time_mean >= 0.0 && g.trough_time_mean <= 235.0)) {
        fail("trough_time_mean must lie in [0, 235]");
    }
    if (g.reading_interval_jitter >= 150.0) {
        fail("reading_interval_jitter must be below 150 s so readings stay ordered");
    }
    if (!(g.peak_width > 0.0) || !(g.trough_width > 0.0)) {
        fail("peak_width and trough_width must be positive");
    }
}

std::size_t SynthCohort::reading_count() const
{
    std::size_t n = 0;
    for (const auto& [id, samples] : readings) {
        n += samples.size();
    }
    return n;
}

RawCohort SynthCohort::to_raw() const
{
    RawCohort raw;
    for (const auto& [id, samples] : readings) {
        raw.readings.emplace(id, samples);
    }
    return raw;
}

SynthCohort generate(std::span<const GroupSpec> spec, const SynthOptions& options, unsigned threads)
{
    if (options.days == 0) {
        throw ConfigError("synth: days must be at least 1");
    }
    if (spec.empty()) {
        throw ConfigError("synth: no groups");
    }
    std::set<std::string> names;
    for (const auto& g : spec) {
        validate(g);
        if (!names.insert(g.name).second) {
            throw ConfigError("synth: duplicate group name '" + g.name + "'");
        }
    }

    std::vector<const GroupSpec*> owner;
    for (const auto& g : spec) {
        owner.insert(owner.end(), g.n_households, &g);
    }

    SynthCohort cohort;
    cohort.spec.assign(spec.begin(), spec.end());
    cohort.seed = options.seed;
    cohort.readings.resize(owner.size());
    parallel_for(owner.size(), threads, [&](std::size_t h) {
        const std::uint64_t household_seed = splitmix64(options.seed ^ splitmix64(h));
        cohort.readings[h] = {household_name(h), generate_household(*owner[h], options, household_seed)};
    });
    for (std::size_t h = 0; h < owner.size(); ++h) {
        cohort.truth[household_name(h)] = owner[h]->name;
    }
    return cohort;
}

std::vector<GroupSpec> default_group_specs()
{
    // Evening means come out near 900 W for the heavy users and 300-450 W
    // for the rest; jitters span regular (10 min) to erratic (60 min).
    GroupSpec heavy{.name = "high_usage", .n_households = 45, .base_power = 700.0, .peak_power = 950.0,
                    .peak_time_mean = 110.0, .peak_time_jitter_sd = 20.0, .noise_sd = 15.0,
                    .reading_interval_jitter = 30.0};
    GroupSpec erratic{.name = "high_variability", .n_households = 45, .base_power = 300.0, .peak_power = 700.0,
                      .peak_time_mean = 120.0, .peak_time_jitter_sd = 60.0, .noise_sd = 15.0,
                      .reading_interval_jitter = 30.0};
    GroupSpec habitual{.name = "stable_low", .n_households = 45, .base_power = 200.0, .peak_power = 450.0,
                       .peak_time_mean = 120.0, .peak_time_jitter_sd = 10.0, .noise_sd = 15.0,
                       .reading_interval_jitter = 30.0};
    GroupSpec middling{.name = "mid", .n_households = 45, .base_power = 220.0, .peak_power = 500.0,
                       .peak_time_mean = 115.0, .peak_time_jitter_sd = 35.0, .noise_sd = 15.0,
                       .reading_interval_jitter = 30.0};
    return {heavy, erratic, habitual, middling};
}

namespace {

using nlohmann::json;

const std::vector<std::pair<const char*, double GroupSpec::*>>& numeric_fields()
{
    static const std::vector<std::pair<const char*, double GroupSpec::*>> fields{
        {"base_power", &GroupSpec::base_power},
        {"peak_power", &GroupSpec::peak_power},
        {"peak_time_mean", &GroupSpec::peak_time_mean},
        {"peak_time_jitter_sd", &GroupSpec::peak_time_jitter_sd},
        {"noise_sd", &GroupSpec::noise_sd},
        {"reading_interval_jitter", &GroupSpec::reading_interval_jitter},
        {"peak_width", &GroupSpec::peak_width},
        {"trough_depth", &GroupSpec::trough_depth},
        {"trough_time_mean", &GroupSpec::trough_time_mean},
        {"trough_time_jitter_sd", &GroupSpec::trough_time_jitter_sd},
        {"trough_width", &GroupSpec::trough_width},
    };
    return fields;
}

} // namespace

std::vector<GroupSpec> read_group_specs(std::istream& in)
{
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth spec: ") + e.what());
    }
    const json& groups = doc.is_object() && doc.contains("groups") ? doc.at("groups") : doc;
    if (!groups.is_array()) {
        throw ConfigError("synth spec: expected an array of groups");
    }
    std::vector<GroupSpec> out;
    for (const auto& item : groups) {
        if (!item.is_object()) {
            throw ConfigError("synth spec: group entries must be objects");
        }
        GroupSpec g;
        try {
            for (const auto& [key, value] : item.items()) {
                if (key == "name") {
                    g.name = value.get<std::string>();
                } else if (key == "n_households") {
                    g.n_households = value.get<std::size_t>();
                } else {
                    bool known = false;
                    for (const auto& [field, member] : numeric_fields()) {
                        if (key == field) {
                            g.*member = value.get<double>();
                            known = true;
                        }
                    }
                    if (!known) {
                        throw ConfigError("synth spec: unknown field '" + key + "'");
                    }
                }
            }
        } catch (const json::exception& e) {
            throw ConfigError(std::string("synth spec: ") + e.what());
        }
        validate(g);
        out.push_back(std::move(g));
    }
    return out;
}

void write_group_specs(std::ostream& out, std::span<const GroupSpec> spec)
{
    nlohmann::ordered_json groups = nlohmann::ordered_json::array();
    for (const auto& g : spec) {
        nlohmann::ordered_json item;
        item["name"] = g.name;
        item["n_households"] = g.n_households;
        for (const auto& [field, member] : numeric_fields()) {
            item[field] = g.*member;
        }
        groups.push_back(std::move(item));
    }
    nlohmann::ordered_json doc;
    doc["groups"] = std::move(groups);
    out << doc.dump(2) << '\n';
}

void write_readings_csv(std::ostream& out, const SynthCohort& cohort)
{
    out << reading_csv_header << '\n';
    std::string buffer;
    buffer.reserve(1 << 20);
    char num[64];
    for (const auto& [id, samples] : cohort.readings) {
        Date cached_day{};
        std::string day_text;
        for (const auto& s : samples) {
            const Date day = date_of(s.timestamp);
            if (day_text.empty() || day != cached_day) {
                cached_day = day;
                day_text = format_date(day);
            }
            const long secs = static_cast<long>((s.timestamp - Timestamp{day}).count());
            char clock[48];
            std::snprintf(clock, sizeof clock, "T%02ld:%02ld:%02ld,", secs / 3600, (secs / 60) % 60, secs % 60);
            const auto res = std::to_chars(num, num + sizeof num, s.watts, std::chars_format::fixed, 2);
            buffer.append(id).append(",").append(day_text).append(clock).append(num, res.ptr).append("\n");
            if (buffer.size() > (1 << 20) - 128) {
                out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
                buffer.clear();
            }
        }
    }
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
}

void write_truth_csv(std::ostream& out, const SynthCohort& cohort)
{
    out << "household_id,group\n";
    for (const auto& [id, group] : cohort.truth) {
        out << id << ',' << group << '\n';
    }
}

double oracle_sd(std::span<const double> values)
{
    if (values.empty()) {
        throw ContractViolation("oracle_sd: empty input");
    }
    long double sum = 0.0L;
    for (double v : values) {
        sum += v;
    }
    const long double mean = sum / static_cast<long double>(values.size());
    long double ss = 0.0L;
    for (double v : values) {
        const long double d = v - mean;
        ss += d * d;
    }
    return static_cast<double>(std::sqrt(ss / static_cast<long double>(values.size())));
}

double oracle_kmeans(const std::vector<std::vector<double>>& points, std::size_t k)
{
    const std::size_t n = points.size();
    if (n > oracle_max_points || k > oracle_max_k) {
        throw ConfigError("oracle_kmeans: instance too large for exhaustive search (n = " + std::to_string(n)
                          + ", k = " + std::to_string(k) + ")");
    }
    if (n == 0 || k == 0) {
        throw ConfigError("oracle_kmeans: need at least one point and one cluster");
    }
    const std::size_t dims = points.front().size();

    // Restricted growth strings enumerate each set partition exactly once.
    std::vector<std::size_t> block(n, 0);
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t)> visit = [&](std::size_t i, std::size_t used) {
        if (i == n) {
            double total = 0.0;
            for (std::size_t b = 0; b < used; ++b) {
                std::vector<double> mean(dims, 0.0);
                std::size_t count = 0;
                for (std::size_t p = 0; p < n; ++p) {
                    if (block[p] == b) {
                        ++count;
                        for (std::size_t d = 0; d < dims; ++d) {
                            mean[d] += points[p][d];
                        }
                    }
                }
                for (auto& m : mean) {
                    m /= static_cast<double>(count);
                }
                for (std::size_t p = 0; p < n; ++p) {
                    if (block[p] == b) {
                        for (std::size_t d = 0; d < dims; ++d) {
                            const double diff = points[p][d] - mean[d];
                            total += diff * diff;
                        }
                    }
                }
            }
            best = std::min(best, total);
            return;
        }
        for (std::size_t b = 0; b < std::min(used + 1, k); ++b) {
            block[i] = b;
            visit(i + 1, std::max(used, b + 1));
        }
    };
    visit(0, 0);
    return best;
}

double adjusted_rand_index(const Partition& a, const Partition& b)
{
    if (a.size() != b.size()) {
        throw ContractViolation("adjusted_rand_index: partitions cover different household sets");
    }
    std::map<std::pair<std::string, std::string>, double> table;
    std::map<std::string, double> rows;
    std::map<std::string, double> cols;
    auto ib = b.begin();
    for (const auto& [id, label_a] : a) {
        if (ib->first != id) {
            throw ContractViolation("adjusted_rand_index: partitions cover different household sets");
        }
        table[{label_a, ib->second}] += 1.0;
        rows[label_a] += 1.0;
        cols[ib->second] += 1.0;
        ++ib;
    }
    auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
    double index = 0.0;
    for (const auto& [key, n] : table) {
        index += pairs(n);
    }
    double sum_rows = 0.0;
    for (const auto& [key, n] : rows) {
        sum_rows += pairs(n);
    }
    double sum_cols = 0.0;
    for (const auto& [key, n] : cols) {
        sum_cols += pairs(n);
    }
    const double total = pairs(static_cast<double>(a.size()));
    const double expected = total > 0.0 ? sum_rows * sum_cols / total : 0.0;
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) {
        return 1.0;
    }
    return (index - expected) / (max_index - expected);
}

} // namespace flexclust
