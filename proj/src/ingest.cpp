#include "flexclust/ingest.hpp"

#include "flexclust/error.hpp"
#include "flexclust/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>

namespace flexclust {

namespace {

enum class RecordStatus { ok, format, parse, validation };

struct RecordOutcome {
    RecordStatus status = RecordStatus::ok;
    std::string reason;
};

// Non-throwing core shared by parse_reading and the bulk loader. On success
// `id` views into `line`.
RecordOutcome parse_record(std::string_view line, std::string_view& id, Timestamp& ts, double& watts)
{
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string_view::npos || line.find(',', c2 + 1) != std::string_view::npos) {
        const auto columns = line.empty() ? 0 : std::count(line.begin(), line.end(), ',') + 1;
        return {RecordStatus::format, "expected 3 columns, got " + std::to_string(columns)};
    }
    id = line.substr(0, c1);
    const auto ts_text = line.substr(c1 + 1, c2 - c1 - 1);
    const auto watts_text = line.substr(c2 + 1);
    if (id.empty()) {
        return {RecordStatus::format, "empty household_id"};
    }
    const auto parsed = parse_timestamp(ts_text);
    if (!parsed) {
        return {RecordStatus::parse, "malformed timestamp '" + std::string(ts_text) + "'"};
    }
    ts = *parsed;

    const char* first = watts_text.data();
    const char* last = first + watts_text.size();
    if (first != last && *first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, watts);
    if (watts_text.empty() || ec != std::errc{} || ptr != last) {
        return {RecordStatus::validation, "non-numeric power '" + std::string(watts_text) + "'"};
    }
    if (!std::isfinite(watts)) {
        return {RecordStatus::validation, "non-finite power"};
    }
    if (watts < 0.0) {
        return {RecordStatus::validation, "negative power " + std::string(watts_text)};
    }
    return {};
}

struct FileParse {
    std::string name;
    std::unordered_map<std::string, std::vector<Sample>> readings;
    std::size_t lines = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::vector<RejectedLine> rejections;
    std::vector<std::string> warnings;
};

FileParse parse_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    FileParse out;
    out.name = path.string();

    std::string line;
    std::size_t line_no = 0;
    std::vector<Sample>* current = nullptr;
    std::string current_id;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (line_no == 1) {
            if (view.starts_with("\xEF\xBB\xBF")) {
                view.remove_prefix(3);
            }
            std::string_view bare = view;
            if (!bare.empty() && bare.back() == '\r') {
                bare.remove_suffix(1);
            }
            if (bare == reading_csv_header) {
                continue;
            }
            out.warnings.push_back(out.name + ": missing header row, first line treated as data");
        }
        ++out.lines;

        std::string_view id;
        Timestamp ts;
        double watts = 0.0;
        auto outcome = parse_record(view, id, ts, watts);
        if (outcome.status != RecordStatus::ok) {
            ++out.rejected;
            if (out.rejections.size() < LoadReport::max_listed_rejections) {
                out.rejections.push_back({out.name, line_no, std::move(outcome.reason)});
            }
            continue;
        }
        ++out.accepted;
        if (current == nullptr || id != current_id) {
            current_id.assign(id);
            current = &out.readings[current_id];
        }
        current->push_back({ts, watts});
    }
    if (in.bad()) {
        throw IoError("read failure in " + path.string());
    }
    if (out.accepted == 0) {
        out.warnings.push_back(out.name + ": no valid records");
    }
    return out;
}

} // namespace

std::size_t RawCohort::reading_count() const
{
    std::size_t n = 0;
    for (const auto& [id, samples] : readings) {
        n += samples.size();
    }
    return n;
}

MeterReading parse_reading(std::string_view line, std::size_t line_no)
{
    std::string_view id;
    Timestamp ts;
    double watts = 0.0;
    const auto outcome = parse_record(line, id, ts, watts);
    const std::string where = "line " + std::to_string(line_no) + ": ";
    switch (outcome.status) {
    case RecordStatus::ok:
        return MeterReading{std::string(id), ts, watts};
    case RecordStatus::format:
        throw FormatError(where + outcome.reason);
    case RecordStatus::parse:
        throw ParseError(where + outcome.reason);
    case RecordStatus::validation:
        throw ValidationError(where + outcome.reason);
    }
    throw InvariantError("unreachable record status");
}

LoadResult load_cohort(std::span<const std::filesystem::path> paths, unsigned threads)
{
    std::vector<std::filesystem::path> ordered(paths.begin(), paths.end());
    std::sort(ordered.begin(), ordered.end());

    std::vector<FileParse> parsed(ordered.size());
    parallel_for(ordered.size(), threads, [&](std::size_t i) { parsed[i] = parse_file(ordered[i]); });

    LoadResult result;
    auto& cohort = result.cohort;
    auto& report = result.report;
    for (auto& file : parsed) {
        cohort.source_files.push_back(file.name);
        report.input_lines += file.lines;
        report.accepted += file.accepted;
        report.rejected += file.rejected;
        for (auto& r : file.rejections) {
            if (report.rejections.size() < LoadReport::max_listed_rejections) {
                report.rejections.push_back(std::move(r));
            }
        }
        for (auto& w : file.warnings) {
            report.warnings.push_back(std::move(w));
        }
        for (auto& [id, samples] : file.readings) {
            auto& dest = cohort.readings[id];
            if (dest.empty()) {
                dest = std::move(samples);
            } else {
                dest.insert(dest.end(), samples.begin(), samples.end());
            }
        }
        file.readings.clear();
    }

    std::vector<std::vector<Sample>*> households;
    households.reserve(cohort.readings.size());
    for (auto& [id, samples] : cohort.readings) {
        households.push_back(&samples);
    }
    std::vector<std::size_t> collapsed(households.size(), 0);
    parallel_for(households.size(), threads, [&](std::size_t i) {
        auto& samples = *households[i];
        auto by_time = [](const Sample& a, const Sample& b) { return a.timestamp < b.timestamp; };
        if (!std::is_sorted(samples.begin(), samples.end(), by_time)) {
            // Stable: among equal timestamps, file order then line order is kept.
            std::stable_sort(samples.begin(), samples.end(), by_time);
        }
        auto last = std::unique(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
            return a.timestamp == b.timestamp;
        });
        collapsed[i] = static_cast<std::size_t>(samples.end() - last);
        samples.erase(last, samples.end());
        samples.shrink_to_fit();
    });
    for (auto n : collapsed) {
        report.duplicates += n;
    }
    for (const auto& [id, samples] : cohort.readings) {
        report.readings_per_household[id] = samples.size();
    }
    return result;
}

} // namespace flexclust
