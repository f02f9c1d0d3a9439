#pragma once

#include "flexclust/civil_time.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flexclust {

/// One raw timestamped power sample for one household.
struct MeterReading {
    std::string household_id;
    Timestamp timestamp;
    double watts = 0.0;

    friend bool operator==(const MeterReading&, const MeterReading&) = default;
};

/// A reading stripped of its household id, as stored inside a cohort.
struct Sample {
    Timestamp timestamp;
    double watts = 0.0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// All accepted readings, grouped by household. Each household's samples are
/// strictly increasing in time.
struct RawCohort {
    std::map<std::string, std::vector<Sample>> readings;
    std::vector<std::string> source_files;

    std::size_t reading_count() const;

    friend bool operator==(const RawCohort&, const RawCohort&) = default;
};

struct RejectedLine {
    std::string file;
    std::size_t line = 0;
    std::string reason;
};

struct LoadReport {
    std::size_t input_lines = 0;   ///< data lines, header excluded
    std::size_t accepted = 0;      ///< parsed and valid, before duplicate collapse
    std::size_t rejected = 0;
    std::size_t duplicates = 0;    ///< accepted lines collapsed onto an earlier reading
    std::map<std::string, std::size_t> readings_per_household;
    std::vector<RejectedLine> rejections; ///< first few rejections, for the run report
    std::vector<std::string> warnings;

    static constexpr std::size_t max_listed_rejections = 50;
};

struct LoadResult {
    RawCohort cohort;
    LoadReport report;
};

inline constexpr std::string_view reading_csv_header = "household_id,timestamp,watts";

/// Parses one CSV record `household_id,timestamp,watts`. A trailing CR is
/// tolerated. `line_no` is only used in error messages.
///
/// Throws FormatError (column count), ParseError (timestamp) or
/// ValidationError (power not a finite non-negative number).
MeterReading parse_reading(std::string_view line, std::size_t line_no = 0);

/// Reads every file, keeping valid records and counting the rest. Files are
/// processed in lexicographic path order so the result does not depend on the
/// order they were given in; when the same (household, timestamp) appears more
/// than once the first occurrence in that order wins.
///
/// Throws IoError when a path cannot be read.
LoadResult load_cohort(std::span<const std::filesystem::path> paths, unsigned threads = 1);

} // namespace flexclust
