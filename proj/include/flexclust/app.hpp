#pragma once

#include "flexclust/cluster.hpp"
#include "flexclust/features.hpp"
#include "flexclust/ingest.hpp"
#include "flexclust/synth.hpp"
#include "flexclust/timegrid.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace flexclust {

/// Effective settings of a pipeline run. Defaults match the module defaults.
struct RunConfig {
    std::vector<std::filesystem::path> inputs;
    std::optional<std::filesystem::path> holidays;
    double max_gap_min = 30.0;
    std::size_t min_valid_days = default_min_valid_days;
    double min_slot_fraction = default_min_slot_fraction;
    FeatureMode mode = FeatureMode::two_attr;
    SdKind sd_kind = SdKind::population;
    std::size_t k = default_k;
    std::size_t restarts = default_restarts;
    std::size_t max_iter = default_max_iter;
    double tol = default_tol;
    std::uint64_t seed = 1;
    bool standardize = true;
    std::filesystem::path out = "flexclust_out";
    unsigned threads = 0; ///< 0 = machine parallelism
    bool export_aligned = false;
};

/// Throws ConfigError naming the first out-of-range parameter.
void validate(const RunConfig& config);

/// Option name (as spelled on the command line, without dashes) -> values.
using ConfigEntries = std::map<std::string, std::vector<std::string>>;

/// Flat `key = value` text. '#' starts a comment; repeated keys accumulate;
/// `input` also accepts comma-separated paths. Throws ConfigError on syntax
/// errors or unknown keys.
ConfigEntries parse_config_text(std::istream& in);
ConfigEntries load_config_file(const std::filesystem::path& path);

/// Defaults, then config-file entries, then command-line entries.
RunConfig resolve_config(const ConfigEntries& file_entries, const ConfigEntries& cli_entries);

/// Effective configuration as `key = value` lines, re-readable by
/// parse_config_text.
std::string describe_config(const RunConfig& config);

/// Expands directories into their *.csv files (sorted). Throws IoError for
/// missing paths and when nothing is left to read.
std::vector<std::filesystem::path> expand_inputs(const std::vector<std::filesystem::path>& inputs);

struct PipelineCounts {
    std::size_t households_loaded = 0;
    std::size_t households_retained = 0;
    std::size_t readings_retained = 0;
    std::size_t readings_rejected_households = 0;
    bool conserved = false;
};

struct RunSummary {
    std::filesystem::path features_csv;
    std::filesystem::path clusters_json;
    std::filesystem::path report_json;
    std::filesystem::path scatter_svg;
    std::vector<FeatureVector> features;
    std::optional<ClusterArtifact> clusters;
    std::vector<std::string> source_files;
    LoadReport ingest;
    CleaningResult cleaning;
    PipelineCounts counts;
    std::vector<std::string> warnings;
};

/// ingest -> align -> clean -> features -> cluster -> label, writing
/// features.csv, clusters.json, clusters.svg and run_report.json under
/// config.out. Errors are rethrown with a stage prefix ("ingest: ...").
RunSummary cmd_run(const RunConfig& config);

/// The first half of cmd_run: writes features.csv and run_report.json.
RunSummary cmd_features(const RunConfig& config);

/// The second half: clusters an existing features CSV.
RunSummary cmd_cluster(const std::filesystem::path& features_csv, const RunConfig& config);

/// Renders the scatter SVG for a clusters JSON and its features CSV.
void cmd_plot(const std::filesystem::path& clusters_json, const std::filesystem::path& features_csv,
              const std::filesystem::path& svg_out);

struct SynthCommand {
    std::optional<std::filesystem::path> spec;
    SynthOptions options;
    std::filesystem::path out = "synth_out";
    unsigned threads = 0;
};

struct SynthSummary {
    std::filesystem::path readings_csv;
    std::filesystem::path truth_csv;
    std::size_t households = 0;
    std::size_t readings = 0;
};

/// Writes readings.csv and truth.csv (plus the effective spec.json).
SynthSummary cmd_synth(const SynthCommand& command);

} // namespace flexclust
