#include "flexclust/app.hpp"

#include "flexclust/error.hpp"
#include "flexclust/parallel.hpp"
#include "flexclust/svg.hpp"
#include "flexclust/text.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace flexclust {

namespace fs = std::filesystem;

namespace {

const std::set<std::string>& known_keys()
{
    static const std::set<std::string> keys{
        "input", "holidays", "max-gap-min", "min-valid-days", "min-slot-fraction", "mode", "sd-kind", "k",
        "restarts", "max-iter", "tol", "seed", "no-standardize", "out", "threads", "export-aligned"};
    return keys;
}

bool parse_bool(const std::string& key, std::string_view text)
{
    if (text == "true" || text == "1" || text == "yes" || text == "on") {
        return true;
    }
    if (text == "false" || text == "0" || text == "no" || text == "off") {
        return false;
    }
    throw ConfigError("config: '" + key + "' expects true or false, got '" + std::string(text) + "'");
}

template <class T>
T parse_unsigned(const std::string& key, std::string_view text)
{
    std::size_t v = 0;
    if (!parse_size(trim(text), v) || v > std::numeric_limits<T>::max()) {
        throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + std::string(text) + "'");
    }
    return static_cast<T>(v);
}

double parse_real(const std::string& key, std::string_view text)
{
    double v = 0.0;
    if (!parse_double(trim(text), v)) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + std::string(text) + "'");
    }
    return v;
}

void apply_entries(RunConfig& c, const ConfigEntries& entries)
{
    for (const auto& [key, values] : entries) {
        if (!known_keys().contains(key)) {
            throw ConfigError("config: unknown key '" + key + "'");
        }
        if (values.empty()) {
            continue;
        }
        const std::string& v = values.back();
        if (key == "input") {
            c.inputs.clear();
            for (const auto& p : values) {
                c.inputs.emplace_back(p);
            }
        } else if (key == "holidays") {
            c.holidays = fs::path(v);
        } else if (key == "max-gap-min") {
            c.max_gap_min = parse_real(key, v);
        } else if (key == "min-valid-days") {
            c.min_valid_days = parse_unsigned<std::size_t>(key, v);
        } else if (key == "min-slot-fraction") {
            c.min_slot_fraction = parse_real(key, v);
        } else if (key == "mode") {
            const auto m = parse_feature_mode(v);
            if (!m) {
                throw ConfigError("config: mode must be 2attr or 3attr, got '" + v + "'");
            }
            c.mode = *m;
        } else if (key == "sd-kind") {
            const auto s = parse_sd_kind(v);
            if (!s) {
                throw ConfigError("config: sd-kind must be population or sample, got '" + v + "'");
            }
            c.sd_kind = *s;
        } else if (key == "k") {
            c.k = parse_unsigned<std::size_t>(key, v);
        } else if (key == "restarts") {
            c.restarts = parse_unsigned<std::size_t>(key, v);
        } else if (key == "max-iter") {
            c.max_iter = parse_unsigned<std::size_t>(key, v);
        } else if (key == "tol") {
            c.tol = parse_real(key, v);
        } else if (key == "seed") {
            c.seed = parse_unsigned<std::uint64_t>(key, v);
        } else if (key == "no-standardize") {
            c.standardize = !parse_bool(key, v);
        } else if (key == "out") {
            c.out = fs::path(v);
        } else if (key == "threads") {
            c.threads = parse_unsigned<unsigned>(key, v);
        } else if (key == "export-aligned") {
            c.export_aligned = parse_bool(key, v);
        }
    }
}

// Rethrows any failure inside `fn` with the stage name prefixed.
template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), std::string(name) + ": " + e.what());
    } catch (const fs::filesystem_error& e) {
        throw Error(ExitCode::data, std::string(name) + ": " + e.what());
    } catch (const std::bad_alloc&) {
        throw Error(ExitCode::invariant, std::string(name) + ": out of memory");
    }
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw IoError("write failure on " + path.string());
    }
}

std::ifstream open_input(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return in;
}

using ordered_json = nlohmann::ordered_json;

ordered_json config_json(const RunConfig& c)
{
    ordered_json j;
    auto inputs = ordered_json::array();
    for (const auto& p : c.inputs) {
        inputs.push_back(p.string());
    }
    j["input"] = inputs;
    j["holidays"] = c.holidays ? ordered_json(c.holidays->string()) : ordered_json(nullptr);
    j["peak_window"] = "16:00-20:00 (48 slots, 16:00..19:55)";
    j["max-gap-min"] = c.max_gap_min;
    j["min-valid-days"] = c.min_valid_days;
    j["min-slot-fraction"] = c.min_slot_fraction;
    j["mode"] = to_string(c.mode);
    j["sd-kind"] = to_string(c.sd_kind);
    j["k"] = c.k;
    j["restarts"] = c.restarts;
    j["max-iter"] = c.max_iter;
    j["tol"] = c.tol;
    j["seed"] = c.seed;
    j["no-standardize"] = !c.standardize;
    j["out"] = c.out.string();
    j["threads"] = c.threads;
    j["threads_effective"] = resolve_threads(c.threads);
    j["export-aligned"] = c.export_aligned;
    return j;
}

struct Timings {
    std::vector<std::pair<std::string, double>> stages;

    template <class Fn>
    auto time(const std::string& name, Fn&& fn) -> decltype(fn())
    {
        const auto start = std::chrono::steady_clock::now();
        struct Record {
            Timings& t;
            std::string name;
            std::chrono::steady_clock::time_point start;
            ~Record()
            {
                t.stages.emplace_back(
                    name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
            }
        } record{*this, name, start};
        return fn();
    }
};

ordered_json report_json(const RunConfig& config, const RunSummary& s, const Timings& timings)
{
    ordered_json r;
    r["parameters"] = config_json(config);

    ordered_json ingest;
    ingest["files"] = s.source_files;
    ingest["input_lines"] = s.ingest.input_lines;
    ingest["accepted"] = s.ingest.accepted;
    ingest["rejected"] = s.ingest.rejected;
    ingest["duplicates_collapsed"] = s.ingest.duplicates;
    ingest["unique_readings"] = s.ingest.accepted - s.ingest.duplicates;
    ingest["households"] = s.counts.households_loaded;
    auto rejections = ordered_json::array();
    for (const auto& rl : s.ingest.rejections) {
        rejections.push_back({{"file", rl.file}, {"line", rl.line}, {"reason", rl.reason}});
    }
    ingest["rejections_listed"] = rejections;
    ingest["readings_per_household"] = s.ingest.readings_per_household;
    r["ingest"] = ingest;

    ordered_json cleaning;
    cleaning["min-valid-days"] = config.min_valid_days;
    cleaning["min-slot-fraction"] = config.min_slot_fraction;
    cleaning["retained"] = s.cleaning.retained.size();
    auto rejected = ordered_json::array();
    for (const auto& h : s.cleaning.rejected) {
        rejected.push_back({{"household_id", h.household_id}, {"valid_days", h.valid_days}});
    }
    cleaning["rejected"] = rejected;
    cleaning["readings_in_retained_households"] = s.counts.readings_retained;
    cleaning["readings_in_rejected_households"] = s.counts.readings_rejected_households;
    r["cleaning"] = cleaning;

    ordered_json conservation;
    conservation["lines_eq_accepted_plus_rejected"] = s.ingest.input_lines == s.ingest.accepted + s.ingest.rejected;
    conservation["unique_eq_retained_plus_rejected_households"] =
        s.ingest.accepted - s.ingest.duplicates
        == s.counts.readings_retained + s.counts.readings_rejected_households;
    conservation["ok"] = s.counts.conserved;
    r["conservation"] = conservation;

    if (!s.features.empty()) {
        r["features"] = {{"mode", to_string(config.mode)},
                         {"sd-kind", to_string(config.sd_kind)},
                         {"households", s.features.size()}};
    }
    if (s.clusters) {
        const auto& m = s.clusters->model;
        ordered_json c;
        c["k"] = m.k;
        c["restarts"] = m.restarts;
        c["base_seed"] = m.base_seed;
        c["best_seed"] = m.seed;
        c["wcss"] = m.wcss;
        c["iterations_used"] = m.iterations_used;
        c["cluster_sizes"] = m.cluster_sizes();
        auto labels = ordered_json::array();
        for (auto l : m.labels) {
            labels.push_back(to_string(l));
        }
        c["labels"] = labels;
        c["standardized"] = s.clusters->params.enabled;
        r["clustering"] = c;
    }
    r["warnings"] = s.warnings;

    ordered_json artifacts;
    if (!s.features_csv.empty()) {
        artifacts["features_csv"] = s.features_csv.string();
    }
    if (!s.clusters_json.empty()) {
        artifacts["clusters_json"] = s.clusters_json.string();
    }
    if (!s.scatter_svg.empty()) {
        artifacts["scatter_svg"] = s.scatter_svg.string();
    }
    r["artifacts"] = artifacts;

    ordered_json timing;
    for (const auto& [name, secs] : timings.stages) {
        timing[name] = secs;
    }
    r["timing_seconds"] = timing;
    return r;
}

void prepare_features(const RunConfig& config, RunSummary& summary, Timings& timings)
{
    stage("config", [&] {
        validate(config);
        if (config.inputs.empty()) {
            throw ConfigError("no input given");
        }
    });
    const unsigned threads = resolve_threads(config.threads);

    auto loaded = timings.time("ingest", [&] {
        return stage("ingest", [&] {
            const auto paths = expand_inputs(config.inputs);
            return load_cohort(paths, threads);
        });
    });
    summary.ingest = loaded.report;
    summary.warnings.insert(summary.warnings.end(), loaded.report.warnings.begin(), loaded.report.warnings.end());
    summary.counts.households_loaded = loaded.cohort.readings.size();
    summary.source_files = loaded.cohort.source_files;

    const Calendar calendar = stage("calendar", [&] {
        return config.holidays ? Calendar(load_holidays(*config.holidays)) : Calendar();
    });

    std::vector<const std::pair<const std::string, std::vector<Sample>>*> households;
    for (const auto& entry : loaded.cohort.readings) {
        households.push_back(&entry);
    }
    std::vector<HouseholdProfiles> profiles(households.size());
    std::vector<HouseholdDays> counts(households.size());
    std::vector<AlignedSeries> aligned(config.export_aligned ? households.size() : 0);
    const auto max_gap = std::chrono::seconds{std::llround(config.max_gap_min * 60.0)};
    timings.time("align", [&] {
        stage("align", [&] {
            parallel_for(households.size(), threads, [&](std::size_t i) {
                const auto& [id, samples] = *households[i];
                auto series = align(id, samples, max_gap);
                profiles[i] = {id, extract_peak_days(series, calendar, config.min_slot_fraction)};
                const auto valid = std::count_if(profiles[i].days.begin(), profiles[i].days.end(),
                                                 [](const PeakDayProfile& p) { return p.valid; });
                counts[i] = {id, static_cast<std::size_t>(valid)};
                if (config.export_aligned) {
                    aligned[i] = std::move(series);
                }
            });
        });
    });
    if (config.export_aligned) {
        stage("align", [&] {
            fs::create_directories(config.out);
            std::ofstream out(config.out / "aligned.csv", std::ios::binary);
            if (!out) {
                throw IoError("cannot write aligned.csv");
            }
            write_aligned_csv(out, aligned);
        });
        aligned.clear();
    }

    summary.cleaning = clean_by_counts(counts, config.min_valid_days);
    std::set<std::string> retained;
    for (const auto& h : summary.cleaning.retained) {
        retained.insert(h.household_id);
        summary.counts.readings_retained += loaded.report.readings_per_household.at(h.household_id);
    }
    for (const auto& h : summary.cleaning.rejected) {
        summary.counts.readings_rejected_households += loaded.report.readings_per_household.at(h.household_id);
    }
    summary.counts.households_retained = retained.size();
    const auto& ir = loaded.report;
    summary.counts.conserved = ir.input_lines == ir.accepted + ir.rejected && ir.duplicates <= ir.accepted
                               && ir.accepted - ir.duplicates
                                      == summary.counts.readings_retained
                                             + summary.counts.readings_rejected_households;
    if (!summary.counts.conserved) {
        throw Error(ExitCode::invariant, "clean: reading counts do not balance");
    }
    loaded.cohort = RawCohort{};

    std::vector<HouseholdProfiles> kept;
    for (auto& p : profiles) {
        if (retained.contains(p.household_id)) {
            kept.push_back(std::move(p));
        }
    }
    profiles.clear();
    summary.features = timings.time("features", [&] {
        return stage("features", [&] { return build_features(kept, config.mode, config.sd_kind, threads); });
    });
    // Cluster exactly what features.csv holds so run == features + cluster.
    for (auto& f : summary.features) {
        f.mean_evening_power = round_to_9_digits(f.mean_evening_power);
        f.sd_time_of_max = round_to_9_digits(f.sd_time_of_max);
        if (f.sd_time_of_min) {
            f.sd_time_of_min = round_to_9_digits(*f.sd_time_of_min);
        }
    }
}

void cluster_features(const RunConfig& config, RunSummary& summary, Timings& timings)
{
    const unsigned threads = resolve_threads(config.threads);
    summary.clusters = timings.time("cluster", [&] {
        return stage("cluster", [&] {
            if (summary.features.size() < config.k) {
                throw ConfigError(std::to_string(summary.features.size())
                                  + " households retained after cleaning, fewer than k = " + std::to_string(config.k));
            }
            auto standardized = standardize(summary.features, config.mode, config.k, config.standardize);
            auto model = kmeans_best(standardized.points, config.k, config.restarts, config.seed, config.max_iter,
                                     config.tol, threads);
            const double recomputed = compute_wcss(standardized.points, model);
            if (std::abs(recomputed - model.wcss) > 1e-9 * std::max(1.0, std::abs(model.wcss))) {
                throw InvariantError("wcss does not match its recomputation");
            }
            auto labeled = label_clusters(std::move(model), standardized.params);
            if (labeled.warning) {
                summary.warnings.push_back(*labeled.warning);
            }
            return ClusterArtifact{config.mode, std::move(labeled.model), std::move(standardized.params)};
        });
    });
}

void write_features_artifact(const RunConfig& config, RunSummary& summary)
{
    stage("output", [&] {
        fs::create_directories(config.out);
        summary.features_csv = config.out / "features.csv";
        std::ostringstream csv;
        write_features_csv(csv, summary.features);
        write_text(summary.features_csv, csv.str());
    });
}

void write_cluster_artifacts(const RunConfig& config, RunSummary& summary)
{
    stage("output", [&] {
        fs::create_directories(config.out);
        summary.clusters_json = config.out / "clusters.json";
        std::ostringstream json;
        write_clusters_json(json, *summary.clusters);
        write_text(summary.clusters_json, json.str());
        summary.scatter_svg = config.out / "clusters.svg";
        write_text(summary.scatter_svg, render_scatter_svg(*summary.clusters, summary.features));
    });
}

void write_report(const RunConfig& config, RunSummary& summary, const Timings& timings)
{
    stage("output", [&] {
        fs::create_directories(config.out);
        summary.report_json = config.out / "run_report.json";
        write_text(summary.report_json, report_json(config, summary, timings).dump(2) + "\n");
    });
}

} // namespace

void validate(const RunConfig& c)
{
    if (!(c.max_gap_min > 0.0) || !std::isfinite(c.max_gap_min)) {
        throw ConfigError("max-gap-min must be positive");
    }
    if (!(c.min_slot_fraction > 0.0 && c.min_slot_fraction <= 1.0)) {
        throw ConfigError("min-slot-fraction must lie in (0, 1]");
    }
    if (c.min_valid_days < 1) {
        throw ConfigError("min-valid-days must be at least 1");
    }
    if (c.sd_kind == SdKind::sample && c.min_valid_days < 2) {
        throw ConfigError("sd-kind sample needs min-valid-days >= 2");
    }
    if (c.k < 1) {
        throw ConfigError("k must be at least 1");
    }
    if (c.restarts < 1) {
        throw ConfigError("restarts must be at least 1");
    }
    if (c.max_iter < 1) {
        throw ConfigError("max-iter must be at least 1");
    }
    if (!(c.tol >= 0.0) || !std::isfinite(c.tol)) {
        throw ConfigError("tol must be a finite value >= 0");
    }
}

ConfigEntries parse_config_text(std::istream& in)
{
    ConfigEntries entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (const auto hash = view.find('#'); hash != std::string_view::npos) {
            view = view.substr(0, hash);
        }
        view = trim(view);
        if (view.empty()) {
            continue;
        }
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        std::string key(trim(view.substr(0, eq)));
        if (key.starts_with("--")) {
            key.erase(0, 2);
        }
        const auto value = trim(view.substr(eq + 1));
        if (!known_keys().contains(key)) {
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        auto& values = entries[key];
        if (key == "input") {
            for (auto part : split(value, ',')) {
                if (!trim(part).empty()) {
                    values.emplace_back(trim(part));
                }
            }
        } else {
            values.emplace_back(value);
        }
    }
    return entries;
}

ConfigEntries load_config_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    return parse_config_text(in);
}

RunConfig resolve_config(const ConfigEntries& file_entries, const ConfigEntries& cli_entries)
{
    RunConfig config;
    apply_entries(config, file_entries);
    apply_entries(config, cli_entries);
    validate(config);
    return config;
}

std::string describe_config(const RunConfig& c)
{
    std::ostringstream out;
    for (const auto& p : c.inputs) {
        out << "input = " << p.string() << '\n';
    }
    if (c.holidays) {
        out << "holidays = " << c.holidays->string() << '\n';
    }
    out << "max-gap-min = " << format_number(c.max_gap_min) << '\n'
        << "min-valid-days = " << c.min_valid_days << '\n'
        << "min-slot-fraction = " << format_number(c.min_slot_fraction) << '\n'
        << "mode = " << to_string(c.mode) << '\n'
        << "sd-kind = " << to_string(c.sd_kind) << '\n'
        << "k = " << c.k << '\n'
        << "restarts = " << c.restarts << '\n'
        << "max-iter = " << c.max_iter << '\n'
        << "tol = " << format_number(c.tol) << '\n'
        << "seed = " << c.seed << '\n'
        << "no-standardize = " << (c.standardize ? "false" : "true") << '\n'
        << "out = " << c.out.string() << '\n'
        << "threads = " << c.threads << '\n'
        << "export-aligned = " << (c.export_aligned ? "true" : "false") << '\n';
    return out.str();
}

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs)
{
    std::vector<fs::path> files;
    for (const auto& p : inputs) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(p)) {
                if (entry.is_regular_file() && entry.path().extension() == ".csv") {
                    found.push_back(entry.path());
                }
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else if (fs::exists(p)) {
            files.push_back(p);
        } else {
            throw IoError("no such file or directory: " + p.string());
        }
    }
    if (files.empty()) {
        throw IoError("no input CSV files found");
    }
    return files;
}

RunSummary cmd_run(const RunConfig& config)
{
    RunSummary summary;
    Timings timings;
    timings.time("total", [&] {
        prepare_features(config, summary, timings);
        cluster_features(config, summary, timings);
    });
    write_features_artifact(config, summary);
    write_cluster_artifacts(config, summary);
    write_report(config, summary, timings);
    return summary;
}

RunSummary cmd_features(const RunConfig& config)
{
    RunSummary summary;
    Timings timings;
    timings.time("total", [&] { prepare_features(config, summary, timings); });
    write_features_artifact(config, summary);
    write_report(config, summary, timings);
    return summary;
}

RunSummary cmd_cluster(const fs::path& features_csv, const RunConfig& requested)
{
    RunConfig config = requested;
    stage("config", [&] { validate(config); });
    RunSummary summary;
    Timings timings;
    const auto table = stage("features", [&] {
        auto in = open_input(features_csv);
        return read_features_csv(in);
    });
    config.mode = table.mode;
    config.inputs = {features_csv};
    summary.features = table.rows;
    summary.counts.households_loaded = table.rows.size();
    summary.counts.households_retained = table.rows.size();
    timings.time("total", [&] { cluster_features(config, summary, timings); });
    write_cluster_artifacts(config, summary);
    write_report(config, summary, timings);
    return summary;
}

void cmd_plot(const fs::path& clusters_json, const fs::path& features_csv, const fs::path& svg_out)
{
    stage("plot", [&] {
        auto cin = open_input(clusters_json);
        const auto clusters = read_clusters_json(cin);
        auto fin = open_input(features_csv);
        const auto table = read_features_csv(fin);
        if (table.mode != clusters.mode) {
            throw ValidationError("features CSV is " + std::string(to_string(table.mode))
                                  + " but clusters JSON is " + to_string(clusters.mode));
        }
        const auto svg = render_scatter_svg(clusters, table.rows);
        if (svg_out.has_parent_path()) {
            fs::create_directories(svg_out.parent_path());
        }
        write_text(svg_out, svg);
    });
}

SynthSummary cmd_synth(const SynthCommand& command)
{
    return stage("synth", [&] {
        std::vector<GroupSpec> spec = default_group_specs();
        if (command.spec) {
            std::ifstream in(*command.spec);
            if (!in) {
                throw ConfigError("cannot open spec file " + command.spec->string());
            }
            spec = read_group_specs(in);
        }
        const auto cohort = generate(spec, command.options, resolve_threads(command.threads));
        fs::create_directories(command.out);
        SynthSummary summary;
        summary.readings_csv = command.out / "readings.csv";
        summary.truth_csv = command.out / "truth.csv";
        {
            std::ofstream out(summary.readings_csv, std::ios::binary);
            if (!out) {
                throw IoError("cannot write " + summary.readings_csv.string());
            }
            write_readings_csv(out, cohort);
        }
        {
            std::ofstream out(summary.truth_csv, std::ios::binary);
            write_truth_csv(out, cohort);
        }
        {
            std::ofstream out(command.out / "spec.json", std::ios::binary);
            write_group_specs(out, spec);
        }
        summary.households = cohort.readings.size();
        summary.readings = cohort.reading_count();
        return summary;
    });
}

} // namespace flexclust
