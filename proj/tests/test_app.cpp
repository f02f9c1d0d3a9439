#include "flexclust/app.hpp"
#include "flexclust/error.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <json.hpp>

#include <fstream>
#include <regex>
#include <set>
#include <sstream>

using namespace flexclust;
using flexclust::testing::slurp;
using flexclust::testing::TempDir;

namespace {

std::vector<GroupSpec> small_spec()
{
    auto g = [](std::string name, double base, double jitter) {
        GroupSpec s;
        s.name = std::move(name);
        s.n_households = 5;
        s.base_power = base;
        s.peak_power = 400.0;
        s.peak_time_mean = 120.0;
        s.peak_time_jitter_sd = jitter;
        s.noise_sd = 10.0;
        s.reading_interval_jitter = 30.0;
        return s;
    };
    return {g("a", 200, 10), g("b", 200, 50), g("c", 800, 10), g("d", 800, 50)};
}

std::filesystem::path write_cohort(const TempDir& dir, std::size_t days = 42)
{
    SynthOptions opt;
    opt.days = days;
    opt.full_day = false;
    opt.seed = 5;
    const auto cohort = generate(small_spec(), opt);
    const auto path = dir.path() / "in" / "readings.csv";
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    write_readings_csv(out, cohort);
    return path.parent_path();
}

std::size_t count(const std::string& text, const std::string& needle)
{
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) {
        ++n;
    }
    return n;
}

std::set<std::string> point_colours(const std::string& svg)
{
    std::set<std::string> colours;
    const std::regex re("class=\"point\"[^>]*fill=\"([^\"]+)\"");
    for (std::sregex_iterator it(svg.begin(), svg.end(), re), end; it != end; ++it) {
        colours.insert((*it)[1]);
    }
    return colours;
}

} // namespace

TEST_CASE("config file parsing and precedence")
{
    std::istringstream text("# sample\ninput = a.csv, b.csv\nk = 3\nrestarts=7\nmode = 3attr\nno-standardize = true\n");
    const auto file = parse_config_text(text);
    CHECK(file.at("input") == std::vector<std::string>{"a.csv", "b.csv"});

    const auto from_file = resolve_config(file, {});
    CHECK(from_file.k == 3);
    CHECK(from_file.restarts == 7);
    CHECK(from_file.mode == FeatureMode::three_attr);
    CHECK_FALSE(from_file.standardize);
    CHECK(from_file.min_valid_days == 20);
    CHECK(from_file.max_gap_min == 30.0);

    const auto overridden = resolve_config(file, {{"k", {"5"}}, {"input", {"c.csv"}}});
    CHECK(overridden.k == 5);
    CHECK(overridden.inputs == std::vector<std::filesystem::path>{"c.csv"});
    CHECK(overridden.restarts == 7);

    std::istringstream echo(describe_config(overridden));
    const auto again = resolve_config(parse_config_text(echo), {});
    CHECK(describe_config(again) == describe_config(overridden));

    std::istringstream unknown("colour = red\n");
    CHECK_THROWS_AS(parse_config_text(unknown), ConfigError);
    std::istringstream no_eq("k 4\n");
    CHECK_THROWS_AS(parse_config_text(no_eq), ConfigError);
    CHECK_THROWS_AS(resolve_config({}, {{"k", {"four"}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config({}, {{"mode", {"4attr"}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config({}, {{"min-slot-fraction", {"1.5"}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config({}, {{"max-gap-min", {"0"}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config({}, {{"restarts", {"0"}}}), ConfigError);
}

TEST_CASE("cmd_run end to end on a small cohort")
{
    TempDir dir("app_run");
    RunConfig config;
    config.inputs = {write_cohort(dir)};
    config.out = dir.path() / "out";
    config.restarts = 10;
    const auto summary = cmd_run(config);

    CHECK(summary.counts.households_loaded == 20);
    CHECK(summary.counts.households_retained == 20);
    CHECK(summary.counts.conserved);
    REQUIRE(summary.clusters.has_value());
    CHECK(summary.clusters->model.labels.size() == 4);

    const auto csv = slurp(summary.features_csv);
    CHECK(count(csv, "\n") == 21);
    const auto svg = slurp(summary.scatter_svg);
    CHECK(count(svg, "class=\"point\"") == 20);
    CHECK(count(svg, "class=\"centroid\"") == 4);
    CHECK(count(svg, "class=\"panel\"") == 1);
    CHECK(point_colours(svg) == std::set<std::string>{"green", "red", "black", "blue"});
    CHECK(svg.find("href") == std::string::npos);

    const auto report = nlohmann::json::parse(slurp(summary.report_json));
    CHECK(report["parameters"]["k"] == 4);
    CHECK(report["parameters"]["restarts"] == 10);
    CHECK(report["parameters"]["min-valid-days"] == 20);
    CHECK(report["parameters"]["mode"] == "2attr");
    CHECK(report["conservation"]["ok"] == true);
    CHECK(report["clustering"]["wcss"].get<double>() == summary.clusters->model.wcss);

    // Partial pipelines reproduce the full run.
    RunConfig half = config;
    half.out = dir.path() / "half";
    const auto feats = cmd_features(half);
    CHECK(slurp(feats.features_csv) == csv);
    const auto clus = cmd_cluster(feats.features_csv, half);
    CHECK(slurp(clus.clusters_json) == slurp(summary.clusters_json));

    // Plot from artifacts matches the run's SVG.
    const auto replot = dir.path() / "replot.svg";
    cmd_plot(summary.clusters_json, summary.features_csv, replot);
    CHECK(slurp(replot) == svg);
}

TEST_CASE("three-attribute run draws three panels")
{
    TempDir dir("app_3attr");
    RunConfig config;
    config.inputs = {write_cohort(dir)};
    config.out = dir.path() / "out";
    config.mode = FeatureMode::three_attr;
    config.restarts = 5;
    const auto summary = cmd_run(config);
    const auto svg = slurp(summary.scatter_svg);
    CHECK(count(svg, "class=\"panel\"") == 3);
    CHECK(count(svg, "class=\"point\"") == 3 * 20);
    const auto doc = nlohmann::json::parse(slurp(summary.clusters_json));
    CHECK(doc["centroids"][0]["original"].size() == 3);
    CHECK(slurp(summary.features_csv).find(",,") == std::string::npos);
}

TEST_CASE("plot rejects a mismatched artifact pair")
{
    TempDir dir("app_plot");
    RunConfig config;
    config.inputs = {write_cohort(dir)};
    config.out = dir.path() / "two";
    config.restarts = 3;
    const auto two = cmd_run(config);
    config.out = dir.path() / "three";
    config.mode = FeatureMode::three_attr;
    const auto three = cmd_run(config);
    CHECK_THROWS_AS(cmd_plot(two.clusters_json, three.features_csv, dir.path() / "x.svg"), Error);

    const auto partial = dir.write("partial.csv",
                                   std::string(features_csv_header) + "\nh0001,100,5,,20,1\n");
    try {
        cmd_plot(two.clusters_json, partial, dir.path() / "y.svg");
        FAIL("expected a validation error");
    } catch (const Error& e) {
        CHECK(e.code() == ExitCode::data);
        CHECK(std::string(e.what()).starts_with("plot: "));
    }
}

TEST_CASE("stage errors carry the stage name and exit code")
{
    TempDir dir("app_err");
    std::filesystem::create_directories(dir.path() / "empty");
    RunConfig config;
    config.inputs = {dir.path() / "empty"};
    config.out = dir.path() / "out";
    try {
        cmd_run(config);
        FAIL("expected ingest failure");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).starts_with("ingest: "));
        CHECK(e.code() == ExitCode::data);
    }

    // Too few days: nobody survives cleaning, so k = 4 cannot be met.
    config.inputs = {write_cohort(dir, 7)};
    try {
        cmd_run(config);
        FAIL("expected cluster failure");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).starts_with("cluster: "));
        CHECK(e.code() == ExitCode::config);
    }
}

TEST_CASE("cmd_synth writes deterministic files")
{
    TempDir dir("app_synth");
    SynthCommand cmd;
    cmd.options.days = 1;
    cmd.options.seed = 3;
    cmd.out = dir.path() / "a";
    const auto a = cmd_synth(cmd);
    CHECK(a.households == 180);
    CHECK(a.readings == 180 * 288);
    cmd.out = dir.path() / "b";
    const auto b = cmd_synth(cmd);
    CHECK(slurp(a.readings_csv) == slurp(b.readings_csv));
    CHECK(slurp(a.truth_csv) == slurp(b.truth_csv));

    cmd.spec = dir.write("bad.json", "[{\"name\": \"x\", \"n_households\": 1, \"noise_sd\": -1}]");
    try {
        cmd_synth(cmd);
        FAIL("expected config error");
    } catch (const Error& e) {
        CHECK(e.code() == ExitCode::config);
    }
}
