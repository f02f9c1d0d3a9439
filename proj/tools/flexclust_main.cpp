#include "flexclust/app.hpp"
#include "flexclust/error.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

using flexclust::ConfigEntries;

// Raw values of the pipeline options for one subcommand; only options the
// user actually gave are forwarded, so the config file can fill the rest.
struct PipelineOptions {
    std::string config_file;
    std::map<std::string, std::vector<std::string>> values;
    std::map<std::string, bool> flags;
    std::map<std::string, CLI::Option*> options;

    CLI::Option* add(CLI::App& sub, const std::string& name, const std::string& help)
    {
        return options[name] = sub.add_option("--" + name, values[name], help)->expected(1)->type_name("VALUE");
    }

    void add_flag(CLI::App& sub, const std::string& name, const std::string& help)
    {
        options[name] = sub.add_flag("--" + name, flags[name], help);
    }

    ConfigEntries given() const
    {
        ConfigEntries entries;
        for (const auto& [name, opt] : options) {
            if (opt->count() == 0) {
                continue;
            }
            if (flags.contains(name)) {
                entries[name] = {flags.at(name) ? "true" : "false"};
            } else {
                entries[name] = values.at(name);
            }
        }
        return entries;
    }

    flexclust::RunConfig resolve() const
    {
        const ConfigEntries file = config_file.empty() ? ConfigEntries{} : flexclust::load_config_file(config_file);
        return flexclust::resolve_config(file, given());
    }
};

void add_ingest_options(CLI::App& sub, PipelineOptions& o)
{
    o.add(sub, "input", "Reading CSV files or directories of them")->expected(1, -1)->type_name("PATH");
    o.add(sub, "holidays", "Holiday list, one YYYY-MM-DD per line");
    o.add(sub, "max-gap-min", "Longest reading gap bridged by interpolation, minutes (default 30)");
    o.add(sub, "min-valid-days", "Valid working-day windows a household needs (default 20)");
    o.add(sub, "min-slot-fraction", "Fraction of the 48 peak slots a valid day needs (default 0.9)");
    o.add(sub, "mode", "Attributes: 2attr or 3attr (default 2attr)");
    o.add(sub, "sd-kind", "population or sample standard deviation (default population)");
    o.add_flag(sub, "export-aligned", "Also write the aligned 5-minute series as aligned.csv");
}

void add_cluster_options(CLI::App& sub, PipelineOptions& o)
{
    o.add(sub, "k", "Number of clusters (default 4)");
    o.add(sub, "restarts", "k-means restarts (default 50)");
    o.add(sub, "max-iter", "Lloyd iterations per restart (default 300)");
    o.add(sub, "tol", "Relative wcss change that stops a restart (default 1e-9)");
    o.add(sub, "seed", "Base seed; restarts use seed .. seed+restarts-1 (default 1)");
    o.add_flag(sub, "no-standardize", "Cluster raw attributes instead of z-scores");
}

void add_common_options(CLI::App& sub, PipelineOptions& o)
{
    o.add(sub, "out", "Output directory (default flexclust_out)");
    o.add(sub, "threads", "Worker threads, 0 = all cores (default 0)");
    sub.add_option("--config", o.config_file, "key = value file; command-line flags take precedence");
}

void print_summary(const flexclust::RunSummary& s)
{
    std::cout << "households loaded:   " << s.counts.households_loaded << '\n'
              << "households retained: " << s.counts.households_retained << '\n';
    if (s.clusters) {
        const auto& m = s.clusters->model;
        std::cout << "wcss:                " << m.wcss << " (best seed " << m.seed << ")\n";
        const auto sizes = m.cluster_sizes();
        for (std::size_t c = 0; c < m.k; ++c) {
            std::cout << "  cluster " << c << ": " << sizes[c] << " households";
            if (!m.labels.empty()) {
                std::cout << ", " << flexclust::to_string(m.labels[c]);
            }
            std::cout << '\n';
        }
    }
    for (const auto& w : s.warnings) {
        std::cerr << "warning: " << w << '\n';
    }
    for (const auto& p : {s.features_csv, s.clusters_json, s.scatter_svg, s.report_json}) {
        if (!p.empty()) {
            std::cout << "wrote " << p.string() << '\n';
        }
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Household flexibility clustering from smart-meter readings"};
    app.require_subcommand(1);

    PipelineOptions run_opts;
    auto* run = app.add_subcommand("run", "Full pipeline: ingest, align, clean, features, cluster, plot");
    add_ingest_options(*run, run_opts);
    add_cluster_options(*run, run_opts);
    add_common_options(*run, run_opts);

    PipelineOptions feat_opts;
    auto* features = app.add_subcommand("features", "Ingest readings and write the features CSV");
    add_ingest_options(*features, feat_opts);
    add_common_options(*features, feat_opts);

    PipelineOptions clus_opts;
    std::string features_csv;
    auto* cluster = app.add_subcommand("cluster", "Cluster an existing features CSV");
    cluster->add_option("--features", features_csv, "features.csv from a previous run")->required();
    add_cluster_options(*cluster, clus_opts);
    add_common_options(*cluster, clus_opts);

    std::string plot_clusters;
    std::string plot_features;
    std::string plot_out = "clusters.svg";
    auto* plot = app.add_subcommand("plot", "Render the cluster scatter SVG from run artifacts");
    plot->add_option("--clusters", plot_clusters, "clusters.json")->required();
    plot->add_option("--features", plot_features, "features.csv")->required();
    plot->add_option("--out", plot_out, "SVG file to write");

    flexclust::SynthCommand synth_cmd;
    std::string synth_spec;
    std::string synth_start;
    std::string synth_out = "synth_out";
    bool evening_only = false;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort with known groups");
    synth->add_option("--spec", synth_spec, "Group spec JSON (default: built-in 4 x 45 households)");
    synth->add_option("--days", synth_cmd.options.days, "Calendar days to generate (default 365)");
    synth->add_option("--seed", synth_cmd.options.seed, "Generator seed (default 1)");
    synth->add_option("--start-date", synth_start, "First day, YYYY-MM-DD (default 2011-01-03)");
    synth->add_flag("--evening-only", evening_only, "Emit readings only between 15:00 and 21:00");
    synth->add_option("--out", synth_out, "Output directory");
    synth->add_option("--threads", synth_cmd.threads, "Worker threads, 0 = all cores");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(flexclust::ExitCode::config);
    }

    try {
        if (run->parsed()) {
            print_summary(flexclust::cmd_run(run_opts.resolve()));
        } else if (features->parsed()) {
            print_summary(flexclust::cmd_features(feat_opts.resolve()));
        } else if (cluster->parsed()) {
            print_summary(flexclust::cmd_cluster(features_csv, clus_opts.resolve()));
        } else if (plot->parsed()) {
            flexclust::cmd_plot(plot_clusters, plot_features, plot_out);
            std::cout << "wrote " << plot_out << '\n';
        } else if (synth->parsed()) {
            if (!synth_spec.empty()) {
                synth_cmd.spec = synth_spec;
            }
            if (!synth_start.empty()) {
                const auto d = flexclust::parse_date(synth_start);
                if (!d) {
                    throw flexclust::ConfigError("synth: --start-date must be YYYY-MM-DD");
                }
                synth_cmd.options.start_date = *d;
            }
            synth_cmd.options.full_day = !evening_only;
            synth_cmd.out = synth_out;
            const auto s = flexclust::cmd_synth(synth_cmd);
            std::cout << "households: " << s.households << "\nreadings:   " << s.readings << "\nwrote "
                      << s.readings_csv.string() << "\nwrote " << s.truth_csv.string() << '\n';
        }
    } catch (const flexclust::Error& e) {
        std::cerr << "flexclust: " << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "flexclust: internal error: " << e.what() << '\n';
        return static_cast<int>(flexclust::ExitCode::invariant);
    }
    return 0;
}
