#include "flexclust/cluster.hpp"

#include "flexclust/error.hpp"
#include "flexclust/parallel.hpp"
#include "flexclust/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

namespace flexclust {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        d += diff * diff;
    }
    return d;
}

// Working state of one Lloyd run. Points are held in ascending-id order.
class LloydRun {
public:
    LloydRun(const PointSet& points, std::size_t k) : points_(points), k_(k), assign_(points.size(), 0) {}

    void initialize(std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        std::vector<std::size_t> pool(points_.size());
        std::iota(pool.begin(), pool.end(), 0);
        centroids_.clear();
        for (std::size_t pos = 0; pos < pool.size() && centroids_.size() < k_; ++pos) {
            std::uniform_int_distribution<std::size_t> pick(pos, pool.size() - 1);
            std::swap(pool[pos], pool[pick(rng)]);
            const auto candidate = points_.point(pool[pos]);
            const bool duplicate = std::any_of(centroids_.begin(), centroids_.end(), [&](const auto& c) {
                return std::equal(c.begin(), c.end(), candidate.begin());
            });
            if (!duplicate) {
                centroids_.emplace_back(candidate.begin(), candidate.end());
            }
        }
        if (centroids_.size() != k_) {
            throw InvariantError("kmeans: could not draw k distinct initial centroids");
        }
    }

    /// Nearest-centroid assignment; returns true when any point moved.
    bool assign(bool first)
    {
        bool changed = first;
        for (std::size_t i = 0; i < points_.size(); ++i) {
            const auto p = points_.point(i);
            std::size_t best = 0;
            double best_d = squared_distance(p, centroids_[0]);
            for (std::size_t c = 1; c < k_; ++c) {
                const double d = squared_distance(p, centroids_[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign_[i] != best) {
                assign_[i] = best;
                changed = true;
            }
        }
        return changed;
    }

    /// Gives every empty cluster the point farthest from its own centroid,
    /// drawn from clusters that can spare one. Returns true if anything moved.
    bool repair_empty()
    {
        bool repaired = false;
        auto sizes = counts();
        for (std::size_t c = 0; c < k_; ++c) {
            if (sizes[c] != 0) {
                continue;
            }
            std::optional<std::size_t> far;
            double far_d = -1.0;
            for (std::size_t i = 0; i < points_.size(); ++i) {
                if (sizes[assign_[i]] < 2) {
                    continue;
                }
                const double d = squared_distance(points_.point(i), centroids_[assign_[i]]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (!far) {
                throw InvariantError("kmeans: no point available to re-seed an empty cluster");
            }
            --sizes[assign_[*far]];
            assign_[*far] = c;
            ++sizes[c];
            const auto p = points_.point(*far);
            centroids_[c].assign(p.begin(), p.end());
            repaired = true;
        }
        return repaired;
    }

    void update()
    {
        const std::size_t dims = points_.dims();
        std::vector<std::vector<double>> sums(k_, std::vector<double>(dims, 0.0));
        const auto sizes = counts();
        for (std::size_t i = 0; i < points_.size(); ++i) {
            const auto p = points_.point(i);
            auto& s = sums[assign_[i]];
            for (std::size_t d = 0; d < dims; ++d) {
                s[d] += p[d];
            }
        }
        for (std::size_t c = 0; c < k_; ++c) {
            if (sizes[c] == 0) {
                continue;
            }
            for (std::size_t d = 0; d < dims; ++d) {
                centroids_[c][d] = sums[c][d] / static_cast<double>(sizes[c]);
            }
        }
    }

    double wcss() const
    {
        double total = 0.0;
        for (std::size_t i = 0; i < points_.size(); ++i) {
            total += squared_distance(points_.point(i), centroids_[assign_[i]]);
        }
        return total;
    }

    std::vector<std::size_t> counts() const
    {
        std::vector<std::size_t> sizes(k_, 0);
        for (auto a : assign_) {
            ++sizes[a];
        }
        return sizes;
    }

    const std::vector<std::vector<double>>& centroids() const { return centroids_; }
    const std::vector<std::size_t>& assignments() const { return assign_; }

private:
    const PointSet& points_;
    std::size_t k_;
    std::vector<std::vector<double>> centroids_;
    std::vector<std::size_t> assign_;
};

void record(std::vector<double>& history, double value)
{
    // Allow for rounding in the mean update; anything beyond that is a bug.
    if (!history.empty()) {
        const double prev = history.back();
        if (value > prev + 1e-12 * std::max(prev, 1.0)) {
            throw InvariantError("kmeans: wcss increased from " + format_number(prev) + " to "
                                 + format_number(value));
        }
    }
    history.push_back(value);
}

PointSet sorted_by_id(const PointSet& points)
{
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points.id(a) < points.id(b); });
    if (std::is_sorted(order.begin(), order.end())) {
        return points;
    }
    std::vector<std::string> ids;
    std::vector<double> coords;
    ids.reserve(points.size());
    coords.reserve(points.size() * points.dims());
    for (auto i : order) {
        ids.push_back(points.id(i));
        const auto p = points.point(i);
        coords.insert(coords.end(), p.begin(), p.end());
    }
    return PointSet(std::move(ids), points.dims(), std::move(coords));
}

} // namespace

PointSet::PointSet(std::vector<std::string> ids, std::size_t dims, std::vector<double> coords)
    : ids_(std::move(ids)), dims_(dims), coords_(std::move(coords))
{
    if (dims_ == 0 || coords_.size() != ids_.size() * dims_) {
        throw ContractViolation("PointSet: coordinate count does not match ids x dims");
    }
    std::set<std::string_view> seen;
    for (const auto& id : ids_) {
        if (!seen.insert(id).second) {
            throw ContractViolation("PointSet: duplicate id " + id);
        }
    }
}

PointSet PointSet::from_rows(const std::vector<std::vector<double>>& rows)
{
    if (rows.empty()) {
        throw ContractViolation("PointSet: no rows");
    }
    const std::size_t dims = rows.front().size();
    std::vector<std::string> ids;
    std::vector<double> coords;
    char buf[16];
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != dims) {
            throw ContractViolation("PointSet: ragged rows");
        }
        std::snprintf(buf, sizeof buf, "p%06zu", i);
        ids.emplace_back(buf);
        coords.insert(coords.end(), rows[i].begin(), rows[i].end());
    }
    return PointSet(std::move(ids), dims, std::move(coords));
}

std::size_t PointSet::distinct_count() const
{
    std::set<std::vector<double>> distinct;
    for (std::size_t i = 0; i < size(); ++i) {
        const auto p = point(i);
        distinct.emplace(p.begin(), p.end());
    }
    return distinct.size();
}

std::vector<double> StandardizationParams::to_original(std::span<const double> z) const
{
    std::vector<double> out(z.begin(), z.end());
    if (enabled) {
        for (std::size_t d = 0; d < out.size(); ++d) {
            out[d] = z[d] * sds[d] + means[d];
        }
    }
    return out;
}

std::vector<double> StandardizationParams::to_standardized(std::span<const double> x) const
{
    std::vector<double> out(x.begin(), x.end());
    if (enabled) {
        for (std::size_t d = 0; d < out.size(); ++d) {
            out[d] = (x[d] - means[d]) / sds[d];
        }
    }
    return out;
}

std::vector<std::string> attribute_names(FeatureMode mode)
{
    std::vector<std::string> names{"mean_evening_power_w", "sd_time_of_max_min"};
    if (mode == FeatureMode::three_attr) {
        names.emplace_back("sd_time_of_min_min");
    }
    return names;
}

Standardized standardize(std::span<const FeatureVector> features, FeatureMode mode, std::size_t k, bool enabled)
{
    if (features.size() < k) {
        throw ConfigError("standardize: " + std::to_string(features.size()) + " households is fewer than k = "
                          + std::to_string(k));
    }
    const std::size_t dims = attribute_count(mode);
    std::vector<std::string> ids;
    std::vector<double> raw;
    ids.reserve(features.size());
    raw.reserve(features.size() * dims);
    for (const auto& f : features) {
        ids.push_back(f.household_id);
        raw.push_back(f.mean_evening_power);
        raw.push_back(f.sd_time_of_max);
        if (mode == FeatureMode::three_attr) {
            if (!f.sd_time_of_min) {
                throw ContractViolation("standardize: " + f.household_id + " lacks sd_time_of_min");
            }
            raw.push_back(*f.sd_time_of_min);
        }
    }

    StandardizationParams params;
    params.enabled = enabled;
    params.means.assign(dims, 0.0);
    params.sds.assign(dims, 1.0);
    params.constant.assign(dims, false);
    const auto n = static_cast<double>(features.size());
    for (std::size_t d = 0; d < dims; ++d) {
        double sum = 0.0;
        for (std::size_t i = 0; i < features.size(); ++i) {
            sum += raw[i * dims + d];
        }
        const double mean = sum / n;
        double ss = 0.0;
        for (std::size_t i = 0; i < features.size(); ++i) {
            const double diff = raw[i * dims + d] - mean;
            ss += diff * diff;
        }
        const double sd = std::sqrt(ss / n);
        params.constant[d] = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
        if (enabled) {
            params.means[d] = mean;
            params.sds[d] = params.constant[d] ? 1.0 : sd;
        }
    }
    if (enabled) {
        for (std::size_t i = 0; i < features.size(); ++i) {
            for (std::size_t d = 0; d < dims; ++d) {
                raw[i * dims + d] = (raw[i * dims + d] - params.means[d]) / params.sds[d];
            }
        }
    }
    return {PointSet(std::move(ids), dims, std::move(raw)), std::move(params)};
}

const char* to_string(ClusterLabel label)
{
    switch (label) {
    case ClusterLabel::high_usage: return "high_usage";
    case ClusterLabel::high_variability: return "high_variability";
    case ClusterLabel::stable_low: return "stable_low";
    case ClusterLabel::mid: return "mid";
    }
    return "unknown";
}

std::optional<ClusterLabel> parse_cluster_label(std::string_view text)
{
    for (auto l : {ClusterLabel::high_usage, ClusterLabel::high_variability, ClusterLabel::stable_low,
                   ClusterLabel::mid}) {
        if (text == to_string(l)) {
            return l;
        }
    }
    return std::nullopt;
}

std::optional<std::size_t> ClusterModel::cluster_of(std::string_view household_id) const
{
    const auto it = std::lower_bound(household_ids.begin(), household_ids.end(), household_id);
    if (it == household_ids.end() || *it != household_id) {
        return std::nullopt;
    }
    return assignments[static_cast<std::size_t>(it - household_ids.begin())];
}

std::vector<std::size_t> ClusterModel::cluster_sizes() const
{
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : assignments) {
        ++sizes[a];
    }
    return sizes;
}

ClusterModel kmeans_once(const PointSet& input, std::size_t k, std::uint64_t seed, std::size_t max_iter, double tol)
{
    if (k == 0) {
        throw ConfigError("kmeans: k must be at least 1");
    }
    if (input.size() == 0) {
        throw ConfigError("kmeans: no points");
    }
    const std::size_t distinct = input.distinct_count();
    if (k > distinct) {
        throw ConfigError("kmeans: k = " + std::to_string(k) + " exceeds the " + std::to_string(distinct)
                          + " distinct points");
    }
    const PointSet points = sorted_by_id(input);

    LloydRun run(points, k);
    run.initialize(seed);

    ClusterModel model;
    run.assign(true);
    run.repair_empty();
    record(model.wcss_history, run.wcss());

    std::size_t iterations = 0;
    while (iterations < max_iter) {
        const double before = model.wcss_history.back();
        run.update();
        ++iterations;
        record(model.wcss_history, run.wcss());

        const bool changed = run.assign(false);
        const bool repaired = run.repair_empty();
        const double after = run.wcss();
        record(model.wcss_history, after);
        if (repaired) {
            continue;
        }
        if (!changed) {
            break;
        }
        const double rel = before > 0.0 ? (before - after) / before : 0.0;
        if (rel < tol) {
            break;
        }
    }

    model.k = k;
    model.dims = points.dims();
    model.centroids = run.centroids();
    model.household_ids = points.ids();
    model.assignments = run.assignments();
    model.wcss = model.wcss_history.back();
    model.seed = seed;
    model.base_seed = seed;
    model.restarts = 1;
    model.iterations_used = iterations;
    model.restart_wcss = {model.wcss};
    return model;
}

ClusterModel kmeans_best(const PointSet& points, std::size_t k, std::size_t restarts, std::uint64_t base_seed,
                         std::size_t max_iter, double tol, unsigned threads)
{
    if (restarts == 0) {
        throw ConfigError("kmeans: restarts must be at least 1");
    }
    const PointSet sorted = sorted_by_id(points);
    std::vector<ClusterModel> candidates(restarts);
    parallel_for(restarts, threads,
                 [&](std::size_t r) { candidates[r] = kmeans_once(sorted, k, base_seed + r, max_iter, tol); });

    std::size_t best = 0;
    std::vector<double> all(restarts);
    for (std::size_t r = 0; r < restarts; ++r) {
        all[r] = candidates[r].wcss;
        if (candidates[r].wcss < candidates[best].wcss) {
            best = r;
        }
    }
    ClusterModel model = std::move(candidates[best]);
    model.base_seed = base_seed;
    model.restarts = restarts;
    model.restart_wcss = std::move(all);
    return model;
}

double compute_wcss(const PointSet& points, const ClusterModel& model)
{
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto c = model.cluster_of(points.id(i));
        if (!c) {
            throw ContractViolation("compute_wcss: " + points.id(i) + " is not in the model");
        }
        total += squared_distance(points.point(i), model.centroids[*c]);
    }
    return total;
}

std::optional<std::vector<ClusterLabel>> label_centroids(std::span<const std::vector<double>> original)
{
    if (original.size() != 4) {
        return std::nullopt;
    }
    constexpr std::size_t usage = 0;
    constexpr std::size_t sd_max = 1;
    std::vector<std::optional<ClusterLabel>> labels(4);
    auto pick = [&](auto score) {
        std::optional<std::size_t> best;
        for (std::size_t c = 0; c < 4; ++c) {
            if (!labels[c] && (!best || score(c) > score(*best))) {
                best = c;
            }
        }
        return *best;
    };

    labels[pick([&](std::size_t c) { return original[c][sd_max]; })] = ClusterLabel::high_variability;
    labels[pick([&](std::size_t c) { return original[c][usage]; })] = ClusterLabel::high_usage;

    auto normaliser = [&](std::size_t attr) {
        double lo = original[0][attr];
        double hi = lo;
        for (const auto& c : original) {
            lo = std::min(lo, c[attr]);
            hi = std::max(hi, c[attr]);
        }
        return [=](double v) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; };
    };
    const auto norm_usage = normaliser(usage);
    const auto norm_sd = normaliser(sd_max);
    labels[pick([&](std::size_t c) {
        return -(norm_usage(original[c][usage]) + norm_sd(original[c][sd_max]));
    })] = ClusterLabel::stable_low;
    labels[pick([](std::size_t) { return 0.0; })] = ClusterLabel::mid;

    std::vector<ClusterLabel> out;
    for (const auto& l : labels) {
        out.push_back(*l);
    }
    return out;
}

LabelOutcome label_clusters(ClusterModel model, const StandardizationParams& params)
{
    std::vector<std::vector<double>> original;
    for (const auto& c : model.centroids) {
        original.push_back(params.to_original(c));
    }
    auto labels = label_centroids(original);
    if (!labels) {
        model.labels.clear();
        return {std::move(model), "labeling skipped: requires k = 4, model has k = " + std::to_string(model.k)};
    }
    model.labels = std::move(*labels);
    return {std::move(model), std::nullopt};
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json number_array(std::span<const double> values)
{
    auto arr = ordered_json::array();
    for (double v : values) {
        arr.push_back(round_to_9_digits(v));
    }
    return arr;
}

std::vector<double> read_numbers(const ordered_json& arr)
{
    std::vector<double> out;
    for (const auto& v : arr) {
        out.push_back(v.get<double>());
    }
    return out;
}

} // namespace

void write_clusters_json(std::ostream& out, const ClusterArtifact& artifact)
{
    const auto& model = artifact.model;
    const auto& params = artifact.params;
    ordered_json doc;
    doc["k"] = model.k;
    doc["seed"] = model.base_seed;
    doc["best_seed"] = model.seed;
    doc["restarts"] = model.restarts;
    doc["iterations_used"] = model.iterations_used;
    doc["mode"] = to_string(artifact.mode);
    doc["attributes"] = attribute_names(artifact.mode);
    doc["wcss"] = round_to_9_digits(model.wcss);

    ordered_json std_doc;
    std_doc["enabled"] = params.enabled;
    std_doc["means"] = number_array(params.means);
    std_doc["sds"] = number_array(params.sds);
    std_doc["constant"] = params.constant;
    doc["standardization"] = std_doc;

    ordered_json centroids = ordered_json::array();
    for (std::size_t c = 0; c < model.k; ++c) {
        ordered_json entry;
        entry["cluster"] = c;
        entry["label"] = model.labels.empty() ? ordered_json(nullptr) : ordered_json(to_string(model.labels[c]));
        entry["size"] = model.cluster_sizes()[c];
        entry["standardized"] = number_array(model.centroids[c]);
        entry["original"] = number_array(params.to_original(model.centroids[c]));
        centroids.push_back(std::move(entry));
    }
    doc["centroids"] = std::move(centroids);

    ordered_json labels = ordered_json::array();
    for (auto l : model.labels) {
        labels.push_back(to_string(l));
    }
    doc["labels"] = std::move(labels);

    ordered_json assignments = ordered_json::array();
    for (std::size_t i = 0; i < model.household_ids.size(); ++i) {
        ordered_json a;
        a["household_id"] = model.household_ids[i];
        a["cluster"] = model.assignments[i];
        a["label"] = model.labels.empty() ? ordered_json(nullptr)
                                          : ordered_json(to_string(model.labels[model.assignments[i]]));
        assignments.push_back(std::move(a));
    }
    doc["assignments"] = std::move(assignments);

    out << doc.dump(2) << '\n';
}

ClusterArtifact read_clusters_json(std::istream& in)
{
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("clusters JSON: ") + e.what());
    }
    ClusterArtifact art;
    try {
        const auto mode = parse_feature_mode(doc.at("mode").get<std::string>());
        if (!mode) {
            throw FormatError("clusters JSON: unknown mode");
        }
        art.mode = *mode;
        auto& m = art.model;
        m.k = doc.at("k").get<std::size_t>();
        m.base_seed = doc.at("seed").get<std::uint64_t>();
        m.seed = doc.at("best_seed").get<std::uint64_t>();
        m.restarts = doc.at("restarts").get<std::size_t>();
        m.iterations_used = doc.at("iterations_used").get<std::size_t>();
        m.wcss = doc.at("wcss").get<double>();
        m.dims = attribute_count(art.mode);

        const auto& s = doc.at("standardization");
        art.params.enabled = s.at("enabled").get<bool>();
        art.params.means = read_numbers(s.at("means"));
        art.params.sds = read_numbers(s.at("sds"));
        art.params.constant = s.at("constant").get<std::vector<bool>>();

        for (const auto& c : doc.at("centroids")) {
            auto z = read_numbers(c.at("standardized"));
            if (z.size() != m.dims) {
                throw FormatError("clusters JSON: centroid dimension does not match mode");
            }
            m.centroids.push_back(std::move(z));
        }
        if (m.centroids.size() != m.k) {
            throw FormatError("clusters JSON: centroid count does not match k");
        }
        for (const auto& l : doc.at("labels")) {
            const auto label = parse_cluster_label(l.get<std::string>());
            if (!label) {
                throw FormatError("clusters JSON: unknown label");
            }
            m.labels.push_back(*label);
        }
        std::vector<std::pair<std::string, std::size_t>> rows;
        for (const auto& a : doc.at("assignments")) {
            rows.emplace_back(a.at("household_id").get<std::string>(), a.at("cluster").get<std::size_t>());
        }
        std::sort(rows.begin(), rows.end());
        for (auto& [id, c] : rows) {
            if (c >= m.k) {
                throw FormatError("clusters JSON: cluster index out of range for " + id);
            }
            m.household_ids.push_back(std::move(id));
            m.assignments.push_back(c);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("clusters JSON: ") + e.what());
    }
    return art;
}

} // namespace flexclust
