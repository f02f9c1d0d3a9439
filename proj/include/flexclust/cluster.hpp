#pragma once

#include "flexclust/features.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flexclust {

/// Rows of a dense row-major matrix, each tagged with a unique household id.
class PointSet {
public:
    PointSet() = default;
    PointSet(std::vector<std::string> ids, std::size_t dims, std::vector<double> coords);

    /// Ids are generated as zero-padded row numbers, so id order is row order.
    static PointSet from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t size() const { return ids_.size(); }
    std::size_t dims() const { return dims_; }
    const std::string& id(std::size_t i) const { return ids_[i]; }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const double> point(std::size_t i) const { return {coords_.data() + i * dims_, dims_}; }

    /// Number of distinct coordinate tuples.
    std::size_t distinct_count() const;

private:
    std::vector<std::string> ids_;
    std::size_t dims_ = 0;
    std::vector<double> coords_;
};

/// Per-attribute z-score parameters. A constant attribute keeps sd = 1 and is
/// flagged. When disabled the transform is the identity.
struct StandardizationParams {
    bool enabled = true;
    std::vector<double> means;
    std::vector<double> sds;
    std::vector<bool> constant;

    std::vector<double> to_original(std::span<const double> standardized) const;
    std::vector<double> to_standardized(std::span<const double> original) const;
};

struct Standardized {
    PointSet points;
    StandardizationParams params;
};

/// Attribute order: mean_evening_power, sd_time_of_max, then sd_time_of_min in
/// three-attribute mode. Throws ConfigError when fewer than k households.
Standardized standardize(std::span<const FeatureVector> features, FeatureMode mode, std::size_t k,
                         bool enabled = true);

std::vector<std::string> attribute_names(FeatureMode mode);

enum class ClusterLabel { high_usage, high_variability, stable_low, mid };

const char* to_string(ClusterLabel label);
std::optional<ClusterLabel> parse_cluster_label(std::string_view text);

inline constexpr std::size_t default_k = 4;
inline constexpr std::size_t default_restarts = 50;
inline constexpr std::size_t default_max_iter = 300;
inline constexpr double default_tol = 1e-9;

struct ClusterModel {
    std::size_t k = 0;
    std::size_t dims = 0;
    std::vector<std::vector<double>> centroids; ///< standardized space
    std::vector<std::string> household_ids;     ///< ascending
    std::vector<std::size_t> assignments;       ///< parallel to household_ids
    double wcss = 0.0;
    std::vector<ClusterLabel> labels;           ///< empty, or one per cluster

    std::uint64_t seed = 0;       ///< seed of the run that produced this model
    std::uint64_t base_seed = 0;
    std::size_t restarts = 1;
    std::size_t iterations_used = 0;

    /// wcss after every assignment and update half-step, in order.
    std::vector<double> wcss_history;
    /// Final wcss of each restart, indexed by seed - base_seed.
    std::vector<double> restart_wcss;

    std::optional<std::size_t> cluster_of(std::string_view household_id) const;
    std::vector<std::size_t> cluster_sizes() const;

    friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

/// One Lloyd run. Initial centroids are k distinct points sampled uniformly
/// without replacement, in ascending id order, from a generator seeded with
/// `seed`. Points go to the nearest centroid (ties to the lowest index); an
/// emptied cluster takes the point farthest from its own centroid. Stops on
/// a fixed point, when the relative wcss drop falls below `tol`, or after
/// `max_iter` update steps.
///
/// Throws ConfigError if k is 0 or exceeds the number of distinct points, and
/// InvariantError if wcss ever increases.
ClusterModel kmeans_once(const PointSet& points, std::size_t k, std::uint64_t seed,
                         std::size_t max_iter = default_max_iter, double tol = default_tol);

/// Runs seeds base_seed .. base_seed + restarts - 1 and keeps the lowest wcss,
/// lowest seed on ties. Output does not depend on `threads`.
ClusterModel kmeans_best(const PointSet& points, std::size_t k, std::size_t restarts, std::uint64_t base_seed,
                         std::size_t max_iter = default_max_iter, double tol = default_tol,
                         unsigned threads = 1);

/// Sum of squared distances from each point to its assigned centroid.
double compute_wcss(const PointSet& points, const ClusterModel& model);

/// Labels four centroids given in original units (usage, sd_time_of_max, ...).
/// high_variability takes the largest sd_time_of_max, then high_usage the
/// largest usage among the rest, then stable_low the smallest sum of min-max
/// normalised usage and sd, and mid whatever is left. Ties go to the lowest
/// index. Returns nullopt unless there are exactly four centroids.
std::optional<std::vector<ClusterLabel>> label_centroids(std::span<const std::vector<double>> original);

struct LabelOutcome {
    ClusterModel model;
    std::optional<std::string> warning;
};

LabelOutcome label_clusters(ClusterModel model, const StandardizationParams& params);

/// Everything the clusters JSON carries.
struct ClusterArtifact {
    FeatureMode mode = FeatureMode::two_attr;
    ClusterModel model;
    StandardizationParams params;
};

void write_clusters_json(std::ostream& out, const ClusterArtifact& artifact);
ClusterArtifact read_clusters_json(std::istream& in);

} // namespace flexclust
