#pragma once

#include "flexclust/cluster.hpp"
#include "flexclust/features.hpp"

#include <span>
#include <string>

namespace flexclust {

/// Colour used for a labelled cluster: high_usage green, high_variability
/// red, stable_low black, mid blue.
const char* label_colour(ClusterLabel label);

/// Self-contained SVG scatter of households coloured by cluster with centroid
/// markers. Two-attribute mode draws one panel (x = sd_time_of_max, y = mean
/// evening power); three-attribute mode draws the three pairwise panels.
///
/// Throws ValidationError when the features and the cluster assignments do
/// not cover the same households in the same mode.
std::string render_scatter_svg(const ClusterArtifact& clusters, std::span<const FeatureVector> features);

} // namespace flexclust
