#pragma once

#include "flexclust/civil_time.hpp"
#include "flexclust/ingest.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace flexclust {

/// Parameters of one synthetic household archetype. Times are minutes after
/// 16:00; powers are watts.
struct GroupSpec {
    std::string name;
    std::size_t n_households = 0;
    double base_power = 200.0;
    double peak_power = 400.0;
    double peak_time_mean = 120.0;
    double peak_time_jitter_sd = 0.0;
    double noise_sd = 0.0;
    double reading_interval_jitter = 0.0; ///< seconds, uniform +/- around each 5-minute mark

    double peak_width = 20.0;           ///< sd of the Gaussian evening bump, minutes
    double trough_depth = 0.0;          ///< optional Gaussian dip (plants time-of-min)
    double trough_time_mean = 0.0;
    double trough_time_jitter_sd = 0.0;
    double trough_width = 15.0;

    friend bool operator==(const GroupSpec&, const GroupSpec&) = default;
};

/// Throws ConfigError describing the first invalid field.
void validate(const GroupSpec& spec);

struct SynthOptions {
    std::size_t days = 365;          ///< calendar days, starting at start_date
    std::uint64_t seed = 1;
    Date start_date = make_date(2011, 1, 3);
    bool full_day = true;            ///< false: emit only 15:00 .. 21:00
};

struct SynthCohort {
    std::vector<std::pair<std::string, std::vector<Sample>>> readings; ///< ascending id
    std::map<std::string, std::string> truth;                          ///< household -> group
    std::vector<GroupSpec> spec;
    std::uint64_t seed = 0;

    std::size_t reading_count() const;
    RawCohort to_raw() const;

    friend bool operator==(const SynthCohort&, const SynthCohort&) = default;
};

/// Households are named h0001, h0002, ... in spec order. Each household draws
/// from its own generator derived from (seed, household index).
/// Throws ConfigError for an invalid spec or zero days.
SynthCohort generate(std::span<const GroupSpec> spec, const SynthOptions& options, unsigned threads = 1);

/// 180 households in the four evening archetypes (45 each).
std::vector<GroupSpec> default_group_specs();

/// JSON: either an array of groups or {"groups": [...]}. Unknown keys are
/// rejected. Throws ConfigError.
std::vector<GroupSpec> read_group_specs(std::istream& in);
void write_group_specs(std::ostream& out, std::span<const GroupSpec> spec);

void write_readings_csv(std::ostream& out, const SynthCohort& cohort);
void write_truth_csv(std::ostream& out, const SynthCohort& cohort);

/// Two-pass population standard deviation. Throws ContractViolation on empty.
double oracle_sd(std::span<const double> values);

inline constexpr std::size_t oracle_max_points = 12;
inline constexpr std::size_t oracle_max_k = 3;

/// Global minimum wcss over every partition of the rows into at most k
/// non-empty blocks, each scored against its mean. Refuses (ConfigError)
/// above 12 points or above k = 3.
double oracle_kmeans(const std::vector<std::vector<double>>& points, std::size_t k);

using Partition = std::map<std::string, std::string>;

/// Chance-corrected pair-counting agreement. Throws ContractViolation unless
/// both partitions cover the same ids. Returns 1 when both partitions are
/// trivial in the same way (the index is otherwise undefined there).
double adjusted_rand_index(const Partition& a, const Partition& b);

} // namespace flexclust
