#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "qers/model.hpp"

namespace qers {

struct CriterionStats {
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation
    double min = 0.0;
    double max = 0.0;
};

using GroupKey = std::pair<Algorithm, Scenario>;

struct SyntheticSpec {
    // measured criteria only
    std::map<GroupKey, std::map<Criterion, CriterionStats>> groups;
};

// Throws EmptyDataset for no samples and InsufficientGroupData when any
// present (algorithm, scenario) group has fewer than two samples.
SyntheticSpec fit_synthetic_spec(std::span<const MetricSample> samples);

// n samples spread round-robin over the spec's groups. Each criterion is an
// independent normal truncated to the group's observed envelope, then
// clipped to MetricSample invariants.
std::vector<MetricSample> generate_synthetic(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed);

} // namespace qers
