#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qers/model.hpp"

namespace qers::sim {

struct ScenarioProfile {
    Scenario scenario = Scenario::Near;
    double rssi_mean_dbm = -45.0;
    double rssi_std = 4.0;
    double packet_loss_mean_pct = 1.0;
    double packet_loss_std = 0.6;
    double latency_inflation = 1.0; // applied to latency and jitter, >= 1

    bool operator==(const ScenarioProfile&) const = default;
};

ScenarioProfile default_near_profile();
ScenarioProfile default_far_profile();

// Far must be weaker and lossier than Near, with no smaller inflation.
void validate(const ScenarioProfile& near, const ScenarioProfile& far);

// Near-scenario cost distributions per algorithm. Magnitudes are synthetic;
// they are tuned only so the mean fusion ordering across algorithms and the
// near/far decrease have the shape of the reference campaign.
SimCost default_sim_cost(Algorithm a);
std::vector<std::pair<Algorithm, SimCost>> default_sim_costs();

struct FleetConfig {
    std::size_t devices = 1;
    std::vector<Algorithm> algorithms{kAllAlgorithms.begin(), kAllAlgorithms.end()};
    std::vector<Scenario> scenarios{Scenario::Near};
    std::int64_t sample_interval_ms = 1000;
    std::size_t samples_per_stream = 100; // per device per scenario
    std::uint64_t seed = 1;
    std::int64_t start_timestamp_ms = 1'700'000'000'000;
    ProfileCatalog profiles = builtin_profile_catalog();
    ScenarioProfile near = default_near_profile();
    ScenarioProfile far = default_far_profile();
    bool realtime = false; // sleep one interval between ticks
};

void validate(const FleetConfig& config);

std::string device_name(std::size_t index);

using SampleSink = std::function<void(const MetricSample&)>;

// Every (device, scenario) pair is an independent stream seeded from the
// master seed; sample i of a stream uses algorithms[i % size] and timestamp
// start + i * interval + device index. Streams are merged by (timestamp,
// scenario, device). Exceptions thrown by the sink surface as SinkFailure
// carrying the sample index. Returns the number of samples emitted.
std::size_t run_fleet(const FleetConfig& config, const SampleSink& sink);

std::vector<MetricSample> run_fleet(const FleetConfig& config);

} // namespace qers::sim
