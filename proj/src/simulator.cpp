#include "qers/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <thread>
#include <tuple>

#include "qers/errors.hpp"
#include "qers/rng.hpp"

namespace qers::sim {

ScenarioProfile default_near_profile() { return {Scenario::Near, -45.0, 4.0, 1.0, 0.6, 1.0}; }

ScenarioProfile default_far_profile() { return {Scenario::Far, -68.0, 5.0, 4.0, 1.5, 1.35}; }

void validate(const ScenarioProfile& near, const ScenarioProfile& far) {
    if (near.scenario != Scenario::Near || far.scenario != Scenario::Far) {
        throw ValidationError("scenarios", "profiles must be tagged near and far");
    }
    for (const auto* p : {&near, &far}) {
        if (p->rssi_std < 0.0 || p->packet_loss_std < 0.0) throw ValidationError("scenarios", "std must be >= 0");
        if (p->latency_inflation < 1.0) throw ValidationError("latency_inflation", "must be >= 1");
    }
    if (!(far.rssi_mean_dbm < near.rssi_mean_dbm)) {
        throw ValidationError("rssi_mean_dbm", "far profile must have lower mean RSSI than near");
    }
    if (!(far.packet_loss_mean_pct > near.packet_loss_mean_pct)) {
        throw ValidationError("packet_loss_mean_pct", "far profile must have higher mean loss than near");
    }
    if (far.latency_inflation < near.latency_inflation) {
        throw ValidationError("latency_inflation", "far inflation must be >= near inflation");
    }
}

SimCost default_sim_cost(Algorithm a) {
    //                      latency ms   jitter ms   overhead ms  cpu %       energy mJ
    switch (a) {
    case Algorithm::Kyber: return {{105.0, 8.0}, {10.0, 2.0}, {18.0, 3.0}, {66.0, 6.0}, {30.0, 3.0}};
    case Algorithm::Dilithium: return {{45.0, 5.0}, {4.0, 1.0}, {10.0, 2.0}, {38.0, 5.0}, {16.0, 2.0}};
    case Algorithm::Falcon: return {{70.0, 7.0}, {7.0, 1.5}, {14.0, 2.5}, {52.0, 6.0}, {22.0, 2.5}};
    case Algorithm::SphincsPlus: return {{140.0, 12.0}, {12.0, 2.5}, {35.0, 5.0}, {78.0, 6.0}, {40.0, 4.0}};
    case Algorithm::Ntru: return {{55.0, 6.0}, {5.0, 1.2}, {12.0, 2.0}, {42.0, 5.0}, {18.0, 2.0}};
    }
    return {};
}

std::vector<std::pair<Algorithm, SimCost>> default_sim_costs() {
    std::vector<std::pair<Algorithm, SimCost>> out;
    for (Algorithm a : kAllAlgorithms) out.emplace_back(a, default_sim_cost(a));
    return out;
}

void validate(const FleetConfig& config) {
    if (config.devices < 1) throw ValidationError("devices", "must be >= 1");
    if (config.sample_interval_ms < 1) throw ValidationError("sample_interval_ms", "must be >= 1");
    if (config.algorithms.empty()) throw ValidationError("algorithms", "must not be empty");
    if (config.scenarios.empty()) throw ValidationError("scenarios", "must not be empty");
    if (config.start_timestamp_ms < 1) throw ValidationError("start_timestamp_ms", "must be > 0");
    for (Algorithm a : config.algorithms) validate(profile_for(config.profiles, a));
    validate(config.near, config.far);
}

std::string device_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "esp32c6-%02zu", index + 1);
    return buf;
}

namespace {

double draw(std::mt19937_64& rng, const CostDistribution& d) {
    if (d.stddev == 0.0) return d.mean;
    return std::normal_distribution<double>(d.mean, d.stddev)(rng);
}

std::vector<MetricSample> run_stream(const FleetConfig& cfg, std::size_t device, Scenario scenario) {
    const auto& sp = scenario == Scenario::Near ? cfg.near : cfg.far;
    std::mt19937_64 rng(derive_seed(cfg.seed, {device, static_cast<std::uint64_t>(scenario)}));
    const std::string name = device_name(device);
    const double energy_factor = 1.0 + 0.5 * (sp.latency_inflation - 1.0);

    std::vector<MetricSample> out;
    out.reserve(cfg.samples_per_stream);
    for (std::size_t i = 0; i < cfg.samples_per_stream; ++i) {
        const Algorithm alg = cfg.algorithms[i % cfg.algorithms.size()];
        const auto& profile = profile_for(cfg.profiles, alg);
        const auto& cost = profile.sim_cost;

        MetricSample s;
        s.timestamp_ms = cfg.start_timestamp_ms + static_cast<std::int64_t>(i) * cfg.sample_interval_ms +
                         static_cast<std::int64_t>(device);
        s.device_id = name;
        s.algorithm = alg;
        s.scenario = scenario;
        s.latency_ms = std::max(0.0, draw(rng, cost.latency_ms)) * sp.latency_inflation;
        s.jitter_ms = std::max(0.0, draw(rng, cost.jitter_ms)) * sp.latency_inflation;
        s.overhead_ms = std::max(0.0, draw(rng, cost.overhead_ms));
        s.cpu_pct = std::clamp(draw(rng, cost.cpu_pct), 0.0, 100.0);
        s.energy_mj = std::max(0.0, draw(rng, cost.energy_mj)) * energy_factor;
        s.packet_loss_pct = std::clamp(draw(rng, {sp.packet_loss_mean_pct, sp.packet_loss_std}), 0.0, 100.0);
        s.rssi_dbm = std::clamp(draw(rng, {sp.rssi_mean_dbm, sp.rssi_std}), -100.0, 0.0);
        s.key_bytes = std::uniform_int_distribution<std::int64_t>(profile.key_bytes.min, profile.key_bytes.max)(rng);
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace

std::size_t run_fleet(const FleetConfig& config, const SampleSink& sink) {
    validate(config);

    struct StreamRef {
        std::size_t device;
        Scenario scenario;
    };
    std::vector<StreamRef> refs;
    for (std::size_t d = 0; d < config.devices; ++d) {
        for (Scenario s : config.scenarios) refs.push_back({d, s});
    }

    std::vector<std::vector<MetricSample>> streams(refs.size());
    {
        std::vector<std::jthread> producers;
        producers.reserve(refs.size());
        for (std::size_t k = 0; k < refs.size(); ++k) {
            producers.emplace_back([&, k] { streams[k] = run_stream(config, refs[k].device, refs[k].scenario); });
        }
    }

    struct Entry {
        std::int64_t ts;
        Scenario scenario;
        std::size_t device;
        std::size_t stream;
        std::size_t index;
    };
    std::vector<Entry> order;
    for (std::size_t k = 0; k < streams.size(); ++k) {
        for (std::size_t i = 0; i < streams[k].size(); ++i) {
            order.push_back({streams[k][i].timestamp_ms, refs[k].scenario, refs[k].device, k, i});
        }
    }
    std::sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) {
        return std::tie(a.ts, a.scenario, a.device) < std::tie(b.ts, b.scenario, b.device);
    });

    const auto start = std::chrono::steady_clock::now();
    for (std::size_t n = 0; n < order.size(); ++n) {
        const auto& e = order[n];
        if (config.realtime) {
            const auto offset = std::chrono::milliseconds(e.ts - config.start_timestamp_ms);
            std::this_thread::sleep_until(start + offset);
        }
        try {
            sink(streams[e.stream][e.index]);
        } catch (const std::exception& ex) {
            throw SinkFailure(n, ex.what());
        }
    }
    return order.size();
}

std::vector<MetricSample> run_fleet(const FleetConfig& config) {
    std::vector<MetricSample> out;
    out.reserve(config.devices * config.scenarios.size() * config.samples_per_stream);
    run_fleet(config, [&](const MetricSample& s) { out.push_back(s); });
    return out;
}

} // namespace qers::sim
