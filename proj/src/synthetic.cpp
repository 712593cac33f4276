#include "qers/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "qers/errors.hpp"
#include "qers/rng.hpp"

namespace qers {

namespace {

constexpr int kMaxRejections = 64;

double draw_truncated(std::mt19937_64& rng, const CriterionStats& st) {
    if (st.stddev == 0.0 || st.min == st.max) return std::clamp(st.mean, st.min, st.max);
    std::normal_distribution<double> normal(st.mean, st.stddev);
    for (int i = 0; i < kMaxRejections; ++i) {
        const double v = normal(rng);
        if (v >= st.min && v <= st.max) return v;
    }
    return std::clamp(normal(rng), st.min, st.max);
}

void set_measured(MetricSample& s, Criterion c, double v) {
    switch (c) {
    case Criterion::Latency: s.latency_ms = std::max(0.0, v); break;
    case Criterion::Jitter: s.jitter_ms = std::max(0.0, v); break;
    case Criterion::PacketLoss: s.packet_loss_pct = std::clamp(v, 0.0, 100.0); break;
    case Criterion::Overhead: s.overhead_ms = std::max(0.0, v); break;
    case Criterion::Cpu: s.cpu_pct = std::clamp(v, 0.0, 100.0); break;
    case Criterion::Rssi: s.rssi_dbm = v; break;
    case Criterion::Energy: s.energy_mj = std::max(0.0, v); break;
    case Criterion::KeyBytes: s.key_bytes = std::max<std::int64_t>(1, std::llround(v)); break;
    default: break;
    }
}

} // namespace

SyntheticSpec fit_synthetic_spec(std::span<const MetricSample> samples) {
    if (samples.empty()) throw EmptyDataset("cannot fit a synthetic spec to no samples");

    std::map<GroupKey, std::vector<const MetricSample*>> grouped;
    for (const auto& s : samples) grouped[{s.algorithm, s.scenario}].push_back(&s);

    SyntheticSpec spec;
    for (const auto& [key, members] : grouped) {
        if (members.size() < 2) {
            throw InsufficientGroupData("group " + std::string(to_string(key.first)) + "/" +
                                        std::string(to_string(key.second)) + " has " +
                                        std::to_string(members.size()) + " sample(s); need >= 2");
        }
        auto& stats = spec.groups[key];
        const double n = static_cast<double>(members.size());
        for (Criterion c : kMeasuredCriteria) {
            CriterionStats st;
            st.min = std::numeric_limits<double>::infinity();
            st.max = -st.min;
            double sum = 0.0;
            for (const auto* s : members) {
                const double v = raw_value(*s, c);
                sum += v;
                st.min = std::min(st.min, v);
                st.max = std::max(st.max, v);
            }
            st.mean = sum / n;
            double ss = 0.0;
            for (const auto* s : members) {
                const double d = raw_value(*s, c) - st.mean;
                ss += d * d;
            }
            st.stddev = std::sqrt(ss / (n - 1.0));
            stats[c] = st;
        }
    }
    return spec;
}

std::vector<MetricSample> generate_synthetic(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed) {
    if (spec.groups.empty()) throw EmptyDataset("synthetic spec has no groups");

    std::vector<const std::pair<const GroupKey, std::map<Criterion, CriterionStats>>*> groups;
    for (const auto& g : spec.groups) groups.push_back(&g);

    std::mt19937_64 rng(derive_seed(seed, {0x5e7}));
    std::vector<MetricSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& [key, stats] = *groups[i % groups.size()];
        MetricSample s;
        s.timestamp_ms = static_cast<std::int64_t>(i) + 1;
        s.device_id = "synthetic";
        s.algorithm = key.first;
        s.scenario = key.second;
        for (Criterion c : kMeasuredCriteria) {
            auto it = stats.find(c);
            if (it == stats.end()) throw MissingCriterion(std::string(criterion_id(c)));
            set_measured(s, c, draw_truncated(rng, it->second));
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace qers
