#pragma once

// Shared helpers for the test binaries: seeded generators for property tests
// and oracles written directly from the formulas, independent of the library
// code paths they check.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qers/model.hpp"
#include "qers/scoring.hpp"

namespace qers::test {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : eng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
    }
    bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(eng_); }
    template <typename T, std::size_t N>
    T pick(const std::array<T, N>& items) {
        return items[static_cast<std::size_t>(integer(0, static_cast<std::int64_t>(N) - 1))];
    }
    std::mt19937_64& engine() { return eng_; }

    // Mostly ordinary values with occasional edge cases.
    double nonneg() {
        switch (integer(0, 9)) {
        case 0: return 0.0;
        case 1: return uniform(0.0, 1e-6);
        case 2: return uniform(1e3, 1e6);
        default: return uniform(0.0, 500.0);
        }
    }
    double pct() {
        switch (integer(0, 9)) {
        case 0: return 0.0;
        case 1: return 100.0;
        default: return uniform(0.0, 100.0);
        }
    }

    MetricSample sample() {
        MetricSample s;
        s.timestamp_ms = integer(1, 4'000'000'000'000);
        static const std::array<const char*, 4> devices{"esp32c6-01", "dev-2", "x", "node_with-long.name"};
        s.device_id = devices[static_cast<std::size_t>(integer(0, 3))];
        s.algorithm = pick(kAllAlgorithms);
        s.scenario = pick(kAllScenarios);
        s.latency_ms = nonneg();
        s.jitter_ms = nonneg();
        s.packet_loss_pct = pct();
        s.overhead_ms = nonneg();
        s.cpu_pct = pct();
        s.rssi_dbm = uniform(-100.0, 0.0);
        s.energy_mj = nonneg();
        s.key_bytes = integer(1, 100'000);
        return s;
    }

private:
    std::mt19937_64 eng_;
};

inline MetricSample make_sample(Algorithm a, Scenario sc, double latency, std::int64_t ts = 1) {
    MetricSample s;
    s.timestamp_ms = ts;
    s.device_id = "dev";
    s.algorithm = a;
    s.scenario = sc;
    s.latency_ms = latency;
    s.jitter_ms = 1.0;
    s.packet_loss_pct = 1.0;
    s.overhead_ms = 10.0;
    s.cpu_pct = 50.0;
    s.rssi_dbm = -50.0;
    s.energy_mj = 20.0;
    s.key_bytes = 1000;
    return s;
}

// ---- preset and score-input generators ------------------------------------

inline const WeightPreset& preset(const std::string& name) {
    static const auto all = builtin_presets();
    for (const auto& p : all) {
        if (p.name == name) return p;
    }
    throw std::logic_error("no preset " + name);
}

inline NormalizedVector random_norms(Gen& g, double ms) {
    NormalizedVector n(ms);
    for (std::size_t i = 0; i < kCriterionCount; ++i) n.set(static_cast<Criterion>(i), g.uniform(0.0, ms));
    return n;
}

// Fusion-default with random convex weights and mix.
inline WeightPreset random_fusion(Gen& g) {
    auto w = preset("Fusion-default");
    auto split = [&](std::initializer_list<double*> slots) {
        std::vector<double> raw;
        double total = 0;
        for (std::size_t i = 0; i < slots.size(); ++i) {
            raw.push_back(g.uniform(0.0, 1.0));
            total += raw.back();
        }
        std::size_t i = 0;
        for (double* s : slots) *s = raw[i++] / total;
    };
    auto& f = w.fusion;
    split({&f.latency, &f.jitter, &f.packet_loss, &f.energy, &f.cpu});
    split({&f.key_size, &f.robustness, &f.proven_resistance, &f.crypto_overhead});
    f.mix_performance = g.uniform(0.0, 1.0);
    f.mix_security = 1.0 - f.mix_performance;
    return w;
}

// ---- formula oracles --------------------------------------------------------

inline double oracle_norm(double x, double lo, double hi, double ms) {
    if (hi == lo) return ms / 2.0;
    double v = ms * (x - lo) / (hi - lo);
    if (v < 0.0) v = 0.0;
    if (v > ms) v = ms;
    return v;
}

inline double oracle_clamp(double v, double ms) { return v < 0.0 ? 0.0 : (v > ms ? ms : v); }

// Normalized inputs keyed by symbol.
struct Norms {
    double L = 0, J = 0, P = 0, O = 0, C = 0, R = 0, E = 0, K = 0, Rb = 0, Pr = 0, Co = 0;
};

inline double oracle_basic(const Norms& n, double a, double b, double g, double ms) {
    return oracle_clamp(ms - (a * n.L + b * n.O + g * n.P), ms);
}

inline double oracle_tuned(const Norms& n, const LinearWeights& w, double ms) {
    const double cost = w.alpha * n.L + w.beta * n.O + w.gamma * n.P + w.delta * n.C + w.zeta * n.E + w.eta * n.K;
    return oracle_clamp(ms - cost + w.epsilon * n.R, ms);
}

struct OracleFusion {
    double p, s, fusion;
};

inline OracleFusion oracle_fusion(const Norms& n, const FusionWeights& w, double ms) {
    const double p = w.latency * n.L + w.jitter * n.J + w.packet_loss * n.P + w.energy * n.E + w.cpu * n.C;
    const double co = w.crypto_overhead_direction == Direction::Benefit ? n.Co : ms - n.Co;
    const double s = w.key_size * n.K + w.robustness * n.Rb + w.proven_resistance * n.Pr + w.crypto_overhead * co;
    return {p, s, oracle_clamp(w.mix_performance * (ms - p) + w.mix_security * s, ms)};
}

// Column min/max by a plain scan.
inline std::map<std::string, std::pair<double, double>> oracle_columns(const std::vector<MetricSample>& rows) {
    std::map<std::string, std::pair<double, double>> out;
    auto upd = [&](const char* k, double v) {
        auto it = out.find(k);
        if (it == out.end()) {
            out[k] = {v, v};
        } else {
            if (v < it->second.first) it->second.first = v;
            if (v > it->second.second) it->second.second = v;
        }
    };
    for (const auto& s : rows) {
        upd("L", s.latency_ms);
        upd("J", s.jitter_ms);
        upd("P_loss", s.packet_loss_pct);
        upd("O", s.overhead_ms);
        upd("C", s.cpu_pct);
        upd("R", s.rssi_dbm);
        upd("E", s.energy_mj);
        upd("K", static_cast<double>(s.key_bytes));
    }
    return out;
}

// Full analytic scoring of a sample against explicit window rows, written
// from the formulas only (no library scoring calls).
struct OracleScores {
    double basic, tuned, p, s, fusion;
};

inline OracleScores oracle_score(const MetricSample& x, const std::vector<MetricSample>& window,
                                 const AlgorithmProfile& prof, const LinearWeights& bw, const LinearWeights& tw,
                                 const FusionWeights& fw, double ms = 100.0) {
    const auto cols = oracle_columns(window);
    auto nm = [&](const char* k, double v) { return oracle_norm(v, cols.at(k).first, cols.at(k).second, ms); };
    Norms n;
    n.L = nm("L", x.latency_ms);
    n.J = nm("J", x.jitter_ms);
    n.P = nm("P_loss", x.packet_loss_pct);
    n.O = nm("O", x.overhead_ms);
    n.C = nm("C", x.cpu_pct);
    n.R = nm("R", x.rssi_dbm);
    n.E = nm("E", x.energy_mj);
    n.K = nm("K", static_cast<double>(x.key_bytes));
    n.Rb = oracle_norm(prof.robustness, 0, 100, ms);
    n.Pr = oracle_norm(prof.proven_resistance, 0, 100, ms);
    n.Co = oracle_norm(prof.crypto_overhead, 0, 100, ms);
    const auto f = oracle_fusion(n, fw, ms);
    return {oracle_basic(n, bw.alpha, bw.beta, bw.gamma, ms), oracle_tuned(n, tw, ms), f.p, f.s, f.fusion};
}

// Quantile with linear interpolation between order statistics.
inline double oracle_quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// ---- files ------------------------------------------------------------------

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("qers-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

} // namespace qers::test
