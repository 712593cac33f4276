#include "qers/model.hpp"

#include <cmath>

#include "qers/errors.hpp"
#include "qers/simulator.hpp"

namespace qers {

namespace {

void require_finite(double v, const char* field) {
    if (!std::isfinite(v)) {
        throw ValidationError(field, "not a finite number");
    }
}

void require_non_negative(double v, const char* field) {
    require_finite(v, field);
    if (v < 0.0) {
        throw ValidationError(field, "must be >= 0");
    }
}

void require_percent(double v, const char* field) {
    require_finite(v, field);
    if (v < 0.0 || v > 100.0) {
        throw ValidationError(field, "must be within [0,100]");
    }
}

void require_weight(double v, const std::string& field) {
    if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError(field, "weight must be finite and >= 0");
    }
}

bool near_one(double sum) { return std::abs(sum - 1.0) <= kWeightSumTolerance; }

} // namespace

std::string_view to_string(Algorithm a) noexcept {
    switch (a) {
    case Algorithm::Kyber: return "kyber";
    case Algorithm::Dilithium: return "dilithium";
    case Algorithm::Falcon: return "falcon";
    case Algorithm::SphincsPlus: return "sphincsplus";
    case Algorithm::Ntru: return "ntru";
    }
    return "?";
}

std::string_view display_name(Algorithm a) noexcept {
    switch (a) {
    case Algorithm::Kyber: return "Kyber";
    case Algorithm::Dilithium: return "Dilithium";
    case Algorithm::Falcon: return "Falcon";
    case Algorithm::SphincsPlus: return "SPHINCS+";
    case Algorithm::Ntru: return "NTRU";
    }
    return "?";
}

std::string_view to_string(Scenario s) noexcept { return s == Scenario::Near ? "near" : "far"; }

std::optional<Algorithm> parse_algorithm(std::string_view text) noexcept {
    for (Algorithm a : kAllAlgorithms) {
        if (text == to_string(a)) return a;
    }
    return std::nullopt;
}

std::optional<Scenario> parse_scenario(std::string_view text) noexcept {
    if (text == "near") return Scenario::Near;
    if (text == "far") return Scenario::Far;
    return std::nullopt;
}

std::string_view criterion_id(Criterion c) noexcept {
    switch (c) {
    case Criterion::Latency: return "L";
    case Criterion::Jitter: return "J";
    case Criterion::PacketLoss: return "P_loss";
    case Criterion::Overhead: return "O";
    case Criterion::Cpu: return "C";
    case Criterion::Rssi: return "R";
    case Criterion::Energy: return "E";
    case Criterion::KeyBytes: return "K";
    case Criterion::Robustness: return "Rb";
    case Criterion::ProvenResistance: return "P_r";
    case Criterion::CryptoOverhead: return "Co";
    }
    return "?";
}

std::optional<Criterion> parse_criterion(std::string_view id) noexcept {
    for (std::size_t i = 0; i < kCriterionCount; ++i) {
        auto c = static_cast<Criterion>(i);
        if (criterion_id(c) == id) return c;
    }
    return std::nullopt;
}

void validate(const MetricSample& s) {
    if (s.timestamp_ms <= 0) throw ValidationError("ts_ms", "must be > 0");
    if (s.device_id.empty()) throw ValidationError("device_id", "must not be empty");
    if (s.device_id.find_first_of(",\"\r\n") != std::string::npos) {
        throw ValidationError("device_id", "must not contain ',', '\"' or line breaks");
    }
    require_non_negative(s.latency_ms, "latency_ms");
    require_non_negative(s.jitter_ms, "jitter_ms");
    require_percent(s.packet_loss_pct, "packet_loss_pct");
    require_non_negative(s.overhead_ms, "overhead_ms");
    require_percent(s.cpu_pct, "cpu_pct");
    require_finite(s.rssi_dbm, "rssi_dbm");
    require_non_negative(s.energy_mj, "energy_mj");
    if (s.key_bytes < 1) throw ValidationError("key_bytes", "must be >= 1");
}

double raw_value(const MetricSample& s, Criterion c) {
    switch (c) {
    case Criterion::Latency: return s.latency_ms;
    case Criterion::Jitter: return s.jitter_ms;
    case Criterion::PacketLoss: return s.packet_loss_pct;
    case Criterion::Overhead: return s.overhead_ms;
    case Criterion::Cpu: return s.cpu_pct;
    case Criterion::Rssi: return s.rssi_dbm;
    case Criterion::Energy: return s.energy_mj;
    case Criterion::KeyBytes: return static_cast<double>(s.key_bytes);
    default: break;
    }
    throw MissingCriterion(std::string(criterion_id(c)));
}

double AlgorithmProfile::rating(Criterion c) const {
    switch (c) {
    case Criterion::Robustness: return robustness;
    case Criterion::ProvenResistance: return proven_resistance;
    case Criterion::CryptoOverhead: return crypto_overhead;
    default: break;
    }
    throw MissingCriterion(std::string(criterion_id(c)));
}

void validate(const AlgorithmProfile& p) {
    auto check_range = [](const ByteRange& r, const char* field) {
        if (r.min < 1 || r.max < r.min) throw ValidationError(field, "range must satisfy 1 <= min <= max");
    };
    check_range(p.key_bytes, "key_bytes");
    check_range(p.payload_bytes, "payload_bytes");
    require_percent(p.robustness, "robustness");
    require_percent(p.proven_resistance, "proven_resistance");
    require_percent(p.crypto_overhead, "crypto_overhead");
    for (const auto* d : {&p.sim_cost.latency_ms, &p.sim_cost.jitter_ms, &p.sim_cost.overhead_ms,
                          &p.sim_cost.cpu_pct, &p.sim_cost.energy_mj}) {
        require_non_negative(d->mean, "sim_cost.mean");
        require_non_negative(d->stddev, "sim_cost.std");
    }
}

const AlgorithmProfile& profile_for(const ProfileCatalog& catalog, Algorithm a) {
    auto it = catalog.find(a);
    if (it == catalog.end()) {
        throw ValidationError("algorithm", "no profile for " + std::string(to_string(a)));
    }
    return it->second;
}

const Bounds& NormalizationBounds::at(Criterion c) const {
    auto it = criteria.find(c);
    if (it == criteria.end()) throw MissingCriterion(std::string(criterion_id(c)));
    return it->second;
}

std::string_view to_string(PresetKind k) noexcept {
    switch (k) {
    case PresetKind::Basic: return "basic";
    case PresetKind::Tuned: return "tuned";
    case PresetKind::Fusion: return "fusion";
    }
    return "?";
}

std::optional<PresetKind> parse_preset_kind(std::string_view text) noexcept {
    if (text == "basic") return PresetKind::Basic;
    if (text == "tuned") return PresetKind::Tuned;
    if (text == "fusion") return PresetKind::Fusion;
    return std::nullopt;
}

void validate(const WeightPreset& p) {
    if (p.name.empty()) throw ValidationError("name", "must not be empty");
    if (p.name.find_first_of(",/\"\r\n") != std::string::npos) {
        throw ValidationError("name", "must not contain ',', '/', '\"' or line breaks");
    }
    const auto& w = p.linear;
    require_weight(w.alpha, "alpha");
    require_weight(w.beta, "beta");
    require_weight(w.gamma, "gamma");
    require_weight(w.delta, "delta");
    require_weight(w.epsilon, "epsilon");
    require_weight(w.zeta, "zeta");
    require_weight(w.eta, "eta");
    if (p.kind != PresetKind::Fusion) return;

    const auto& f = p.fusion;
    require_weight(f.latency, "performance.L");
    require_weight(f.jitter, "performance.J");
    require_weight(f.packet_loss, "performance.P_loss");
    require_weight(f.energy, "performance.E");
    require_weight(f.cpu, "performance.C");
    require_weight(f.key_size, "security.K");
    require_weight(f.robustness, "security.Rb");
    require_weight(f.proven_resistance, "security.P_r");
    require_weight(f.crypto_overhead, "security.Co");
    require_weight(f.mix_performance, "alpha");
    require_weight(f.mix_security, "beta");
    if (!near_one(f.performance_sum())) {
        throw ValidationError("performance", "weights must sum to 1 (got " + std::to_string(f.performance_sum()) + ")");
    }
    if (!near_one(f.security_sum())) {
        throw ValidationError("security", "weights must sum to 1 (got " + std::to_string(f.security_sum()) + ")");
    }
    if (!near_one(f.mix_performance + f.mix_security)) {
        throw ValidationError("alpha+beta", "mix coefficients must sum to 1");
    }
}

std::vector<WeightPreset> builtin_presets() {
    auto basic = [](const char* name, double a, double b, double g) {
        WeightPreset p;
        p.name = name;
        p.kind = PresetKind::Basic;
        p.linear = {a, b, g, 0.0, 0.0, 0.0, 0.0};
        return p;
    };
    auto tuned = [](const char* name, LinearWeights w) {
        WeightPreset p;
        p.name = name;
        p.kind = PresetKind::Tuned;
        p.linear = w;
        return p;
    };

    WeightPreset fusion;
    fusion.name = "Fusion-default";
    fusion.kind = PresetKind::Fusion;
    fusion.fusion.latency = 0.3;
    fusion.fusion.jitter = 0.1;
    fusion.fusion.packet_loss = 0.2;
    fusion.fusion.energy = 0.2;
    fusion.fusion.cpu = 0.2;
    fusion.fusion.key_size = 0.25;
    fusion.fusion.robustness = 0.35;
    fusion.fusion.proven_resistance = 0.25;
    fusion.fusion.crypto_overhead = 0.15;
    fusion.fusion.mix_performance = 0.5;
    fusion.fusion.mix_security = 0.5;

    // order of LinearWeights: alpha(L) beta(O) gamma(P_loss) delta(C) epsilon(R) zeta(E) eta(K)
    return {
        basic("Basic-RT", 0.55, 0.20, 0.15),
        basic("Basic-EC", 0.25, 0.45, 0.20),
        basic("Basic-B", 0.35, 0.30, 0.20),
        tuned("Tuned-RT", {0.55, 0.20, 0.15, 0.05, 0.025, 0.025, 0.05}),
        tuned("Tuned-EC", {0.25, 0.45, 0.20, 0.025, 0.025, 0.05, 0.05}),
        tuned("Tuned-B", {0.35, 0.30, 0.20, 0.05, 0.05, 0.05, 0.05}),
        fusion,
    };
}

std::vector<AlgorithmProfile> builtin_profiles() {
    // Ratings are editable defaults; they are inputs to scoring, not results.
    auto make = [](Algorithm a, ByteRange key, ByteRange payload, double rb, double pr, double co) {
        AlgorithmProfile p;
        p.algorithm = a;
        p.key_bytes = key;
        p.payload_bytes = payload;
        p.robustness = rb;
        p.proven_resistance = pr;
        p.crypto_overhead = co;
        p.sim_cost = sim::default_sim_cost(a);
        return p;
    };
    return {
        make(Algorithm::Kyber, {800, 1500}, {768, 1088}, 40.0, 45.0, 10.0),
        make(Algorithm::Dilithium, {1312, 2544}, {2420, 3500}, 75.0, 70.0, 65.0),
        make(Algorithm::Falcon, {897, 1280}, {690, 1024}, 65.0, 55.0, 45.0),
        make(Algorithm::SphincsPlus, {32, 64}, {8000, 16000}, 70.0, 95.0, 85.0),
        make(Algorithm::Ntru, {1138, 1420}, {1138, 1420}, 90.0, 65.0, 50.0),
    };
}

ProfileCatalog builtin_profile_catalog() {
    ProfileCatalog catalog;
    for (auto& p : builtin_profiles()) catalog.emplace(p.algorithm, std::move(p));
    return catalog;
}

std::string_view to_string(Readiness r) noexcept {
    switch (r) {
    case Readiness::Excellent: return "Excellent";
    case Readiness::Good: return "Good";
    case Readiness::Moderate: return "Moderate";
    case Readiness::Poor: return "Poor";
    case Readiness::Unusable: return "Unusable";
    }
    return "?";
}

std::optional<Readiness> parse_readiness(std::string_view text) noexcept {
    for (auto r : {Readiness::Excellent, Readiness::Good, Readiness::Moderate, Readiness::Poor,
                   Readiness::Unusable}) {
        if (text == to_string(r)) return r;
    }
    return std::nullopt;
}

const std::array<ReadinessBand, 5>& readiness_bands() noexcept {
    static const std::array<ReadinessBand, 5> bands{{
        {Readiness::Excellent, 85.0, 100.0, true},
        {Readiness::Good, 70.0, 85.0, false},
        {Readiness::Moderate, 50.0, 70.0, false},
        {Readiness::Poor, 30.0, 50.0, false},
        {Readiness::Unusable, 0.0, 30.0, false},
    }};
    return bands;
}

} // namespace qers
