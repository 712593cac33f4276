#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qers {

enum class Algorithm { Kyber, Dilithium, Falcon, SphincsPlus, Ntru };
enum class Scenario { Near, Far };

inline constexpr std::array<Algorithm, 5> kAllAlgorithms{
    Algorithm::Kyber, Algorithm::Dilithium, Algorithm::Falcon, Algorithm::SphincsPlus, Algorithm::Ntru};
inline constexpr std::array<Scenario, 2> kAllScenarios{Scenario::Near, Scenario::Far};

// Wire names: kyber|dilithium|falcon|sphincsplus|ntru and near|far.
std::string_view to_string(Algorithm a) noexcept;
std::string_view to_string(Scenario s) noexcept;
std::string_view display_name(Algorithm a) noexcept;
std::optional<Algorithm> parse_algorithm(std::string_view text) noexcept;
std::optional<Scenario> parse_scenario(std::string_view text) noexcept;

// Criterion catalog. The first eight are measured per sample; the last three
// are per-algorithm security ratings taken from the AlgorithmProfile.
enum class Criterion {
    Latency,
    Jitter,
    PacketLoss,
    Overhead,
    Cpu,
    Rssi,
    Energy,
    KeyBytes,
    Robustness,
    ProvenResistance,
    CryptoOverhead,
};

inline constexpr std::size_t kCriterionCount = 11;

inline constexpr std::array<Criterion, 8> kMeasuredCriteria{
    Criterion::Latency, Criterion::Jitter, Criterion::PacketLoss, Criterion::Overhead,
    Criterion::Cpu,     Criterion::Rssi,   Criterion::Energy,     Criterion::KeyBytes};

inline constexpr std::array<Criterion, 3> kRatingCriteria{
    Criterion::Robustness, Criterion::ProvenResistance, Criterion::CryptoOverhead};

// Symbol ids: L, J, P_loss, O, C, R, E, K, Rb, P_r, Co.
std::string_view criterion_id(Criterion c) noexcept;
std::optional<Criterion> parse_criterion(std::string_view id) noexcept;

inline constexpr std::size_t index_of(Criterion c) noexcept { return static_cast<std::size_t>(c); }

enum class Direction { Cost, Benefit };

struct MetricSample {
    std::int64_t timestamp_ms = 1;
    std::string device_id;
    Algorithm algorithm = Algorithm::Kyber;
    Scenario scenario = Scenario::Near;
    double latency_ms = 0.0;
    double jitter_ms = 0.0;
    double packet_loss_pct = 0.0;
    double overhead_ms = 0.0;
    double cpu_pct = 0.0;
    double rssi_dbm = 0.0;
    double energy_mj = 0.0;
    std::int64_t key_bytes = 1;

    bool operator==(const MetricSample&) const = default;
};

// Throws ValidationError naming the first offending field (wire-format name).
void validate(const MetricSample& sample);

// Raw value of a measured criterion. Rating criteria are not carried by the
// sample and raise MissingCriterion.
double raw_value(const MetricSample& sample, Criterion c);

struct ByteRange {
    std::int64_t min = 1;
    std::int64_t max = 1;

    bool operator==(const ByteRange&) const = default;
};

struct CostDistribution {
    double mean = 0.0;
    double stddev = 0.0;

    bool operator==(const CostDistribution&) const = default;
};

// Simulator draw parameters for one algorithm, Near-scenario baseline.
struct SimCost {
    CostDistribution latency_ms;
    CostDistribution jitter_ms;
    CostDistribution overhead_ms;
    CostDistribution cpu_pct;
    CostDistribution energy_mj;

    bool operator==(const SimCost&) const = default;
};

struct AlgorithmProfile {
    Algorithm algorithm = Algorithm::Kyber;
    ByteRange key_bytes;
    ByteRange payload_bytes;
    double robustness = 0.0;        // Rb, 0-100
    double proven_resistance = 0.0; // P_r, 0-100
    double crypto_overhead = 0.0;   // Co, 0-100
    SimCost sim_cost;

    double rating(Criterion c) const;

    bool operator==(const AlgorithmProfile&) const = default;
};

void validate(const AlgorithmProfile& profile);

using ProfileCatalog = std::map<Algorithm, AlgorithmProfile>;

const AlgorithmProfile& profile_for(const ProfileCatalog& catalog, Algorithm a);

struct Bounds {
    double min = 0.0;
    double max = 0.0;

    bool operator==(const Bounds&) const = default;
};

enum class BoundsSource { DatasetWindow, Configured };

struct NormalizationBounds {
    std::map<Criterion, Bounds> criteria;
    BoundsSource source = BoundsSource::DatasetWindow;

    const Bounds& at(Criterion c) const;
};

enum class PresetKind { Basic, Tuned, Fusion };

std::string_view to_string(PresetKind k) noexcept;
std::optional<PresetKind> parse_preset_kind(std::string_view text) noexcept;

// alpha..eta, keyed to L, O, P_loss, C, R, E, K. Basic presets only use the
// first three.
struct LinearWeights {
    double alpha = 0.0;   // L
    double beta = 0.0;    // O
    double gamma = 0.0;   // P_loss
    double delta = 0.0;   // C
    double epsilon = 0.0; // R (benefit)
    double zeta = 0.0;    // E
    double eta = 0.0;     // K

    bool operator==(const LinearWeights&) const = default;
};

struct FusionWeights {
    // performance subscore P
    double latency = 0.0;
    double jitter = 0.0;
    double packet_loss = 0.0;
    double energy = 0.0;
    double cpu = 0.0;
    // security subscore S
    double key_size = 0.0;
    double robustness = 0.0;
    double proven_resistance = 0.0;
    double crypto_overhead = 0.0;
    // QERS_fusion = mix_performance * (MS - P) + mix_security * S
    double mix_performance = 0.5;
    double mix_security = 0.5;
    Direction crypto_overhead_direction = Direction::Benefit;

    double performance_sum() const noexcept { return latency + jitter + packet_loss + energy + cpu; }
    double security_sum() const noexcept {
        return key_size + robustness + proven_resistance + crypto_overhead;
    }

    bool operator==(const FusionWeights&) const = default;
};

struct WeightPreset {
    std::string name;
    PresetKind kind = PresetKind::Basic;
    LinearWeights linear;
    FusionWeights fusion;

    bool operator==(const WeightPreset&) const = default;
};

inline constexpr double kWeightSumTolerance = 1e-9;

// Fusion sums must be 1 within kWeightSumTolerance; every weight must be
// finite and non-negative; names must be non-empty and free of ',', '/',
// and newlines. Basic/Tuned sums are deliberately not constrained.
void validate(const WeightPreset& preset);

std::vector<WeightPreset> builtin_presets();
std::vector<AlgorithmProfile> builtin_profiles();
ProfileCatalog builtin_profile_catalog();

enum class Readiness { Excellent, Good, Moderate, Poor, Unusable };

std::string_view to_string(Readiness r) noexcept;
std::optional<Readiness> parse_readiness(std::string_view text) noexcept;

struct ReadinessBand {
    Readiness label;
    double lower;         // inclusive
    double upper;         // exclusive, except the top band which includes 100
    bool upper_inclusive;
};

const std::array<ReadinessBand, 5>& readiness_bands() noexcept;

struct ScoreRecord {
    std::uint64_t record_id = 0;
    double basic = 0.0;
    double tuned = 0.0;
    double fusion = 0.0;
    Readiness readiness = Readiness::Unusable;
    double smoothed_fusion = 0.0;
    double ml_fusion = 0.0;
    double ml_lo = 0.0;
    double ml_hi = 0.0;
    std::string preset;

    bool operator==(const ScoreRecord&) const = default;
};

struct ScoredSample {
    MetricSample sample;
    ScoreRecord score;

    bool operator==(const ScoredSample&) const = default;
};

} // namespace qers
