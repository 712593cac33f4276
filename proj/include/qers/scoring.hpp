#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "qers/model.hpp"

namespace qers {

class ForestModel;

inline constexpr double kDefaultScale = 100.0;
inline constexpr double kDefaultSmoothing = 0.3;

// Ratings live on a fixed 0-100 scale and are normalized against it.
inline constexpr Bounds kRatingScale{0.0, 100.0};

// Per-criterion min/max over the window for every measured criterion, plus
// the rating scale for Rb, P_r and Co. Throws EmptyDataset.
NormalizationBounds derive_bounds(std::span<const MetricSample> samples);

// MS * (value - min) / (max - min), clamped to [0, MS]. Degenerate bounds
// (min == max) give MS / 2. Throws InvalidBounds if min > max or ms <= 0.
double normalize(double value, Bounds bounds, double ms);

class NormalizedVector {
public:
    explicit NormalizedVector(double ms = kDefaultScale) : ms_(ms) {}

    double ms() const noexcept { return ms_; }
    bool has(Criterion c) const noexcept { return values_[index_of(c)].has_value(); }
    double at(Criterion c) const;
    void set(Criterion c, double value);
    void erase(Criterion c) { values_[index_of(c)].reset(); }

private:
    double ms_;
    std::array<std::optional<double>, kCriterionCount> values_{};
};

// All eleven criteria for one sample; ratings come from the profile.
NormalizedVector normalize_sample(const MetricSample& sample, const AlgorithmProfile& profile,
                                  const NormalizationBounds& bounds, double ms = kDefaultScale);

double score_basic(const NormalizedVector& norm, const WeightPreset& preset);
double score_tuned(const NormalizedVector& norm, const WeightPreset& preset);

struct FusionScore {
    double performance = 0.0; // P
    double security = 0.0;    // S
    double fusion = 0.0;
};

FusionScore score_fusion(const NormalizedVector& norm_perf, const NormalizedVector& norm_sec,
                         const WeightPreset& preset);

// Half-open bands; throws OutOfRange outside [0, 100].
Readiness classify(double score);

class SmoothingState {
public:
    explicit SmoothingState(double lambda = kDefaultSmoothing);

    double lambda() const noexcept { return lambda_; }
    std::optional<double> current() const noexcept { return current_; }

private:
    friend std::pair<SmoothingState, double> smooth_step(const SmoothingState&, double);

    double lambda_;
    std::optional<double> current_;
};

std::pair<SmoothingState, double> smooth_step(const SmoothingState& state, double observation);

struct PresetTriple {
    WeightPreset basic;
    WeightPreset tuned;
    WeightPreset fusion;

    // "Basic-B/Tuned-B/Fusion-default"
    std::string label() const;
};

PresetTriple default_preset_triple();

// Exponential smoothing state per (device, algorithm, scenario) stream.
class SmootherBank {
public:
    explicit SmootherBank(double lambda = kDefaultSmoothing) : lambda_(lambda) {}

    double observe(const MetricSample& sample, double value);
    double lambda() const noexcept { return lambda_; }

private:
    using Key = std::tuple<std::string, Algorithm, Scenario>;
    double lambda_;
    std::map<Key, SmoothingState> states_;
};

struct PipelineOptions {
    double ms = kDefaultScale;
    double lambda = kDefaultSmoothing;
    double interval_coverage = 0.9;
    const ForestModel* model = nullptr;
};

// Scores samples against fixed bounds, threading smoothing state through
// `smoothers`. Without a model the ML estimate mirrors the analytic fusion.
std::vector<ScoreRecord> score_samples(std::span<const MetricSample> samples,
                                       const NormalizationBounds& bounds, const PresetTriple& presets,
                                       const ProfileCatalog& profiles, SmootherBank& smoothers,
                                       const PipelineOptions& options = {});

// derive_bounds over the window, then score_samples with fresh smoothers.
std::vector<ScoreRecord> score_pipeline(std::span<const MetricSample> window, const PresetTriple& presets,
                                        const ProfileCatalog& profiles, const PipelineOptions& options = {});

} // namespace qers
