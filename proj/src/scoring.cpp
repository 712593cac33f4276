#include "qers/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qers/errors.hpp"
#include "qers/forest.hpp"

namespace qers {

namespace {

double clamp_score(double value, double ms) { return std::clamp(value, 0.0, ms); }

void require_kind(const WeightPreset& preset, PresetKind kind) {
    if (preset.kind != kind) {
        throw ValidationError("kind", "preset " + preset.name + " is " + std::string(to_string(preset.kind)) +
                                          ", expected " + std::string(to_string(kind)));
    }
}

} // namespace

NormalizationBounds derive_bounds(std::span<const MetricSample> samples) {
    if (samples.empty()) throw EmptyDataset("cannot derive bounds from an empty window");

    NormalizationBounds bounds;
    bounds.source = BoundsSource::DatasetWindow;
    for (Criterion c : kMeasuredCriteria) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto& s : samples) {
            const double v = raw_value(s, c);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        bounds.criteria[c] = {lo, hi};
    }
    for (Criterion c : kRatingCriteria) bounds.criteria[c] = kRatingScale;
    return bounds;
}

double normalize(double value, Bounds bounds, double ms) {
    if (!(bounds.min <= bounds.max)) {
        throw InvalidBounds("x_min > x_max (" + std::to_string(bounds.min) + " > " + std::to_string(bounds.max) + ")");
    }
    if (!(ms > 0.0)) throw InvalidBounds("maximum scale must be > 0");
    if (bounds.max == bounds.min) return ms / 2.0;
    const double scaled = ms * (value - bounds.min) / (bounds.max - bounds.min);
    return std::clamp(scaled, 0.0, ms);
}

double NormalizedVector::at(Criterion c) const {
    const auto& v = values_[index_of(c)];
    if (!v) throw MissingCriterion(std::string(criterion_id(c)));
    return *v;
}

void NormalizedVector::set(Criterion c, double value) { values_[index_of(c)] = value; }

NormalizedVector normalize_sample(const MetricSample& sample, const AlgorithmProfile& profile,
                                  const NormalizationBounds& bounds, double ms) {
    NormalizedVector out(ms);
    for (Criterion c : kMeasuredCriteria) out.set(c, normalize(raw_value(sample, c), bounds.at(c), ms));
    for (Criterion c : kRatingCriteria) out.set(c, normalize(profile.rating(c), bounds.at(c), ms));
    return out;
}

double score_basic(const NormalizedVector& norm, const WeightPreset& preset) {
    require_kind(preset, PresetKind::Basic);
    const auto& w = preset.linear;
    const double penalty = w.alpha * norm.at(Criterion::Latency) + w.beta * norm.at(Criterion::Overhead) +
                           w.gamma * norm.at(Criterion::PacketLoss);
    return clamp_score(norm.ms() - penalty, norm.ms());
}

double score_tuned(const NormalizedVector& norm, const WeightPreset& preset) {
    require_kind(preset, PresetKind::Tuned);
    const auto& w = preset.linear;
    const double penalty = w.alpha * norm.at(Criterion::Latency) + w.beta * norm.at(Criterion::Overhead) +
                           w.gamma * norm.at(Criterion::PacketLoss) + w.delta * norm.at(Criterion::Cpu) +
                           w.zeta * norm.at(Criterion::Energy) + w.eta * norm.at(Criterion::KeyBytes);
    const double bonus = w.epsilon * norm.at(Criterion::Rssi);
    return clamp_score(norm.ms() - penalty + bonus, norm.ms());
}

FusionScore score_fusion(const NormalizedVector& perf, const NormalizedVector& sec, const WeightPreset& preset) {
    require_kind(preset, PresetKind::Fusion);
    const auto& w = preset.fusion;
    const double ms = perf.ms();

    FusionScore out;
    out.performance = w.latency * perf.at(Criterion::Latency) + w.jitter * perf.at(Criterion::Jitter) +
                      w.packet_loss * perf.at(Criterion::PacketLoss) + w.energy * perf.at(Criterion::Energy) +
                      w.cpu * perf.at(Criterion::Cpu);

    double co = sec.at(Criterion::CryptoOverhead);
    if (w.crypto_overhead_direction == Direction::Cost) co = sec.ms() - co;
    out.security = w.key_size * sec.at(Criterion::KeyBytes) + w.robustness * sec.at(Criterion::Robustness) +
                   w.proven_resistance * sec.at(Criterion::ProvenResistance) + w.crypto_overhead * co;

    out.fusion = clamp_score(w.mix_performance * (ms - out.performance) + w.mix_security * out.security, ms);
    return out;
}

Readiness classify(double score) {
    if (!(score >= 0.0 && score <= 100.0)) {
        throw OutOfRange("score " + std::to_string(score) + " outside [0,100]");
    }
    for (const auto& band : readiness_bands()) {
        if (score >= band.lower && (score < band.upper || (band.upper_inclusive && score <= band.upper))) {
            return band.label;
        }
    }
    return Readiness::Unusable; // unreachable: bands cover [0,100]
}

SmoothingState::SmoothingState(double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw ValidationError("lambda", "must be within (0,1]");
}

std::pair<SmoothingState, double> smooth_step(const SmoothingState& state, double observation) {
    SmoothingState next = state;
    if (!state.current_) {
        next.current_ = observation;
    } else {
        next.current_ = state.lambda_ * observation + (1.0 - state.lambda_) * *state.current_;
    }
    return {next, *next.current_};
}

std::string PresetTriple::label() const { return basic.name + "/" + tuned.name + "/" + fusion.name; }

PresetTriple default_preset_triple() {
    PresetTriple triple;
    for (auto& p : builtin_presets()) {
        if (p.name == "Basic-B") triple.basic = p;
        if (p.name == "Tuned-B") triple.tuned = p;
        if (p.name == "Fusion-default") triple.fusion = p;
    }
    return triple;
}

double SmootherBank::observe(const MetricSample& sample, double value) {
    Key key{sample.device_id, sample.algorithm, sample.scenario};
    auto it = states_.try_emplace(std::move(key), lambda_).first;
    auto [next, smoothed] = smooth_step(it->second, value);
    it->second = next;
    return smoothed;
}

std::vector<ScoreRecord> score_samples(std::span<const MetricSample> samples, const NormalizationBounds& bounds,
                                       const PresetTriple& presets, const ProfileCatalog& profiles,
                                       SmootherBank& smoothers, const PipelineOptions& options) {
    std::vector<ScoreRecord> out;
    out.reserve(samples.size());
    const std::string label = presets.label();
    for (const auto& sample : samples) {
        const auto& profile = profile_for(profiles, sample.algorithm);
        const auto norm = normalize_sample(sample, profile, bounds, options.ms);

        ScoreRecord rec;
        rec.basic = score_basic(norm, presets.basic);
        rec.tuned = score_tuned(norm, presets.tuned);
        rec.fusion = score_fusion(norm, norm, presets.fusion).fusion;
        rec.readiness = classify(rec.fusion * 100.0 / options.ms);
        rec.smoothed_fusion = smoothers.observe(sample, rec.fusion);
        if (options.model != nullptr) {
            const auto row = ml_features(sample, profile);
            rec.ml_fusion = options.model->predict_row(row);
            std::tie(rec.ml_lo, rec.ml_hi) = options.model->interval_row(row, options.interval_coverage);
        } else {
            rec.ml_fusion = rec.ml_lo = rec.ml_hi = rec.fusion;
        }
        rec.preset = label;
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<ScoreRecord> score_pipeline(std::span<const MetricSample> window, const PresetTriple& presets,
                                        const ProfileCatalog& profiles, const PipelineOptions& options) {
    const auto bounds = derive_bounds(window);
    SmootherBank smoothers(options.lambda);
    return score_samples(window, bounds, presets, profiles, smoothers, options);
}

} // namespace qers
