#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "qers/model.hpp"
#include "qers/scoring.hpp"

namespace qers {

struct MeanMedian {
    double mean = 0.0;
    double median = 0.0;
};

struct AlgorithmAggregate {
    Algorithm algorithm = Algorithm::Kyber;
    std::size_t count = 0;
    MeanMedian basic;
    MeanMedian tuned;
    MeanMedian fusion;
    Readiness readiness = Readiness::Unusable; // of mean fusion
    double ml_fusion = 0.0;                    // mean ML estimate
    double ml_lo = 0.0;                        // mean interval bounds
    double ml_hi = 0.0;
};

// One entry per algorithm present, in catalog order.
std::vector<AlgorithmAggregate> aggregate_scores(std::span<const ScoredSample> rows, double ms = kDefaultScale);

struct FiveNumber {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

FiveNumber five_number(std::vector<double> values);

struct Heatmap {
    std::vector<Algorithm> algorithms;
    std::vector<Criterion> criteria;           // the eight measured criteria
    std::vector<std::vector<double>> matrix;   // mean normalized value, algorithm x criterion
    std::vector<std::vector<double>> scores;   // mean basic, tuned, fusion per algorithm
    std::vector<std::size_t> counts;
};

// Normalized against `bounds`, which should come from the whole window even
// when `rows` is a filtered subset.
Heatmap heatmap(std::span<const ScoredSample> rows, const NormalizationBounds& bounds, double ms = kDefaultScale);

struct DistributionEntry {
    Algorithm algorithm;
    std::size_t count;
    FiveNumber basic;
    FiveNumber tuned;
    FiveNumber fusion;
};

std::vector<DistributionEntry> distribution(std::span<const ScoredSample> rows);

struct ScatterPoint {
    Algorithm algorithm;
    std::size_t count;
    double latency_ms; // median
    double fusion;     // median
};

std::vector<ScatterPoint> scatter(std::span<const ScoredSample> rows);

nlohmann::json to_json(const std::vector<AlgorithmAggregate>& aggregates);
nlohmann::json to_json(const Heatmap& h, double ms = kDefaultScale);
nlohmann::json to_json(const std::vector<DistributionEntry>& d);
nlohmann::json to_json(const std::vector<ScatterPoint>& s);

// Pairs samples with records produced for them.
std::vector<ScoredSample> zip_scores(std::span<const MetricSample> samples, std::vector<ScoreRecord> records);

} // namespace qers
