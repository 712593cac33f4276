#include "qers/report.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "qers/errors.hpp"
#include "qers/forest.hpp"

namespace qers {

using nlohmann::json;

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, 0.5);
}

MeanMedian mean_median(const std::vector<double>& v) { return {mean_of(v), median_of(v)}; }

std::map<Algorithm, std::vector<const ScoredSample*>> by_algorithm(std::span<const ScoredSample> rows) {
    std::map<Algorithm, std::vector<const ScoredSample*>> out;
    for (const auto& r : rows) out[r.sample.algorithm].push_back(&r);
    return out;
}

template <typename F>
std::vector<double> column(const std::vector<const ScoredSample*>& rows, F f) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto* r : rows) out.push_back(f(*r));
    return out;
}

json five_json(const FiveNumber& f) {
    return {{"min", f.min}, {"q1", f.q1}, {"median", f.median}, {"q3", f.q3}, {"max", f.max}, {"mean", f.mean}};
}

json mm_json(const MeanMedian& m) { return {{"mean", m.mean}, {"median", m.median}}; }

} // namespace

std::vector<AlgorithmAggregate> aggregate_scores(std::span<const ScoredSample> rows, double ms) {
    std::vector<AlgorithmAggregate> out;
    for (const auto& [alg, group] : by_algorithm(rows)) {
        AlgorithmAggregate a;
        a.algorithm = alg;
        a.count = group.size();
        a.basic = mean_median(column(group, [](const ScoredSample& r) { return r.score.basic; }));
        a.tuned = mean_median(column(group, [](const ScoredSample& r) { return r.score.tuned; }));
        a.fusion = mean_median(column(group, [](const ScoredSample& r) { return r.score.fusion; }));
        a.readiness = classify(std::clamp(a.fusion.mean * 100.0 / ms, 0.0, 100.0));
        a.ml_fusion = mean_of(column(group, [](const ScoredSample& r) { return r.score.ml_fusion; }));
        a.ml_lo = mean_of(column(group, [](const ScoredSample& r) { return r.score.ml_lo; }));
        a.ml_hi = mean_of(column(group, [](const ScoredSample& r) { return r.score.ml_hi; }));
        out.push_back(a);
    }
    return out;
}

FiveNumber five_number(std::vector<double> values) {
    if (values.empty()) throw EmptyDataset("five-number summary of no values");
    std::sort(values.begin(), values.end());
    return {values.front(),
            quantile_sorted(values, 0.25),
            quantile_sorted(values, 0.5),
            quantile_sorted(values, 0.75),
            values.back(),
            mean_of(values)};
}

Heatmap heatmap(std::span<const ScoredSample> rows, const NormalizationBounds& bounds, double ms) {
    if (rows.empty()) throw EmptyDataset("heatmap of an empty window");
    Heatmap h;
    h.criteria.assign(kMeasuredCriteria.begin(), kMeasuredCriteria.end());
    for (const auto& [alg, group] : by_algorithm(rows)) {
        h.algorithms.push_back(alg);
        h.counts.push_back(group.size());
        std::vector<double> cells;
        for (Criterion c : h.criteria) {
            const auto& b = bounds.at(c);
            cells.push_back(mean_of(column(group, [&](const ScoredSample& r) {
                return normalize(raw_value(r.sample, c), b, ms);
            })));
        }
        h.matrix.push_back(std::move(cells));
        h.scores.push_back({mean_of(column(group, [](const ScoredSample& r) { return r.score.basic; })),
                            mean_of(column(group, [](const ScoredSample& r) { return r.score.tuned; })),
                            mean_of(column(group, [](const ScoredSample& r) { return r.score.fusion; }))});
    }
    return h;
}

std::vector<DistributionEntry> distribution(std::span<const ScoredSample> rows) {
    if (rows.empty()) throw EmptyDataset("distribution of an empty window");
    std::vector<DistributionEntry> out;
    for (const auto& [alg, group] : by_algorithm(rows)) {
        out.push_back({alg, group.size(),
                       five_number(column(group, [](const ScoredSample& r) { return r.score.basic; })),
                       five_number(column(group, [](const ScoredSample& r) { return r.score.tuned; })),
                       five_number(column(group, [](const ScoredSample& r) { return r.score.fusion; }))});
    }
    return out;
}

std::vector<ScatterPoint> scatter(std::span<const ScoredSample> rows) {
    if (rows.empty()) throw EmptyDataset("scatter of an empty window");
    std::vector<ScatterPoint> out;
    for (const auto& [alg, group] : by_algorithm(rows)) {
        out.push_back({alg, group.size(),
                       median_of(column(group, [](const ScoredSample& r) { return r.sample.latency_ms; })),
                       median_of(column(group, [](const ScoredSample& r) { return r.score.fusion; }))});
    }
    return out;
}

json to_json(const std::vector<AlgorithmAggregate>& aggregates) {
    json arr = json::array();
    for (const auto& a : aggregates) {
        arr.push_back({{"algorithm", std::string(to_string(a.algorithm))},
                       {"count", a.count},
                       {"qers_basic", mm_json(a.basic)},
                       {"qers_tuned", mm_json(a.tuned)},
                       {"qers_fusion", mm_json(a.fusion)},
                       {"readiness", std::string(to_string(a.readiness))},
                       {"ml_fusion", a.ml_fusion},
                       {"ml_interval", {a.ml_lo, a.ml_hi}}});
    }
    return arr;
}

json to_json(const Heatmap& h, double ms) {
    json algorithms = json::array();
    for (auto a : h.algorithms) algorithms.push_back(std::string(to_string(a)));
    json criteria = json::array();
    for (auto c : h.criteria) criteria.push_back(std::string(criterion_id(c)));
    return {{"scale", ms},
            {"algorithms", algorithms},
            {"criteria", criteria},
            {"matrix", h.matrix},
            {"score_columns", {"qers_basic", "qers_tuned", "qers_fusion"}},
            {"scores", h.scores},
            {"counts", h.counts}};
}

json to_json(const std::vector<DistributionEntry>& d) {
    json arr = json::array();
    for (const auto& e : d) {
        arr.push_back({{"algorithm", std::string(to_string(e.algorithm))},
                       {"count", e.count},
                       {"qers_basic", five_json(e.basic)},
                       {"qers_tuned", five_json(e.tuned)},
                       {"qers_fusion", five_json(e.fusion)}});
    }
    return {{"algorithms", arr}};
}

json to_json(const std::vector<ScatterPoint>& s) {
    json arr = json::array();
    for (const auto& p : s) {
        arr.push_back({{"algorithm", std::string(to_string(p.algorithm))},
                       {"count", p.count},
                       {"latency_ms", p.latency_ms},
                       {"qers_fusion", p.fusion}});
    }
    return {{"points", arr}};
}

std::vector<ScoredSample> zip_scores(std::span<const MetricSample> samples, std::vector<ScoreRecord> records) {
    if (samples.size() != records.size()) throw std::logic_error("zip_scores: size mismatch");
    std::vector<ScoredSample> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) out.push_back({samples[i], std::move(records[i])});
    return out;
}

} // namespace qers
