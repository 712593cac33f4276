#pragma once

// Linear-scan reference for SampleLog::query.

#include <algorithm>
#include <vector>

#include "qers/store.hpp"
#include "support.hpp"

namespace qers::test {

inline std::vector<RecordId> ids_of(const std::vector<StoredSample>& rows) {
    std::vector<RecordId> out;
    for (const auto& r : rows) out.push_back(r.id);
    return out;
}

// Reference query: filter every record, order by (timestamp, id), then limit.
inline std::vector<RecordId> linear_query(const std::vector<MetricSample>& all, const WindowQuery& q) {
    std::vector<std::pair<std::int64_t, RecordId>> hits;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto& s = all[i];
        const RecordId id = i + 1;
        if (q.algorithm && s.algorithm != *q.algorithm) continue;
        if (q.scenario && s.scenario != *q.scenario) continue;
        if (q.from_ms && s.timestamp_ms < *q.from_ms) continue;
        if (q.to_ms && s.timestamp_ms >= *q.to_ms) continue;
        if (q.max_id && id > *q.max_id) continue;
        hits.emplace_back(s.timestamp_ms, id);
    }
    std::sort(hits.begin(), hits.end());
    if (q.limit != 0 && hits.size() > q.limit) {
        if (q.newest) {
            hits.erase(hits.begin(), hits.end() - static_cast<std::ptrdiff_t>(q.limit));
        } else {
            hits.resize(q.limit);
        }
    }
    std::vector<RecordId> out;
    for (const auto& h : hits) out.push_back(h.second);
    return out;
}

inline WindowQuery random_query(test::Gen& g, std::int64_t lo, std::int64_t hi, std::size_t n) {
    WindowQuery q;
    if (g.coin()) q.algorithm = g.pick(kAllAlgorithms);
    if (g.coin()) q.scenario = g.pick(kAllScenarios);
    if (g.coin()) q.from_ms = g.integer(lo - 10, hi);
    if (g.coin()) q.to_ms = g.integer(q.from_ms.value_or(lo), hi + 10);
    if (g.coin()) q.limit = static_cast<std::size_t>(g.integer(1, 200));
    q.newest = g.coin();
    if (g.coin(0.3)) q.max_id = static_cast<RecordId>(g.integer(0, static_cast<std::int64_t>(n)));
    return q;
}

} // namespace qers::test
