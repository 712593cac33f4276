#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "qers/model.hpp"

namespace qers {

using RecordId = std::uint64_t;

struct StoredSample {
    RecordId id = 0;
    MetricSample sample;
};

struct WindowQuery {
    std::optional<Algorithm> algorithm;
    std::optional<Scenario> scenario;
    std::optional<std::int64_t> from_ms; // inclusive
    std::optional<std::int64_t> to_ms;   // exclusive
    std::size_t limit = 0;               // 0 = no limit
    bool newest = false;                 // with a limit, keep the most recent records
    std::optional<RecordId> max_id;      // snapshot bound

    bool matches(const MetricSample& s) const noexcept;
};

// Append-only sample log. Ids start at 1 and increase by one per append.
// With a path the log is a CSV file in the sample wire format; records are
// flushed on every append and the in-memory index is rebuilt on open.
// Single writer, many readers: queries see whole records only.
class SampleLog {
public:
    SampleLog() = default;
    explicit SampleLog(std::filesystem::path path);

    SampleLog(const SampleLog&) = delete;
    SampleLog& operator=(const SampleLog&) = delete;

    // ValidationError on invariant violations, including a timestamp older
    // than the previous record of the same (device, scenario) stream.
    RecordId append(const MetricSample& sample);

    // Matching records ordered by (timestamp, id).
    std::vector<StoredSample> query(const WindowQuery& q) const;
    std::vector<MetricSample> query_window(const WindowQuery& q) const;

    std::vector<StoredSample> all() const;
    std::size_t size() const;
    MetricSample at(RecordId id) const;
    const std::optional<std::filesystem::path>& path() const noexcept { return path_; }

private:
    using GroupKey = std::pair<Algorithm, Scenario>;
    using StreamKey = std::pair<std::string, Scenario>;

    void check_stream_order(const MetricSample& s) const;
    void index(RecordId id, const MetricSample& s);

    std::optional<std::filesystem::path> path_;
    std::ofstream file_;
    mutable std::shared_mutex mutex_;
    std::vector<MetricSample> records_;                                          // id - 1
    std::map<GroupKey, std::vector<std::pair<std::int64_t, RecordId>>> groups_; // sorted by (ts, id)
    std::map<StreamKey, std::int64_t> last_ts_;
};

// Score rows kept alongside the sample log, one per record id. Persisted as
// a score-export CSV next to the sample file.
class ScoreLog {
public:
    ScoreLog() = default;
    explicit ScoreLog(std::filesystem::path path);

    ScoreLog(const ScoreLog&) = delete;
    ScoreLog& operator=(const ScoreLog&) = delete;

    // Row ids must continue the sequence (size() + 1).
    void append(const ScoredSample& row);
    std::size_t size() const;
    std::vector<ScoredSample> rows(const std::vector<RecordId>& ids) const;
    std::vector<ScoredSample> all() const;

private:
    std::optional<std::filesystem::path> path_;
    std::ofstream file_;
    mutable std::shared_mutex mutex_;
    std::vector<ScoredSample> rows_;
};

std::filesystem::path score_log_path(const std::filesystem::path& sample_path);

} // namespace qers
