#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qers/config.hpp"
#include "qers/forest.hpp"
#include "qers/model.hpp"
#include "qers/scoring.hpp"
#include "qers/store.hpp"

namespace qers {

// Carries the HTTP status the transport layer should answer with.
class HttpError : public std::runtime_error {
public:
    HttpError(int status, const std::string& message) : std::runtime_error(message), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

struct StreamEvent {
    RecordId id = 0;
    std::string data; // JSON
};

// Fan-out of score events. Each subscriber has its own queue, so a slow
// reader never blocks ingestion or other readers. No replay: a subscriber
// sees only events published after it subscribed.
class EventHub {
public:
    class Subscription {
    public:
        // Waits up to `timeout`; nullopt on timeout or once closed and drained.
        std::optional<StreamEvent> next(std::chrono::milliseconds timeout);
        bool closed() const;

    private:
        friend class EventHub;
        mutable std::mutex mutex_;
        std::condition_variable cv_;
        std::deque<StreamEvent> queue_;
        bool closed_ = false;
    };

    std::shared_ptr<Subscription> subscribe();
    void unsubscribe(const std::shared_ptr<Subscription>& sub);
    void publish(const StreamEvent& event);
    void close_all();
    std::size_t subscribers() const;

private:
    mutable std::mutex mutex_;
    std::vector<std::shared_ptr<Subscription>> subs_;
};

struct RejectedRow {
    std::size_t line = 0; // 1-based data row
    std::string reason;
};

struct IngestResult {
    std::size_t accepted = 0;
    std::vector<RejectedRow> rejected;
    std::vector<RecordId> ids;
};

nlohmann::json to_json(const IngestResult& r);

// Row selection shared by the read endpoints.
struct ReadQuery {
    std::optional<Algorithm> algorithm;
    std::optional<Scenario> scenario;
    std::optional<std::size_t> window; // last N per scenario; all records when absent
    bool recompute = false;            // reports only
};

// Transport-independent service state. Thread-safe; ingestion is serialized,
// reads work on a snapshot bounded by the last fully scored record.
class QersService {
public:
    explicit QersService(QersConfig config);

    // Body is CSV (with header) or JSON (one object, an array, or
    // {"samples": [...]}); detected from content type or first character.
    IngestResult ingest(std::string_view body, std::string_view content_type = {});
    IngestResult ingest_samples(const std::vector<MetricSample>& samples);

    nlohmann::json scores(const ReadQuery& q) const;
    nlohmann::json preview(const nlohmann::json& body) const;
    nlohmann::json presets() const;
    nlohmann::json set_active(const nlohmann::json& body);
    nlohmann::json add_preset(const nlohmann::json& body);
    nlohmann::json heatmap(const ReadQuery& q) const;
    nlohmann::json distribution(const ReadQuery& q) const;
    nlohmann::json scatter(const ReadQuery& q) const;
    nlohmann::json health() const;

    std::string export_samples_csv() const;
    std::string export_scores_csv(bool recompute) const;

    EventHub& events() noexcept { return events_; }
    const QersConfig& config() const noexcept { return config_; }
    PresetTriple active_triple() const;
    std::size_t size() const noexcept { return published_.load(); }

    // Parses query-string style values; HttpError(400) on unknown names.
    static ReadQuery parse_query(const std::optional<std::string>& algorithm,
                                 const std::optional<std::string>& scenario,
                                 const std::optional<std::string>& window,
                                 const std::optional<std::string>& recompute);

private:
    struct Snapshot {
        std::vector<StoredSample> norm_window; // bounds source
        std::vector<StoredSample> rows;        // aggregation set after filters
    };

    Snapshot snapshot(const ReadQuery& q) const;
    std::vector<StoredSample> normalization_window(RecordId max_id) const;
    std::vector<ScoredSample> rescore(const Snapshot& snap, const PresetTriple& presets,
                                      const ProfileCatalog& profiles) const;
    std::vector<ScoredSample> report_rows(const Snapshot& snap, bool recompute) const;
    NormalizationBounds bounds_of(const Snapshot& snap) const;
    PipelineOptions options() const;
    std::string event_json(RecordId id, const ScoredSample& row) const;
    void score_backlog();

    QersConfig config_;
    std::unique_ptr<ForestModel> model_;
    std::unique_ptr<SampleLog> samples_;
    std::unique_ptr<ScoreLog> scores_;
    SmootherBank smoothers_;
    EventHub events_;

    std::mutex ingest_mutex_;
    mutable std::shared_mutex preset_mutex_;
    std::vector<WeightPreset> presets_; // built-ins first, then customs
    ActivePresets active_;
    std::atomic<RecordId> published_{0};
};

} // namespace qers
