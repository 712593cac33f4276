#include "qers/store.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>

#include "qers/csv.hpp"
#include "qers/errors.hpp"

namespace qers {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::ofstream open_append(const std::filesystem::path& path, std::string_view header, bool write_header) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot open " + path.string() + " for append");
    if (write_header) {
        out << header << '\n';
        out.flush();
        if (!out) throw IoError("write failed for " + path.string());
    }
    return out;
}

bool has_content(const std::filesystem::path& path) {
    std::error_code ec;
    return std::filesystem::exists(path, ec) && std::filesystem::file_size(path, ec) > 0;
}

} // namespace

bool WindowQuery::matches(const MetricSample& s) const noexcept {
    if (algorithm && s.algorithm != *algorithm) return false;
    if (scenario && s.scenario != *scenario) return false;
    if (from_ms && s.timestamp_ms < *from_ms) return false;
    if (to_ms && s.timestamp_ms >= *to_ms) return false;
    return true;
}

SampleLog::SampleLog(std::filesystem::path path) : path_(std::move(path)) {
    const bool existing = has_content(*path_);
    if (existing) {
        std::vector<MetricSample> loaded;
        try {
            loaded = csv::import_csv(read_file(*path_));
        } catch (const DataError& e) {
            throw DataError("corrupt sample log " + path_->string() + ": " + e.what());
        }
        for (auto& s : loaded) {
            const RecordId id = records_.size() + 1;
            index(id, s);
            records_.push_back(std::move(s));
        }
    }
    file_ = open_append(*path_, csv::kSampleHeader, !existing);
}

void SampleLog::check_stream_order(const MetricSample& s) const {
    auto it = last_ts_.find({s.device_id, s.scenario});
    if (it != last_ts_.end() && s.timestamp_ms < it->second) {
        throw ValidationError("ts_ms", "older than the previous sample of device " + s.device_id + " (" +
                                           std::to_string(it->second) + ")");
    }
}

void SampleLog::index(RecordId id, const MetricSample& s) {
    auto& group = groups_[{s.algorithm, s.scenario}];
    const std::pair<std::int64_t, RecordId> key{s.timestamp_ms, id};
    group.insert(std::upper_bound(group.begin(), group.end(), key), key);
    auto& last = last_ts_[{s.device_id, s.scenario}];
    last = std::max(last, s.timestamp_ms);
}

RecordId SampleLog::append(const MetricSample& sample) {
    validate(sample);
    std::unique_lock lock(mutex_);
    check_stream_order(sample);
    if (file_.is_open()) {
        file_ << csv::format_row(sample) << '\n';
        file_.flush();
        if (!file_) throw IoError("append failed for " + path_->string());
    }
    const RecordId id = records_.size() + 1;
    records_.push_back(sample);
    index(id, sample);
    return id;
}

std::vector<StoredSample> SampleLog::query(const WindowQuery& q) const {
    std::shared_lock lock(mutex_);
    std::vector<std::pair<std::int64_t, RecordId>> hits;
    for (const auto& [key, entries] : groups_) {
        if (q.algorithm && key.first != *q.algorithm) continue;
        if (q.scenario && key.second != *q.scenario) continue;
        auto begin = entries.begin();
        auto end = entries.end();
        if (q.from_ms) begin = std::lower_bound(begin, end, std::pair{*q.from_ms, RecordId{0}});
        if (q.to_ms) end = std::lower_bound(begin, end, std::pair{*q.to_ms, RecordId{0}});
        for (auto it = begin; it != end; ++it) {
            if (!q.max_id || it->second <= *q.max_id) hits.push_back(*it);
        }
    }
    std::sort(hits.begin(), hits.end());
    if (q.limit != 0 && hits.size() > q.limit) {
        if (q.newest) {
            hits.erase(hits.begin(), hits.end() - static_cast<std::ptrdiff_t>(q.limit));
        } else {
            hits.resize(q.limit);
        }
    }
    std::vector<StoredSample> out;
    out.reserve(hits.size());
    for (const auto& [ts, id] : hits) out.push_back({id, records_[id - 1]});
    return out;
}

std::vector<MetricSample> SampleLog::query_window(const WindowQuery& q) const {
    auto stored = query(q);
    std::vector<MetricSample> out;
    out.reserve(stored.size());
    for (auto& s : stored) out.push_back(std::move(s.sample));
    return out;
}

std::vector<StoredSample> SampleLog::all() const {
    std::shared_lock lock(mutex_);
    std::vector<StoredSample> out;
    out.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) out.push_back({i + 1, records_[i]});
    return out;
}

std::size_t SampleLog::size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
}

MetricSample SampleLog::at(RecordId id) const {
    std::shared_lock lock(mutex_);
    if (id == 0 || id > records_.size()) throw OutOfRange("no record " + std::to_string(id));
    return records_[id - 1];
}

std::filesystem::path score_log_path(const std::filesystem::path& sample_path) {
    auto p = sample_path;
    p += ".scores.csv";
    return p;
}

ScoreLog::ScoreLog(std::filesystem::path path) : path_(std::move(path)) {
    const bool existing = has_content(*path_);
    if (existing) {
        try {
            rows_ = csv::import_scores_csv(read_file(*path_));
        } catch (const DataError& e) {
            throw DataError("corrupt score log " + path_->string() + ": " + e.what());
        }
        for (std::size_t i = 0; i < rows_.size(); ++i) rows_[i].score.record_id = i + 1;
    }
    file_ = open_append(*path_, csv::score_header(), !existing);
}

void ScoreLog::append(const ScoredSample& row) {
    std::unique_lock lock(mutex_);
    if (row.score.record_id != rows_.size() + 1) {
        throw ValidationError("record_id", "score rows must follow record order");
    }
    if (file_.is_open()) {
        file_ << csv::format_row(row) << '\n';
        file_.flush();
        if (!file_) throw IoError("append failed for " + path_->string());
    }
    rows_.push_back(row);
}

std::size_t ScoreLog::size() const {
    std::shared_lock lock(mutex_);
    return rows_.size();
}

std::vector<ScoredSample> ScoreLog::rows(const std::vector<RecordId>& ids) const {
    std::shared_lock lock(mutex_);
    std::vector<ScoredSample> out;
    out.reserve(ids.size());
    for (RecordId id : ids) {
        if (id == 0 || id > rows_.size()) throw OutOfRange("no score for record " + std::to_string(id));
        out.push_back(rows_[id - 1]);
    }
    return out;
}

std::vector<ScoredSample> ScoreLog::all() const {
    std::shared_lock lock(mutex_);
    return rows_;
}

} // namespace qers
