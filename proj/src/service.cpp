#include "qers/service.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "qers/csv.hpp"
#include "qers/errors.hpp"
#include "qers/report.hpp"

namespace qers {

using nlohmann::json;

// ---- events ----------------------------------------------------------------

std::optional<StreamEvent> EventHub::Subscription::next(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    auto ev = std::move(queue_.front());
    queue_.pop_front();
    return ev;
}

bool EventHub::Subscription::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

std::shared_ptr<EventHub::Subscription> EventHub::subscribe() {
    auto sub = std::make_shared<Subscription>();
    std::lock_guard lock(mutex_);
    subs_.push_back(sub);
    return sub;
}

void EventHub::unsubscribe(const std::shared_ptr<Subscription>& sub) {
    std::lock_guard lock(mutex_);
    std::erase(subs_, sub);
}

void EventHub::publish(const StreamEvent& event) {
    std::lock_guard lock(mutex_);
    for (const auto& sub : subs_) {
        {
            std::lock_guard sl(sub->mutex_);
            sub->queue_.push_back(event);
        }
        sub->cv_.notify_one();
    }
}

void EventHub::close_all() {
    std::lock_guard lock(mutex_);
    for (const auto& sub : subs_) {
        {
            std::lock_guard sl(sub->mutex_);
            sub->closed_ = true;
        }
        sub->cv_.notify_all();
    }
}

std::size_t EventHub::subscribers() const {
    std::lock_guard lock(mutex_);
    return subs_.size();
}

// ---- parsing helpers ----------------------------------------------------------

namespace {

template <typename T>
T field(const json& j, const char* name) {
    if (!j.contains(name)) throw ValidationError(name, "missing");
    const auto& v = j.at(name);
    if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ValidationError(name, "expected a string");
        return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ValidationError(name, "expected an integer");
        return v.get<T>();
    } else {
        if (!v.is_number()) throw ValidationError(name, "expected a number");
        return v.get<T>();
    }
}

MetricSample sample_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("sample", "expected an object");
    MetricSample s;
    s.timestamp_ms = field<std::int64_t>(j, "ts_ms");
    s.device_id = field<std::string>(j, "device_id");
    const auto alg = field<std::string>(j, "algorithm");
    auto a = parse_algorithm(alg);
    if (!a) throw ValidationError("algorithm", "unknown algorithm '" + alg + "'");
    s.algorithm = *a;
    const auto scen = field<std::string>(j, "scenario");
    auto sc = parse_scenario(scen);
    if (!sc) throw ValidationError("scenario", "unknown scenario '" + scen + "'");
    s.scenario = *sc;
    s.latency_ms = field<double>(j, "latency_ms");
    s.jitter_ms = field<double>(j, "jitter_ms");
    s.packet_loss_pct = field<double>(j, "packet_loss_pct");
    s.overhead_ms = field<double>(j, "overhead_ms");
    s.cpu_pct = field<double>(j, "cpu_pct");
    s.rssi_dbm = field<double>(j, "rssi_dbm");
    s.energy_mj = field<double>(j, "energy_mj");
    s.key_bytes = field<std::int64_t>(j, "key_bytes");
    validate(s);
    return s;
}

json sample_json(const MetricSample& s) {
    return {{"ts_ms", s.timestamp_ms},
            {"device_id", s.device_id},
            {"algorithm", std::string(to_string(s.algorithm))},
            {"scenario", std::string(to_string(s.scenario))},
            {"latency_ms", s.latency_ms},
            {"jitter_ms", s.jitter_ms},
            {"packet_loss_pct", s.packet_loss_pct},
            {"overhead_ms", s.overhead_ms},
            {"cpu_pct", s.cpu_pct},
            {"rssi_dbm", s.rssi_dbm},
            {"energy_mj", s.energy_mj},
            {"key_bytes", s.key_bytes}};
}

double& metric_ref(MetricSample& s, std::string_view name) {
    if (name == "latency_ms") return s.latency_ms;
    if (name == "jitter_ms") return s.jitter_ms;
    if (name == "packet_loss_pct") return s.packet_loss_pct;
    if (name == "overhead_ms") return s.overhead_ms;
    if (name == "cpu_pct") return s.cpu_pct;
    if (name == "rssi_dbm") return s.rssi_dbm;
    if (name == "energy_mj") return s.energy_mj;
    throw ValidationError("metric", "unknown metric '" + std::string(name) + "'");
}

struct Override {
    std::string metric;
    std::optional<double> value;
    std::optional<double> scale;
    std::optional<Algorithm> algorithm;
    std::optional<Scenario> scenario;
};

Override override_from_json(const json& j) {
    if (!j.is_object()) throw HttpError(400, "override must be an object");
    Override o;
    if (!j.contains("metric") || !j.at("metric").is_string()) throw HttpError(400, "override needs a metric name");
    o.metric = j.at("metric").get<std::string>();
    if (j.contains("value")) {
        if (!j.at("value").is_number()) throw HttpError(400, "override value must be a number");
        o.value = j.at("value").get<double>();
    }
    if (j.contains("scale")) {
        if (!j.at("scale").is_number()) throw HttpError(400, "override scale must be a number");
        o.scale = j.at("scale").get<double>();
    }
    if (o.value.has_value() == o.scale.has_value()) throw HttpError(400, "override needs exactly one of value, scale");
    if (j.contains("algorithm")) {
        o.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
        if (!o.algorithm) throw HttpError(400, "unknown algorithm in override");
    }
    if (j.contains("scenario")) {
        o.scenario = parse_scenario(j.at("scenario").get<std::string>());
        if (!o.scenario) throw HttpError(400, "unknown scenario in override");
    }
    return o;
}

void apply_override(MetricSample& s, const Override& o) {
    if (o.algorithm && s.algorithm != *o.algorithm) return;
    if (o.scenario && s.scenario != *o.scenario) return;
    if (o.metric == "key_bytes") {
        const double v = o.value ? *o.value : static_cast<double>(s.key_bytes) * *o.scale;
        if (!std::isfinite(v)) throw ValidationError("key_bytes", "override is not finite");
        s.key_bytes = static_cast<std::int64_t>(std::llround(v));
    } else {
        auto& ref = metric_ref(s, o.metric);
        ref = o.value ? *o.value : ref * *o.scale;
    }
    validate(s);
}

bool looks_like_json(std::string_view body, std::string_view content_type) {
    if (content_type.find("json") != std::string_view::npos) return true;
    if (content_type.find("csv") != std::string_view::npos) return false;
    const auto pos = body.find_first_not_of(" \t\r\n");
    return pos != std::string_view::npos && (body[pos] == '{' || body[pos] == '[');
}

std::string_view trim_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

// Parsed rows in data-row order; rejected rows carry their reason.
struct ParsedRow {
    std::size_t line;
    std::optional<MetricSample> sample;
    std::string reason;
};

std::vector<ParsedRow> parse_csv_body(std::string_view body) {
    auto lines = csv::split_lines(body);
    std::size_t i = 0;
    while (i < lines.size() && trim_cr(lines[i]).empty()) ++i;
    if (i == lines.size()) throw HttpError(400, "no samples in body");
    if (trim_cr(lines[i]) != csv::kSampleHeader) throw HttpError(400, "unknown CSV header");
    std::vector<ParsedRow> out;
    std::size_t row = 0;
    for (++i; i < lines.size(); ++i) {
        const auto text = trim_cr(lines[i]);
        if (text.empty()) continue;
        ++row;
        try {
            out.push_back({row, csv::parse_sample_row(text, row), {}});
        } catch (const CsvParseError& e) {
            std::string what = e.what();
            const auto colon = what.find(": ");
            out.push_back({row, std::nullopt, colon == std::string::npos ? what : what.substr(colon + 2)});
        } catch (const DataError& e) {
            out.push_back({row, std::nullopt, e.what()});
        }
    }
    if (out.empty()) throw HttpError(400, "no samples in body");
    return out;
}

std::vector<ParsedRow> parse_json_body(std::string_view body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw HttpError(400, std::string("malformed JSON: ") + e.what());
    }
    if (j.is_object() && j.contains("samples")) j = j.at("samples");
    if (j.is_object()) j = json::array({j});
    if (!j.is_array()) throw HttpError(400, "expected a sample object or an array of samples");
    if (j.empty()) throw HttpError(400, "no samples in body");
    std::vector<ParsedRow> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        try {
            out.push_back({i + 1, sample_from_json(j[i]), {}});
        } catch (const DataError& e) {
            out.push_back({i + 1, std::nullopt, e.what()});
        } catch (const json::exception& e) {
            out.push_back({i + 1, std::nullopt, e.what()});
        }
    }
    return out;
}

std::vector<MetricSample> samples_of(const std::vector<StoredSample>& rows) {
    std::vector<MetricSample> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.sample);
    return out;
}

void sort_by_id(std::vector<StoredSample>& rows) {
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
}

std::size_t parse_size(const std::string& text, const char* name) {
    std::size_t value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || value == 0) {
        throw HttpError(400, std::string(name) + " must be a positive integer");
    }
    return value;
}

const WeightPreset* find_preset(const std::vector<WeightPreset>& presets, const std::string& name) {
    for (const auto& p : presets) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

void place(PresetTriple& triple, WeightPreset p) {
    switch (p.kind) {
    case PresetKind::Basic: triple.basic = std::move(p); break;
    case PresetKind::Tuned: triple.tuned = std::move(p); break;
    case PresetKind::Fusion: triple.fusion = std::move(p); break;
    }
}

} // namespace

json to_json(const IngestResult& r) {
    json rejected = json::array();
    for (const auto& row : r.rejected) rejected.push_back({{"line", row.line}, {"reason", row.reason}});
    return {{"accepted", r.accepted}, {"rejected", rejected}};
}

// ---- service -----------------------------------------------------------------

QersService::QersService(QersConfig config)
    : config_(std::move(config)),
      smoothers_(config_.service.lambda),
      presets_(config_.presets),
      active_(config_.service.active) {
    config_.active_triple();
    const auto& s = config_.service;
    if (s.window < 2) throw ConfigError("service.window must be >= 2");
    if (!s.model_path.empty()) {
        model_ = std::make_unique<ForestModel>(load_forest(s.model_path, &ml_feature_names()));
    }
    if (s.store_path.empty()) {
        samples_ = std::make_unique<SampleLog>();
        scores_ = std::make_unique<ScoreLog>();
    } else {
        samples_ = std::make_unique<SampleLog>(s.store_path);
        scores_ = std::make_unique<ScoreLog>(score_log_path(s.store_path));
    }
    score_backlog();
    published_ = samples_->size();
}

void QersService::score_backlog() {
    const auto have = scores_->size();
    const auto total = samples_->size();
    if (have > total) throw DataError("score log has more rows than the sample log");
    if (have == total) return;
    auto all = samples_->all();
    std::vector<MetricSample> pending;
    for (std::size_t i = have; i < total; ++i) pending.push_back(all[i].sample);
    const auto bounds = derive_bounds(samples_of(normalization_window(total)));
    auto records = score_samples(pending, bounds, active_triple(), config_.profiles, smoothers_, options());
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].record_id = have + i + 1;
        scores_->append({pending[i], records[i]});
    }
}

PipelineOptions QersService::options() const {
    PipelineOptions o;
    o.ms = config_.ms;
    o.lambda = config_.service.lambda;
    o.model = model_.get();
    return o;
}

PresetTriple QersService::active_triple() const {
    std::shared_lock lock(preset_mutex_);
    auto pick = [&](const std::string& name) {
        const auto* p = find_preset(presets_, name);
        if (!p) throw UnknownPreset(name);
        return *p;
    };
    return {pick(active_.basic), pick(active_.tuned), pick(active_.fusion)};
}

IngestResult QersService::ingest(std::string_view body, std::string_view content_type) {
    const auto rows = looks_like_json(body, content_type) ? parse_json_body(body) : parse_csv_body(body);

    IngestResult result;
    std::vector<MetricSample> batch;
    std::lock_guard lock(ingest_mutex_);
    for (const auto& row : rows) {
        if (!row.sample) {
            result.rejected.push_back({row.line, row.reason});
            continue;
        }
        try {
            result.ids.push_back(samples_->append(*row.sample));
            batch.push_back(*row.sample);
        } catch (const DataError& e) {
            result.rejected.push_back({row.line, e.what()});
        }
    }
    result.accepted = batch.size();
    if (batch.empty()) return result;

    const auto last = result.ids.back();
    const auto bounds = derive_bounds(samples_of(normalization_window(last)));
    const auto triple = active_triple();
    auto records = score_samples(batch, bounds, triple, config_.profiles, smoothers_, options());
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].record_id = result.ids[i];
        ScoredSample row{batch[i], records[i]};
        scores_->append(row);
        published_ = result.ids[i];
        events_.publish({result.ids[i], event_json(result.ids[i], row)});
    }
    return result;
}

IngestResult QersService::ingest_samples(const std::vector<MetricSample>& samples) {
    json arr = json::array();
    for (const auto& s : samples) arr.push_back(sample_json(s));
    return ingest(arr.dump(), "application/json");
}

std::string QersService::event_json(RecordId id, const ScoredSample& row) const {
    json j = sample_json(row.sample);
    const auto& r = row.score;
    j["id"] = id;
    j["qers_basic"] = r.basic;
    j["qers_tuned"] = r.tuned;
    j["qers_fusion"] = r.fusion;
    j["readiness"] = std::string(to_string(r.readiness));
    j["smoothed_fusion"] = r.smoothed_fusion;
    j["ml_fusion"] = r.ml_fusion;
    j["ml_lo"] = r.ml_lo;
    j["ml_hi"] = r.ml_hi;
    j["preset"] = r.preset;
    return j.dump();
}

std::vector<StoredSample> QersService::normalization_window(RecordId max_id) const {
    std::vector<StoredSample> out;
    for (Scenario sc : kAllScenarios) {
        WindowQuery q;
        q.scenario = sc;
        q.limit = config_.service.window;
        q.newest = true;
        q.max_id = max_id;
        auto part = samples_->query(q);
        out.insert(out.end(), part.begin(), part.end());
    }
    sort_by_id(out);
    return out;
}

QersService::Snapshot QersService::snapshot(const ReadQuery& rq) const {
    const RecordId max_id = published_.load();
    Snapshot snap;
    if (max_id == 0) return snap;
    snap.norm_window = normalization_window(max_id);
    for (Scenario sc : kAllScenarios) {
        if (rq.scenario && sc != *rq.scenario) continue;
        WindowQuery q;
        q.scenario = sc;
        q.max_id = max_id;
        if (rq.window) {
            q.limit = *rq.window;
            q.newest = true;
        }
        for (auto& r : samples_->query(q)) {
            if (!rq.algorithm || r.sample.algorithm == *rq.algorithm) snap.rows.push_back(std::move(r));
        }
    }
    sort_by_id(snap.rows);
    return snap;
}

NormalizationBounds QersService::bounds_of(const Snapshot& snap) const {
    return derive_bounds(samples_of(snap.norm_window));
}

std::vector<ScoredSample> QersService::rescore(const Snapshot& snap, const PresetTriple& presets,
                                               const ProfileCatalog& profiles) const {
    const auto samples = samples_of(snap.rows);
    SmootherBank smoothers(config_.service.lambda);
    auto records = score_samples(samples, bounds_of(snap), presets, profiles, smoothers, options());
    for (std::size_t i = 0; i < records.size(); ++i) records[i].record_id = snap.rows[i].id;
    return zip_scores(samples, std::move(records));
}

std::vector<ScoredSample> QersService::report_rows(const Snapshot& snap, bool recompute) const {
    if (recompute) return rescore(snap, active_triple(), config_.profiles);
    std::vector<RecordId> ids;
    ids.reserve(snap.rows.size());
    for (const auto& r : snap.rows) ids.push_back(r.id);
    return scores_->rows(ids);
}

ReadQuery QersService::parse_query(const std::optional<std::string>& algorithm,
                                   const std::optional<std::string>& scenario,
                                   const std::optional<std::string>& window,
                                   const std::optional<std::string>& recompute) {
    ReadQuery q;
    if (algorithm && !algorithm->empty()) {
        q.algorithm = parse_algorithm(*algorithm);
        if (!q.algorithm) throw HttpError(400, "unknown algorithm '" + *algorithm + "'");
    }
    if (scenario && !scenario->empty()) {
        q.scenario = parse_scenario(*scenario);
        if (!q.scenario) throw HttpError(400, "unknown scenario '" + *scenario + "'");
    }
    if (window && !window->empty()) q.window = parse_size(*window, "window");
    if (recompute) {
        if (*recompute == "true" || *recompute == "1") {
            q.recompute = true;
        } else if (*recompute != "false" && *recompute != "0" && !recompute->empty()) {
            throw HttpError(400, "recompute must be true or false");
        }
    }
    return q;
}

json QersService::scores(const ReadQuery& q) const {
    const auto triple = active_triple();
    const auto snap = snapshot(q);
    json aggregates = json::array();
    if (!snap.rows.empty()) {
        const auto rows = rescore(snap, triple, config_.profiles);
        aggregates = to_json(aggregate_scores(rows, config_.ms));
    }
    return {{"presets", triple.label()}, {"count", snap.rows.size()}, {"aggregates", aggregates}};
}

json QersService::preview(const json& body) const {
    if (!body.is_object()) throw HttpError(400, "preview body must be a JSON object");
    auto triple = active_triple();
    std::vector<WeightPreset> catalog;
    {
        std::shared_lock lock(preset_mutex_);
        catalog = presets_;
    }
    auto resolve = [&](const json& j) -> WeightPreset {
        if (j.is_string()) {
            const auto* p = find_preset(catalog, j.get<std::string>());
            if (!p) throw UnknownPreset(j.get<std::string>());
            return *p;
        }
        return preset_from_json(j);
    };
    if (body.contains("preset")) place(triple, resolve(body.at("preset")));
    if (body.contains("presets")) {
        const auto& ps = body.at("presets");
        if (!ps.is_object()) throw HttpError(400, "presets must be an object keyed by kind");
        for (const auto& [kind, value] : ps.items()) {
            auto p = resolve(value);
            if (std::string(to_string(p.kind)) != kind) {
                throw ValidationError("kind", "preset " + p.name + " is not a " + kind + " preset");
            }
            place(triple, std::move(p));
        }
    }

    auto param = [&](const char* key) -> std::optional<std::string> {
        if (!body.contains(key)) return std::nullopt;
        const auto& v = body.at(key);
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
        throw HttpError(400, std::string(key) + " has the wrong type");
    };
    const auto q = parse_query(param("algorithm"), param("scenario"), param("window"), std::nullopt);

    std::vector<Override> overrides;
    if (body.contains("overrides")) {
        const auto& arr = body.at("overrides");
        if (!arr.is_array()) throw HttpError(400, "overrides must be an array");
        for (const auto& o : arr) overrides.push_back(override_from_json(o));
    }

    auto snap = snapshot(q);
    for (const auto& o : overrides) {
        for (auto& r : snap.norm_window) apply_override(r.sample, o);
        for (auto& r : snap.rows) apply_override(r.sample, o);
    }
    json aggregates = json::array();
    if (!snap.rows.empty()) aggregates = to_json(aggregate_scores(rescore(snap, triple, config_.profiles), config_.ms));
    return {{"presets", triple.label()}, {"count", snap.rows.size()}, {"aggregates", aggregates}};
}

json QersService::presets() const {
    std::shared_lock lock(preset_mutex_);
    json list = json::array();
    const auto builtins = builtin_presets();
    for (const auto& p : presets_) {
        auto j = to_json(p);
        j["builtin"] = find_preset(builtins, p.name) != nullptr;
        list.push_back(j);
    }
    return {{"presets", list},
            {"active", {{"basic", active_.basic}, {"tuned", active_.tuned}, {"fusion", active_.fusion}}}};
}

json QersService::set_active(const json& body) {
    if (!body.is_object()) throw HttpError(400, "body must be a JSON object");
    {
        std::unique_lock lock(preset_mutex_);
        auto activate = [&](const WeightPreset& p) {
            switch (p.kind) {
            case PresetKind::Basic: active_.basic = p.name; break;
            case PresetKind::Tuned: active_.tuned = p.name; break;
            case PresetKind::Fusion: active_.fusion = p.name; break;
            }
        };
        if (body.contains("preset")) {
            auto p = preset_from_json(body.at("preset"));
            auto existing = std::find_if(presets_.begin(), presets_.end(),
                                         [&](const WeightPreset& q) { return q.name == p.name; });
            if (existing == presets_.end()) {
                presets_.push_back(p);
            } else if (*existing != p) {
                if (find_preset(builtin_presets(), p.name)) {
                    throw HttpError(409, "cannot redefine built-in preset " + p.name);
                }
                *existing = p;
            }
            activate(p);
        } else if (body.contains("name")) {
            if (!body.at("name").is_string()) throw HttpError(400, "name must be a string");
            const auto name = body.at("name").get<std::string>();
            const auto* p = find_preset(presets_, name);
            if (!p) throw UnknownPreset(name);
            activate(*p);
        } else {
            bool any = false;
            for (const char* kind : {"basic", "tuned", "fusion"}) {
                if (!body.contains(kind)) continue;
                const auto name = body.at(kind).get<std::string>();
                const auto* p = find_preset(presets_, name);
                if (!p) throw UnknownPreset(name);
                if (std::string(to_string(p->kind)) != kind) {
                    throw ValidationError("kind", "preset " + name + " is not a " + kind + " preset");
                }
                activate(*p);
                any = true;
            }
            if (!any) throw HttpError(400, "expected name, preset, or basic/tuned/fusion");
        }
    }
    return presets();
}

json QersService::add_preset(const json& body) {
    auto p = preset_from_json(body);
    {
        std::unique_lock lock(preset_mutex_);
        if (find_preset(presets_, p.name)) throw HttpError(409, "preset " + p.name + " already exists");
        presets_.push_back(p);
    }
    return to_json(p);
}

json QersService::heatmap(const ReadQuery& q) const {
    const auto snap = snapshot(q);
    if (snap.rows.empty()) throw HttpError(404, "no samples in window");
    const auto rows = report_rows(snap, q.recompute);
    return to_json(qers::heatmap(rows, bounds_of(snap), config_.ms), config_.ms);
}

json QersService::distribution(const ReadQuery& q) const {
    const auto snap = snapshot(q);
    if (snap.rows.empty()) throw HttpError(404, "no samples in window");
    return to_json(qers::distribution(report_rows(snap, q.recompute)));
}

json QersService::scatter(const ReadQuery& q) const {
    const auto snap = snapshot(q);
    if (snap.rows.empty()) throw HttpError(404, "no samples in window");
    return to_json(qers::scatter(report_rows(snap, q.recompute)));
}

json QersService::health() const {
    return {{"status", "ok"},
            {"samples", published_.load()},
            {"subscribers", events_.subscribers()},
            {"presets", active_triple().label()},
            {"model", model_ != nullptr}};
}

std::string QersService::export_samples_csv() const {
    const auto snap = snapshot({});
    return csv::export_csv(samples_of(snap.rows));
}

std::string QersService::export_scores_csv(bool recompute) const {
    const auto snap = snapshot({});
    if (snap.rows.empty()) return csv::score_header() + "\n";
    return csv::export_scores_csv(report_rows(snap, recompute));
}

} // namespace qers
