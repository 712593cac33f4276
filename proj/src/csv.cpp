#include "qers/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <system_error>

#include "qers/errors.hpp"

namespace qers::csv {

namespace {

constexpr std::size_t kSampleFields = 12;
constexpr std::size_t kScoreFields = kSampleFields + 9;

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

double parse_double(std::string_view field, const char* name, std::size_t line) {
    double v = 0.0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (field.empty() || ec != std::errc{} || ptr != end || !std::isfinite(v)) {
        throw CsvParseError(line, std::string(name) + " is not a number: '" + std::string(field) + "'");
    }
    return v;
}

std::int64_t parse_int(std::string_view field, const char* name, std::size_t line) {
    std::int64_t v = 0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (field.empty() || ec != std::errc{} || ptr != end) {
        throw CsvParseError(line, std::string(name) + " is not an integer: '" + std::string(field) + "'");
    }
    return v;
}

MetricSample parse_sample_fields(std::span<const std::string_view> f, std::size_t line) {
    MetricSample s;
    s.timestamp_ms = parse_int(f[0], "ts_ms", line);
    s.device_id = std::string(f[1]);
    auto alg = parse_algorithm(f[2]);
    if (!alg) throw CsvParseError(line, "unknown algorithm '" + std::string(f[2]) + "'");
    s.algorithm = *alg;
    auto scen = parse_scenario(f[3]);
    if (!scen) throw CsvParseError(line, "unknown scenario '" + std::string(f[3]) + "'");
    s.scenario = *scen;
    s.latency_ms = parse_double(f[4], "latency_ms", line);
    s.jitter_ms = parse_double(f[5], "jitter_ms", line);
    s.packet_loss_pct = parse_double(f[6], "packet_loss_pct", line);
    s.overhead_ms = parse_double(f[7], "overhead_ms", line);
    s.cpu_pct = parse_double(f[8], "cpu_pct", line);
    s.rssi_dbm = parse_double(f[9], "rssi_dbm", line);
    s.energy_mj = parse_double(f[10], "energy_mj", line);
    s.key_bytes = parse_int(f[11], "key_bytes", line);
    try {
        validate(s);
    } catch (const ValidationError& e) {
        throw CsvParseError(line, e.what());
    }
    return s;
}

std::string_view strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

template <typename Row, typename Parse>
std::vector<Row> import_with(std::string_view text, std::string_view header, Parse parse) {
    const auto lines = split_lines(text);
    std::size_t first = 0;
    while (first < lines.size() && strip_cr(lines[first]).empty()) ++first;
    if (first == lines.size()) throw UnknownHeader("missing header line");
    if (strip_cr(lines[first]) != header) {
        throw UnknownHeader("unexpected header '" + std::string(strip_cr(lines[first])) + "'");
    }
    std::vector<Row> out;
    out.reserve(lines.size() - first - 1);
    for (std::size_t i = first + 1; i < lines.size(); ++i) {
        const auto line = strip_cr(lines[i]);
        if (line.empty()) continue;
        out.push_back(parse(line, i + 1));
    }
    return out;
}

} // namespace

std::string score_header() { return std::string(kSampleHeader) + "," + std::string(kScoreColumns); }

std::string format_number(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw std::logic_error("to_chars failed");
    return std::string(buf.data(), ptr);
}

std::string format_row(const MetricSample& s) {
    std::string out;
    out.reserve(128);
    out += std::to_string(s.timestamp_ms);
    out += ',';
    out += s.device_id;
    out += ',';
    out += to_string(s.algorithm);
    out += ',';
    out += to_string(s.scenario);
    for (double v : {s.latency_ms, s.jitter_ms, s.packet_loss_pct, s.overhead_ms, s.cpu_pct, s.rssi_dbm,
                     s.energy_mj}) {
        out += ',';
        out += format_number(v);
    }
    out += ',';
    out += std::to_string(s.key_bytes);
    return out;
}

std::string format_row(const ScoredSample& row) {
    const auto& r = row.score;
    std::string out = format_row(row.sample);
    for (double v : {r.basic, r.tuned, r.fusion}) {
        out += ',';
        out += format_number(v);
    }
    out += ',';
    out += to_string(r.readiness);
    for (double v : {r.smoothed_fusion, r.ml_fusion, r.ml_lo, r.ml_hi}) {
        out += ',';
        out += format_number(v);
    }
    out += ',';
    out += r.preset;
    return out;
}

MetricSample parse_sample_row(std::string_view text, std::size_t line) {
    const auto fields = split_fields(text);
    if (fields.size() != kSampleFields) {
        throw CsvParseError(line, "expected " + std::to_string(kSampleFields) + " fields, got " +
                                      std::to_string(fields.size()));
    }
    return parse_sample_fields(fields, line);
}

ScoredSample parse_score_row(std::string_view text, std::size_t line) {
    const auto fields = split_fields(text);
    if (fields.size() != kScoreFields) {
        throw CsvParseError(line, "expected " + std::to_string(kScoreFields) + " fields, got " +
                                      std::to_string(fields.size()));
    }
    ScoredSample out;
    out.sample = parse_sample_fields(std::span(fields).first(kSampleFields), line);
    auto& r = out.score;
    r.basic = parse_double(fields[12], "qers_basic", line);
    r.tuned = parse_double(fields[13], "qers_tuned", line);
    r.fusion = parse_double(fields[14], "qers_fusion", line);
    auto readiness = parse_readiness(fields[15]);
    if (!readiness) throw CsvParseError(line, "unknown readiness '" + std::string(fields[15]) + "'");
    r.readiness = *readiness;
    r.smoothed_fusion = parse_double(fields[16], "smoothed_fusion", line);
    r.ml_fusion = parse_double(fields[17], "ml_fusion", line);
    r.ml_lo = parse_double(fields[18], "ml_lo", line);
    r.ml_hi = parse_double(fields[19], "ml_hi", line);
    r.preset = std::string(fields[20]);
    return out;
}

std::string export_csv(std::span<const MetricSample> records) {
    std::string out(kSampleHeader);
    out += '\n';
    for (const auto& r : records) {
        out += format_row(r);
        out += '\n';
    }
    return out;
}

std::string export_scores_csv(std::span<const ScoredSample> rows) {
    std::string out = score_header();
    out += '\n';
    for (const auto& r : rows) {
        out += format_row(r);
        out += '\n';
    }
    return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start < text.size()) {
        const auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            out.push_back(text.substr(start));
            break;
        }
        out.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return out;
}

std::vector<MetricSample> import_csv(std::string_view text) {
    return import_with<MetricSample>(text, kSampleHeader, parse_sample_row);
}

std::vector<ScoredSample> import_scores_csv(std::string_view text) {
    const std::string header = score_header();
    return import_with<ScoredSample>(text, header, parse_score_row);
}

} // namespace qers::csv
