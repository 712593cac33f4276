#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qers/model.hpp"

namespace qers::csv {

inline constexpr std::string_view kSampleHeader =
    "ts_ms,device_id,algorithm,scenario,latency_ms,jitter_ms,packet_loss_pct,overhead_ms,cpu_pct,rssi_dbm,"
    "energy_mj,key_bytes";

inline constexpr std::string_view kScoreColumns =
    "qers_basic,qers_tuned,qers_fusion,readiness,smoothed_fusion,ml_fusion,ml_lo,ml_hi,preset";

std::string score_header();

// Shortest decimal form that parses back to the same double.
std::string format_number(double v);

std::string format_row(const MetricSample& sample);
std::string format_row(const ScoredSample& row);

// `line` is only used for error reporting.
MetricSample parse_sample_row(std::string_view text, std::size_t line);
ScoredSample parse_score_row(std::string_view text, std::size_t line);

std::string export_csv(std::span<const MetricSample> records);
std::string export_scores_csv(std::span<const ScoredSample> rows);

// Header must match exactly (UnknownHeader otherwise). Blank lines and a
// trailing CR are tolerated. Parse failures raise CsvParseError carrying
// the 1-based file line (the header is line 1). Imported samples are
// validated.
std::vector<MetricSample> import_csv(std::string_view text);
std::vector<ScoredSample> import_scores_csv(std::string_view text);

// Splits text into lines without the terminator.
std::vector<std::string_view> split_lines(std::string_view text);

} // namespace qers::csv
