#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qers/model.hpp"

namespace qers {

// Feature order used for fusion estimation: the eight raw measurements and
// the three security ratings of the sample's algorithm.
inline const std::vector<std::string>& ml_feature_names() {
    static const std::vector<std::string> names{
        "latency_ms", "jitter_ms", "packet_loss_pct", "overhead_ms", "cpu_pct", "rssi_dbm",
        "energy_mj",  "key_bytes", "robustness",      "proven_resistance",     "crypto_overhead"};
    return names;
}

std::array<double, 11> ml_features(const MetricSample& sample, const AlgorithmProfile& profile);

using FeatureMap = std::map<std::string, double, std::less<>>;

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t max_depth = 12;         // 0 = unlimited
    std::size_t min_leaf_size = 5;
    std::size_t features_per_split = 0; // 0 = ceil(sqrt(d))
    std::uint64_t seed = 42;
    bool bootstrap = true;
    unsigned threads = 0;               // 0 = hardware concurrency

    bool operator==(const ForestParams&) const = default;
};

class TrainingSet {
public:
    explicit TrainingSet(std::vector<std::string> feature_names);

    void add(std::span<const double> row, double target);

    const std::vector<std::string>& feature_names() const noexcept { return names_; }
    std::size_t rows() const noexcept { return targets_.size(); }
    std::size_t dims() const noexcept { return names_.size(); }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * dims(), dims()}; }
    double target(std::size_t i) const { return targets_[i]; }
    std::span<const double> targets() const noexcept { return targets_; }

private:
    std::vector<std::string> names_;
    std::vector<double> values_;
    std::vector<double> targets_;
};

struct TreeNode {
    std::int32_t feature = -1; // -1 marks a leaf
    double threshold = 0.0;    // go left when x[feature] <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;        // mean target of the node's training rows

    bool is_leaf() const noexcept { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

class RegressionTree {
public:
    RegressionTree() = default;
    explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

    double predict(std::span<const double> row) const;
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

    bool operator==(const RegressionTree&) const = default;

private:
    std::vector<TreeNode> nodes_;
};

class ForestModel {
public:
    ForestModel(std::vector<std::string> feature_names, ForestParams params, std::vector<RegressionTree> trees);

    const std::vector<std::string>& feature_names() const noexcept { return names_; }
    const ForestParams& params() const noexcept { return params_; }
    const std::vector<RegressionTree>& trees() const noexcept { return trees_; }

    // Row must follow feature_names() order.
    double predict_row(std::span<const double> row) const;
    std::vector<double> tree_predictions(std::span<const double> row) const;
    // Per-tree quantile band widened to contain the point estimate. A
    // single-tree forest yields a point interval.
    std::pair<double, double> interval_row(std::span<const double> row, double coverage) const;

    std::vector<double> row_from(const FeatureMap& features) const;

    bool operator==(const ForestModel&) const = default;

private:
    std::vector<std::string> names_;
    ForestParams params_;
    std::vector<RegressionTree> trees_;
};

// Throws InsufficientData when rows < max(1, min_leaf_size) and
// ValidationError for targets outside [0,100] or non-finite features.
ForestModel train(const TrainingSet& data, const ForestParams& params);

// Mean of tree outputs clamped to [0,100]. Throws MissingFeature.
double predict(const ForestModel& model, const FeatureMap& features);

// Empirical (1-c)/2 and (1+c)/2 quantiles of the tree outputs, widened to
// contain predict(). Throws TooFewTrees below two trees.
std::pair<double, double> predict_interval(const ForestModel& model, const FeatureMap& features, double coverage);

// Linear-interpolated quantile of sorted values, p in [0,1].
double quantile_sorted(std::span<const double> sorted, double p);

inline constexpr int kForestFormatVersion = 1;

std::string forest_to_json(const ForestModel& model);
// expected_features, when given, must match the model's order exactly;
// otherwise FeatureMismatch names the first difference.
ForestModel forest_from_json(std::string_view text,
                             const std::vector<std::string>* expected_features = nullptr);

void save_forest(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_forest(const std::filesystem::path& path,
                        const std::vector<std::string>* expected_features = nullptr);

} // namespace qers
