#include "qers/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "qers/errors.hpp"
#include "qers/rng.hpp"

namespace qers {

using nlohmann::json;

std::array<double, 11> ml_features(const MetricSample& s, const AlgorithmProfile& p) {
    return {s.latency_ms, s.jitter_ms, s.packet_loss_pct, s.overhead_ms, s.cpu_pct, s.rssi_dbm,
            s.energy_mj,  static_cast<double>(s.key_bytes), p.robustness, p.proven_resistance,
            p.crypto_overhead};
}

TrainingSet::TrainingSet(std::vector<std::string> feature_names) : names_(std::move(feature_names)) {
    if (names_.empty()) throw ValidationError("feature_names", "must not be empty");
}

void TrainingSet::add(std::span<const double> row, double target) {
    if (row.size() != dims()) {
        throw ValidationError("row", "expected " + std::to_string(dims()) + " features, got " +
                                         std::to_string(row.size()));
    }
    values_.insert(values_.end(), row.begin(), row.end());
    targets_.push_back(target);
}

double RegressionTree::predict(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const auto& n = nodes_[i];
        i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes_[i].value;
}

namespace {

struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double score = 0.0; // sum_l^2/n_l + sum_r^2/n_r
    std::size_t left_count = 0;
};

class TreeBuilder {
public:
    TreeBuilder(const TrainingSet& data, const ForestParams& params, std::size_t features_per_split,
                std::uint64_t seed)
        : data_(data), params_(params), mtry_(features_per_split), rng_(seed) {}

    RegressionTree build() {
        const std::size_t n = data_.rows();
        std::vector<std::size_t> rows(n);
        if (params_.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (auto& r : rows) r = pick(rng_);
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        grow(rows, 0);
        return RegressionTree(std::move(nodes_));
    }

private:
    std::int32_t grow(std::vector<std::size_t>& rows, std::size_t depth) {
        const auto id = static_cast<std::int32_t>(nodes_.size());
        nodes_.emplace_back();

        double sum = 0.0;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (auto r : rows) {
            const double y = data_.target(r);
            sum += y;
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
        nodes_[id].value = sum / static_cast<double>(rows.size());

        const bool depth_left = params_.max_depth == 0 || depth < params_.max_depth;
        const std::size_t min_leaf = std::max<std::size_t>(1, params_.min_leaf_size);
        if (!depth_left || rows.size() < 2 * min_leaf || lo == hi) return id;

        const Split split = best_split(rows, sum, min_leaf);
        if (split.feature < 0) return id;

        const auto f = static_cast<std::size_t>(split.feature);
        auto mid = std::stable_partition(rows.begin(), rows.end(), [&](std::size_t r) {
            return data_.row(r)[f] <= split.threshold;
        });
        std::vector<std::size_t> left(rows.begin(), mid);
        std::vector<std::size_t> right(mid, rows.end());
        rows.clear();
        rows.shrink_to_fit();

        nodes_[id].feature = split.feature;
        nodes_[id].threshold = split.threshold;
        const auto l = grow(left, depth + 1);
        const auto r = grow(right, depth + 1);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    Split best_split(const std::vector<std::size_t>& rows, double total, std::size_t min_leaf) {
        const std::size_t d = data_.dims();
        std::vector<std::size_t> order(d);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng_);

        const double n = static_cast<double>(rows.size());
        const double parent = total * total / n;
        Split best;
        best.score = parent;

        std::vector<std::pair<double, double>> xy(rows.size());
        for (std::size_t k = 0; k < d; ++k) {
            // Draw past the mtry budget only while no usable split was found.
            if (k >= mtry_ && best.feature >= 0) break;
            const std::size_t f = order[k];
            for (std::size_t i = 0; i < rows.size(); ++i) xy[i] = {data_.row(rows[i])[f], data_.target(rows[i])};
            std::sort(xy.begin(), xy.end());
            if (xy.front().first == xy.back().first) continue;

            double left_sum = 0.0;
            for (std::size_t i = 0; i + 1 < xy.size(); ++i) {
                left_sum += xy[i].second;
                const std::size_t nl = i + 1;
                const std::size_t nr = xy.size() - nl;
                if (xy[i].first == xy[i + 1].first) continue;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double right_sum = total - left_sum;
                const double score = left_sum * left_sum / static_cast<double>(nl) +
                                     right_sum * right_sum / static_cast<double>(nr);
                if (score > best.score + 1e-12 * std::abs(best.score)) {
                    double threshold = xy[i].first + (xy[i + 1].first - xy[i].first) / 2.0;
                    if (threshold >= xy[i + 1].first) threshold = xy[i].first;
                    best = {static_cast<std::int32_t>(f), threshold, score, nl};
                }
            }
        }
        return best;
    }

    const TrainingSet& data_;
    const ForestParams& params_;
    std::size_t mtry_;
    std::mt19937_64 rng_;
    std::vector<TreeNode> nodes_;
};

} // namespace

ForestModel::ForestModel(std::vector<std::string> feature_names, ForestParams params,
                         std::vector<RegressionTree> trees)
    : names_(std::move(feature_names)), params_(params), trees_(std::move(trees)) {
    if (trees_.empty()) throw TooFewTrees("forest has no trees");
}

std::vector<double> ForestModel::tree_predictions(std::span<const double> row) const {
    if (row.size() != names_.size()) {
        throw FeatureMismatch("expected " + std::to_string(names_.size()) + " features, got " +
                              std::to_string(row.size()));
    }
    std::vector<double> out;
    out.reserve(trees_.size());
    for (const auto& t : trees_) out.push_back(t.predict(row));
    return out;
}

double ForestModel::predict_row(std::span<const double> row) const {
    const auto preds = tree_predictions(row);
    const double mean = std::accumulate(preds.begin(), preds.end(), 0.0) / static_cast<double>(preds.size());
    return std::clamp(mean, 0.0, 100.0);
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw EmptyDataset("quantile of empty sequence");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::pair<double, double> ForestModel::interval_row(std::span<const double> row, double coverage) const {
    if (!(coverage > 0.0 && coverage < 1.0)) throw ValidationError("coverage", "must be within (0,1)");
    auto preds = tree_predictions(row);
    const double mean = std::clamp(std::accumulate(preds.begin(), preds.end(), 0.0) /
                                       static_cast<double>(preds.size()),
                                   0.0, 100.0);
    std::sort(preds.begin(), preds.end());
    const double lo = std::clamp(quantile_sorted(preds, (1.0 - coverage) / 2.0), 0.0, 100.0);
    const double hi = std::clamp(quantile_sorted(preds, (1.0 + coverage) / 2.0), 0.0, 100.0);
    return {std::min(lo, mean), std::max(hi, mean)};
}

std::vector<double> ForestModel::row_from(const FeatureMap& features) const {
    std::vector<double> row;
    row.reserve(names_.size());
    for (const auto& name : names_) {
        auto it = features.find(name);
        if (it == features.end()) throw MissingFeature(name);
        row.push_back(it->second);
    }
    return row;
}

ForestModel train(const TrainingSet& data, const ForestParams& params) {
    const std::size_t min_rows = std::max<std::size_t>(1, params.min_leaf_size);
    if (data.rows() < min_rows) {
        throw InsufficientData("need at least " + std::to_string(min_rows) + " rows, got " +
                               std::to_string(data.rows()));
    }
    if (params.n_trees == 0) throw TooFewTrees("n_trees must be >= 1");
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const double y = data.target(i);
        if (!std::isfinite(y) || y < 0.0 || y > 100.0) {
            throw ValidationError("target", "row " + std::to_string(i) + " outside [0,100]");
        }
        for (double x : data.row(i)) {
            if (!std::isfinite(x)) throw ValidationError("features", "row " + std::to_string(i) + " not finite");
        }
    }

    const std::size_t d = data.dims();
    std::size_t mtry = params.features_per_split;
    if (mtry == 0) mtry = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
    mtry = std::min(mtry, d);

    std::vector<RegressionTree> trees(params.n_trees);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t = next++; t < trees.size(); t = next++) {
            TreeBuilder builder(data, params, mtry, derive_seed(params.seed, {t}));
            trees[t] = builder.build();
        }
    };

    unsigned threads = params.threads != 0 ? params.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, trees.size()));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    }
    return ForestModel(data.feature_names(), params, std::move(trees));
}

double predict(const ForestModel& model, const FeatureMap& features) {
    return model.predict_row(model.row_from(features));
}

std::pair<double, double> predict_interval(const ForestModel& model, const FeatureMap& features, double coverage) {
    if (model.trees().size() < 2) throw TooFewTrees("interval needs at least 2 trees");
    return model.interval_row(model.row_from(features), coverage);
}

// Model file: {"format":"qers-forest","version":1,"feature_names":[...],
// "hyperparams":{...},"trees":[[[feature,threshold,left,right,value],...],...]}
std::string forest_to_json(const ForestModel& model) {
    const auto& p = model.params();
    json doc;
    doc["format"] = "qers-forest";
    doc["version"] = kForestFormatVersion;
    doc["feature_names"] = model.feature_names();
    doc["hyperparams"] = {{"n_trees", p.n_trees},
                          {"max_depth", p.max_depth},
                          {"min_leaf_size", p.min_leaf_size},
                          {"features_per_split", p.features_per_split},
                          {"rng_seed", p.seed},
                          {"bootstrap", p.bootstrap}};
    json trees = json::array();
    for (const auto& t : model.trees()) {
        json nodes = json::array();
        for (const auto& n : t.nodes()) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
        trees.push_back(std::move(nodes));
    }
    doc["trees"] = std::move(trees);
    return doc.dump();
}

ForestModel forest_from_json(std::string_view text, const std::vector<std::string>* expected_features) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "qers-forest") throw ConfigError("not a qers-forest model");
        const int version = doc.at("version").get<int>();
        if (version != kForestFormatVersion) {
            throw ConfigError("unsupported model version " + std::to_string(version));
        }
        auto names = doc.at("feature_names").get<std::vector<std::string>>();
        if (expected_features != nullptr && names != *expected_features) {
            std::string detail = "model feature order does not match expected order";
            for (std::size_t i = 0; i < std::max(names.size(), expected_features->size()); ++i) {
                const std::string got = i < names.size() ? names[i] : "<none>";
                const std::string want = i < expected_features->size() ? (*expected_features)[i] : "<none>";
                if (got != want) {
                    detail += " (position " + std::to_string(i) + ": model has " + got + ", expected " + want + ")";
                    break;
                }
            }
            throw FeatureMismatch(detail);
        }

        const auto& hp = doc.at("hyperparams");
        ForestParams params;
        params.n_trees = hp.at("n_trees").get<std::size_t>();
        params.max_depth = hp.at("max_depth").get<std::size_t>();
        params.min_leaf_size = hp.at("min_leaf_size").get<std::size_t>();
        params.features_per_split = hp.at("features_per_split").get<std::size_t>();
        params.seed = hp.at("rng_seed").get<std::uint64_t>();
        params.bootstrap = hp.value("bootstrap", true);

        std::vector<RegressionTree> trees;
        for (const auto& jt : doc.at("trees")) {
            std::vector<TreeNode> nodes;
            for (const auto& jn : jt) {
                TreeNode n{jn.at(0).get<std::int32_t>(), jn.at(1).get<double>(), jn.at(2).get<std::int32_t>(),
                           jn.at(3).get<std::int32_t>(), jn.at(4).get<double>()};
                nodes.push_back(n);
            }
            const auto count = static_cast<std::int32_t>(nodes.size());
            if (count == 0) throw ConfigError("tree without nodes");
            for (std::int32_t i = 0; i < count; ++i) {
                const auto& n = nodes[static_cast<std::size_t>(i)];
                if (!std::isfinite(n.value)) throw ConfigError("non-finite leaf value");
                if (n.is_leaf()) continue;
                if (static_cast<std::size_t>(n.feature) >= names.size() || n.left <= i || n.right <= i ||
                    n.left >= count || n.right >= count) {
                    throw ConfigError("malformed tree node " + std::to_string(i));
                }
            }
            trees.emplace_back(std::move(nodes));
        }
        return ForestModel(std::move(names), params, std::move(trees));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed model file: ") + e.what());
    }
}

void save_forest(const ForestModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << forest_to_json(model);
    if (!out) throw IoError("write failed for " + path.string());
}

ForestModel load_forest(const std::filesystem::path& path, const std::vector<std::string>* expected_features) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return forest_from_json(buf.str(), expected_features);
}

} // namespace qers
