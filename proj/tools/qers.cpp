// qers: service, simulator, batch scoring, forest training and report data.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O error.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "qers/config.hpp"
#include "qers/csv.hpp"
#include "qers/errors.hpp"
#include "qers/forest.hpp"
#include "qers/http_server.hpp"
#include "qers/report.hpp"
#include "qers/rng.hpp"
#include "qers/scoring.hpp"
#include "qers/service.hpp"
#include "qers/simulator.hpp"
#include "qers/synthetic.hpp"

namespace {

using namespace qers;
using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitIo = 3;

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    out.close();
    if (!out) throw IoError("write failed for " + path);
}

QersConfig load_optional_config(const std::string& path) {
    if (!path.empty()) return load_config(path);
    return QersConfig{};
}

PresetTriple pick_presets(const QersConfig& cfg, const std::vector<std::string>& names) {
    auto triple = cfg.active_triple();
    for (const auto& name : names) {
        const auto& p = cfg.preset(name);
        switch (p.kind) {
        case PresetKind::Basic: triple.basic = p; break;
        case PresetKind::Tuned: triple.tuned = p; break;
        case PresetKind::Fusion: triple.fusion = p; break;
        }
    }
    return triple;
}

std::string first_line(std::string_view text) {
    for (auto line : csv::split_lines(text)) {
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) return std::string(line);
    }
    return {};
}

bool is_score_csv(std::string_view text) { return first_line(text) == csv::score_header(); }

std::vector<MetricSample> samples_from(std::string_view text) {
    if (first_line(text).empty()) return {};
    if (is_score_csv(text)) {
        std::vector<MetricSample> out;
        for (auto& row : csv::import_scores_csv(text)) out.push_back(std::move(row.sample));
        return out;
    }
    return csv::import_csv(text);
}

// Score rows as stored in a score CSV, or computed when given raw samples.
std::vector<ScoredSample> scored_rows_from(std::string_view text, const QersConfig& cfg,
                                           const PresetTriple& presets) {
    if (first_line(text).empty()) return {};
    if (is_score_csv(text)) return csv::import_scores_csv(text);
    auto samples = csv::import_csv(text);
    if (samples.empty()) return {};
    PipelineOptions opt;
    opt.ms = cfg.ms;
    opt.lambda = cfg.service.lambda;
    return zip_scores(samples, score_pipeline(samples, presets, cfg.profiles, opt));
}

// ---- serve ------------------------------------------------------------------

struct ServeArgs {
    std::string config;
    std::string bind;
    std::string store;
    std::string model;
};

int run_serve(const ServeArgs& a) {
    std::string path = a.config;
    if (path.empty()) {
        if (const char* env = std::getenv("QERS_CONFIG"); env && *env) path = env;
    }
    QersConfig cfg = load_optional_config(path);
    apply_environment(cfg);
    if (!a.bind.empty()) apply_bind(cfg.service, a.bind);
    if (!a.store.empty()) cfg.service.store_path = a.store;
    if (!a.model.empty()) cfg.service.model_path = a.model;

    // Signals are taken synchronously on this thread; worker threads
    // inherit the mask.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    QersService service(cfg);
    HttpServer server(service, cfg.service.static_dir);
    const int port = server.bind(cfg.service.host, cfg.service.port);
    server.start();
    std::cout << "qers: listening on http://" << cfg.service.host << ":" << port << std::endl;

    int sig = 0;
    sigwait(&set, &sig);
    std::cerr << "qers: shutting down\n";
    server.stop();
    return 0;
}

// ---- simulate ----------------------------------------------------------------

struct SimulateArgs {
    std::size_t devices = 1;
    std::vector<std::string> algorithms;
    std::string scenario = "near";
    std::size_t samples = 100;
    std::uint64_t seed = 1;
    std::int64_t interval_ms = 1000;
    bool realtime = false;
    std::string out;
    std::string push;
    std::size_t batch = 500;
    std::string config;
};

void push_batch(httplib::Client& client, const std::string& url, const std::vector<MetricSample>& batch) {
    auto res = client.Post("/api/v1/samples", csv::export_csv(batch), "text/csv");
    if (!res) throw IoError("cannot reach " + url + " (" + httplib::to_string(res.error()) + ")");
    if (res->status != 200) {
        throw DataError("service rejected batch with status " + std::to_string(res->status) + ": " + res->body);
    }
    const auto body = json::parse(res->body);
    if (!body.at("rejected").empty()) {
        std::cerr << "qers: " << body.at("rejected").size() << " rows rejected: " << body.at("rejected").dump() << "\n";
    }
}

int run_simulate(const SimulateArgs& a) {
    const auto cfg = load_optional_config(a.config);
    sim::FleetConfig fc;
    fc.devices = a.devices;
    fc.samples_per_stream = a.samples;
    fc.seed = a.seed;
    fc.sample_interval_ms = a.interval_ms;
    fc.realtime = a.realtime;
    fc.profiles = cfg.profiles;
    if (!a.algorithms.empty()) {
        fc.algorithms.clear();
        for (const auto& name : a.algorithms) fc.algorithms.push_back(*parse_algorithm(name));
    }
    if (a.scenario == "both") {
        fc.scenarios = {Scenario::Near, Scenario::Far};
    } else {
        fc.scenarios = {*parse_scenario(a.scenario)};
    }

    if (!a.push.empty()) {
        httplib::Client client(a.push);
        client.set_connection_timeout(5);
        std::vector<MetricSample> batch;
        std::size_t sent = 0;
        sim::run_fleet(fc, [&](const MetricSample& s) {
            batch.push_back(s);
            if (batch.size() >= a.batch || fc.realtime) {
                push_batch(client, a.push, batch);
                sent += batch.size();
                batch.clear();
            }
        });
        if (!batch.empty()) {
            push_batch(client, a.push, batch);
            sent += batch.size();
        }
        std::cerr << "qers: pushed " << sent << " samples to " << a.push << "\n";
        return 0;
    }
    write_text(a.out, csv::export_csv(sim::run_fleet(fc)));
    return 0;
}

// ---- score -------------------------------------------------------------------

struct ScoreArgs {
    std::string in;
    std::vector<std::string> presets;
    std::string out;
    std::string model;
    std::string config;
};

int run_score(const ScoreArgs& a) {
    const auto cfg = load_optional_config(a.config);
    const auto triple = pick_presets(cfg, a.presets);
    const auto samples = samples_from(read_text(a.in));
    if (samples.empty()) throw EmptyDataset("no samples in " + a.in);
    std::optional<ForestModel> model;
    if (!a.model.empty()) model = load_forest(a.model, &ml_feature_names());
    PipelineOptions opt;
    opt.ms = cfg.ms;
    opt.lambda = cfg.service.lambda;
    opt.model = model ? &*model : nullptr;
    auto records = score_pipeline(samples, triple, cfg.profiles, opt);
    for (std::size_t i = 0; i < records.size(); ++i) records[i].record_id = i + 1;
    write_text(a.out, csv::export_scores_csv(zip_scores(samples, std::move(records))));
    return 0;
}

// ---- train / evaluate -----------------------------------------------------------

struct TrainArgs {
    std::string in;
    std::string out;
    std::size_t trees = 100;
    std::uint64_t seed = 42;
    std::size_t max_depth = 12;
    std::size_t min_leaf = 5;
    std::size_t synthetic = 0;
    std::vector<std::string> presets;
    std::string config;
};

int run_train(const TrainArgs& a) {
    const auto cfg = load_optional_config(a.config);
    const auto triple = pick_presets(cfg, a.presets);
    const auto rows = scored_rows_from(read_text(a.in), cfg, triple);
    if (rows.empty()) throw EmptyDataset("no samples in " + a.in);

    TrainingSet data(ml_feature_names());
    for (const auto& r : rows) {
        const auto x = ml_features(r.sample, profile_for(cfg.profiles, r.sample.algorithm));
        data.add(x, r.score.fusion);
    }
    if (a.synthetic > 0) {
        std::vector<MetricSample> observed;
        for (const auto& r : rows) observed.push_back(r.sample);
        const auto bounds = derive_bounds(observed);
        const auto extra = generate_synthetic(fit_synthetic_spec(observed), a.synthetic, derive_seed(a.seed, {1}));
        SmootherBank smoothers(cfg.service.lambda);
        PipelineOptions opt;
        opt.ms = cfg.ms;
        const auto labels = score_samples(extra, bounds, triple, cfg.profiles, smoothers, opt);
        for (std::size_t i = 0; i < extra.size(); ++i) {
            data.add(ml_features(extra[i], profile_for(cfg.profiles, extra[i].algorithm)), labels[i].fusion);
        }
    }

    ForestParams p;
    p.n_trees = a.trees;
    p.seed = a.seed;
    p.max_depth = a.max_depth;
    p.min_leaf_size = a.min_leaf;
    const auto model = train(data, p);
    save_forest(model, a.out);
    std::cerr << "qers: trained " << model.trees().size() << " trees on " << data.rows() << " rows\n";
    return 0;
}

struct EvaluateArgs {
    std::string model;
    std::string in;
    double coverage = 0.9;
    std::vector<std::string> presets;
    std::string config;
};

int run_evaluate(const EvaluateArgs& a) {
    const auto cfg = load_optional_config(a.config);
    const auto model = load_forest(a.model, &ml_feature_names());
    const auto rows = scored_rows_from(read_text(a.in), cfg, pick_presets(cfg, a.presets));
    if (rows.empty()) throw EmptyDataset("no samples in " + a.in);
    if (!(a.coverage > 0.0 && a.coverage < 1.0)) throw ValidationError("coverage", "must be within (0,1)");

    double abs_err = 0.0, width = 0.0;
    std::size_t covered = 0;
    for (const auto& r : rows) {
        const auto x = ml_features(r.sample, profile_for(cfg.profiles, r.sample.algorithm));
        const double est = model.predict_row(x);
        const auto [lo, hi] = model.interval_row(x, a.coverage);
        abs_err += std::abs(est - r.score.fusion);
        width += hi - lo;
        if (r.score.fusion >= lo && r.score.fusion <= hi) ++covered;
    }
    const double n = static_cast<double>(rows.size());
    std::cout << "rows " << rows.size() << "\n"
              << "trees " << model.trees().size() << "\n"
              << "mae " << csv::format_number(abs_err / n) << "\n"
              << "coverage " << csv::format_number(static_cast<double>(covered) / n) << "\n"
              << "mean_interval_width " << csv::format_number(width / n) << "\n";
    return 0;
}

// ---- report ------------------------------------------------------------------

struct ReportArgs {
    std::string in;
    std::string kind;
    std::string out;
    std::string scenario;
    std::string algorithm;
    std::string config;
};

int run_report(const ReportArgs& a) {
    const auto cfg = load_optional_config(a.config);
    const auto text = read_text(a.in);
    auto rows = scored_rows_from(text, cfg, cfg.active_triple());
    if (rows.empty()) throw EmptyDataset("no samples in " + a.in);

    std::vector<MetricSample> all;
    for (const auto& r : rows) all.push_back(r.sample);
    const auto bounds = derive_bounds(all);

    std::erase_if(rows, [&](const ScoredSample& r) {
        if (!a.scenario.empty() && r.sample.scenario != *parse_scenario(a.scenario)) return true;
        if (!a.algorithm.empty() && r.sample.algorithm != *parse_algorithm(a.algorithm)) return true;
        return false;
    });
    if (rows.empty()) throw EmptyDataset("no samples match the filter");

    json out;
    if (a.kind == "heatmap") {
        out = to_json(heatmap(rows, bounds, cfg.ms), cfg.ms);
    } else if (a.kind == "distribution") {
        out = to_json(distribution(rows));
    } else {
        out = to_json(scatter(rows));
    }
    write_text(a.out, out.dump(2) + "\n");
    return 0;
}

// ---- argument validators ---------------------------------------------------------

const auto kAlgorithmName = CLI::Validator(
    [](std::string& s) -> std::string {
        return parse_algorithm(s) ? std::string{} : "unknown algorithm '" + s + "'";
    },
    "ALGORITHM");

const auto kScenarioName = CLI::Validator(
    [](std::string& s) -> std::string {
        return parse_scenario(s) ? std::string{} : "unknown scenario '" + s + "'";
    },
    "SCENARIO");

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"QERS scoring toolkit"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    ServeArgs serve;
    auto* s = app.add_subcommand("serve", "run the HTTP service");
    s->add_option("--config", serve.config, "config JSON (default: $QERS_CONFIG)");
    s->add_option("--bind", serve.bind, "host:port, overrides config and $QERS_BIND");
    s->add_option("--store", serve.store, "sample log path, overrides config and $QERS_STORE");
    s->add_option("--model", serve.model, "forest model JSON");

    SimulateArgs sim;
    auto* m = app.add_subcommand("simulate", "emit a simulated device fleet");
    m->add_option("--devices", sim.devices, "number of devices")->check(CLI::PositiveNumber);
    m->add_option("--algorithms", sim.algorithms, "algorithms to cycle through")
        ->delimiter(',')
        ->check(kAlgorithmName);
    m->add_option("--scenario", sim.scenario, "near, far or both")->check(CLI::IsMember({"near", "far", "both"}));
    m->add_option("--samples", sim.samples, "samples per device per scenario")->check(CLI::PositiveNumber);
    m->add_option("--seed", sim.seed, "master seed");
    m->add_option("--interval-ms", sim.interval_ms, "sample interval")->check(CLI::PositiveNumber);
    m->add_flag("--realtime", sim.realtime, "sleep one interval between ticks");
    auto* out_opt = m->add_option("--out", sim.out, "CSV output (default: stdout)");
    auto* push_opt = m->add_option("--push", sim.push, "service URL, e.g. http://127.0.0.1:8080");
    out_opt->excludes(push_opt);
    m->add_option("--batch", sim.batch, "samples per push request")->check(CLI::PositiveNumber);
    m->add_option("--config", sim.config, "config JSON for algorithm profiles");

    ScoreArgs score;
    auto* c = app.add_subcommand("score", "score a sample CSV");
    c->add_option("--in", score.in, "sample CSV")->required();
    c->add_option("--preset", score.presets, "preset name; replaces the default of its kind");
    c->add_option("--out", score.out, "score CSV output (default: stdout)");
    c->add_option("--model", score.model, "forest model JSON for the ML columns");
    c->add_option("--config", score.config, "config JSON");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "train the fusion forest");
    t->add_option("--in", tr.in, "score CSV (target: qers_fusion) or sample CSV")->required();
    t->add_option("--out", tr.out, "model JSON output")->required();
    t->add_option("--trees", tr.trees, "number of trees")->check(CLI::PositiveNumber);
    t->add_option("--seed", tr.seed, "training seed");
    t->add_option("--max-depth", tr.max_depth, "maximum depth, 0 = unlimited");
    t->add_option("--min-leaf", tr.min_leaf, "minimum rows per leaf")->check(CLI::PositiveNumber);
    t->add_option("--synthetic", tr.synthetic, "extra synthetic rows fitted from the input");
    t->add_option("--preset", tr.presets, "presets used to label sample CSV input");
    t->add_option("--config", tr.config, "config JSON");

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "evaluate a forest against analytic fusion");
    e->add_option("--model", ev.model, "model JSON")->required();
    e->add_option("--in", ev.in, "score CSV or sample CSV")->required();
    e->add_option("--coverage", ev.coverage, "nominal interval coverage");
    e->add_option("--preset", ev.presets, "presets used to label sample CSV input");
    e->add_option("--config", ev.config, "config JSON");

    ReportArgs rep;
    auto* r = app.add_subcommand("report", "figure data as JSON");
    r->add_option("--in", rep.in, "score CSV or sample CSV")->required();
    r->add_option("--kind", rep.kind, "heatmap, distribution or scatter")
        ->required()
        ->check(CLI::IsMember({"heatmap", "distribution", "scatter"}));
    r->add_option("--out", rep.out, "JSON output (default: stdout)");
    r->add_option("--scenario", rep.scenario, "near or far")->check(kScenarioName);
    r->add_option("--algorithm", rep.algorithm, "single algorithm")->check(kAlgorithmName);
    r->add_option("--config", rep.config, "config JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*s) return run_serve(serve);
        if (*m) return run_simulate(sim);
        if (*c) return run_score(score);
        if (*t) return run_train(tr);
        if (*e) return run_evaluate(ev);
        if (*r) return run_report(rep);
    } catch (const IoError& err) {
        std::cerr << "qers: " << err.what() << "\n";
        return kExitIo;
    } catch (const SinkFailure& err) {
        std::cerr << "qers: " << err.what() << "\n";
        return kExitIo;
    } catch (const EmptyDataset& err) {
        std::cerr << "qers: no samples: " << err.what() << "\n";
        return kExitData;
    } catch (const Error& err) {
        std::cerr << "qers: " << err.what() << "\n";
        return kExitData;
    } catch (const std::filesystem::filesystem_error& err) {
        std::cerr << "qers: " << err.what() << "\n";
        return kExitIo;
    } catch (const std::exception& err) {
        std::cerr << "qers: " << err.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
