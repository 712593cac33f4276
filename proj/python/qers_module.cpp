#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qers/config.hpp"
#include "qers/csv.hpp"
#include "qers/errors.hpp"
#include "qers/report.hpp"
#include "qers/scoring.hpp"
#include "qers/simulator.hpp"

namespace py = pybind11;
using namespace qers;

namespace {

const WeightPreset& find_preset(const std::string& name) {
    static const auto all = builtin_presets();
    for (const auto& p : all) {
        if (p.name == name) return p;
    }
    throw UnknownPreset(name);
}

NormalizedVector norms_from(const std::map<std::string, double>& values, double ms) {
    NormalizedVector n(ms);
    for (const auto& [id, v] : values) {
        const auto c = parse_criterion(id);
        if (!c) throw ValidationError(id, "unknown criterion");
        n.set(*c, v);
    }
    return n;
}

std::string simulate(std::size_t devices, std::size_t samples, const std::vector<std::string>& scenarios,
                     std::uint64_t seed, const std::vector<std::string>& algorithms) {
    sim::FleetConfig fc;
    fc.devices = devices;
    fc.samples_per_stream = samples;
    fc.seed = seed;
    fc.scenarios.clear();
    for (const auto& s : scenarios) {
        const auto sc = parse_scenario(s);
        if (!sc) throw ValidationError("scenario", "unknown scenario '" + s + "'");
        fc.scenarios.push_back(*sc);
    }
    if (!algorithms.empty()) {
        fc.algorithms.clear();
        for (const auto& a : algorithms) {
            const auto alg = parse_algorithm(a);
            if (!alg) throw ValidationError("algorithm", "unknown algorithm '" + a + "'");
            fc.algorithms.push_back(*alg);
        }
    }
    return csv::export_csv(sim::run_fleet(fc));
}

std::string score_csv(const std::string& text, const std::vector<std::string>& presets) {
    auto triple = default_preset_triple();
    for (const auto& name : presets) {
        const auto& p = find_preset(name);
        switch (p.kind) {
        case PresetKind::Basic: triple.basic = p; break;
        case PresetKind::Tuned: triple.tuned = p; break;
        case PresetKind::Fusion: triple.fusion = p; break;
        }
    }
    const auto samples = csv::import_csv(text);
    auto records = score_pipeline(samples, triple, builtin_profile_catalog());
    for (std::size_t i = 0; i < records.size(); ++i) records[i].record_id = i + 1;
    return csv::export_scores_csv(zip_scores(samples, std::move(records)));
}

std::string aggregates_json(const std::string& score_text) {
    return to_json(aggregate_scores(csv::import_scores_csv(score_text))).dump();
}

std::string presets_json() {
    auto out = nlohmann::json::array();
    for (const auto& p : builtin_presets()) out.push_back(to_json(p));
    return out.dump();
}

} // namespace

PYBIND11_MODULE(_qers, m) {
    m.doc() = "QERS scoring core";

    py::register_exception<Error>(m, "QersError", PyExc_ValueError);

    m.def("normalize", [](double value, double lo, double hi, double ms) { return normalize(value, {lo, hi}, ms); },
          py::arg("value"), py::arg("lo"), py::arg("hi"), py::arg("ms") = kDefaultScale);
    m.def("classify", [](double score) { return std::string(to_string(classify(score))); }, py::arg("score"));
    m.def("score_basic",
          [](const std::map<std::string, double>& norms, const std::string& preset, double ms) {
              return score_basic(norms_from(norms, ms), find_preset(preset));
          },
          py::arg("norms"), py::arg("preset") = "Basic-B", py::arg("ms") = kDefaultScale);
    m.def("score_tuned",
          [](const std::map<std::string, double>& norms, const std::string& preset, double ms) {
              return score_tuned(norms_from(norms, ms), find_preset(preset));
          },
          py::arg("norms"), py::arg("preset") = "Tuned-B", py::arg("ms") = kDefaultScale);
    m.def("score_fusion",
          [](const std::map<std::string, double>& norms, const std::string& preset, double ms) {
              const auto n = norms_from(norms, ms);
              const auto f = score_fusion(n, n, find_preset(preset));
              return std::map<std::string, double>{
                  {"performance", f.performance}, {"security", f.security}, {"fusion", f.fusion}};
          },
          py::arg("norms"), py::arg("preset") = "Fusion-default", py::arg("ms") = kDefaultScale);
    m.def("simulate", &simulate, py::arg("devices") = 1, py::arg("samples") = 100,
          py::arg("scenarios") = std::vector<std::string>{"near"}, py::arg("seed") = 1,
          py::arg("algorithms") = std::vector<std::string>{});
    m.def("score_csv", &score_csv, py::arg("text"), py::arg("presets") = std::vector<std::string>{},
          py::call_guard<py::gil_scoped_release>());
    m.def("aggregates_json", &aggregates_json, py::arg("score_text"));
    m.def("presets_json", &presets_json);
}
