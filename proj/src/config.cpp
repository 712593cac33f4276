#include "qers/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "qers/errors.hpp"

namespace qers {

namespace {

double weight(const json& j, const char* key) {
    if (!j.contains(key)) throw ValidationError(key, "missing weight");
    if (!j.at(key).is_number()) throw ValidationError(key, "weight must be a number");
    return j.at(key).get<double>();
}

json range_json(const ByteRange& r) { return json::array({r.min, r.max}); }

ByteRange range_from(const json& j, const char* field) {
    if (!j.is_array() || j.size() != 2) throw ValidationError(field, "expected [min, max]");
    return {j.at(0).get<std::int64_t>(), j.at(1).get<std::int64_t>()};
}

json dist_json(const CostDistribution& d) { return {{"mean", d.mean}, {"std", d.stddev}}; }

CostDistribution dist_from(const json& j, const CostDistribution& base) {
    return {j.value("mean", base.mean), j.value("std", base.stddev)};
}

} // namespace

json to_json(const WeightPreset& p) {
    json j{{"name", p.name}, {"kind", std::string(to_string(p.kind))}};
    const auto& w = p.linear;
    switch (p.kind) {
    case PresetKind::Tuned:
        j["delta"] = w.delta;
        j["epsilon"] = w.epsilon;
        j["zeta"] = w.zeta;
        j["eta"] = w.eta;
        [[fallthrough]];
    case PresetKind::Basic:
        j["alpha"] = w.alpha;
        j["beta"] = w.beta;
        j["gamma"] = w.gamma;
        break;
    case PresetKind::Fusion: {
        const auto& f = p.fusion;
        j["performance"] = {{"L", f.latency}, {"J", f.jitter}, {"P_loss", f.packet_loss}, {"E", f.energy}, {"C", f.cpu}};
        j["security"] = {{"K", f.key_size}, {"Rb", f.robustness}, {"P_r", f.proven_resistance}, {"Co", f.crypto_overhead}};
        j["alpha"] = f.mix_performance;
        j["beta"] = f.mix_security;
        j["co_direction"] = f.crypto_overhead_direction == Direction::Benefit ? "benefit" : "cost";
        break;
    }
    }
    return j;
}

WeightPreset preset_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("preset", "expected an object");
    WeightPreset p;
    try {
        p.name = j.at("name").get<std::string>();
        auto kind = parse_preset_kind(j.at("kind").get<std::string>());
        if (!kind) throw ValidationError("kind", "expected basic, tuned or fusion");
        p.kind = *kind;
        auto& w = p.linear;
        if (p.kind == PresetKind::Fusion) {
            const auto& perf = j.at("performance");
            const auto& sec = j.at("security");
            auto& f = p.fusion;
            f.latency = weight(perf, "L");
            f.jitter = weight(perf, "J");
            f.packet_loss = weight(perf, "P_loss");
            f.energy = weight(perf, "E");
            f.cpu = weight(perf, "C");
            f.key_size = weight(sec, "K");
            f.robustness = weight(sec, "Rb");
            f.proven_resistance = weight(sec, "P_r");
            f.crypto_overhead = weight(sec, "Co");
            if (j.contains("alpha") || j.contains("beta")) {
                f.mix_performance = weight(j, "alpha");
                f.mix_security = weight(j, "beta");
            }
            const auto dir = j.value("co_direction", std::string("benefit"));
            if (dir == "benefit") {
                f.crypto_overhead_direction = Direction::Benefit;
            } else if (dir == "cost") {
                f.crypto_overhead_direction = Direction::Cost;
            } else {
                throw ValidationError("co_direction", "expected benefit or cost");
            }
        } else {
            w.alpha = weight(j, "alpha");
            w.beta = weight(j, "beta");
            w.gamma = weight(j, "gamma");
            if (p.kind == PresetKind::Tuned) {
                w.delta = weight(j, "delta");
                w.epsilon = weight(j, "epsilon");
                w.zeta = weight(j, "zeta");
                w.eta = weight(j, "eta");
            }
        }
    } catch (const json::exception& e) {
        throw ValidationError("preset", e.what());
    }
    validate(p);
    return p;
}

json to_json(const AlgorithmProfile& p) {
    const auto& c = p.sim_cost;
    return {{"algorithm", std::string(to_string(p.algorithm))},
            {"key_bytes", range_json(p.key_bytes)},
            {"payload_bytes", range_json(p.payload_bytes)},
            {"robustness", p.robustness},
            {"proven_resistance", p.proven_resistance},
            {"crypto_overhead", p.crypto_overhead},
            {"sim_cost",
             {{"latency_ms", dist_json(c.latency_ms)},
              {"jitter_ms", dist_json(c.jitter_ms)},
              {"overhead_ms", dist_json(c.overhead_ms)},
              {"cpu_pct", dist_json(c.cpu_pct)},
              {"energy_mj", dist_json(c.energy_mj)}}}};
}

AlgorithmProfile profile_from_json(const json& j, const AlgorithmProfile& base) {
    AlgorithmProfile p = base;
    try {
        if (j.contains("key_bytes")) p.key_bytes = range_from(j.at("key_bytes"), "key_bytes");
        if (j.contains("payload_bytes")) p.payload_bytes = range_from(j.at("payload_bytes"), "payload_bytes");
        p.robustness = j.value("robustness", p.robustness);
        p.proven_resistance = j.value("proven_resistance", p.proven_resistance);
        p.crypto_overhead = j.value("crypto_overhead", p.crypto_overhead);
        if (j.contains("sim_cost")) {
            const auto& c = j.at("sim_cost");
            auto& out = p.sim_cost;
            if (c.contains("latency_ms")) out.latency_ms = dist_from(c.at("latency_ms"), out.latency_ms);
            if (c.contains("jitter_ms")) out.jitter_ms = dist_from(c.at("jitter_ms"), out.jitter_ms);
            if (c.contains("overhead_ms")) out.overhead_ms = dist_from(c.at("overhead_ms"), out.overhead_ms);
            if (c.contains("cpu_pct")) out.cpu_pct = dist_from(c.at("cpu_pct"), out.cpu_pct);
            if (c.contains("energy_mj")) out.energy_mj = dist_from(c.at("energy_mj"), out.energy_mj);
        }
    } catch (const json::exception& e) {
        throw ValidationError("profile", e.what());
    }
    validate(p);
    return p;
}

const WeightPreset& QersConfig::preset(const std::string& name) const {
    for (const auto& p : presets) {
        if (p.name == name) return p;
    }
    throw UnknownPreset(name);
}

PresetTriple QersConfig::active_triple() const {
    auto pick = [&](const std::string& name, PresetKind kind) {
        const auto& p = preset(name);
        if (p.kind != kind) {
            throw ConfigError("active " + std::string(to_string(kind)) + " preset " + name + " is a " +
                              std::string(to_string(p.kind)) + " preset");
        }
        return p;
    };
    return {pick(service.active.basic, PresetKind::Basic), pick(service.active.tuned, PresetKind::Tuned),
            pick(service.active.fusion, PresetKind::Fusion)};
}

void apply_bind(ServiceSettings& settings, const std::string& bind) {
    const auto colon = bind.rfind(':');
    std::string host = settings.host;
    std::string port = bind;
    if (colon != std::string::npos) {
        host = bind.substr(0, colon);
        port = bind.substr(colon + 1);
        if (host.empty()) host = settings.host;
    }
    try {
        std::size_t used = 0;
        const int value = std::stoi(port, &used);
        if (used != port.size() || value < 0 || value > 65535) throw std::invalid_argument(port);
        settings.host = host;
        settings.port = value;
    } catch (const std::exception&) {
        throw ConfigError("invalid bind address '" + bind + "'");
    }
}

void apply_environment(QersConfig& config) {
    if (const char* bind = std::getenv("QERS_BIND"); bind && *bind) apply_bind(config.service, bind);
    if (const char* store = std::getenv("QERS_STORE"); store && *store) config.service.store_path = store;
}

QersConfig config_from_json(const json& j) {
    QersConfig cfg;
    try {
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        const int version = j.value("version", kConfigVersion);
        if (version != kConfigVersion) throw ConfigError("unsupported config version " + std::to_string(version));
        cfg.ms = j.value("ms", kDefaultScale);
        if (!(cfg.ms > 0.0)) throw ConfigError("ms must be > 0");

        if (j.contains("presets")) {
            for (const auto& jp : j.at("presets")) {
                auto p = preset_from_json(jp);
                for (const auto& existing : cfg.presets) {
                    if (existing.name == p.name) throw ConfigError("duplicate preset name " + p.name);
                }
                cfg.presets.push_back(std::move(p));
            }
        }
        if (j.contains("profiles")) {
            for (const auto& jp : j.at("profiles")) {
                auto alg = parse_algorithm(jp.at("algorithm").get<std::string>());
                if (!alg) throw ConfigError("unknown algorithm in profiles");
                cfg.profiles[*alg] = profile_from_json(jp, profile_for(cfg.profiles, *alg));
            }
        }
        if (j.contains("service")) {
            const auto& s = j.at("service");
            auto& out = cfg.service;
            if (s.contains("bind")) apply_bind(out, s.at("bind").get<std::string>());
            out.store_path = s.value("store", out.store_path);
            out.window = s.value("window", out.window);
            out.lambda = s.value("lambda", out.lambda);
            out.model_path = s.value("model", out.model_path);
            out.static_dir = s.value("static_dir", out.static_dir);
            if (s.contains("active")) {
                const auto& a = s.at("active");
                out.active.basic = a.value("basic", out.active.basic);
                out.active.tuned = a.value("tuned", out.active.tuned);
                out.active.fusion = a.value("fusion", out.active.fusion);
            }
            if (out.window < 2) throw ConfigError("service.window must be >= 2");
            if (!(out.lambda > 0.0 && out.lambda <= 1.0)) throw ConfigError("service.lambda must be within (0,1]");
        }
        cfg.active_triple();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    } catch (const UnknownPreset& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

json to_json(const QersConfig& cfg) {
    json presets = json::array();
    const auto builtins = builtin_presets();
    for (const auto& p : cfg.presets) {
        const bool builtin = std::any_of(builtins.begin(), builtins.end(), [&](const auto& b) { return b.name == p.name; });
        if (!builtin) presets.push_back(to_json(p));
    }
    json profiles = json::array();
    for (const auto& [alg, p] : cfg.profiles) profiles.push_back(to_json(p));
    const auto& s = cfg.service;
    return {{"version", kConfigVersion},
            {"ms", cfg.ms},
            {"presets", presets},
            {"profiles", profiles},
            {"service",
             {{"bind", s.host + ":" + std::to_string(s.port)},
              {"store", s.store_path},
              {"window", s.window},
              {"lambda", s.lambda},
              {"model", s.model_path},
              {"static_dir", s.static_dir},
              {"active", {{"basic", s.active.basic}, {"tuned", s.active.tuned}, {"fusion", s.active.fusion}}}}}};
}

QersConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    json j;
    try {
        j = json::parse(buf.str());
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

} // namespace qers
