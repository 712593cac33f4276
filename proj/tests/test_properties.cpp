#include <doctest.h>

#include "qers/scoring.hpp"
#include "support.hpp"

using namespace qers;

namespace {

constexpr int kCases = 10000;

using test::preset;
using test::random_fusion;
using test::random_norms;

Bounds random_bounds(test::Gen& g) {
    const double a = g.uniform(-1e4, 1e4);
    const double b = g.coin(0.1) ? a : g.uniform(-1e4, 1e4);
    return {std::min(a, b), std::max(a, b)};
}

} // namespace

TEST_CASE("normalization maps the window endpoints to 0 and MS") {
    test::Gen g(1);
    for (int i = 0; i < kCases; ++i) {
        const auto b = random_bounds(g);
        const double ms = g.uniform(0.5, 1000.0);
        if (b.min == b.max) {
            CHECK(normalize(b.min, b, ms) == ms / 2.0);
            continue;
        }
        REQUIRE(normalize(b.min, b, ms) == 0.0);
        REQUIRE(normalize(b.max, b, ms) == doctest::Approx(ms).epsilon(1e-12));
    }
}

TEST_CASE("normalization stays within [0, MS] and matches the oracle") {
    test::Gen g(2);
    for (int i = 0; i < kCases; ++i) {
        const auto b = random_bounds(g);
        const double ms = g.uniform(0.5, 1000.0);
        const double x = g.uniform(-3e4, 3e4);
        const double v = normalize(x, b, ms);
        REQUIRE(v >= 0.0);
        REQUIRE(v <= ms);
        REQUIRE(v == doctest::Approx(test::oracle_norm(x, b.min, b.max, ms)).epsilon(1e-12));
    }
}

TEST_CASE("degenerate bounds give MS/2 for any value") {
    test::Gen g(3);
    for (int i = 0; i < kCases; ++i) {
        const double m = g.uniform(-1e6, 1e6);
        const double ms = g.uniform(0.5, 1000.0);
        REQUIRE(normalize(g.uniform(-1e6, 1e6), {m, m}, ms) == ms / 2.0);
    }
}

TEST_CASE("rescaling MS preserves the order of scores") {
    test::Gen g(4);
    const auto& b = preset("Basic-B");
    const auto& t = preset("Tuned-B");
    const auto& f = preset("Fusion-default");
    for (int i = 0; i < kCases; ++i) {
        const double ms2 = g.uniform(1.0, 10.0);
        const auto x = random_norms(g, 1.0);
        const auto y = random_norms(g, 1.0);
        auto scaled = [&](const NormalizedVector& n) {
            NormalizedVector out(ms2);
            for (std::size_t c = 0; c < kCriterionCount; ++c) {
                const auto cr = static_cast<Criterion>(c);
                out.set(cr, n.at(cr) * ms2);
            }
            return out;
        };
        const auto xs = scaled(x);
        const auto ys = scaled(y);
        auto same_order = [](double a1, double b1, double a2, double b2) {
            if (std::abs(a1 - b1) < 1e-9) return true;
            return (a1 < b1) == (a2 < b2);
        };
        REQUIRE(same_order(score_basic(x, b), score_basic(y, b), score_basic(xs, b), score_basic(ys, b)));
        REQUIRE(same_order(score_tuned(x, t), score_tuned(y, t), score_tuned(xs, t), score_tuned(ys, t)));
        REQUIRE(same_order(score_fusion(x, x, f).fusion, score_fusion(y, y, f).fusion,
                           score_fusion(xs, xs, f).fusion, score_fusion(ys, ys, f).fusion));
    }
}

TEST_CASE("every score lies within [0, MS]") {
    test::Gen g(5);
    const auto presets = builtin_presets();
    for (int i = 0; i < kCases; ++i) {
        const double ms = g.uniform(0.5, 1000.0);
        const auto n = random_norms(g, ms);
        for (const auto& p : presets) {
            double v = 0;
            if (p.kind == PresetKind::Basic) v = score_basic(n, p);
            if (p.kind == PresetKind::Tuned) v = score_tuned(n, p);
            if (p.kind == PresetKind::Fusion) v = score_fusion(n, n, p).fusion;
            REQUIRE(v >= 0.0);
            REQUIRE(v <= ms);
        }
        const auto rf = random_fusion(g);
        const double v = score_fusion(n, n, rf).fusion;
        REQUIRE(v >= 0.0);
        REQUIRE(v <= ms);
    }
}

TEST_CASE("scores match the formula oracles") {
    test::Gen g(6);
    for (int i = 0; i < kCases; ++i) {
        const double ms = 100.0;
        const auto n = random_norms(g, ms);
        test::Norms o;
        o.L = n.at(Criterion::Latency);
        o.J = n.at(Criterion::Jitter);
        o.P = n.at(Criterion::PacketLoss);
        o.O = n.at(Criterion::Overhead);
        o.C = n.at(Criterion::Cpu);
        o.R = n.at(Criterion::Rssi);
        o.E = n.at(Criterion::Energy);
        o.K = n.at(Criterion::KeyBytes);
        o.Rb = n.at(Criterion::Robustness);
        o.Pr = n.at(Criterion::ProvenResistance);
        o.Co = n.at(Criterion::CryptoOverhead);
        for (const char* name : {"Basic-RT", "Basic-EC", "Basic-B"}) {
            const auto& p = preset(name);
            REQUIRE(score_basic(n, p) ==
                    doctest::Approx(test::oracle_basic(o, p.linear.alpha, p.linear.beta, p.linear.gamma, ms))
                        .epsilon(1e-12));
        }
        for (const char* name : {"Tuned-RT", "Tuned-EC", "Tuned-B"}) {
            const auto& p = preset(name);
            REQUIRE(score_tuned(n, p) == doctest::Approx(test::oracle_tuned(o, p.linear, ms)).epsilon(1e-12));
        }
        auto f = random_fusion(g);
        if (g.coin()) f.fusion.crypto_overhead_direction = Direction::Cost;
        const auto got = score_fusion(n, n, f);
        const auto want = test::oracle_fusion(o, f.fusion, ms);
        REQUIRE(got.performance == doctest::Approx(want.p).epsilon(1e-12));
        REQUIRE(got.security == doctest::Approx(want.s).epsilon(1e-12));
        REQUIRE(got.fusion == doctest::Approx(want.fusion).epsilon(1e-12));
    }
}

TEST_CASE("raising a cost criterion never raises a score") {
    test::Gen g(7);
    const std::array<Criterion, 7> costs{Criterion::Latency, Criterion::Jitter, Criterion::PacketLoss,
                                         Criterion::Overhead, Criterion::Cpu, Criterion::Energy,
                                         Criterion::KeyBytes};
    for (int i = 0; i < kCases; ++i) {
        const auto n = random_norms(g, 100.0);
        const auto c = g.pick(costs);
        auto up = n;
        up.set(c, g.uniform(n.at(c), 100.0));
        for (const char* name : {"Basic-RT", "Basic-EC", "Basic-B"}) {
            REQUIRE(score_basic(up, preset(name)) <= score_basic(n, preset(name)) + 1e-12);
        }
        for (const char* name : {"Tuned-RT", "Tuned-EC", "Tuned-B"}) {
            REQUIRE(score_tuned(up, preset(name)) <= score_tuned(n, preset(name)) + 1e-12);
        }
        if (c != Criterion::KeyBytes) {
            const auto f = random_fusion(g);
            REQUIRE(score_fusion(up, n, f).fusion <= score_fusion(n, n, f).fusion + 1e-12);
        }
    }
}

TEST_CASE("raising RSSI or a security rating never lowers a score") {
    test::Gen g(8);
    for (int i = 0; i < kCases; ++i) {
        const auto n = random_norms(g, 100.0);
        auto up = n;
        up.set(Criterion::Rssi, g.uniform(n.at(Criterion::Rssi), 100.0));
        for (const char* name : {"Tuned-RT", "Tuned-EC", "Tuned-B"}) {
            REQUIRE(score_tuned(up, preset(name)) >= score_tuned(n, preset(name)) - 1e-12);
        }
        const std::array<Criterion, 4> sec{Criterion::KeyBytes, Criterion::Robustness,
                                           Criterion::ProvenResistance, Criterion::CryptoOverhead};
        const auto c = g.pick(sec);
        auto sec_up = n;
        sec_up.set(c, g.uniform(n.at(c), 100.0));
        const auto f = random_fusion(g);
        REQUIRE(score_fusion(n, sec_up, f).fusion >= score_fusion(n, n, f).fusion - 1e-12);
    }
}

TEST_CASE("fusion mix endpoints reduce to a single subscore") {
    test::Gen g(9);
    for (int i = 0; i < kCases; ++i) {
        const auto n = random_norms(g, 100.0);
        auto f = random_fusion(g);
        f.fusion.mix_performance = 1.0;
        f.fusion.mix_security = 0.0;
        const auto perf_only = score_fusion(n, n, f);
        REQUIRE(perf_only.fusion == doctest::Approx(100.0 - perf_only.performance).epsilon(1e-12));
        f.fusion.mix_performance = 0.0;
        f.fusion.mix_security = 1.0;
        const auto sec_only = score_fusion(n, n, f);
        REQUIRE(sec_only.fusion == doctest::Approx(sec_only.security).epsilon(1e-12));
    }
}

TEST_CASE("smoothing output stays between the previous state and the observation") {
    test::Gen g(10);
    for (int i = 0; i < kCases; ++i) {
        const double lambda = g.coin(0.05) ? 1.0 : g.uniform(1e-6, 1.0);
        SmoothingState s(lambda);
        double prev = g.uniform(-1e3, 1e3);
        s = smooth_step(s, prev).first;
        const double x = g.uniform(-1e3, 1e3);
        const double out = smooth_step(s, x).second;
        REQUIRE(out >= std::min(prev, x) - 1e-9);
        REQUIRE(out <= std::max(prev, x) + 1e-9);
        REQUIRE(out == doctest::Approx(lambda * x + (1 - lambda) * prev).epsilon(1e-12));
    }
}

TEST_CASE("window extremes normalize to 0 and MS in the pipeline bounds") {
    test::Gen g(11);
    for (int i = 0; i < 500; ++i) {
        std::vector<MetricSample> w;
        const auto n = static_cast<std::size_t>(g.integer(2, 40));
        for (std::size_t k = 0; k < n; ++k) w.push_back(g.sample());
        const auto b = derive_bounds(w);
        for (Criterion c : kMeasuredCriteria) {
            const auto bc = b.at(c);
            if (bc.min == bc.max) continue;
            bool saw_lo = false, saw_hi = false;
            for (const auto& s : w) {
                const double v = normalize(raw_value(s, c), bc, 100.0);
                saw_lo |= v == 0.0;
                saw_hi |= v == doctest::Approx(100.0).epsilon(1e-12);
            }
            REQUIRE(saw_lo);
            REQUIRE(saw_hi);
        }
    }
}
