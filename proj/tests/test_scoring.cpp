#include <doctest.h>

#include "qers/errors.hpp"
#include "qers/scoring.hpp"
#include "qers/simulator.hpp"
#include "support.hpp"

using namespace qers;

namespace {

using test::preset;

NormalizedVector uniform_norms(double v, double ms = 100.0) {
    NormalizedVector n(ms);
    for (std::size_t i = 0; i < kCriterionCount; ++i) n.set(static_cast<Criterion>(i), v);
    return n;
}

} // namespace

TEST_CASE("derive_bounds") {
    using test::make_sample;
    SUBCASE("latencies 10, 20, 30") {
        std::vector<MetricSample> w{make_sample(Algorithm::Kyber, Scenario::Near, 20),
                                    make_sample(Algorithm::Kyber, Scenario::Near, 10),
                                    make_sample(Algorithm::Kyber, Scenario::Near, 30)};
        const auto b = derive_bounds(w);
        CHECK(b.at(Criterion::Latency) == Bounds{10, 30});
        CHECK(b.source == BoundsSource::DatasetWindow);
    }
    SUBCASE("single sample is degenerate everywhere") {
        std::vector<MetricSample> w{make_sample(Algorithm::Ntru, Scenario::Far, 7)};
        const auto b = derive_bounds(w);
        for (Criterion c : kMeasuredCriteria) CHECK(b.at(c).min == b.at(c).max);
    }
    SUBCASE("ratings use the fixed rating scale") {
        std::vector<MetricSample> w{make_sample(Algorithm::Ntru, Scenario::Far, 7)};
        const auto b = derive_bounds(w);
        for (Criterion c : kRatingCriteria) CHECK(b.at(c) == kRatingScale);
    }
    SUBCASE("100 simulated samples match a column scan") {
        sim::FleetConfig fc;
        fc.devices = 2;
        fc.scenarios = {Scenario::Near, Scenario::Far};
        fc.samples_per_stream = 25;
        fc.seed = 99;
        const auto rows = sim::run_fleet(fc);
        REQUIRE(rows.size() == 100);
        const auto oracle = test::oracle_columns(rows);
        const auto b = derive_bounds(rows);
        for (Criterion c : kMeasuredCriteria) {
            const auto& [lo, hi] = oracle.at(std::string(criterion_id(c)));
            CHECK(b.at(c).min == lo);
            CHECK(b.at(c).max == hi);
        }
    }
    SUBCASE("empty window") {
        std::vector<MetricSample> none;
        CHECK_THROWS_AS(derive_bounds(none), EmptyDataset);
    }
}

TEST_CASE("normalize examples") {
    CHECK(normalize(50, {0, 100}, 100) == 50.0);
    CHECK(normalize(0, {0, 100}, 100) == 0.0);
    CHECK(normalize(100, {0, 100}, 100) == 100.0);
    CHECK(normalize(30, {10, 30}, 100) == 100.0);
    CHECK(normalize(20, {10, 30}, 1) == 0.5);
    CHECK(normalize(-5, {0, 10}, 100) == 0.0);
    CHECK(normalize(15, {0, 10}, 100) == 100.0);
    CHECK(normalize(7, {7, 7}, 100) == 50.0);
    CHECK(normalize(1e9, {7, 7}, 100) == 50.0);
    CHECK_THROWS_AS(normalize(1, {2, 1}, 100), InvalidBounds);
    CHECK_THROWS_AS(normalize(1, {0, 1}, 0), InvalidBounds);
}

TEST_CASE("basic score fixtures") {
    CHECK(score_basic(uniform_norms(0), preset("Basic-B")) == 100.0);
    CHECK(score_basic(uniform_norms(50), preset("Basic-B")) == doctest::Approx(57.5).epsilon(1e-12));
    CHECK(std::abs(score_basic(uniform_norms(50), preset("Basic-B")) - 57.5) < 1e-9);
    CHECK(std::abs(score_basic(uniform_norms(100), preset("Basic-RT")) - 10.0) < 1e-9);
}

TEST_CASE("basic score requires its inputs") {
    NormalizedVector n;
    n.set(Criterion::Latency, 10);
    n.set(Criterion::PacketLoss, 10);
    try {
        score_basic(n, preset("Basic-B"));
        FAIL("expected MissingCriterion");
    } catch (const MissingCriterion& e) {
        CHECK(e.criterion() == "O");
    }
    CHECK_THROWS_AS(score_basic(uniform_norms(0), preset("Tuned-B")), ValidationError);
}

TEST_CASE("tuned score fixtures") {
    auto n = uniform_norms(0);
    n.set(Criterion::Rssi, 100);
    CHECK(score_tuned(n, preset("Tuned-B")) == 100.0); // 105 clamps
    CHECK(score_tuned(uniform_norms(0), preset("Tuned-B")) == 100.0);
    CHECK(std::abs(score_tuned(uniform_norms(50), preset("Tuned-RT")) - 50.0) < 1e-9);

    NormalizedVector partial = uniform_norms(10);
    partial.erase(Criterion::Energy);
    try {
        score_tuned(partial, preset("Tuned-B"));
        FAIL("expected MissingCriterion");
    } catch (const MissingCriterion& e) {
        CHECK(e.criterion() == "E");
    }
}

TEST_CASE("tuned score clamps at zero") {
    WeightPreset heavy = preset("Tuned-B");
    heavy.linear = {1, 1, 1, 1, 0, 1, 1};
    CHECK(score_tuned(uniform_norms(100), heavy) == 0.0);
}

TEST_CASE("fusion score fixtures") {
    auto f = preset("Fusion-default");
    SUBCASE("pure performance, zero costs") {
        f.fusion.mix_performance = 1;
        f.fusion.mix_security = 0;
        CHECK(score_fusion(uniform_norms(0), uniform_norms(0), f).fusion == 100.0);
    }
    SUBCASE("pure security, full ratings") {
        f.fusion.mix_performance = 0;
        f.fusion.mix_security = 1;
        CHECK(std::abs(score_fusion(uniform_norms(0), uniform_norms(100), f).fusion - 100.0) < 1e-9);
    }
    SUBCASE("perf 40, sec 60, default weights") {
        const auto r = score_fusion(uniform_norms(40), uniform_norms(60), f);
        CHECK(std::abs(r.performance - 40.0) < 1e-9);
        CHECK(std::abs(r.security - 60.0) < 1e-9);
        CHECK(std::abs(r.fusion - 60.0) < 1e-9);
    }
    SUBCASE("cost-direction Co enters as MS - norm") {
        f.fusion.crypto_overhead_direction = Direction::Cost;
        auto sec = uniform_norms(60);
        sec.set(Criterion::CryptoOverhead, 20);
        const auto r = score_fusion(uniform_norms(40), sec, f);
        CHECK(std::abs(r.security - (0.25 * 60 + 0.35 * 60 + 0.25 * 60 + 0.15 * 80)) < 1e-9);
    }
    SUBCASE("missing security criterion") {
        auto sec = uniform_norms(60);
        sec.erase(Criterion::ProvenResistance);
        CHECK_THROWS_AS(score_fusion(uniform_norms(40), sec, f), MissingCriterion);
    }
}

TEST_CASE("smoothing") {
    SUBCASE("lambda 1 is identity") {
        SmoothingState s(1.0);
        for (double x : {3.0, -1.0, 50.0, 7.5}) {
            auto [next, out] = smooth_step(s, x);
            CHECK(out == x);
            s = next;
        }
    }
    SUBCASE("lambda 0.3 from 0 observing 10") {
        SmoothingState s(0.3);
        s = smooth_step(s, 0.0).first;
        CHECK(smooth_step(s, 10.0).second == doctest::Approx(3.0).epsilon(1e-15));
    }
    SUBCASE("first observation initializes") {
        SmoothingState s(0.3);
        CHECK_FALSE(s.current().has_value());
        CHECK(smooth_step(s, 42.0).second == 42.0);
    }
    SUBCASE("constant input is a fixed point") {
        SmoothingState s(0.3);
        for (int i = 0; i < 50; ++i) {
            auto [next, out] = smooth_step(s, 17.25);
            CHECK(out == 17.25);
            s = next;
        }
    }
    SUBCASE("converges to a new level") {
        SmoothingState s(0.3);
        s = smooth_step(s, 0.0).first;
        double out = 0;
        for (int i = 0; i < 200; ++i) std::tie(s, out) = smooth_step(s, 5.0);
        CHECK(out == doctest::Approx(5.0).epsilon(1e-12));
    }
    SUBCASE("lambda validation") {
        CHECK_THROWS_AS(SmoothingState(0.0), ValidationError);
        CHECK_THROWS_AS(SmoothingState(1.5), ValidationError);
        CHECK_NOTHROW(SmoothingState(1.0));
    }
}

TEST_CASE("smoother bank keeps streams apart") {
    SmootherBank bank(0.5);
    auto a = test::make_sample(Algorithm::Kyber, Scenario::Near, 1);
    auto b = a;
    b.scenario = Scenario::Far;
    CHECK(bank.observe(a, 10) == 10);
    CHECK(bank.observe(b, 30) == 30);
    CHECK(bank.observe(a, 20) == 15);
    CHECK(bank.observe(b, 10) == 20);
}

TEST_CASE("score_pipeline") {
    const auto triple = default_preset_triple();
    const auto profiles = builtin_profile_catalog();
    CHECK(triple.label() == "Basic-B/Tuned-B/Fusion-default");

    SUBCASE("duplicated samples give identical records") {
        auto s = test::make_sample(Algorithm::Falcon, Scenario::Near, 20);
        std::vector<MetricSample> w{s, test::make_sample(Algorithm::Kyber, Scenario::Near, 40), s};
        const auto r = score_pipeline(w, triple, profiles);
        CHECK(r[0].basic == r[2].basic);
        CHECK(r[0].tuned == r[2].tuned);
        CHECK(r[0].fusion == r[2].fusion);
        CHECK(r[0].readiness == r[2].readiness);
    }
    SUBCASE("deterministic") {
        sim::FleetConfig fc;
        fc.samples_per_stream = 40;
        const auto w = sim::run_fleet(fc);
        CHECK(score_pipeline(w, triple, profiles) == score_pipeline(w, triple, profiles));
    }
    SUBCASE("algorithm holding every cost maximum gets the lowest basic score") {
        sim::FleetConfig fc;
        fc.devices = 3;
        fc.samples_per_stream = 30;
        fc.seed = 5;
        auto w = sim::run_fleet(fc);
        const auto cols = test::oracle_columns(w);
        auto worst = test::make_sample(Algorithm::SphincsPlus, Scenario::Near, cols.at("L").second + 1);
        worst.overhead_ms = cols.at("O").second + 1;
        worst.packet_loss_pct = std::min(100.0, cols.at("P_loss").second + 1);
        w.push_back(worst);
        const auto r = score_pipeline(w, triple, profiles);
        double lowest = 1e9;
        std::size_t at = 0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (r[i].basic < lowest) {
                lowest = r[i].basic;
                at = i;
            }
        }
        CHECK(at == w.size() - 1);
        CHECK(std::abs(lowest - 15.0) < 1e-9); // 100 - (0.35 + 0.30 + 0.20) * 100
    }
    SUBCASE("records against the formula oracle") {
        sim::FleetConfig fc;
        fc.devices = 2;
        fc.scenarios = {Scenario::Near, Scenario::Far};
        fc.samples_per_stream = 20;
        const auto w = sim::run_fleet(fc);
        const auto r = score_pipeline(w, triple, profiles);
        REQUIRE(r.size() == w.size());
        for (std::size_t i = 0; i < w.size(); ++i) {
            const auto o = test::oracle_score(w[i], w, profiles.at(w[i].algorithm), triple.basic.linear,
                                              triple.tuned.linear, triple.fusion.fusion);
            CHECK(std::abs(r[i].basic - o.basic) < 1e-9);
            CHECK(std::abs(r[i].tuned - o.tuned) < 1e-9);
            CHECK(std::abs(r[i].fusion - o.fusion) < 1e-9);
            CHECK(r[i].readiness == classify(o.fusion));
            CHECK(r[i].ml_fusion == r[i].fusion);
            CHECK(r[i].ml_lo == r[i].fusion);
            CHECK(r[i].ml_hi == r[i].fusion);
            CHECK(r[i].preset == "Basic-B/Tuned-B/Fusion-default");
        }
    }
    SUBCASE("smoothing threads through each device stream") {
        sim::FleetConfig fc;
        fc.devices = 2;
        fc.samples_per_stream = 10;
        PipelineOptions opt;
        opt.lambda = 0.3;
        const auto w = sim::run_fleet(fc);
        const auto r = score_pipeline(w, triple, profiles, opt);
        std::map<std::tuple<std::string, Algorithm, Scenario>, double> state;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const auto key = std::make_tuple(w[i].device_id, w[i].algorithm, w[i].scenario);
            auto it = state.find(key);
            const double expect = it == state.end() ? r[i].fusion : 0.3 * r[i].fusion + 0.7 * it->second;
            CHECK(r[i].smoothed_fusion == doctest::Approx(expect).epsilon(1e-12));
            state[key] = expect;
        }
    }
    SUBCASE("empty window") {
        std::vector<MetricSample> none;
        CHECK_THROWS_AS(score_pipeline(none, triple, profiles), EmptyDataset);
    }
}
