#include <doctest.h>

#include <httplib.h>

#include <map>
#include <sstream>
#include <thread>

#include "qers/csv.hpp"
#include "qers/report.hpp"
#include "qers/service.hpp"
#include "process.hpp"
#include "support.hpp"

using namespace qers;
using nlohmann::json;

namespace {

const std::string kCli = QERS_CLI_PATH;

test::RunResult qers_cli(std::vector<std::string> args, const std::vector<std::string>& env = {}) {
    args.insert(args.begin(), kCli);
    return test::run(args, env);
}

// Polls /api/v1/health until it answers or the deadline passes.
bool wait_healthy(int port, std::chrono::milliseconds deadline) {
    const auto until = std::chrono::steady_clock::now() + deadline;
    httplib::Client c("127.0.0.1", port);
    c.set_connection_timeout(0, 200'000);
    while (std::chrono::steady_clock::now() < until) {
        if (auto res = c.Get("/api/v1/health"); res && res->status == 200) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(25));
    }
    return false;
}

} // namespace

TEST_CASE("simulate writes the expected number of rows") {
    test::TempDir dir;
    const auto out = dir.file("s.csv");
    const auto r = qers_cli({"simulate", "--devices", "2", "--samples", "100", "--scenario", "both", "--seed", "3",
                             "--out", out});
    REQUIRE(r.exit_code == 0);
    const auto rows = csv::import_csv(test::slurp(out));
    CHECK(rows.size() == 400);
    CHECK(csv::split_lines(test::slurp(out)).size() == 401);

    const auto to_stdout = qers_cli({"simulate", "--devices", "2", "--samples", "100", "--scenario", "both",
                                     "--seed", "3"});
    CHECK(to_stdout.out == test::slurp(out));
    const auto other = qers_cli({"simulate", "--devices", "2", "--samples", "100", "--scenario", "both",
                                 "--seed", "4"});
    CHECK(other.out != to_stdout.out);
}

TEST_CASE("simulate restricts algorithms") {
    const auto r = qers_cli({"simulate", "--algorithms", "kyber,ntru", "--samples", "10"});
    REQUIRE(r.exit_code == 0);
    for (const auto& s : csv::import_csv(r.out)) {
        CHECK((s.algorithm == Algorithm::Kyber || s.algorithm == Algorithm::Ntru));
    }
}

TEST_CASE("usage errors exit 1") {
    auto r = qers_cli({"simulate", "--algorithms", "rsa"});
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("rsa") != std::string::npos);
    CHECK(qers_cli({}).exit_code == 1);
    CHECK(qers_cli({"simulate", "--devices", "0"}).exit_code == 1);
    CHECK(qers_cli({"simulate", "--out", "a", "--push", "http://x"}).exit_code == 1);
    CHECK(qers_cli({"report", "--in", "x", "--kind", "pie"}).exit_code == 1);
    CHECK(qers_cli({"--help"}).exit_code == 0);
}

TEST_CASE("score computes Basic-RT from crafted rows") {
    test::TempDir dir;
    auto lo = test::make_sample(Algorithm::Kyber, Scenario::Near, 10, 1000);
    lo.overhead_ms = 5;
    lo.packet_loss_pct = 0;
    auto hi = test::make_sample(Algorithm::Kyber, Scenario::Near, 90, 2000);
    hi.overhead_ms = 50;
    hi.packet_loss_pct = 20;
    test::spit(dir.file("in.csv"), csv::export_csv(std::vector{lo, hi}));
    const auto r = qers_cli({"score", "--in", dir.file("in.csv"), "--preset", "Basic-RT"});
    REQUIRE(r.exit_code == 0);
    const auto rows = csv::import_scores_csv(r.out);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].score.basic == 100.0);
    CHECK(std::abs(rows[1].score.basic - 10.0) < 1e-9);
    CHECK(rows[1].score.preset == "Basic-RT/Tuned-B/Fusion-default");
}

TEST_CASE("scoring a score file reproduces it") {
    test::TempDir dir;
    const auto sim = qers_cli({"simulate", "--devices", "2", "--samples", "30", "--scenario", "both"});
    test::spit(dir.file("s.csv"), sim.out);
    const auto first = qers_cli({"score", "--in", dir.file("s.csv")});
    REQUIRE(first.exit_code == 0);
    test::spit(dir.file("scored.csv"), first.out);
    const auto second = qers_cli({"score", "--in", dir.file("scored.csv"), "--out", dir.file("again.csv")});
    REQUIRE(second.exit_code == 0);
    CHECK(test::slurp(dir.file("again.csv")) == first.out);
}

TEST_CASE("train and evaluate") {
    test::TempDir dir;
    test::spit(dir.file("s.csv"),
               qers_cli({"simulate", "--devices", "2", "--samples", "100", "--scenario", "both"}).out);
    const auto model = dir.file("m.json");
    REQUIRE(qers_cli({"train", "--in", dir.file("s.csv"), "--out", model, "--trees", "20", "--max-depth", "0",
                      "--min-leaf", "1"})
                .exit_code == 0);
    const auto ev = qers_cli({"evaluate", "--model", model, "--in", dir.file("s.csv")});
    REQUIRE(ev.exit_code == 0);
    std::istringstream lines(ev.out);
    std::map<std::string, double> stats;
    std::string key;
    double value;
    while (lines >> key >> value) stats[key] = value;
    CHECK(stats.at("rows") == 400);
    CHECK(stats.at("trees") == 20);
    CHECK(stats.at("mae") <= 1.0);
    CHECK(stats.at("coverage") >= 0.0);

    const auto one = dir.file("one.json");
    REQUIRE(qers_cli({"train", "--in", dir.file("s.csv"), "--out", one, "--trees", "1"}).exit_code == 0);
    const auto ev1 = qers_cli({"evaluate", "--model", one, "--in", dir.file("s.csv")});
    REQUIRE(ev1.exit_code == 0);
    CHECK(ev1.out.find("mean_interval_width 0\n") != std::string::npos);

    // The model feeds the ML columns of score.
    const auto scored = qers_cli({"score", "--in", dir.file("s.csv"), "--model", model});
    REQUIRE(scored.exit_code == 0);
    for (const auto& r : csv::import_scores_csv(scored.out)) {
        REQUIRE(r.score.ml_lo <= r.score.ml_fusion);
        REQUIRE(r.score.ml_fusion <= r.score.ml_hi);
    }

    auto doc = json::parse(test::slurp(model));
    std::swap(doc["feature_names"][0], doc["feature_names"][1]);
    test::spit(dir.file("swapped.json"), doc.dump());
    const auto mismatch = qers_cli({"evaluate", "--model", dir.file("swapped.json"), "--in", dir.file("s.csv")});
    CHECK(mismatch.exit_code == 2);
    CHECK(mismatch.err.find("feature") != std::string::npos);
}

TEST_CASE("report scatter has one point per algorithm") {
    test::TempDir dir;
    test::spit(dir.file("s.csv"), qers_cli({"simulate", "--devices", "2", "--samples", "50"}).out);
    const auto r = qers_cli({"report", "--in", dir.file("s.csv"), "--kind", "scatter"});
    REQUIRE(r.exit_code == 0);
    CHECK(json::parse(r.out)["points"].size() == 5);
    const auto d = qers_cli({"report", "--in", dir.file("s.csv"), "--kind", "distribution", "--algorithm", "ntru"});
    CHECK(json::parse(d.out)["algorithms"].size() == 1);
}

TEST_CASE("empty input and missing files") {
    test::TempDir dir;
    test::spit(dir.file("empty.csv"), "");
    auto r = qers_cli({"score", "--in", dir.file("empty.csv")});
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("no samples") != std::string::npos);
    test::spit(dir.file("header.csv"), std::string(csv::kSampleHeader) + "\n");
    CHECK(qers_cli({"report", "--in", dir.file("header.csv"), "--kind", "heatmap"}).exit_code == 2);
    CHECK(qers_cli({"score", "--in", dir.file("absent.csv")}).exit_code == 3);
    CHECK(qers_cli({"score", "--in", dir.file("empty.csv"), "--config", dir.file("nope.json")}).exit_code == 3);
    test::spit(dir.file("bad.csv"), std::string(csv::kSampleHeader) + "\n1,dev,kyber,near,x,1,1,1,1,-50,1,9\n");
    r = qers_cli({"score", "--in", dir.file("bad.csv")});
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("line 2") != std::string::npos);
}

TEST_CASE("serve answers health quickly, rejects a busy port and shuts down cleanly") {
    test::TempDir dir;
    const int port = test::free_port();
    const std::string bind = "127.0.0.1:" + std::to_string(port);
    const auto t0 = std::chrono::steady_clock::now();
    test::Child server({kCli, "serve", "--bind", bind}, dir.file("serve.err"));
    REQUIRE(wait_healthy(port, std::chrono::seconds(2)));
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(2));

    test::Child second({kCli, "serve", "--bind", bind}, dir.file("second.err"));
    CHECK(second.wait_exit(std::chrono::seconds(5)) == 3);
    CHECK(test::slurp(dir.file("second.err")).find(std::to_string(port)) != std::string::npos);

    CHECK(server.stop() == 0);
}

TEST_CASE("serve takes its bind address from the environment") {
    test::TempDir dir;
    const int port = test::free_port();
    const auto cfg = dir.file("cfg.json");
    test::spit(cfg, R"({"version": 1, "service": {"bind": "127.0.0.1:1"}})");
    // Spawn through env: the config names a bad port, QERS_BIND wins.
    const pid_t pid = ::fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        const std::string env_bind = "QERS_BIND=127.0.0.1:" + std::to_string(port);
        const std::string env_cfg = "QERS_CONFIG=" + cfg;
        ::putenv(const_cast<char*>(env_bind.c_str()));
        ::putenv(const_cast<char*>(env_cfg.c_str()));
        const int null = ::open("/dev/null", O_WRONLY);
        ::dup2(null, 1);
        ::dup2(null, 2);
        ::execl(kCli.c_str(), kCli.c_str(), "serve", static_cast<char*>(nullptr));
        ::_exit(127);
    }
    const bool up = wait_healthy(port, std::chrono::seconds(3));
    ::kill(pid, SIGTERM);
    int status = 0;
    ::waitpid(pid, &status, 0);
    CHECK(up);
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
}

TEST_CASE("push ingests into a running service and the CLI heatmap matches the service") {
    test::TempDir dir;
    const int port = test::free_port();
    test::Child server({kCli, "serve", "--bind", "127.0.0.1:" + std::to_string(port), "--store",
                        dir.file("store.csv")},
                       dir.file("serve.err"));
    REQUIRE(wait_healthy(port, std::chrono::seconds(3)));
    const auto url = "http://127.0.0.1:" + std::to_string(port);
    const auto push = qers_cli({"simulate", "--devices", "2", "--samples", "50", "--scenario", "both", "--push", url,
                                "--batch", "1000"});
    REQUIRE(push.exit_code == 0);

    httplib::Client c("127.0.0.1", port);
    const auto health = json::parse(c.Get("/api/v1/health")->body);
    CHECK(health["samples"] == 200);
    const auto service_heatmap = json::parse(c.Get("/api/v1/report/heatmap")->body);
    test::spit(dir.file("export.csv"), c.Get("/api/v1/scores/export")->body);
    const auto cli = qers_cli({"report", "--in", dir.file("export.csv"), "--kind", "heatmap"});
    REQUIRE(cli.exit_code == 0);
    const auto cli_heatmap = json::parse(cli.out);
    CHECK(cli_heatmap["algorithms"] == service_heatmap["algorithms"]);
    for (std::size_t a = 0; a < 5; ++a) {
        for (std::size_t k = 0; k < 8; ++k) {
            CHECK(cli_heatmap["matrix"][a][k].get<double>() ==
                  doctest::Approx(service_heatmap["matrix"][a][k].get<double>()).epsilon(1e-12));
        }
    }
    CHECK(server.stop() == 0);

    const auto unreachable = qers_cli({"simulate", "--samples", "5", "--push", url});
    CHECK(unreachable.exit_code == 3);
}
