#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ldadam/runner.hpp"
#include "ldadam/selfcheck.hpp"

#include <cmath>
#include <sstream>

using namespace ldadam;

namespace {

ExperimentConfig config_from(const std::string& text) {
    ConfigMap map = ConfigMap::parse_string(text);
    return parse_experiment_config(map);
}

} // namespace

TEST_CASE("config parsing: defaults, values, and strictness") {
    ExperimentConfig cfg = config_from(
        "problem.kind = quadratic\n"
        "problem.d = 24\n"
        "problem.kappa = 50\n"
        "optimizer.kind = ldadam\n"
        "optimizer.rank = 3\n"
        "optimizer.mode = analytical\n"
        "optimizer.side = left\n"
        "steps = 50\n"
        "lr.base = 0.005\n"
        "seed = 9\n");
    CHECK(cfg.quad_d == 24);
    CHECK(cfg.ldadam.rank == 3);
    CHECK(cfg.ldadam.mode == Mode::analytical);
    CHECK(cfg.beta1 == 0.908); // ldadam default
    CHECK(cfg.beta2 == 0.99);
    CHECK(cfg.effective_record_every() == 1);

    ExperimentConfig adam_cfg = config_from(
        "problem.kind = quadratic\noptimizer.kind = adam\nsteps = 20000\nlr.base = 1e-3\n");
    CHECK(adam_cfg.beta1 == 0.9); // adam default
    CHECK(adam_cfg.beta2 == 0.999);
    CHECK(adam_cfg.effective_record_every() == 10);

    CHECK_THROWS_WITH_AS(config_from("problem.kind = quadratic\noptimizer.kind = adam\n"
                                     "steps = 10\nlr.bsae = 0.1\n"),
                         doctest::Contains("unknown keys: lr.bsae"), std::runtime_error);
    CHECK_THROWS(config_from("problem.kind = nosuch\noptimizer.kind = adam\nsteps = 5\n"));
    CHECK_THROWS(config_from("problem.kind = quadratic\noptimizer.kind = adam\nsteps = 5\n"
                             "monitors = lemma9\n"));
}

TEST_CASE("identical configs give bit-identical CSV text") {
    const std::string text =
        "problem.kind = logistic\n"
        "problem.samples = 64\n"
        "problem.features = 12\n"
        "problem.batch = 8\n"
        "optimizer.kind = ldadam\n"
        "optimizer.rank = 2\n"
        "optimizer.side = left\n"
        "steps = 80\n"
        "lr.base = 0.01\n"
        "seed = 4\n";
    RunResult a = run_experiment(config_from(text));
    RunResult b = run_experiment(config_from(text));
    CHECK(trajectory_csv_string(a.records) == trajectory_csv_string(b.records));
    CHECK(a.records.size() == 80);
}

TEST_CASE("csv schema: header, every column every row, no non-finite values") {
    ExperimentConfig cfg = config_from(
        "problem.kind = quadratic\nproblem.d = 8\noptimizer.kind = adam\nsteps = 25\n"
        "lr.base = 0.05\n");
    RunResult r = run_experiment(cfg);
    std::string csv = trajectory_csv_string(r.records);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,loss,grad_norm,b_norm,e_norm,q_r,vhat_max,lr");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 7);
        CHECK(line.find("nan") == std::string::npos);
        CHECK(line.find("inf") == std::string::npos);
    }
    CHECK(rows == 25);
}

TEST_CASE("adam on a zero-noise quadratic reaches a tiny gap") {
    ExperimentConfig cfg = config_from(
        "problem.kind = quadratic\n"
        "problem.d = 16\n"
        "problem.kappa = 10\n"
        "problem.sigma = 0\n"
        "optimizer.kind = adam\n"
        "steps = 2000\n"
        "lr.base = 0.05\n");
    RunResult r = run_experiment(cfg);
    REQUIRE(r.gap_to_f_star.has_value());
    CHECK(*r.gap_to_f_star <= 1e-8);
}

TEST_CASE("monitors are wired into the summary") {
    ExperimentConfig cfg = config_from(
        "problem.kind = quadratic\n"
        "problem.d = 16\n"
        "problem.sigma = 0.2\n"
        "optimizer.kind = ldadam\n"
        "optimizer.rank = 2\n"
        "optimizer.mode = analytical\n"
        "optimizer.side = left\n"
        "steps = 60\n"
        "lr.base = 0.005\n"
        "monitors = lemma1,lemma4,gamma\n");
    RunResult r = run_experiment(cfg);
    REQUIRE(r.monitor_summaries.size() == 3);
    CHECK(r.monitors_clean());
    const std::string summary = summary_text(cfg, r);
    CHECK(summary.find("monitor lemma1") != std::string::npos);
    CHECK(summary.find("monitor gamma") != std::string::npos);
    CHECK(summary.find("clean") != std::string::npos);
}

TEST_CASE("gamma monitor preconditions are enforced at run time") {
    ExperimentConfig cfg = config_from(
        "problem.kind = quadratic\nproblem.d = 16\noptimizer.kind = adam\nsteps = 5\n"
        "monitors = gamma\n");
    CHECK_THROWS(run_experiment(cfg));
}

TEST_CASE("divergence terminates with a partial record set") {
    // An overflow-scale learning rate sends the quartic terms to infinity.
    ExperimentConfig cfg = config_from(
        "problem.kind = rosenbrock\n"
        "problem.d = 8\n"
        "optimizer.kind = adam\n"
        "steps = 4000\n"
        "lr.base = 1e160\n");
    RunResult r = run_experiment(cfg);
    CHECK(r.diverged);
    CHECK(r.steps_completed < 4000);
    CHECK(!r.divergence_message.empty());
    for (const auto& rec : r.records) CHECK(std::isfinite(rec.loss));
}

TEST_CASE("compare: deterministic rows in input order, parallel equals serial") {
    const std::string base =
        "problem.kind = quadratic\n"
        "problem.d = 12\n"
        "problem.sigma = 0.1\n"
        "steps = 120\n"
        "lr.base = 0.01\n";
    ExperimentConfig a = config_from(base + "optimizer.kind = adam\nlabel = adam\n");
    ExperimentConfig b = config_from(
        base + "optimizer.kind = ldadam\noptimizer.rank = 2\noptimizer.side = left\nlabel = ldadam\n");
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    auto serial = compare({a, b}, seeds, 1);
    auto parallel = compare({a, b}, seeds, 2);
    REQUIRE(serial.size() == 2);
    CHECK(serial[0].label == "adam");
    CHECK(serial[1].label == "ldadam");
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(serial[i].median == parallel[i].median);
        CHECK(serial[i].q25 == parallel[i].q25);
        CHECK(serial[i].q75 == parallel[i].q75);
    }
    CHECK(compare_csv(serial) == compare_csv(parallel));

    ExperimentConfig other = config_from(
        "problem.kind = rosenbrock\nproblem.d = 4\noptimizer.kind = adam\nsteps = 10\n"
        "lr.base = 0.001\n");
    CHECK_THROWS(compare({a, other}, seeds, 1));

    auto single = compare({a}, {7}, 1);
    REQUIRE(single.size() == 1);
    CHECK(single[0].runs == 1);
    CHECK(single[0].median == single[0].q25);
}

TEST_CASE("micro-batch runs stay deterministic and close to single-batch sums") {
    const std::string base =
        "problem.kind = quadratic\n"
        "problem.d = 10\n"
        "problem.sigma = 0.3\n"
        "optimizer.kind = ldadam\n"
        "optimizer.rank = 2\n"
        "optimizer.side = left\n"
        "steps = 40\n"
        "lr.base = 0.01\n";
    RunResult three_a = run_experiment(config_from(base + "micro_batches = 3\n"));
    RunResult three_b = run_experiment(config_from(base + "micro_batches = 3\n"));
    CHECK(trajectory_csv_string(three_a.records) == trajectory_csv_string(three_b.records));
}

TEST_CASE("monitor verdicts serialize as keyed CSV rows") {
    ExperimentConfig cfg = config_from(
        "problem.kind = quadratic\n"
        "problem.d = 16\n"
        "problem.sigma = 0.1\n"
        "optimizer.kind = ldadam\n"
        "optimizer.rank = 2\n"
        "optimizer.mode = analytical\n"
        "optimizer.side = left\n"
        "steps = 30\n"
        "lr.base = 0.005\n"
        "monitors = lemma1,lemma4\n"
        "label = exp7\n");
    RunResult r = run_experiment(cfg);
    const std::string csv = monitor_csv(cfg.label, r.monitor_summaries);
    CHECK(csv.find("experiment,monitor,layer,clean,checks,violations") == 0);
    CHECK(csv.find("exp7,lemma1,layer0,1,60,0") != std::string::npos);
    CHECK(csv.find("exp7,lemma4,layer0,1,30,0") != std::string::npos);
}

TEST_CASE("selfcheck battery passes") {
    std::ostringstream os;
    CHECK(run_selfcheck(os));
    CHECK(os.str().find("[FAIL]") == std::string::npos);
}
