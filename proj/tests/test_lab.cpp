#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nemf/lab.hpp"

using namespace nemf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("nemf_lab_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("config validation") {
    ExperimentConfig c;
    c.n_list = {8, 8};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.n_list = {8, 16};
    c.trials = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.trials = 1;
    c.T = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.T = 1.0;
    CHECK_NOTHROW(c.validate());
    CHECK_THROWS_AS(experiment_from_string("nope"), std::invalid_argument);
}

TEST_CASE("config JSON round trip") {
    ExperimentConfig c;
    c.experiment = ExperimentId::coupling;
    c.kernel.type = KernelSpec::Type::w_random;
    c.kernel.mode = SampleMode::deterministic;
    c.initial = InitialLaw::uniform(-1, 2);
    c.n_list = {4, 9};
    c.seed = 123456789012345ULL;
    const nlohmann::json j = c;
    const auto back = j.get<ExperimentConfig>();
    CHECK(nlohmann::json(back) == j);
}

TEST_CASE("budget rejection") {
    ExperimentConfig c;
    c.experiment = ExperimentId::convergence;
    c.n_list = {1000};
    c.trials = 10;
    c.event_budget = 100.0;
    CHECK(projected_events(c) == doctest::Approx(1000.0 * 10.0));
    CHECK_THROWS_WITH_AS(run_experiment(c), doctest::Contains("exceeds the budget"), std::invalid_argument);
}

TEST_CASE("convergence smoke run") {
    ExperimentConfig c;
    c.experiment = ExperimentId::convergence;
    c.kernel.type = KernelSpec::Type::uniform_attachment;
    c.n_list = {8};
    c.T = 0.1;
    const auto rep = run_experiment(c);
    REQUIRE(rep.rows.size() == 1);
    CHECK(std::isfinite(rep.rows[0].value));
    const auto dir = scratch("smoke");
    emit_report(rep, dir);
    CHECK(fs::exists(dir / "raw.csv"));
    CHECK(fs::exists(dir / "summary.json"));
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest.at("config").at("experiment") == "convergence");
    CHECK(manifest.contains("code_version"));
    CHECK(manifest.at("trial_seeds").size() == 1);
}

TEST_CASE("input concentration rows and bounds") {
    ExperimentConfig c;
    c.experiment = ExperimentId::input_concentration;
    c.n_list = {16, 64};
    c.trials = 4;
    const auto rep = run_experiment(c);
    REQUIRE(rep.rows.size() == 8);
    for (const auto& r : rep.rows) {
        CHECK(r.value >= 0.0);
        CHECK(r.bound == doctest::Approx(std::sqrt(1.0 * 1.0 * 1.0 / r.N)).epsilon(1e-15));
    }
}

TEST_CASE("initial data means within the declared bound") {
    ExperimentConfig c;
    c.experiment = ExperimentId::initial_data;
    c.initial = InitialLaw::uniform(-1, 1);
    c.n_list = {100, 400};
    c.trials = 20;
    const auto rep = run_experiment(c);
    for (auto N : c.n_list) {
        const auto* a = rep.find("h11_initial", N);
        REQUIRE(a != nullptr);
        CHECK(a->bound == doctest::Approx(2.0 / std::sqrt(double(N))));
        CHECK(a->mean <= a->bound);
    }
    CHECK_FALSE(rep.bound_violated());
}

TEST_CASE("reports are reproducible and recomputable") {
    ExperimentConfig c;
    c.experiment = ExperimentId::input_concentration;
    c.kernel.type = KernelSpec::Type::uniform_attachment;
    c.initial = InitialLaw::uniform(-0.5, 0.5);
    c.n_list = {10, 20};
    c.trials = 3;
    c.T = 0.5;
    const auto d1 = scratch("rep1");
    const auto d2 = scratch("rep2");
    emit_report(run_experiment(c), d1);
    emit_report(run_experiment(c), d2);
    CHECK(slurp(d1 / "raw.csv") == slurp(d2 / "raw.csv"));
    // overwrite is idempotent
    emit_report(run_experiment(c), d1);
    CHECK(slurp(d1 / "raw.csv") == slurp(d2 / "raw.csv"));

    std::ifstream is(d1 / "raw.csv");
    const auto rows = read_raw_csv(is);
    const auto summary = nlohmann::json::parse(slurp(d1 / "summary.json"));
    const auto aggs = aggregate(rows);
    REQUIRE(aggs.size() == summary.at("aggregates").size());
    for (std::size_t k = 0; k < aggs.size(); ++k) {
        CHECK(std::abs(aggs[k].mean - summary["aggregates"][k]["mean"].get<double>()) <= 1e-12);
    }
}

TEST_CASE("adding trials does not perturb earlier ones") {
    ExperimentConfig c;
    c.experiment = ExperimentId::initial_data;
    c.initial = InitialLaw::uniform(-1, 1);
    c.n_list = {30};
    c.trials = 2;
    const auto a = run_experiment(c);
    c.trials = 5;
    const auto b = run_experiment(c);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(a.rows[k].value == b.rows[k].value);
        CHECK(a.rows[k].seed == b.rows[k].seed);
    }
}

TEST_CASE("empty trial set gives a header-only CSV and valid JSON") {
    ExperimentReport rep;
    rep.config.experiment = ExperimentId::initial_data;
    const auto dir = scratch("empty");
    emit_report(rep, dir);
    CHECK(slurp(dir / "raw.csv") == "experiment,N,trial,t,metric,value,bound,seed\n");
    CHECK(nlohmann::json::parse(slurp(dir / "summary.json")).is_object());
    CHECK(nlohmann::json::parse(slurp(dir / "manifest.json")).is_object());
}

TEST_CASE("unwritable directory") {
    ExperimentReport rep;
    const auto file = scratch("blocker");
    std::ofstream(file.string()) << "x";
    CHECK_THROWS_AS(emit_report(rep, file / "sub"), std::runtime_error);
    fs::remove(file);
}

TEST_CASE("aggregation and slope fit") {
    std::vector<RawRow> rows;
    for (std::size_t N : {10, 100, 1000}) {
        for (int t = 0; t < 3; ++t) {
            rows.push_back({"x", N, std::size_t(t), 1.0, "m", (1.0 + 0.1 * (t - 1)) / std::sqrt(double(N)), 0.0, 0});
        }
    }
    const auto aggs = aggregate(rows);
    REQUIRE(aggs.size() == 3);
    CHECK(aggs[0].count == 3);
    CHECK(aggs[0].mean == doctest::Approx(1.0 / std::sqrt(10.0)));
    CHECK(aggs[0].stderr_ == doctest::Approx(0.1 / std::sqrt(10.0) / std::sqrt(3.0)));
    const auto fit = fit_loglog_slope(aggs, "m");
    CHECK(fit.slope == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(fit.ci_low <= fit.slope);
    CHECK(fit.ci_high >= fit.slope);
    CHECK(fit.points == 3);
}

TEST_CASE("moment envelope") {
    Bounds b{1.0, 0.5, 1.0, 1.0, 1.0};
    // (E0 + C1 t) e^{C2 t}, C1 = 1 + 1 * 4 / 100, C2 = 1 + 2 * 1 * 2
    CHECK(moment_envelope(b, 2.0, 100, 0.5, 1.0) == doctest::Approx((0.5 + 1.04) * std::exp(5.0)));
}
