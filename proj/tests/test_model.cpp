#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "nemf/model.hpp"

using namespace nemf;

namespace {

ModelSpec sigmoid(double f_max, double theta, double s) {
    ModelSpec spec;
    spec.params_f = {f_max, theta, s};
    spec.params_b = {1.0, 0.0, 1.0};
    return spec;
}

}  // namespace

TEST_CASE("sigmoid is half its ceiling at the midpoint") {
    const auto m = make_model(sigmoid(1.0, 1.0, 0.2));
    CHECK(m.f(1.0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("constant drift with zero level") {
    ModelSpec spec;
    spec.family_b = DriftFamily::constant;
    spec.params_b.beta = 0.0;
    const auto m = make_model(spec);
    CHECK(m.b(3.7) == 0.0);
    CHECK(m.bounds().sup_b == 0.0);
}

TEST_CASE("L1 norm of f' equals f_max by quadrature") {
    const auto m = make_model(sigmoid(2.0, 0.0, 1.0));
    // Simpson on [-50, 50]
    const int n = 200000;
    const double a = -50.0;
    const double h = 100.0 / n;
    double sum = std::abs(m.df(a)) + std::abs(m.df(50.0));
    for (int k = 1; k < n; ++k) {
        sum += (k % 2 ? 4.0 : 2.0) * std::abs(m.df(a + k * h));
    }
    CHECK(sum * h / 3.0 == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(m.bounds().l1_df == 2.0);
}

TEST_CASE("eval examples") {
    const auto m = make_model(sigmoid(1.0, 0.0, 1.0));
    CHECK(std::abs(m.eval(Which::f, 50.0) - 1.0) < 1e-10);
    CHECK(m.eval(Which::df, 0.0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(m.eval(Which::b, 0.0) == 0.0);
}

TEST_CASE("derivatives agree with central differences") {
    std::mt19937_64 eng(7);
    std::uniform_real_distribution<double> xs(-6.0, 6.0);
    ModelSpec soft;
    soft.family_f = IntensityFamily::capped_softplus;
    soft.params_f = {1.5, 0.3, 0.7};
    soft.params_b = {0.8, 0.5, 0.6};
    for (const auto& spec : {acceptance_model_spec(), soft}) {
        const auto m = make_model(spec);
        const double h = 1e-4;
        for (int k = 0; k < 100; ++k) {
            const double x = xs(eng);
            CHECK(std::abs(m.df(x) - (m.f(x + h) - m.f(x - h)) / (2 * h)) <= 1e-4);
            CHECK(std::abs(m.db(x) - (m.b(x + h) - m.b(x - h)) / (2 * h)) <= 1e-4);
        }
    }
}

TEST_CASE("bounds dominate sampled values") {
    ModelSpec soft;
    soft.family_f = IntensityFamily::capped_softplus;
    soft.params_f = {2.0, -0.4, 0.3};
    soft.params_b = {1.3, 0.2, 0.4};
    for (const auto& spec : {acceptance_model_spec(), soft}) {
        const auto m = make_model(spec);
        const auto& b = m.bounds();
        double max_df = 0.0;
        for (double x = -20.0; x <= 20.0; x += 1e-3) {
            CHECK(m.f(x) >= 0.0);
            CHECK(m.f(x) <= b.sup_f);
            CHECK(std::abs(m.b(x)) <= b.sup_b);
            CHECK(std::abs(m.db(x)) <= b.sup_db + 1e-15);
            CHECK(m.df(x) >= 0.0);
            max_df = std::max(max_df, m.df(x));
        }
        CHECK(max_df <= b.sup_df * (1 + 1e-12));
        // the analytic sup is attained up to grid resolution
        CHECK(max_df >= b.sup_df * (1 - 1e-4));
    }
}

TEST_CASE("invalid specs are rejected") {
    CHECK_THROWS_AS(make_model(sigmoid(1.0, 0.0, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(make_model(sigmoid(0.0, 0.0, 1.0)), std::invalid_argument);
    CHECK_THROWS_AS(make_model(sigmoid(-1.0, 0.0, 1.0)), std::invalid_argument);
    auto s = acceptance_model_spec();
    s.params_b.sigma_b = -1.0;
    CHECK_THROWS_AS(make_model(s), std::invalid_argument);
    nlohmann::json j = acceptance_model_spec();
    j["family_f"] = "exponential";
    CHECK_THROWS_AS(j.get<ModelSpec>(), std::invalid_argument);
}

TEST_CASE("silent capped family") {
    const auto m = make_model(testutil::silent_spec(0.5));
    CHECK(m.f(100.0) == 0.0);
    CHECK(m.bounds().sup_f == 0.0);
    CHECK(m.b(-3.0) == 0.5);
}

TEST_CASE("model spec JSON round trip") {
    const auto spec = acceptance_model_spec();
    const nlohmann::json j = spec;
    const auto back = j.get<ModelSpec>();
    CHECK(nlohmann::json(back) == j);
    CHECK(j.contains("family_f"));
    CHECK(j.contains("params_b"));
}
