#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "nemf/meanfield.hpp"
#include "nemf/netsim.hpp"

using namespace nemf;

namespace {

DualGrid grid(std::size_t m, double L, std::size_t nx) {
    DualGrid g;
    g.m_cells = m;
    g.L = L;
    g.nx = nx;
    return g;
}

std::vector<double> bump(const DualGrid& g, double center, double width) {
    std::vector<double> v(g.size());
    for (std::size_t c = 0; c < g.m_cells; ++c) {
        for (std::size_t j = 0; j < g.nx; ++j) {
            const double z = (g.node(j) - center) / width;
            v[c * g.nx + j] = (1.0 + 0.5 * c) * std::exp(-0.5 * z * z);
        }
    }
    return v;
}

}  // namespace

TEST_CASE("interpolation clamps outside the grid") {
    const auto g = grid(1, 1.0, 3);
    const std::vector<double> row{1.0, 2.0, 4.0};
    CHECK(interpolate(g, row, -5.0) == 1.0);
    CHECK(interpolate(g, row, 5.0) == 4.0);
    CHECK(interpolate(g, row, 0.5) == 3.0);
    CHECK(interpolate(g, row, -0.5) == 1.5);
}

TEST_CASE("static dual: f == 0, b == 0, h == 0") {
    const auto model = make_model(testutil::silent_spec(0.0));
    const FieldHistory input(1e-2, 100, 2);
    const auto g = grid(2, 3.0, 301);
    const auto terminal = bump(g, 0.2, 0.5);
    DualOptions o;
    o.ds = 1e-2;
    o.store_stride = 10;
    const auto sol = solve_dual_backward(model, input, g, terminal, 1.0, o);
    CHECK(sol.phi.slices.size() == 11);
    double err = 0.0;
    for (const auto& s : sol.phi.slices) {
        for (std::size_t k = 0; k < terminal.size(); ++k) {
            err = std::max(err, std::abs(s.values[k] - terminal[k]));
        }
    }
    CHECK(err <= 1e-12);
    CHECK(sol.diagnostics.max_abs_ds <= 1e-10);
}

TEST_CASE("pure transport along the drift") {
    // f == 0, b == beta: phi(s, x) = phi_bar(x + beta (t - s)).
    const double beta = 0.8;
    const auto model = make_model(testutil::silent_spec(beta));
    const FieldHistory input(1e-3, 1000, 1);
    const auto g = grid(1, 4.0, 8001);
    const auto terminal = bump(g, 0.0, 0.5);
    DualOptions o;
    o.ds = 1e-3;
    const auto sol = solve_dual_backward(model, input, g, terminal, 1.0, o);
    const auto& phi0 = sol.phi.initial();
    double err = 0.0;
    for (std::size_t j = 0; j < g.nx; j += 7) {
        const double x = g.node(j);
        if (std::abs(x) > 2.5) {
            continue;
        }
        const double z = (x + beta) / 0.5;
        err = std::max(err, std::abs(phi0.values[j] - std::exp(-0.5 * z * z)));
    }
    CHECK(err < 2e-3);
}

TEST_CASE("constants are fixed points") {
    const auto model = make_model(testutil::constant_rate_spec(1.0, 0.3));
    FieldHistory input(1e-2, 100, 2);
    for (std::size_t k = 0; k <= 100; ++k) {
        for (std::size_t c = 0; c < 2; ++c) {
            input.h[k * 2 + c] = 0.5;
            input.H[k * 2 + c] = 0.5 * 1e-2 * k;
        }
    }
    const auto g = grid(2, 3.0, 121);
    const std::vector<double> terminal(g.size(), 2.5);
    DualOptions o;
    o.ds = 1e-2;
    const auto sol = solve_dual_backward(model, input, g, terminal, 1.0, o);
    for (double v : sol.phi.initial().values) {
        CHECK(v == doctest::Approx(2.5).epsilon(1e-9));
    }
}

TEST_CASE("dual solver rejects grids that do not contain -H") {
    const auto model = make_model(acceptance_model_spec());
    FieldHistory input(1e-2, 100, 1);
    for (std::size_t k = 0; k <= 100; ++k) {
        input.H[k] = 0.05 * k;
    }
    const auto g = grid(1, 2.0, 201);
    const std::vector<double> terminal(g.size(), 0.0);
    DualOptions o;
    o.ds = 1e-2;
    CHECK_THROWS_AS(solve_dual_backward(model, input, g, terminal, 1.0, o), std::invalid_argument);
    CHECK_THROWS_AS(solve_dual_backward(model, input, grid(2, 9.0, 201), std::vector<double>(402, 0.0), 1.0, o),
                    std::invalid_argument);
}

TEST_CASE("duality defect examples") {
    // static case: exactly zero
    {
        const auto model = make_model(testutil::silent_spec(0.0));
        const auto mu0 = SpatialMeasure::uniform_in_xi(InitialLaw::uniform(-1, 1).particles(8), 2);
        MeanFieldOptions mo;
        mo.T = 0.5;
        mo.dt = 1e-2;
        mo.m_cells = 2;
        const auto sol = solve_meanfield(model, StepGraphon::constant(2, 1.0), mu0, mo);
        const auto g = grid(2, 3.0, 301);
        DualOptions o;
        o.ds = 1e-2;
        const auto phi = solve_dual_backward(model, sol.fields, g, bump(g, 0.1, 0.4), 0.5, o);
        CHECK(duality_defect(sol, phi.phi) <= 1e-12);
    }
    // phi == 1 pairs with the total mass
    {
        const auto model = make_model(acceptance_model_spec());
        const auto mu0 = SpatialMeasure::uniform_in_xi(InitialLaw::uniform(-1, 1).particles(8), 4);
        MeanFieldOptions mo;
        mo.T = 0.5;
        mo.dt = 1e-3;
        mo.m_cells = 4;
        const auto sol = solve_meanfield(model, StepGraphon::constant(4, 1.0), mu0, mo);
        auto g = grid(4, dual_extent(mu0, model.bounds(), sol.fields, 0.5), 401);
        DualOptions o;
        o.ds = 1e-3;
        const auto phi = solve_dual_backward(model, sol.fields, g, std::vector<double>(g.size(), 1.0), 0.5, o);
        CHECK(duality_defect(sol, phi.phi) <= 1e-6);
    }
}

TEST_CASE("defect decreases at least at first order") {
    const auto model = make_model(acceptance_model_spec());
    const auto mu0 = SpatialMeasure::uniform_in_xi(InitialLaw::uniform(-1, 1).particles(16), 2);
    const AnalyticKernel k{AnalyticKernel::Kind::uniform_attachment_limit, 1.0};
    double defects[2];
    for (int r = 0; r < 2; ++r) {
        const double dt = r == 0 ? 2e-2 : 1e-2;
        MeanFieldOptions mo;
        mo.T = 0.5;
        mo.dt = dt;
        mo.m_cells = 2;
        mo.particle_cap = 4096;
        const auto sol = solve_meanfield(model, StepGraphon::from_analytic(k, 2), mu0, mo);
        const auto g = grid(2, 4.0, 8001);
        DualOptions o;
        o.ds = dt;
        const auto phi = solve_dual_backward(model, sol.fields, g, bump(g, 0.0, 0.5), 0.5, o);
        defects[r] = duality_defect(sol, phi.phi);
    }
    CHECK(defects[1] > 0.0);
    CHECK(defects[0] / defects[1] >= 1.7);
}

TEST_CASE("kappa constants") {
    Bounds zero;
    const auto r0 = kappa_constants(zero, KappaInputs{}, 3.0);
    CHECK(r0.kappa2 == 1.0);
    CHECK(r0.kappa3 == 1.0);

    Bounds b{1.5, 0.7, 1.5, 0.4, 0.9};
    const auto r1 = kappa_constants(b, KappaInputs{}, 0.0);
    CHECK(r1.kappa2 == 1.0);
    CHECK(r1.kappa3 == 1.0);
    CHECK(r1.kappa4 == doctest::Approx(0.4 + 2 * 1.5));
    CHECK_FALSE(r1.kappa6.has_value());

    // acceptance model: sup f = 1, sup f' = 1/(4 * 0.5), |f'|_1 = 1, sup b = 1, sup b' = 1
    const auto model = make_model(acceptance_model_spec());
    KappaInputs in;
    in.eta_moment = 2.0;
    const auto r = kappa_constants(model.bounds(), in, 1.0);
    const double e6 = std::exp(6.0);
    CHECK(r.kappa2 == doctest::Approx(e6).epsilon(1e-14));
    CHECK(r.kappa3 == doctest::Approx(std::exp(2.0) * (1.0 + 0.5 * 3.0 * e6)).epsilon(1e-14));
    CHECK(r.kappa == r.kappa3);
    CHECK(r.kappa4 == doctest::Approx(3.0 * e6).epsilon(1e-14));
    CHECK(r.kappa5 == doctest::Approx(3.0 * e6).epsilon(1e-14));
    CHECK(r.kappa1 == doctest::Approx(2.0));
    REQUIRE(r.kappa6.has_value());
    // kappa2(2) = e^12, kappa3(2) = e^4 (1 + 0.5 * 4 * 3 * e^12)
    const double k_next = std::max(std::exp(12.0), std::exp(4.0) * (1.0 + 6.0 * std::exp(12.0)));
    const double expected = std::sqrt(16.0 + 2.0) * std::max(k_next, 3.0 * std::exp(12.0)) * std::sqrt(6.0) +
                            k_next * std::sqrt(M_PI * 2.0) * std::sqrt(0.5 * 2.0);
    CHECK(*r.kappa6 == doctest::Approx(expected).epsilon(1e-12));
}
