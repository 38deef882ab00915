#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "nemf/meanfield.hpp"
#include "nemf/metrics.hpp"
#include "nemf/netsim.hpp"

using namespace nemf;

namespace {

const AnalyticKernel kOneMinusMax{AnalyticKernel::Kind::uniform_attachment_limit, 1.0};

MeanFieldOptions opts(double T, double dt, std::size_t m) {
    MeanFieldOptions o;
    o.T = T;
    o.dt = dt;
    o.m_cells = m;
    return o;
}

double mass_at(const SpatialMeasure& mu, std::size_t c, double x) {
    double m = 0.0;
    for (std::size_t k = 0; k < mu.particles(c).size(); ++k) {
        if (std::abs(mu.position(c, k) - x) < 1e-9) {
            m += mu.particles(c)[k].mass;
        }
    }
    return m;
}

}  // namespace

TEST_CASE("spatial measure basics") {
    SpatialMeasure mu(4, 0.5);
    CHECK(mu.cell_begin(1) == 0.25);
    CHECK(mu.cell_end(3) == 1.0);
    mu.add(1, 0.3, 0.5);
    mu.add(1, -0.3, 0.5);
    CHECK(mu.cell_mass(1) == 1.0);
    CHECK(mu.particle_count() == 2);
    CHECK_THROWS_AS(mu.add(0, 0.0, -1.0), std::invalid_argument);
    mu.translate(1, 1.0);
    CHECK(mu.position(1, 0) == 1.3);
    mu.materialize();
    CHECK(mu.offset(1) == 0.0);
    CHECK(mu.position(1, 0) == 1.3);
}

TEST_CASE("no dynamics: f == 0 and b == 0") {
    const auto model = make_model(testutil::silent_spec(0.0));
    const auto mu0 = SpatialMeasure::uniform_in_xi(InitialLaw::uniform(-1, 1).particles(16), 4);
    const auto sol = solve_meanfield(model, StepGraphon::constant(4, 1.0), mu0, opts(0.5, 1e-2, 4));
    for (double r : sol.fields.r) {
        CHECK(r == 0.0);
    }
    for (double h : sol.fields.h) {
        CHECK(h == 0.0);
    }
    const auto& end = sol.at(0.5);
    for (std::size_t c = 0; c < 4; ++c) {
        REQUIRE(end.particles(c).size() == mu0.particles(c).size());
        for (std::size_t k = 0; k < mu0.particles(c).size(); ++k) {
            CHECK(end.position(c, k) == mu0.position(c, k));
            CHECK(end.particles(c)[k].mass == mu0.particles(c)[k].mass);
        }
    }
}

TEST_CASE("two-atom solution of the loss and reset equation") {
    const double lam = 1.0;
    const double xbar = 0.7;
    const auto model = make_model(testutil::constant_rate_spec(lam));
    const auto mu0 = SpatialMeasure::uniform_in_xi(std::vector<Particle>{{xbar, 1.0}}, 3);
    auto o = opts(1.0, 1e-3, 3);
    o.output_times = {0.5, 1.0};
    const auto sol = solve_meanfield(model, StepGraphon::constant(3, 0.0), mu0, o);
    for (double t : {0.5, 1.0}) {
        const auto& mu = sol.at(t);
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(std::abs(mass_at(mu, c, xbar) - std::exp(-lam * t)) <= 1e-4);
            CHECK(std::abs(mass_at(mu, c, 0.0) - (1.0 - std::exp(-lam * t))) <= 1e-4);
        }
    }
}

TEST_CASE("constant kernel keeps xi-independent data xi-independent") {
    const auto model = make_model(acceptance_model_spec());
    const auto mu0 = SpatialMeasure::uniform_in_xi(InitialLaw::uniform(-1, 1).particles(32), 1);
    const auto sol = solve_meanfield(model, StepGraphon::constant(8, 1.0), mu0, opts(1.0, 1e-3, 8));
    const auto& mu = sol.at(1.0);
    double worst = 0.0;
    for (std::size_t c = 1; c < 8; ++c) {
        std::vector<Particle> a;
        std::vector<Particle> b;
        for (std::size_t k = 0; k < mu.particles(0).size(); ++k) {
            a.push_back({mu.position(0, k), mu.particles(0)[k].mass});
        }
        for (std::size_t k = 0; k < mu.particles(c).size(); ++k) {
            b.push_back({mu.position(c, k), mu.particles(c)[k].mass});
        }
        worst = std::max(worst, h1_line_distance(a, b));
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("mass conservation, rate bounds and H bookkeeping") {
    const auto model = make_model(acceptance_model_spec());
    const auto mu0 = SpatialMeasure::uniform_in_xi(InitialLaw::truncated_gaussian(0, 1, 3).particles(32), 1);
    auto o = opts(2.0, 1e-3, 16);
    for (int k = 1; k < 20; ++k) {
        o.output_times.push_back(0.1 * k);
    }
    const auto sol = solve_meanfield(model, StepGraphon::from_analytic(kOneMinusMax, 16), mu0, o);
    CHECK(sol.snapshots.size() == 21);
    for (const auto& mu : sol.snapshots) {
        for (std::size_t c = 0; c < mu.m_cells(); ++c) {
            CHECK(std::abs(mu.cell_mass(c) - 1.0) <= 1e-9);
        }
    }
    for (double r : sol.fields.r) {
        CHECK(r >= 0.0);
        CHECK(r <= model.bounds().sup_f);
    }
    const auto& F = sol.fields;
    for (std::size_t c = 0; c < F.m_cells; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < F.steps; ++k) {
            acc += F.input(k, c) * F.dt;
        }
        CHECK(F.integrated(F.steps, c) == doctest::Approx(acc).epsilon(1e-12));
    }
    // h = sum_d K_cd r_d / m
    const auto K = StepGraphon::from_analytic(kOneMinusMax, 16);
    for (std::size_t k : {std::size_t{0}, std::size_t{500}, F.steps - 1}) {
        for (std::size_t c = 0; c < 16; ++c) {
            double h = 0.0;
            for (std::size_t d = 0; d < 16; ++d) {
                h += K(c, d) * F.rate(k, d) / 16.0;
            }
            CHECK(F.input(k, c) == doctest::Approx(h).epsilon(1e-12));
        }
    }
    CHECK(sol.stats.max_cell_particles <= o.particle_cap);
}

TEST_CASE("exchangeable reduction") {
    const auto model = make_model(acceptance_model_spec());
    const auto law = InitialLaw::uniform(-1, 1).particles(32);
    const auto o = opts(1.0, 1e-3, 8);
    const auto full = solve_meanfield(model, StepGraphon::constant(8, 0.9), SpatialMeasure::uniform_in_xi(law, 1), o);
    const auto ref = solve_exchangeable(model, 0.9, law, o);
    const auto& a = full.at(1.0);
    const auto& b = ref.at(1.0);
    REQUIRE(b.m_cells() == 1);
    std::vector<Particle> pb;
    for (std::size_t k = 0; k < b.particles(0).size(); ++k) {
        pb.push_back({b.position(0, k), b.particles(0)[k].mass});
    }
    for (std::size_t c = 0; c < 8; ++c) {
        std::vector<Particle> pa;
        for (std::size_t k = 0; k < a.particles(c).size(); ++k) {
            pa.push_back({a.position(c, k), a.particles(c)[k].mass});
        }
        CHECK(h1_line_distance(pa, pb) <= 1e-6);
    }
}

TEST_CASE("shift by input") {
    SpatialMeasure mu(2);
    mu.add(0, 1.0, 1.0);
    mu.add(1, 0.1, 0.3);
    mu.add(1, 0.7, 0.7);
    const std::vector<double> zero{0.0, 0.0};
    const auto same = shift_by_input(mu, zero);
    CHECK(same.position(0, 0) == 1.0);
    const std::vector<double> H{0.25, 0.1 + 1e-3};
    const auto s = shift_by_input(mu, H);
    CHECK(s.position(0, 0) == 0.75);
    const std::vector<double> back{-H[0], -H[1]};
    const auto r = shift_by_input(s, back);
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t k = 0; k < mu.particles(c).size(); ++k) {
            CHECK(r.position(c, k) == mu.position(c, k));
            CHECK(r.particles(c)[k].mass == mu.particles(c)[k].mass);
        }
    }
    CHECK_THROWS_AS(shift_by_input(mu, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("invalid solver input") {
    const auto model = make_model(acceptance_model_spec());
    const auto mu0 = SpatialMeasure::uniform_in_xi(std::vector<Particle>{{0.0, 1.0}}, 3);
    CHECK_THROWS_AS(solve_meanfield(model, StepGraphon::constant(4, 1.0), mu0, opts(1.0, 1e-3, 4)),
                    std::invalid_argument);
    CHECK_THROWS_AS(solve_meanfield(model, StepGraphon::constant(3, 1.0), mu0, opts(1.0, -1e-3, 3)),
                    std::invalid_argument);
}

TEST_CASE("field CSV") {
    FieldHistory f(0.5, 2, 1);
    std::stringstream ss;
    write_csv(ss, f);
    std::string header;
    std::getline(ss, header);
    CHECK(header == "t,cell,r,h,H");
}
