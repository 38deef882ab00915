#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "nemf/graphon.hpp"
#include "nemf/rng.hpp"

using namespace nemf;

namespace {

const AnalyticKernel kOneMinusMax{AnalyticKernel::Kind::uniform_attachment_limit, 1.0};

StepGraphon random_step(std::size_t m, std::mt19937_64& eng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(m * m);
    for (auto& x : v) {
        x = u(eng);
    }
    return StepGraphon(m, v);
}

}  // namespace

TEST_CASE("seed derivation is stable and tag-sensitive") {
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
    auto e1 = make_engine(42);
    auto e2 = make_engine(42);
    for (int k = 0; k < 10; ++k) {
        const double u = uniform01(e1);
        CHECK(u == uniform01(e2));
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("weight matrix rejects diagonal entries") {
    WeightMatrix w(3);
    CHECK_THROWS_AS(w.set(1, 1, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(WeightMatrix(2, {1.0, 0.0, 0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(WeightMatrix(2, {0.0, 1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("partition must be a permutation") {
    CHECK_THROWS_AS(Partition({0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(Partition({0, 2}), std::invalid_argument);
    const Partition p({1, 0});
    CHECK(p.cell_begin(1) == 0.0);
    CHECK(p.cell_end(0) == 1.0);
}

TEST_CASE("uniform attachment: single node") {
    const auto w = gen_uniform_attachment(1, 5);
    CHECK(w.n() == 1);
    CHECK(w(0, 0) == 0.0);
}

TEST_CASE("uniform attachment: n = 2 edge probability 1/2") {
    const int seeds = 10000;
    int hits = 0;
    for (int s = 0; s < seeds; ++s) {
        const auto w = gen_uniform_attachment(2, static_cast<std::uint64_t>(s));
        CHECK(w(0, 1) == w(1, 0));
        hits += w(0, 1) == 1.0 ? 1 : 0;
    }
    CHECK(std::abs(hits / double(seeds) - 0.5) <= testutil::binom3(0.5, seeds));
}

TEST_CASE("uniform attachment graphs for growing n are nested") {
    const auto small = gen_uniform_attachment(20, 99);
    const auto big = gen_uniform_attachment(40, 99);
    // Under growth edges are only added, never removed.
    for (std::size_t i = 0; i < 20; ++i) {
        for (std::size_t j = 0; j < 20; ++j) {
            CHECK(small(i, j) <= big(i, j));
        }
    }
}

TEST_CASE("w-random examples") {
    const auto ones = gen_w_random(StepGraphon::constant(3, 1.0), 3, 1);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(ones(i, j) == (i == j ? 0.0 : 1.0));
        }
    }
    const auto det = gen_w_random(StepGraphon::from_analytic(kOneMinusMax, 4), 4, 1, SampleMode::deterministic);
    CHECK(det(0, 3) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS_AS(gen_w_random(StepGraphon::constant(3, 2.0), 3, 1), std::invalid_argument);
}

TEST_CASE("w-random Bernoulli frequencies follow the kernel") {
    const std::size_t n = 32;
    const int seeds = 1000;
    const auto k = StepGraphon::from_analytic(kOneMinusMax, n);
    std::vector<double> counts(n * n, 0.0);
    for (int s = 0; s < seeds; ++s) {
        const auto w = gen_w_random(k, n, static_cast<std::uint64_t>(s) + 1000);
        for (std::size_t e = 0; e < n * n; ++e) {
            counts[e] += w.entries()[e];
        }
    }
    int inside = 0;
    int pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double p = 1.0 - std::max(i, j) / double(n);
            ++pairs;
            inside += std::abs(counts[i * n + j] / seeds - p) <= testutil::binom3(p, seeds) ? 1 : 0;
        }
    }
    CHECK(inside >= 0.99 * pairs);
}

TEST_CASE("step graphon under partitions") {
    const WeightMatrix sym(2, {0, 1, 1, 0});
    const auto g1 = step_graphon(sym, Partition::identity(2));
    CHECK(g1.values() == std::vector<double>{0, 1, 1, 0});
    const auto g2 = step_graphon(sym, Partition({1, 0}));
    CHECK(g2.values() == std::vector<double>{0, 1, 1, 0});
    const WeightMatrix asym(2, {0, 2, 3, 0});
    const auto g3 = step_graphon(asym, Partition({1, 0}));
    CHECK(g3.values() == std::vector<double>{0, 3, 2, 0});
}

TEST_CASE("operator norm examples") {
    CHECK(op_norm_inf_to_1(StepGraphon::constant(5, 0.0)).value == 0.0);
    const auto ones = op_norm_inf_to_1(StepGraphon::constant(7, 1.0));
    CHECK(ones.value == doctest::Approx(1.0));
    CHECK(ones.exact);
    CHECK(op_norm_inf_to_1(StepGraphon(2, {0, 1, 1, 0})).value == doctest::Approx(0.5));
    CHECK_FALSE(op_norm_inf_to_1(StepGraphon::constant(24, 1.0)).exact);
}

TEST_CASE("operator norm is invariant under simultaneous permutation") {
    std::mt19937_64 eng(3);
    for (int rep = 0; rep < 10; ++rep) {
        const auto g = random_step(7, eng);
        std::vector<std::size_t> perm(7);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), eng);
        CHECK(op_norm_inf_to_1(g.permuted(perm)).value == doctest::Approx(op_norm_inf_to_1(g).value).epsilon(1e-14));
    }
}

TEST_CASE("local search never exceeds the exhaustive norm") {
    std::mt19937_64 eng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const auto g = random_step(3 + rep % 8, eng);
        const double exact = op_norm_exhaustive(g.values(), g.m());
        const double ls = op_norm_local_search(g.values(), g.m(), 8, static_cast<std::uint64_t>(rep));
        CHECK(ls <= exact + 1e-15);
    }
}

TEST_CASE("cut distance examples") {
    std::mt19937_64 eng(5);
    const auto g = random_step(6, eng);
    const auto self = cut_distance(g, g);
    CHECK(self.value == 0.0);
    CHECK(self.exact);
    const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    const auto permuted = cut_distance(g.permuted(perm), g);
    CHECK(permuted.exact);
    CHECK(permuted.value == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(cut_distance(StepGraphon::constant(4, 1.0), StepGraphon::constant(4, 0.0)).value == doctest::Approx(1.0));
    // different sizes are compared on the common refinement
    CHECK(cut_distance(StepGraphon::constant(4, 1.0), StepGraphon::constant(3, 1.0)).value == doctest::Approx(0.0));
    CHECK(cut_distance(StepGraphon::constant(2, 1.0), StepGraphon::constant(3, 0.5)).value == doctest::Approx(0.5));
}

TEST_CASE("cut distance triangle inequality on exact instances") {
    std::mt19937_64 eng(17);
    for (int rep = 0; rep < 6; ++rep) {
        const std::size_t m = 4 + rep % 3;
        const auto a = random_step(m, eng);
        const auto b = random_step(m, eng);
        const auto c = random_step(m, eng);
        const double ac = cut_distance(a, c).value;
        const double ab = cut_distance(a, b).value;
        const double bc = cut_distance(b, c).value;
        CHECK(ac <= ab + bc + 1e-12);
    }
}

TEST_CASE("modulus of continuity") {
    const auto zero = modulus_of_continuity(StepGraphon::constant(8, 0.7), 8);
    for (double v : zero.values()) {
        CHECK(v == 0.0);
    }

    // 1 - max is 1-Lipschitz in each variable; the periodic wrap adds at most h.
    const auto k = StepGraphon::from_analytic(kOneMinusMax, 256);
    const std::vector<double> hs{1.0 / 256, 0.01, 0.03, 0.1};
    const auto d = shift_differences(k, hs);
    for (std::size_t i = 0; i < hs.size(); ++i) {
        CHECK(d.xi_direction[i] <= 2 * hs[i] + 1e-12);
        // Midpoint quadrature of the analytic kernel as an oracle.
        const int n = 1024;
        double q = 0.0;
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                const double xi = (a + 0.5) / n;
                const double zeta = (b + 0.5) / n;
                double xs = xi - hs[i];
                xs -= std::floor(xs);
                q += std::abs(kOneMinusMax.eval(xs, zeta) - kOneMinusMax.eval(xi, zeta));
            }
        }
        q /= double(n) * n;
        CHECK(d.xi_direction[i] == doctest::Approx(q).epsilon(0.02));
    }

    // Single 0/1 table: eps(1/m) is the fraction of cells that change under a one-cell shift.
    std::mt19937_64 eng(23);
    const std::size_t m = 6;
    std::vector<double> v(m * m);
    for (auto& x : v) {
        x = (eng() & 1) ? 1.0 : 0.0;
    }
    const StepGraphon g(m, v);
    double rows = 0.0;
    double cols = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            rows += std::abs(v[((i + m - 1) % m) * m + j] - v[i * m + j]);
            cols += std::abs(v[i * m + (j + m - 1) % m] - v[i * m + j]);
        }
    }
    const auto eps = modulus_of_continuity(g, m);
    CHECK(eps(1.0 / m) == doctest::Approx(std::max(rows, cols) / double(m * m)).epsilon(1e-14));

    // dominance over every measured shift
    std::vector<double> grid;
    for (std::size_t k2 = 0; k2 <= m; ++k2) {
        grid.push_back(double(k2) / m);
    }
    const auto dd = shift_differences(g, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(std::max(dd.xi_direction[i], dd.zeta_direction[i]) <= eps(grid[i]) + 1e-15);
    }
}

TEST_CASE("CSV round trips") {
    std::mt19937_64 eng(1);
    const auto g = random_step(5, eng);
    std::stringstream ss;
    write_csv(ss, g);
    const auto back = read_step_graphon_csv(ss);
    CHECK(back.values() == g.values());

    const auto w = gen_uniform_attachment(9, 4);
    std::stringstream sw;
    write_csv(sw, w);
    CHECK(read_weight_matrix_csv(sw).entries() == w.entries());
}
