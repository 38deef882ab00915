#include "nemf/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace nemf {

const SpatialMeasure& MeanFieldSolution::at(double t) const {
    if (snapshots.empty()) {
        throw std::out_of_range("solution has no snapshots");
    }
    const auto it = std::min_element(snapshots.begin(), snapshots.end(), [t](const auto& a, const auto& b) {
        return std::abs(a.time() - t) < std::abs(b.time() - t);
    });
    return *it;
}

namespace {

struct StepPlan {
    std::size_t steps = 0;
    std::vector<std::size_t> output_steps;
};

StepPlan plan_steps(const MeanFieldOptions& o) {
    if (!(o.T > 0.0) || !(o.dt > 0.0)) {
        throw std::invalid_argument("horizon and time step must be positive");
    }
    StepPlan plan;
    const double ratio = o.T / o.dt;
    plan.steps = static_cast<std::size_t>(std::llround(ratio));
    if (plan.steps == 0 || std::abs(ratio - static_cast<double>(plan.steps)) > 1e-6 * ratio) {
        throw std::invalid_argument("horizon must be a multiple of the time step");
    }
    plan.output_steps.push_back(0);
    for (double t : o.output_times) {
        const double r = t / o.dt;
        const auto k = static_cast<std::size_t>(std::llround(r));
        if (t < 0.0 || k > plan.steps || std::abs(r - static_cast<double>(k)) > 1e-6) {
            throw std::invalid_argument("output times must be multiples of dt inside [0, T]");
        }
        plan.output_steps.push_back(k);
    }
    plan.output_steps.push_back(plan.steps);
    std::sort(plan.output_steps.begin(), plan.output_steps.end());
    plan.output_steps.erase(std::unique(plan.output_steps.begin(), plan.output_steps.end()), plan.output_steps.end());
    return plan;
}

/// Rate of one cell, sum_k mass_k f(x_k).
double cell_rate(const ModelFunctions& model, const std::vector<Particle>& ps) {
    double r = 0.0;
    for (const auto& p : ps) {
        r += p.mass * model.f(p.x);
    }
    return r;
}

/// Transport by the midpoint rule with frozen input h, hazard decay at the
/// midpoint position, and re-injection of the lost mass at 0. Keeps the list
/// sorted by position (the discrete flow is monotone for admissible dt).
void advance_cell(const ModelFunctions& model, std::vector<Particle>& ps, double h, double dt) {
    double lost = 0.0;
    for (auto& p : ps) {
        const double xm = p.x + 0.5 * dt * (model.b(p.x) + h);
        const double x1 = p.x + dt * (model.b(xm) + h);
        const double m1 = p.mass * std::exp(-model.f(xm) * dt);
        lost += p.mass - m1;
        p.x = x1;
        p.mass = m1;
    }
    if (!std::is_sorted(ps.begin(), ps.end(), [](const auto& a, const auto& b) { return a.x < b.x; })) {
        std::stable_sort(ps.begin(), ps.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
    }
    if (lost > 0.0) {
        const auto it = std::lower_bound(ps.begin(), ps.end(), 0.0, [](const auto& p, double x) { return p.x < x; });
        ps.insert(it, Particle{0.0, lost});
    }
}

Particle merge(const Particle& a, const Particle& b) {
    const double m = a.mass + b.mass;
    if (m <= 0.0) {
        return {0.5 * (a.x + b.x), 0.0};
    }
    return {(a.mass * a.x + b.mass * b.x) / m, m};
}

/// Merges neighbours closer than x_tol, then, while above the cap, merges the
/// adjacent pairs whose merge adds the least variance.
std::size_t compact(std::vector<Particle>& ps, double x_tol, std::size_t cap) {
    std::size_t merges = 0;
    if (ps.size() < 2) {
        return 0;
    }
    std::size_t w = 0;
    for (std::size_t k = 1; k < ps.size(); ++k) {
        if (ps[k].x - ps[w].x <= x_tol) {
            ps[w] = merge(ps[w], ps[k]);
            ++merges;
        } else {
            ps[++w] = ps[k];
        }
    }
    ps.resize(w + 1);

    cap = std::max<std::size_t>(cap, 2);
    std::vector<double> cost;
    while (ps.size() > cap) {
        const std::size_t target = cap - cap / 4;
        const std::size_t excess = ps.size() - target;
        cost.resize(ps.size() - 1);
        for (std::size_t k = 0; k + 1 < ps.size(); ++k) {
            const double gap = ps[k + 1].x - ps[k].x;
            const double msum = ps[k].mass + ps[k + 1].mass;
            cost[k] = msum > 0.0 ? ps[k].mass * ps[k + 1].mass / msum * gap * gap : 0.0;
        }
        auto sorted = cost;
        const auto nth = std::min(excess, sorted.size()) - 1;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(nth), sorted.end());
        const double threshold = sorted[nth];
        std::size_t out = 0;
        std::size_t done = 0;
        for (std::size_t k = 0; k < ps.size();) {
            if (k + 1 < ps.size() && done < excess && cost[k] <= threshold) {
                ps[out++] = merge(ps[k], ps[k + 1]);
                ++done;
                k += 2;
            } else {
                ps[out++] = ps[k++];
            }
        }
        ps.resize(out);
        merges += done;
        if (done == 0) {
            break;
        }
    }
    return merges;
}

double total_mass(const std::vector<Particle>& ps) {
    double m = 0.0;
    for (const auto& p : ps) {
        m += p.mass;
    }
    return m;
}

void check_cfl(const ModelFunctions& model, double dt, MeanFieldStats& stats) {
    const double f = model.bounds().sup_f;
    if (f > 0.0 && dt > 0.1 / f) {
        std::ostringstream msg;
        msg << "time step " << dt << " exceeds 0.1/||f|| = " << 0.1 / f;
        stats.warnings.push_back(msg.str());
    }
}

struct CellStore {
    std::vector<std::vector<Particle>> cells;
    std::vector<double> initial_mass;
};

SpatialMeasure to_measure(const CellStore& store, double t) {
    SpatialMeasure mu(store.cells.size(), t);
    for (std::size_t c = 0; c < store.cells.size(); ++c) {
        mu.mutable_particles(c) = store.cells[c];
    }
    return mu;
}

void check_mass(const CellStore& store, double t, const MeanFieldOptions& o, MeanFieldStats& stats) {
    for (std::size_t c = 0; c < store.cells.size(); ++c) {
        const double drift = std::abs(total_mass(store.cells[c]) - store.initial_mass[c]);
        stats.max_mass_drift = std::max(stats.max_mass_drift, drift);
        if (drift > o.mass_tolerance * std::max(t, 1.0)) {
            std::ostringstream msg;
            msg << "mass drift " << drift << " in cell " << c << " at t=" << t << " exceeds tolerance";
            throw std::runtime_error(msg.str());
        }
    }
}

/// Shared time loop; `inputs(rates, h)` maps the per-cell rates to inputs.
template <class InputMap>
MeanFieldSolution run_solver(const ModelFunctions& model, CellStore store, const MeanFieldOptions& o,
                             InputMap inputs) {
    const auto plan = plan_steps(o);
    const std::size_t m = store.cells.size();
    MeanFieldSolution sol;
    sol.fields = FieldHistory(o.dt, plan.steps, m);
    check_cfl(model, o.dt, sol.stats);
    for (auto& cell : store.cells) {
        std::stable_sort(cell.begin(), cell.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
        sol.stats.merges += compact(cell, o.x_tol, o.particle_cap);
    }
    std::vector<double> rates(m);
    std::vector<double> h(m);
    std::size_t next_out = 0;
    for (std::size_t k = 0;; ++k) {
        const double t = o.dt * static_cast<double>(k);
        for (std::size_t c = 0; c < m; ++c) {
            rates[c] = cell_rate(model, store.cells[c]);
        }
        inputs(rates, h);
        for (std::size_t c = 0; c < m; ++c) {
            sol.fields.r[k * m + c] = rates[c];
            sol.fields.h[k * m + c] = h[c];
            if (k > 0) {
                sol.fields.H[k * m + c] = sol.fields.H[(k - 1) * m + c] + sol.fields.h[(k - 1) * m + c] * o.dt;
            }
        }
        if (next_out < plan.output_steps.size() && plan.output_steps[next_out] == k) {
            check_mass(store, t, o, sol.stats);
            sol.snapshots.push_back(to_measure(store, t));
            ++next_out;
        }
        if (k == plan.steps) {
            break;
        }
        for (std::size_t c = 0; c < m; ++c) {
            advance_cell(model, store.cells[c], h[c], o.dt);
            sol.stats.merges += compact(store.cells[c], o.x_tol, o.particle_cap);
            sol.stats.max_cell_particles = std::max(sol.stats.max_cell_particles, store.cells[c].size());
        }
    }
    sol.stats.steps = plan.steps;
    return sol;
}

}  // namespace

MeanFieldSolution solve_meanfield(const ModelFunctions& model, const StepGraphon& kernel, const SpatialMeasure& mu0,
                                  const MeanFieldOptions& options) {
    const std::size_t m = options.m_cells;
    if (m == 0) {
        throw std::invalid_argument("m_cells must be positive");
    }
    if (mu0.m_cells() != m && mu0.m_cells() != 1) {
        throw std::invalid_argument("initial measure must have m_cells cells or a single cell");
    }
    CellStore store;
    store.cells.resize(m);
    store.initial_mass.resize(m);
    for (std::size_t c = 0; c < m; ++c) {
        const std::size_t src = mu0.m_cells() == 1 ? 0 : c;
        const auto ps = mu0.particles(src);
        for (std::size_t k = 0; k < ps.size(); ++k) {
            store.cells[c].push_back({mu0.position(src, k), ps[k].mass});
        }
        store.initial_mass[c] = total_mass(store.cells[c]);
    }
    const StepGraphon K = kernel.m() == m && !kernel.analytic() ? kernel : kernel.resample(m);
    const double inv_m = 1.0 / static_cast<double>(m);
    auto inputs = [&K, m, inv_m](const std::vector<double>& r, std::vector<double>& h) {
        for (std::size_t c = 0; c < m; ++c) {
            double acc = 0.0;
            for (std::size_t d = 0; d < m; ++d) {
                acc += K(c, d) * r[d];
            }
            h[c] = acc * inv_m;
        }
    };
    return run_solver(model, std::move(store), options, inputs);
}

MeanFieldSolution solve_exchangeable(const ModelFunctions& model, double w0, std::span<const Particle> law,
                                     const MeanFieldOptions& options) {
    CellStore store;
    store.cells.emplace_back(law.begin(), law.end());
    store.initial_mass.push_back(total_mass(store.cells[0]));
    auto inputs = [w0](const std::vector<double>& r, std::vector<double>& h) { h[0] = w0 * r[0]; };
    return run_solver(model, std::move(store), options, inputs);
}

SpatialMeasure shift_by_input(const SpatialMeasure& mu, std::span<const double> H) {
    if (H.size() != mu.m_cells()) {
        throw std::invalid_argument("input field and measure cell counts differ");
    }
    SpatialMeasure out = mu;
    for (std::size_t c = 0; c < H.size(); ++c) {
        out.translate(c, -H[c]);
    }
    return out;
}

}  // namespace nemf
