#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "nemf/dual.hpp"
#include "nemf/meanfield.hpp"

namespace nemf {

void DualGrid::validate() const {
    if (m_cells == 0 || nx < 2 || !(L > 0.0) || !std::isfinite(L)) {
        throw std::invalid_argument("dual grid needs m_cells >= 1, nx >= 2 and L > 0");
    }
}

double interpolate(const DualGrid& grid, std::span<const double> row, double x) noexcept {
    const double u = (x + grid.L) / grid.dx();
    if (!(u > 0.0)) {
        return row[0];
    }
    const double last = static_cast<double>(grid.nx - 1);
    if (u >= last) {
        return row[grid.nx - 1];
    }
    const auto j = static_cast<std::size_t>(u);
    const double a = u - static_cast<double>(j);
    return row[j] + a * (row[j + 1] - row[j]);
}

double DualSlice::value(const DualGrid& grid, std::size_t c, double x) const noexcept {
    return interpolate(grid, std::span<const double>(values).subspan(c * grid.nx, grid.nx), x);
}

void write_csv(std::ostream& os, const DualTestFunction& phi) {
    os << "s,cell,x,phi\n";
    os.precision(17);
    for (const auto& slice : phi.slices) {
        for (std::size_t c = 0; c < phi.grid.m_cells; ++c) {
            for (std::size_t j = 0; j < phi.grid.nx; ++j) {
                os << slice.s << ',' << c << ',' << phi.grid.node(j) << ',' << slice.values[c * phi.grid.nx + j]
                   << '\n';
            }
        }
    }
}

DualSolution solve_dual_backward(const ModelFunctions& model, const InputField& input, const DualGrid& grid,
                                 std::span<const double> terminal, double t, const DualOptions& options,
                                 const SliceObserver& observer) {
    grid.validate();
    if (terminal.size() != grid.size()) {
        throw std::invalid_argument("terminal datum does not match the grid");
    }
    if (input.m_cells != grid.m_cells) {
        throw std::invalid_argument("input field and dual grid cell counts differ");
    }
    if (!(options.ds > 0.0) || !(t > 0.0)) {
        throw std::invalid_argument("t and ds must be positive");
    }
    const auto K = static_cast<std::size_t>(std::llround(t / options.ds));
    if (K == 0 || std::abs(t / options.ds - static_cast<double>(K)) > 1e-6) {
        throw std::invalid_argument("t must be a multiple of ds");
    }
    if (t > input.horizon() * (1.0 + 1e-12)) {
        throw std::invalid_argument("input field does not cover [0, t]");
    }
    for (double v : terminal) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("terminal datum must be finite");
        }
    }
    const double ds = options.ds;
    const std::size_t m = grid.m_cells;
    const std::size_t nx = grid.nx;
    const double inner = grid.L - grid.dx();
    for (std::size_t k = 0; k <= K; ++k) {
        const double s = ds * static_cast<double>(k);
        for (std::size_t c = 0; c < m; ++c) {
            if (std::abs(input.integrated_at(s, c)) > inner) {
                std::ostringstream msg;
                msg << "x-grid half-width " << grid.L << " does not contain -H(" << s << ", cell " << c
                    << "); extend L";
                throw std::invalid_argument(msg.str());
            }
        }
    }

    DualSolution out;
    out.phi.grid = grid;
    DualSlice cur{t, std::vector<double>(terminal.begin(), terminal.end())};
    DualSlice next{0.0, std::vector<double>(grid.size())};
    if (observer) {
        observer(grid, cur);
    }
    std::vector<DualSlice> stored{cur};
    std::vector<double> A(nx);
    std::vector<double> B(nx);

    for (std::size_t k = K; k-- > 0;) {
        const double s0 = ds * static_cast<double>(k);
        const double s1 = ds * static_cast<double>(k + 1);
        const double sm = 0.5 * (s0 + s1);
        next.s = s0;
        for (std::size_t c = 0; c < m; ++c) {
            const std::span<const double> row1(cur.values.data() + c * nx, nx);
            const double H0 = input.integrated_at(s0, c);
            const double Hm = input.integrated_at(sm, c);
            const double H1 = input.integrated_at(s1, c);
            const double boundary1 = interpolate(grid, row1, -H1);
            for (std::size_t j = 0; j < nx; ++j) {
                const double x = grid.node(j);
                const double ym = x + 0.5 * ds * model.b(x + H0);
                const double y1 = x + ds * model.b(ym + Hm);
                const double decay = std::exp(-ds * model.f(ym + Hm));
                B[j] = 0.5 * (1.0 - decay);
                A[j] = decay * interpolate(grid, row1, y1) + B[j] * boundary1;
            }
            // Boundary value phi(s0, -H(s0)) solves p = A(-H0) + B(-H0) p.
            const double a_star = interpolate(grid, A, -H0);
            const double b_star = interpolate(grid, B, -H0);
            double p = boundary1;
            std::size_t it = 0;
            for (; it < options.max_fixed_point_iterations; ++it) {
                const double p_new = a_star + b_star * p;
                const double change = std::abs(p_new - p);
                p = p_new;
                if (change < options.fixed_point_tol) {
                    ++it;
                    break;
                }
            }
            out.diagnostics.max_fixed_point_iterations = std::max(out.diagnostics.max_fixed_point_iterations, it);
            double* row0 = next.values.data() + c * nx;
            for (std::size_t j = 0; j < nx; ++j) {
                row0[j] = A[j] + B[j] * p;
                out.diagnostics.max_abs_ds = std::max(out.diagnostics.max_abs_ds, std::abs(row0[j] - row1[j]) / ds);
            }
        }
        std::swap(cur, next);
        if (observer) {
            observer(grid, cur);
        }
        if (k == 0 || (options.store_stride > 0 && k % options.store_stride == 0)) {
            stored.push_back(cur);
        }
        ++out.diagnostics.steps;
    }
    std::reverse(stored.begin(), stored.end());
    out.phi.slices = std::move(stored);
    return out;
}

double dual_pairing(const DualGrid& grid, const DualSlice& slice, const SpatialMeasure& mu_shifted) {
    if (mu_shifted.m_cells() != grid.m_cells) {
        throw std::invalid_argument("measure and dual grid cell counts differ");
    }
    double total = 0.0;
    for (std::size_t c = 0; c < grid.m_cells; ++c) {
        const auto ps = mu_shifted.particles(c);
        const std::span<const double> row(slice.values.data() + c * grid.nx, grid.nx);
        double cell = 0.0;
        for (std::size_t k = 0; k < ps.size(); ++k) {
            cell += ps[k].mass * interpolate(grid, row, mu_shifted.position(c, k));
        }
        total += cell;
    }
    return total / static_cast<double>(grid.m_cells);
}

double duality_defect(const MeanFieldSolution& solution, const DualTestFunction& phi) {
    const auto& first = phi.initial();
    const auto& last = phi.terminal();
    const auto& mu0 = solution.at(first.s);
    const auto& mu1 = solution.at(last.s);
    const double tol = 1e-9 * std::max(1.0, last.s);
    if (std::abs(mu0.time() - first.s) > tol || std::abs(mu1.time() - last.s) > tol) {
        throw std::invalid_argument("solution has no snapshot at the dual slice times");
    }
    const auto p0 = dual_pairing(phi.grid, first, shift_by_input(mu0, solution.fields.integrated_at(first.s)));
    const auto p1 = dual_pairing(phi.grid, last, shift_by_input(mu1, solution.fields.integrated_at(last.s)));
    return std::abs(p1 - p0);
}

double dual_extent(const SpatialMeasure& mu0, const Bounds& bounds, const InputField& input, double t) {
    double support = 0.0;
    for (std::size_t c = 0; c < mu0.m_cells(); ++c) {
        for (std::size_t k = 0; k < mu0.particles(c).size(); ++k) {
            support = std::max(support, std::abs(mu0.position(c, k)));
        }
    }
    double max_H = 0.0;
    const auto last = std::min(input.steps, static_cast<std::size_t>(std::ceil(t / input.dt)));
    for (std::size_t k = 0; k <= last; ++k) {
        for (std::size_t c = 0; c < input.m_cells; ++c) {
            max_H = std::max(max_H, std::abs(input.integrated(k, c)));
        }
    }
    return support + bounds.sup_b * t + max_H + 1.0;
}

// ---- constants -----------------------------------------------------------

double kappa2(const Bounds& b, double t) {
    return std::exp((2.0 * b.sup_f + 2.0 * b.l1_df + 2.0 * b.sup_df + b.sup_db) * t);
}

double kappa3(const Bounds& b, double t) {
    return std::exp(2.0 * b.sup_f * t) *
           (1.0 + 0.5 * t * t * b.sup_f * (b.sup_db + 2.0 * b.sup_df + b.sup_f) * kappa2(b, t));
}

double kappa4(const Bounds& b, double t) { return (b.sup_b + 2.0 * b.sup_f) * kappa2(b, t); }

KappaReport kappa_constants(const Bounds& b, const KappaInputs& in, double t) {
    if (!(t >= 0.0)) {
        throw std::invalid_argument("t must be nonnegative");
    }
    KappaReport r;
    r.t = t;
    r.kappa1 = std::max({b.sup_f, b.sup_df, b.l1_df}) * in.w_linf_l1 + b.sup_f;
    r.kappa2 = kappa2(b, t);
    r.kappa3 = kappa3(b, t);
    r.kappa = std::max(r.kappa2, r.kappa3);
    r.kappa4 = kappa4(b, t);
    r.kappa5 = (b.sup_db + b.sup_f + 2.0 * b.sup_df) * r.kappa2;
    if (in.eta_moment) {
        const double k_next = std::max(kappa2(b, t + 1.0), kappa3(b, t + 1.0));
        const double first = std::sqrt(16.0 * b.sup_f * b.sup_f * t * t + 2.0 * b.sup_f * t) *
                             std::max(k_next, kappa4(b, t + 1.0)) * std::sqrt(6.0);
        const double second =
            k_next * std::sqrt(in.eta_inv_l1 * (t + 1.0)) * std::sqrt(0.5 * b.sup_f * t * *in.eta_moment);
        r.kappa6 = first + second;
    }
    return r;
}

}  // namespace nemf
