#include "nemf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace nemf {

void to_json(nlohmann::json& j, const MeasureDistanceReport& r) {
    j = {{"metric", r.metric}, {"value", r.value}, {"exact", r.exact}, {"params", r.params}};
}

namespace {

/// Neumaier compensated sum.
class CompensatedSum {
public:
    void add(double v) noexcept {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// 2 (d + expm1(-d)) = int_0^d int_0^d exp(-|u - v|), series for small d.
double same_interval(double d) noexcept {
    if (d < 0.5) {
        double term = d * d / 2.0;
        double sum = 0.0;
        for (int k = 2; k < 40 && std::abs(term) > 1e-19 * std::abs(sum); ++k) {
            sum += term;
            term *= -d / static_cast<double>(k + 1);
        }
        return 2.0 * sum;
    }
    return 2.0 * (d + std::expm1(-d));
}

/// int_A int_B exp(-|xi - zeta|) for intervals with disjoint interiors.
double disjoint_intervals(double a0, double a1, double b0, double b1) noexcept {
    const double ea = -std::expm1(-(a1 - a0));
    const double eb = -std::expm1(-(b1 - b0));
    const double gap = a0 >= b1 ? a0 - b1 : b0 - a1;
    return std::exp(-gap) * ea * eb;
}

double exp_abs_integral(double a0, double a1, double b0, double b1) noexcept {
    if (a1 <= a0 || b1 <= b0) {
        return 0.0;
    }
    if (a0 >= b1 || b0 >= a1) {
        return disjoint_intervals(a0, a1, b0, b1);
    }
    const double o0 = std::max(a0, b0);
    const double o1 = std::min(a1, b1);
    const double a_parts[3][2] = {{a0, o0}, {o0, o1}, {o1, a1}};
    const double b_parts[3][2] = {{b0, o0}, {o0, o1}, {o1, b1}};
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) {
            const auto& pa = a_parts[i];
            const auto& pb = b_parts[k];
            if (pa[1] <= pa[0] || pb[1] <= pb[0]) {
                continue;
            }
            total += (i == 1 && k == 1) ? same_interval(o1 - o0) : disjoint_intervals(pa[0], pa[1], pb[0], pb[1]);
        }
    }
    return total;
}

double tail_factor(std::size_t K) noexcept {
    // sum_{n=1}^K e^{-n}
    const double e1 = std::exp(-1.0);
    return e1 * -std::expm1(-static_cast<double>(K)) / (1.0 - e1);
}

/// Per-cell structure for sum_q m_q exp(-|x - x_q|) in O(log P).
struct ExpSum {
    std::vector<double> xs;
    std::vector<double> below;  // prefix sums of m e^{x - c}
    std::vector<double> above;  // suffix sums of m e^{-(x - c)}
    double center = 0.0;
    bool valid = false;

    ExpSum() = default;
    ExpSum(const SpatialMeasure& mu, std::size_t c) {
        const auto ps = mu.particles(c);
        const std::size_t n = ps.size();
        std::vector<std::pair<double, double>> pts(n);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t k = 0; k < n; ++k) {
            pts[k] = {mu.position(c, k), ps[k].mass};
            lo = std::min(lo, pts[k].first);
            hi = std::max(hi, pts[k].first);
        }
        if (n == 0 || hi - lo > 600.0) {
            return;
        }
        std::sort(pts.begin(), pts.end());
        center = 0.5 * (lo + hi);
        xs.resize(n);
        below.assign(n + 1, 0.0);
        above.assign(n + 1, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            xs[k] = pts[k].first;
            below[k + 1] = below[k] + pts[k].second * std::exp(pts[k].first - center);
        }
        for (std::size_t k = n; k-- > 0;) {
            above[k] = above[k + 1] + pts[k].second * std::exp(center - pts[k].first);
        }
        valid = true;
    }

    /// Returns NaN when x is too far from the cell to evaluate safely.
    [[nodiscard]] double query(double x) const noexcept {
        if (std::abs(x - center) > 600.0) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        const auto idx = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
        return std::exp(center - x) * below[idx] + std::exp(x - center) * above[idx];
    }
};

constexpr std::size_t kExpSumThreshold = 24;

double direct_pair_sum(const SpatialMeasure& mu1, std::size_t a, const SpatialMeasure& mu2, std::size_t b) {
    const auto pa = mu1.particles(a);
    const auto pb = mu2.particles(b);
    double total = 0.0;
    for (std::size_t p = 0; p < pa.size(); ++p) {
        const double xp = mu1.position(a, p);
        double row = 0.0;
        for (std::size_t q = 0; q < pb.size(); ++q) {
            row += pb[q].mass * std::exp(-std::abs(xp - mu2.position(b, q)));
        }
        total += pa[p].mass * row;
    }
    return 0.5 * total;
}

double fast_pair_sum(const SpatialMeasure& mu1, std::size_t a, const ExpSum& sb, const SpatialMeasure& mu2,
                     std::size_t b) {
    const auto pa = mu1.particles(a);
    double total = 0.0;
    for (std::size_t p = 0; p < pa.size(); ++p) {
        const double v = sb.query(mu1.position(a, p));
        if (std::isnan(v)) {
            return direct_pair_sum(mu1, a, mu2, b);
        }
        total += pa[p].mass * v;
    }
    return 0.5 * total;
}

std::vector<ExpSum> build_exp_sums(const SpatialMeasure& mu) {
    std::vector<ExpSum> out(mu.m_cells());
    for (std::size_t c = 0; c < mu.m_cells(); ++c) {
        if (mu.particles(c).size() >= kExpSumThreshold) {
            out[c] = ExpSum(mu, c);
        }
    }
    return out;
}

}  // namespace

double lambda_kernel(double x) noexcept { return 0.5 * std::exp(-std::abs(x)); }

double xi_kernel_integral(double a0, double a1, double b0, double b1, std::size_t K) {
    if (a0 < 0.0 || b0 < 0.0 || a1 > 1.0 || b1 > 1.0 || a1 < a0 || b1 < b0) {
        throw std::invalid_argument("xi intervals must lie in [0, 1]");
    }
    const double center = exp_abs_integral(a0, a1, b0, b1);
    // Shifts n >= 1 place B - n below A, n <= -1 place B + |n| above A.
    const double ea = -std::expm1(-(a1 - a0));
    const double eb = -std::expm1(-(b1 - b0));
    const double tails = ea * eb * tail_factor(K) * (std::exp(-(a0 - b1)) + std::exp(-(b0 - a1)));
    return 0.5 * (center + tails);
}

double h11_inner(const SpatialMeasure& mu1, const SpatialMeasure& mu2, std::size_t K) {
    const std::size_t m1 = mu1.m_cells();
    const std::size_t m2 = mu2.m_cells();
    if (m1 == 0 || m2 == 0) {
        throw std::invalid_argument("empty measure grid");
    }
    // Equal uniform grids: the cell integral depends only on a - b.
    std::vector<double> toeplitz;
    if (m1 == m2) {
        toeplitz.resize(2 * m1 - 1);
        const double w = 1.0 / static_cast<double>(m1);
        for (std::size_t d = 0; d < m1; ++d) {
            const double off = static_cast<double>(d) * w;
            toeplitz[m1 - 1 + d] = xi_kernel_integral(off, std::min(off + w, 1.0), 0.0, w, K);
            toeplitz[m1 - 1 - d] = xi_kernel_integral(0.0, w, off, std::min(off + w, 1.0), K);
        }
    }
    const auto sums2 = build_exp_sums(mu2);
    const auto sums1 = build_exp_sums(mu1);
    CompensatedSum acc;
    for (std::size_t a = 0; a < m1; ++a) {
        if (mu1.particles(a).empty()) {
            continue;
        }
        for (std::size_t b = 0; b < m2; ++b) {
            if (mu2.particles(b).empty()) {
                continue;
            }
            const double I = m1 == m2 ? toeplitz[m1 - 1 + a - b]
                                      : xi_kernel_integral(mu1.cell_begin(a), mu1.cell_end(a), mu2.cell_begin(b),
                                                           mu2.cell_end(b), K);
            double s;
            if (sums2[b].valid) {
                s = fast_pair_sum(mu1, a, sums2[b], mu2, b);
            } else if (sums1[a].valid) {
                s = fast_pair_sum(mu2, b, sums1[a], mu1, a);
            } else {
                s = direct_pair_sum(mu1, a, mu2, b);
            }
            acc.add(I * s);
        }
    }
    return acc.value();
}

double h11_distance_from_self(const SpatialMeasure& mu1, const SpatialMeasure& mu2, double self1, double self2,
                              std::size_t K) {
    CompensatedSum acc;
    acc.add(self1);
    acc.add(self2);
    acc.add(-2.0 * h11_inner(mu1, mu2, K));
    return std::sqrt(std::max(acc.value(), 0.0));
}

MeasureDistanceReport h11_distance(const SpatialMeasure& mu1, const SpatialMeasure& mu2, std::size_t K) {
    if (K < 10) {
        throw std::invalid_argument("periodization needs K >= 10");
    }
    MeasureDistanceReport r;
    r.metric = "h11";
    r.exact = true;
    r.params = {{"K", K}};
    r.value = h11_distance_from_self(mu1, mu2, h11_inner(mu1, mu1, K), h11_inner(mu2, mu2, K), K);
    return r;
}

double h1_line_distance(std::span<const Particle> a, std::span<const Particle> b) {
    CompensatedSum acc;
    auto add_block = [&acc](std::span<const Particle> p, std::span<const Particle> q, double sign) {
        for (const auto& x : p) {
            double row = 0.0;
            for (const auto& y : q) {
                row += y.mass * lambda_kernel(x.x - y.x);
            }
            acc.add(sign * x.mass * row);
        }
    };
    add_block(a, a, 1.0);
    add_block(b, b, 1.0);
    add_block(a, b, -2.0);
    return std::sqrt(std::max(acc.value(), 0.0));
}

// ---- Phi_w norm ----------------------------------------------------------

std::vector<double> phi_w_shift_grid(std::size_t m, const ModulusOfContinuity& eps) {
    std::vector<double> shifts;
    for (std::size_t k = 1; k < m; ++k) {
        shifts.push_back(static_cast<double>(k) / static_cast<double>(m));
    }
    for (double h : eps.knots()) {
        if (h > 0.0 && h < 1.0) {
            shifts.push_back(h);
        }
    }
    std::sort(shifts.begin(), shifts.end());
    shifts.erase(std::unique(shifts.begin(), shifts.end()), shifts.end());
    return shifts;
}

namespace {

/// Shift constant from the cyclic mismatch profile D[q] = (1/m) sum_c S(c - q, c),
/// q = 0..m, with I(h) = (1 - theta) D[q] + theta D[q + 1] for h m = q + theta.
double shift_constant(const std::vector<double>& D, std::size_t m, const ModulusOfContinuity& eps) {
    double best = 0.0;
    for (double h : phi_w_shift_grid(m, eps)) {
        const double hm = h * static_cast<double>(m);
        auto q = static_cast<std::size_t>(std::floor(hm));
        double theta = hm - static_cast<double>(q);
        if (q >= m) {
            q = m - 1;
            theta = 1.0;
        }
        const double I = (1.0 - theta) * D[q] + theta * D[q + 1];
        const double e = eps(h);
        if (I <= 1e-300) {
            continue;
        }
        if (e <= 0.0) {
            return std::numeric_limits<double>::infinity();
        }
        best = std::max(best, I / e);
    }
    return best;
}

void finish(PhiWNorm& n) { n.value = std::max({n.sup, n.l1_dx, n.sup_dx, n.shift}); }

}  // namespace

PhiWNorm phi_w_norm(const DualGrid& grid, std::span<const double> values, const ModulusOfContinuity& eps) {
    grid.validate();
    if (values.size() != grid.size()) {
        throw std::invalid_argument("values do not match the grid");
    }
    const std::size_t m = grid.m_cells;
    const std::size_t nx = grid.nx;
    const double dx = grid.dx();
    PhiWNorm n;
    for (std::size_t c = 0; c < m; ++c) {
        const double* row = values.data() + c * nx;
        double tv = 0.0;
        for (std::size_t j = 0; j < nx; ++j) {
            n.sup = std::max(n.sup, std::abs(row[j]));
            if (j + 1 < nx) {
                const double d = std::abs(row[j + 1] - row[j]);
                tv += d;
                n.sup_dx = std::max(n.sup_dx, d / dx);
            }
        }
        n.l1_dx = std::max(n.l1_dx, tv);
    }
    std::vector<double> D(m + 1, 0.0);
    for (std::size_t q = 1; q < m; ++q) {
        double total = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            const double* a = values.data() + ((c + m - q) % m) * nx;
            const double* b = values.data() + c * nx;
            double s = 0.0;
            for (std::size_t j = 0; j < nx; ++j) {
                s = std::max(s, std::abs(a[j] - b[j]));
            }
            total += s;
        }
        D[q] = total / static_cast<double>(m);
    }
    n.shift = shift_constant(D, m, eps);
    finish(n);
    return n;
}

PhiWNorm phi_w_norm_tensor(const DualGrid& grid, std::span<const double> a, std::span<const double> g,
                           const ModulusOfContinuity& eps) {
    grid.validate();
    if (a.size() != grid.m_cells || g.size() != grid.nx) {
        throw std::invalid_argument("tensor factors do not match the grid");
    }
    const std::size_t m = grid.m_cells;
    double a_sup = 0.0;
    for (double v : a) {
        a_sup = std::max(a_sup, std::abs(v));
    }
    double g_sup = 0.0;
    double g_tv = 0.0;
    double g_slope = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        g_sup = std::max(g_sup, std::abs(g[j]));
        if (j + 1 < g.size()) {
            const double d = std::abs(g[j + 1] - g[j]);
            g_tv += d;
            g_slope = std::max(g_slope, d / grid.dx());
        }
    }
    PhiWNorm n;
    n.sup = a_sup * g_sup;
    n.l1_dx = a_sup * g_tv;
    n.sup_dx = a_sup * g_slope;
    std::vector<double> D(m + 1, 0.0);
    for (std::size_t q = 1; q < m; ++q) {
        double total = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            total += std::abs(a[(c + m - q) % m] - a[c]);
        }
        D[q] = g_sup * total / static_cast<double>(m);
    }
    n.shift = shift_constant(D, m, eps);
    finish(n);
    return n;
}

// ---- Phi_w^-1 lower bound ------------------------------------------------

TestFamilySpec TestFamilySpec::standard() {
    TestFamilySpec spec;
    for (int k = -16; k <= 16; ++k) {
        spec.centers.push_back(0.25 * k);
    }
    return spec;
}

namespace {

/// Cell averages of the xi-factors on m cells.
std::vector<std::vector<double>> xi_factors(std::size_t m, std::size_t max_mode) {
    std::vector<std::vector<double>> out;
    out.emplace_back(m, 1.0);
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t k = 1; k <= max_mode; ++k) {
        std::vector<double> c(m);
        std::vector<double> s(m);
        const double kk = two_pi * static_cast<double>(k);
        for (std::size_t i = 0; i < m; ++i) {
            const double x0 = static_cast<double>(i) / static_cast<double>(m);
            const double x1 = static_cast<double>(i + 1) / static_cast<double>(m);
            const double scale = static_cast<double>(m) / kk;
            c[i] = scale * (std::sin(kk * x1) - std::sin(kk * x0));
            s[i] = scale * (std::cos(kk * x0) - std::cos(kk * x1));
        }
        out.push_back(std::move(c));
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::vector<double>> x_factors(const TestFamilySpec& f, const DualGrid& grid) {
    std::vector<std::vector<double>> out;
    for (double c : f.centers) {
        for (double w : f.widths) {
            std::vector<double> ramp(grid.nx);
            std::vector<double> bump(grid.nx);
            for (std::size_t j = 0; j < grid.nx; ++j) {
                const double x = grid.node(j);
                ramp[j] = std::clamp(x - c, -w, w);
                bump[j] = std::exp(-(x - c) * (x - c) / (2.0 * w * w));
            }
            out.push_back(std::move(ramp));
            out.push_back(std::move(bump));
        }
    }
    return out;
}

/// overlap[c][i] = |cell c of mu intersect test cell i|.
std::vector<double> overlaps(const SpatialMeasure& mu, std::size_t m_test) {
    std::vector<double> out(mu.m_cells() * m_test, 0.0);
    for (std::size_t c = 0; c < mu.m_cells(); ++c) {
        const double c0 = mu.cell_begin(c);
        const double c1 = mu.cell_end(c);
        const auto i0 = static_cast<std::size_t>(std::floor(c0 * static_cast<double>(m_test)));
        for (std::size_t i = i0; i < m_test; ++i) {
            const double t0 = static_cast<double>(i) / static_cast<double>(m_test);
            const double t1 = static_cast<double>(i + 1) / static_cast<double>(m_test);
            if (t0 >= c1) {
                break;
            }
            out[c * m_test + i] = std::max(0.0, std::min(c1, t1) - std::max(c0, t0));
        }
    }
    return out;
}

/// pair[a][g] = <a (x) g, mu>.
std::vector<double> pairings(const SpatialMeasure& mu, const std::vector<std::vector<double>>& as,
                             const std::vector<std::vector<double>>& gs, const DualGrid& grid) {
    const std::size_t m_test = grid.m_cells;
    const auto ov = overlaps(mu, m_test);
    std::vector<double> out(as.size() * gs.size(), 0.0);
    std::vector<double> G(gs.size());
    std::vector<double> weight(as.size());
    for (std::size_t c = 0; c < mu.m_cells(); ++c) {
        const auto ps = mu.particles(c);
        if (ps.empty()) {
            continue;
        }
        for (std::size_t gi = 0; gi < gs.size(); ++gi) {
            double s = 0.0;
            for (std::size_t k = 0; k < ps.size(); ++k) {
                s += ps[k].mass * interpolate(grid, gs[gi], mu.position(c, k));
            }
            G[gi] = s;
        }
        for (std::size_t ai = 0; ai < as.size(); ++ai) {
            double wsum = 0.0;
            for (std::size_t i = 0; i < m_test; ++i) {
                wsum += ov[c * m_test + i] * as[ai][i];
            }
            weight[ai] = wsum;
        }
        for (std::size_t ai = 0; ai < as.size(); ++ai) {
            for (std::size_t gi = 0; gi < gs.size(); ++gi) {
                out[ai * gs.size() + gi] += weight[ai] * G[gi];
            }
        }
    }
    return out;
}

}  // namespace

MeasureDistanceReport phi_w_lb_distance(const SpatialMeasure& mu1, const SpatialMeasure& mu2,
                                        const ModulusOfContinuity& eps, const TestFamilySpec& family) {
    if (family.centers.empty() || family.widths.empty()) {
        throw std::invalid_argument("empty test family");
    }
    const DualGrid grid{family.m_cells, family.L, family.nx};
    grid.validate();
    const auto as = xi_factors(family.m_cells, family.max_mode);
    const auto gs = x_factors(family, grid);
    const auto p1 = pairings(mu1, as, gs, grid);
    const auto p2 = pairings(mu2, as, gs, grid);
    double best = 0.0;
    for (std::size_t ai = 0; ai < as.size(); ++ai) {
        for (std::size_t gi = 0; gi < gs.size(); ++gi) {
            const double norm = phi_w_norm_tensor(grid, as[ai], gs[gi], eps).value;
            if (!(norm > 0.0) || !std::isfinite(norm)) {
                continue;
            }
            const double diff = p1[ai * gs.size() + gi] - p2[ai * gs.size() + gi];
            best = std::max(best, std::abs(diff) / norm);
        }
    }
    MeasureDistanceReport r;
    r.metric = "phi_w_lower_bound";
    r.value = best;
    r.exact = false;
    r.params = {{"family", family.id},
                {"m_cells", family.m_cells},
                {"max_mode", family.max_mode},
                {"centers", family.centers.size()},
                {"widths", family.widths},
                {"L", family.L},
                {"nx", family.nx}};
    return r;
}

double second_moment(const SpatialMeasure& mu) {
    CompensatedSum acc;
    for (std::size_t c = 0; c < mu.m_cells(); ++c) {
        const auto ps = mu.particles(c);
        for (std::size_t k = 0; k < ps.size(); ++k) {
            const double x = mu.position(c, k);
            acc.add(ps[k].mass * x * x);
        }
    }
    return acc.value() / static_cast<double>(mu.m_cells());
}

}  // namespace nemf
