#include "nemf/graphon.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "nemf/rng.hpp"

namespace nemf {

// ---- WeightMatrix --------------------------------------------------------

WeightMatrix::WeightMatrix(std::size_t n) : n_(n), entries_(n * n, 0.0) {}

WeightMatrix::WeightMatrix(std::size_t n, std::vector<double> entries) : n_(n), entries_(std::move(entries)) {
    if (entries_.size() != n_ * n_) {
        throw std::invalid_argument("weight matrix: expected n*n entries");
    }
    for (std::size_t i = 0; i < n_; ++i) {
        if (entries_[i * n_ + i] != 0.0) {
            throw std::invalid_argument("weight matrix: diagonal entries must be zero");
        }
    }
}

void WeightMatrix::set(std::size_t i, std::size_t j, double value) {
    if (i == j) {
        throw std::invalid_argument("weight matrix: diagonal entries must be zero");
    }
    entries_[i * n_ + j] = value;
}

double WeightMatrix::max_abs() const noexcept {
    double m = 0.0;
    for (double v : entries_) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

// ---- Partition -----------------------------------------------------------

Partition::Partition(std::vector<std::size_t> order) : order_(std::move(order)), position_(order_.size()) {
    std::vector<bool> seen(order_.size(), false);
    for (std::size_t p = 0; p < order_.size(); ++p) {
        const auto i = order_[p];
        if (i >= order_.size() || seen[i]) {
            throw std::invalid_argument("partition order is not a permutation");
        }
        seen[i] = true;
        position_[i] = p;
    }
}

Partition Partition::identity(std::size_t n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    return Partition(std::move(order));
}

double Partition::cell_begin(std::size_t neuron) const noexcept {
    return static_cast<double>(position_[neuron]) / static_cast<double>(n());
}

double Partition::cell_end(std::size_t neuron) const noexcept {
    return static_cast<double>(position_[neuron] + 1) / static_cast<double>(n());
}

// ---- AnalyticKernel ------------------------------------------------------

namespace {

// int_0^x int_0^y max(u, v) dv du
double max_antiderivative(double x, double y) noexcept {
    const double lo = std::min(x, y);
    const double hi = std::max(x, y);
    return lo * lo * lo / 6.0 + lo * hi * hi / 2.0;
}

}  // namespace

double AnalyticKernel::eval(double xi, double zeta) const noexcept {
    switch (kind) {
        case Kind::uniform_attachment_limit:
            return 1.0 - std::max(xi, zeta);
        case Kind::constant:
            return w0;
    }
    return 0.0;
}

double AnalyticKernel::rect_integral(double xi0, double xi1, double zeta0, double zeta1) const noexcept {
    const double area = (xi1 - xi0) * (zeta1 - zeta0);
    switch (kind) {
        case Kind::uniform_attachment_limit: {
            const double m = max_antiderivative(xi1, zeta1) - max_antiderivative(xi0, zeta1) -
                             max_antiderivative(xi1, zeta0) + max_antiderivative(xi0, zeta0);
            return area - m;
        }
        case Kind::constant:
            return w0 * area;
    }
    return 0.0;
}

double AnalyticKernel::sup_abs() const noexcept {
    switch (kind) {
        case Kind::uniform_attachment_limit:
            return 1.0;
        case Kind::constant:
            return std::abs(w0);
    }
    return 0.0;
}

std::string AnalyticKernel::name() const {
    switch (kind) {
        case Kind::uniform_attachment_limit:
            return "uniform_attachment_limit";
        case Kind::constant:
            return "constant";
    }
    return "?";
}

// ---- StepGraphon ---------------------------------------------------------

StepGraphon::StepGraphon(std::size_t m, std::vector<double> values) : m_(m), values_(std::move(values)) {
    if (m_ == 0 || values_.size() != m_ * m_) {
        throw std::invalid_argument("step graphon: expected m*m values with m >= 1");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("step graphon: values must be finite");
        }
    }
}

StepGraphon::StepGraphon(std::size_t m, std::vector<double> values, AnalyticKernel analytic)
    : StepGraphon(m, std::move(values)) {
    analytic_ = analytic;
}

StepGraphon StepGraphon::from_analytic(const AnalyticKernel& kernel, std::size_t m) {
    std::vector<double> values(m * m);
    const double dm = static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            values[i * m + j] =
                kernel.rect_integral(i / dm, (i + 1) / dm, j / dm, (j + 1) / dm) * dm * dm;
        }
    }
    return StepGraphon(m, std::move(values), kernel);
}

StepGraphon StepGraphon::constant(std::size_t m, double w0) {
    return from_analytic(AnalyticKernel{AnalyticKernel::Kind::constant, w0}, m);
}

double StepGraphon::eval(double xi, double zeta) const noexcept {
    if (analytic_) {
        return analytic_->eval(xi, zeta);
    }
    const double dm = static_cast<double>(m_);
    const auto i = std::min(m_ - 1, static_cast<std::size_t>(std::max(0.0, xi) * dm));
    const auto j = std::min(m_ - 1, static_cast<std::size_t>(std::max(0.0, zeta) * dm));
    return (*this)(i, j);
}

namespace {

// Overlap of [a,b] with cell k of an m-grid, as (first cell, last cell).
std::pair<std::size_t, std::size_t> cell_range(double a, double b, std::size_t m) {
    const double dm = static_cast<double>(m);
    auto lo = static_cast<std::size_t>(std::max(0.0, std::floor(a * dm)));
    auto hi = static_cast<std::size_t>(std::max(0.0, std::ceil(b * dm)));
    lo = std::min(lo, m - 1);
    hi = std::min(std::max(hi, lo + 1), m);
    return {lo, hi};
}

double overlap(double a, double b, double c, double d) noexcept {
    return std::max(0.0, std::min(b, d) - std::max(a, c));
}

}  // namespace

double StepGraphon::rect_integral(double xi0, double xi1, double zeta0, double zeta1) const noexcept {
    if (analytic_) {
        return analytic_->rect_integral(xi0, xi1, zeta0, zeta1);
    }
    const double dm = static_cast<double>(m_);
    const auto [i0, i1] = cell_range(xi0, xi1, m_);
    const auto [j0, j1] = cell_range(zeta0, zeta1, m_);
    double total = 0.0;
    for (std::size_t i = i0; i < i1; ++i) {
        const double ox = overlap(xi0, xi1, i / dm, (i + 1) / dm);
        if (ox == 0.0) {
            continue;
        }
        double row = 0.0;
        for (std::size_t j = j0; j < j1; ++j) {
            row += (*this)(i, j) * overlap(zeta0, zeta1, j / dm, (j + 1) / dm);
        }
        total += ox * row;
    }
    return total;
}

StepGraphon StepGraphon::resample(std::size_t m_new) const {
    if (analytic_) {
        return from_analytic(*analytic_, m_new);
    }
    std::vector<double> values(m_new * m_new);
    const double dm = static_cast<double>(m_new);
    for (std::size_t i = 0; i < m_new; ++i) {
        for (std::size_t j = 0; j < m_new; ++j) {
            values[i * m_new + j] = rect_integral(i / dm, (i + 1) / dm, j / dm, (j + 1) / dm) * dm * dm;
        }
    }
    return StepGraphon(m_new, std::move(values));
}

StepGraphon StepGraphon::permuted(std::span<const std::size_t> perm) const {
    if (perm.size() != m_) {
        throw std::invalid_argument("permutation size mismatch");
    }
    std::vector<double> values(m_ * m_);
    for (std::size_t i = 0; i < m_; ++i) {
        for (std::size_t j = 0; j < m_; ++j) {
            values[i * m_ + j] = (*this)(perm[i], perm[j]);
        }
    }
    return StepGraphon(m_, std::move(values));
}

double StepGraphon::sup_abs() const noexcept {
    double s = 0.0;
    for (double v : values_) {
        s = std::max(s, std::abs(v));
    }
    return s;
}

double StepGraphon::sup_row_l1() const noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < m_; ++j) {
            row += std::abs((*this)(i, j));
        }
        s = std::max(s, row / static_cast<double>(m_));
    }
    return s;
}

// ---- ModulusOfContinuity -------------------------------------------------

ModulusOfContinuity::ModulusOfContinuity(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
    if (knots_.size() < 2 || knots_.size() != values_.size() || knots_.front() != 0.0 || knots_.back() != 1.0) {
        throw std::invalid_argument("modulus of continuity: knots must span [0,1]");
    }
    for (std::size_t k = 1; k < knots_.size(); ++k) {
        if (!(knots_[k] > knots_[k - 1])) {
            throw std::invalid_argument("modulus of continuity: knots must be increasing");
        }
    }
    values_[0] = 0.0;
    for (std::size_t k = 1; k < values_.size(); ++k) {
        values_[k] = std::max(values_[k], values_[k - 1]);
    }
}

ModulusOfContinuity ModulusOfContinuity::linear(double slope) {
    return ModulusOfContinuity({0.0, 1.0}, {0.0, slope});
}

ModulusOfContinuity ModulusOfContinuity::zero() { return ModulusOfContinuity({0.0, 1.0}, {0.0, 0.0}); }

double ModulusOfContinuity::operator()(double h) const noexcept {
    h = std::clamp(std::abs(h), 0.0, 1.0);
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), h);
    if (it == knots_.end()) {
        return values_.back();
    }
    const auto k = static_cast<std::size_t>(it - knots_.begin());
    const double t = (h - knots_[k - 1]) / (knots_[k] - knots_[k - 1]);
    return values_[k - 1] + t * (values_[k] - values_[k - 1]);
}

// ---- generators ----------------------------------------------------------

WeightMatrix gen_uniform_attachment(std::size_t n, std::uint64_t seed) {
    WeightMatrix w(n);
    auto eng = make_engine(seed);
    // Pair (i<j), 1-based, survives steps j..n unconnected with probability
    // (j-1)/n. Its first-connection step is T = max(j, ceil((j-1)/U)).
    for (std::size_t j = 2; j <= n; ++j) {
        for (std::size_t i = 1; i < j; ++i) {
            const double u = uniform01(eng);
            const double first_step = std::max(static_cast<double>(j), std::ceil(static_cast<double>(j - 1) / u));
            if (first_step <= static_cast<double>(n)) {
                w.set(i - 1, j - 1, 1.0);
                w.set(j - 1, i - 1, 1.0);
            }
        }
    }
    return w;
}

WeightMatrix gen_w_random(const StepGraphon& kernel, std::size_t n, std::uint64_t seed, SampleMode mode) {
    WeightMatrix w(n);
    const double dn = static_cast<double>(n);
    if (mode == SampleMode::deterministic) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i != j) {
                    w.set(i, j, kernel.eval(i / dn, j / dn));
                }
            }
        }
        return w;
    }
    bool symmetric = true;
    for (std::size_t i = 0; i < n && symmetric; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            const double a = kernel.eval(i / dn, j / dn);
            const double b = kernel.eval(j / dn, i / dn);
            if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) {
                throw std::invalid_argument("Bernoulli sampling needs kernel values in [0,1]");
            }
            symmetric = symmetric && a == b;
        }
    }
    auto eng = make_engine(seed);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || (symmetric && j < i)) {
                continue;
            }
            const double p = kernel.eval(i / dn, j / dn);
            if (p < 0.0 || p > 1.0) {
                throw std::invalid_argument("Bernoulli sampling needs kernel values in [0,1]");
            }
            if (bernoulli(eng, p)) {
                w.set(i, j, 1.0);
                if (symmetric) {
                    w.set(j, i, 1.0);
                }
            }
        }
    }
    return w;
}

StepGraphon step_graphon(const WeightMatrix& matrix, const Partition& partition) {
    if (matrix.n() != partition.n()) {
        throw std::invalid_argument("step_graphon: partition size does not match matrix");
    }
    const auto n = matrix.n();
    std::vector<double> values(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto pi = partition.position_of(i);
        for (std::size_t j = 0; j < n; ++j) {
            values[pi * n + partition.position_of(j)] = matrix(i, j);
        }
    }
    return StepGraphon(n, std::move(values));
}

// ---- shift differences ---------------------------------------------------

ShiftDifferences shift_differences(const StepGraphon& g, std::span<const double> shifts) {
    const auto m = g.m();
    const double dm = static_cast<double>(m);
    ShiftDifferences out;
    out.shifts.assign(shifts.begin(), shifts.end());
    for (double h : shifts) {
        double frac_cells = h * dm;
        frac_cells -= std::floor(frac_cells / dm) * dm;  // periodic, in [0, m)
        auto q = static_cast<std::size_t>(std::floor(frac_cells));
        double phi = frac_cells - static_cast<double>(q);
        if (q >= m) {
            q = 0;
            phi = 0.0;
        }
        // On cell c, xi - h lies in cell c-q-1 for a fraction phi and in
        // cell c-q for the remaining 1-phi.
        double dxi = 0.0;
        double dzeta = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            const std::size_t a = (c + m - q) % m;
            const std::size_t b = (c + 2 * m - q - 1) % m;
            for (std::size_t k = 0; k < m; ++k) {
                dxi += (1.0 - phi) * std::abs(g(a, k) - g(c, k)) + phi * std::abs(g(b, k) - g(c, k));
                dzeta += (1.0 - phi) * std::abs(g(k, a) - g(k, c)) + phi * std::abs(g(k, b) - g(k, c));
            }
        }
        out.xi_direction.push_back(dxi / (dm * dm));
        out.zeta_direction.push_back(dzeta / (dm * dm));
    }
    return out;
}

ModulusOfContinuity modulus_of_continuity(const StepGraphon& g, std::size_t n_shifts) {
    if (n_shifts < 2) {
        throw std::invalid_argument("modulus_of_continuity: need at least two shifts");
    }
    std::vector<double> knots(n_shifts + 1);
    for (std::size_t k = 0; k <= n_shifts; ++k) {
        knots[k] = static_cast<double>(k) / static_cast<double>(n_shifts);
    }
    knots.back() = 1.0;
    const auto diffs = shift_differences(g, knots);
    std::vector<double> values(knots.size());
    for (std::size_t k = 0; k < knots.size(); ++k) {
        values[k] = std::max(diffs.xi_direction[k], diffs.zeta_direction[k]);
    }
    return ModulusOfContinuity(std::move(knots), std::move(values));
}

// ---- CSV -----------------------------------------------------------------

namespace {

void write_square(std::ostream& os, const char* label, std::size_t n, const std::vector<double>& values) {
    os << label << ',' << n << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j) {
                os << ',';
            }
            os << values[i * n + j];
        }
        os << '\n';
    }
}

std::pair<std::size_t, std::vector<double>> read_square(std::istream& is, const std::string& label) {
    std::string line;
    if (!std::getline(is, line)) {
        throw std::runtime_error("csv: missing header");
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.substr(0, comma) != label) {
        throw std::runtime_error("csv: expected header '" + label + ",<size>'");
    }
    const auto n = static_cast<std::size_t>(std::stoull(line.substr(comma + 1)));
    std::vector<double> values;
    values.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(is, line)) {
            throw std::runtime_error("csv: truncated matrix");
        }
        std::stringstream ss(line);
        std::string cell;
        std::size_t count = 0;
        while (std::getline(ss, cell, ',')) {
            values.push_back(std::stod(cell));
            ++count;
        }
        if (count != n) {
            throw std::runtime_error("csv: row " + std::to_string(i) + " has wrong length");
        }
    }
    return {n, std::move(values)};
}

}  // namespace

void write_csv(std::ostream& os, const WeightMatrix& w) { write_square(os, "n", w.n(), w.entries()); }

void write_csv(std::ostream& os, const StepGraphon& g) { write_square(os, "m", g.m(), g.values()); }

WeightMatrix read_weight_matrix_csv(std::istream& is) {
    auto [n, values] = read_square(is, "n");
    return WeightMatrix(n, std::move(values));
}

StepGraphon read_step_graphon_csv(std::istream& is) {
    auto [m, values] = read_square(is, "m");
    return StepGraphon(m, std::move(values));
}

}  // namespace nemf
