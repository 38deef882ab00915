#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace nemf {

/// Uniform x-grid on [-L, L] with nx nodes, crossed with m uniform xi-cells.
struct DualGrid {
    std::size_t m_cells = 1;
    double L = 1.0;
    std::size_t nx = 2;

    [[nodiscard]] double dx() const noexcept { return 2.0 * L / static_cast<double>(nx - 1); }
    [[nodiscard]] double node(std::size_t j) const noexcept { return -L + dx() * static_cast<double>(j); }
    [[nodiscard]] std::size_t size() const noexcept { return m_cells * nx; }
    /// Throws std::invalid_argument for a degenerate grid.
    void validate() const;
};

/// One time slice: values[c * nx + j] = phi(s, cell c, x_j). Between nodes
/// phi is linear in x; outside [-L, L] it is extended by the boundary value.
struct DualSlice {
    double s = 0.0;
    std::vector<double> values;

    [[nodiscard]] double value(const DualGrid& grid, std::size_t c, double x) const noexcept;
};

/// Grid representation of phi(s, xi, x) on the stored slices.
struct DualTestFunction {
    DualGrid grid;
    /// Slices ordered by increasing s; the last is the terminal datum.
    std::vector<DualSlice> slices;

    [[nodiscard]] const DualSlice& initial() const { return slices.front(); }
    [[nodiscard]] const DualSlice& terminal() const { return slices.back(); }
};

/// Linear interpolation of a node array on the grid, clamped outside.
double interpolate(const DualGrid& grid, std::span<const double> row, double x) noexcept;

/// CSV with columns s,cell,x,phi.
void write_csv(std::ostream& os, const DualTestFunction& phi);

}  // namespace nemf
