#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace nemf {

struct Particle {
    double x = 0.0;
    double mass = 0.0;
};

/// Measure on [0,1) x R that is piecewise constant in xi over a uniform grid
/// of cells and, within each cell, a weighted particle list in x. Each cell
/// carries a translation so that shifting by an input field and back
/// restores the stored positions exactly.
///
/// Pairing convention: integral of phi against the measure is
///   sum_c int_{cell c} sum_k mass_k phi(xi, x_k) dxi,
/// so a cell whose masses sum to 1 carries a probability measure in x.
class SpatialMeasure {
public:
    SpatialMeasure() = default;
    explicit SpatialMeasure(std::size_t m_cells, double time = 0.0);

    [[nodiscard]] std::size_t m_cells() const noexcept { return cells_.size(); }
    [[nodiscard]] double time() const noexcept { return time_; }
    void set_time(double t) noexcept { time_ = t; }

    [[nodiscard]] double cell_begin(std::size_t c) const noexcept;
    [[nodiscard]] double cell_end(std::size_t c) const noexcept;
    [[nodiscard]] double cell_width() const noexcept { return 1.0 / static_cast<double>(cells_.size()); }

    [[nodiscard]] std::span<const Particle> particles(std::size_t c) const noexcept { return cells_[c].particles; }
    [[nodiscard]] std::vector<Particle>& mutable_particles(std::size_t c) noexcept { return cells_[c].particles; }
    [[nodiscard]] double offset(std::size_t c) const noexcept { return cells_[c].offset; }
    /// Effective position of particle k in cell c.
    [[nodiscard]] double position(std::size_t c, std::size_t k) const noexcept {
        return cells_[c].particles[k].x + cells_[c].offset;
    }

    void add(std::size_t c, double x, double mass);
    /// Translates every particle of cell c by `delta`.
    void translate(std::size_t c, double delta) noexcept { cells_[c].offset += delta; }
    /// Folds offsets into the stored positions.
    void materialize() noexcept;

    [[nodiscard]] double cell_mass(std::size_t c) const noexcept;
    [[nodiscard]] std::size_t particle_count() const noexcept;
    [[nodiscard]] std::size_t max_cell_particles() const noexcept;

    /// Same law in every cell.
    static SpatialMeasure uniform_in_xi(std::span<const Particle> law, std::size_t m_cells, double time = 0.0);

private:
    struct Cell {
        std::vector<Particle> particles;
        double offset = 0.0;
    };
    std::vector<Cell> cells_;
    double time_ = 0.0;
};

/// CSV with columns cell,position,mass.
void write_csv(std::ostream& os, const SpatialMeasure& mu);

}  // namespace nemf
