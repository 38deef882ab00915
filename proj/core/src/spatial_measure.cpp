#include "nemf/spatial_measure.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace nemf {

SpatialMeasure::SpatialMeasure(std::size_t m_cells, double time) : cells_(m_cells), time_(time) {
    if (m_cells == 0) {
        throw std::invalid_argument("spatial measure needs at least one cell");
    }
}

double SpatialMeasure::cell_begin(std::size_t c) const noexcept {
    return static_cast<double>(c) / static_cast<double>(cells_.size());
}

double SpatialMeasure::cell_end(std::size_t c) const noexcept {
    return static_cast<double>(c + 1) / static_cast<double>(cells_.size());
}

void SpatialMeasure::add(std::size_t c, double x, double mass) {
    if (mass < 0.0) {
        throw std::invalid_argument("particle masses must be nonnegative");
    }
    cells_.at(c).particles.push_back({x - cells_[c].offset, mass});
}

void SpatialMeasure::materialize() noexcept {
    for (auto& cell : cells_) {
        if (cell.offset != 0.0) {
            for (auto& p : cell.particles) {
                p.x += cell.offset;
            }
            cell.offset = 0.0;
        }
    }
}

double SpatialMeasure::cell_mass(std::size_t c) const noexcept {
    double total = 0.0;
    for (const auto& p : cells_[c].particles) {
        total += p.mass;
    }
    return total;
}

std::size_t SpatialMeasure::particle_count() const noexcept {
    std::size_t total = 0;
    for (const auto& cell : cells_) {
        total += cell.particles.size();
    }
    return total;
}

std::size_t SpatialMeasure::max_cell_particles() const noexcept {
    std::size_t best = 0;
    for (const auto& cell : cells_) {
        best = std::max(best, cell.particles.size());
    }
    return best;
}

SpatialMeasure SpatialMeasure::uniform_in_xi(std::span<const Particle> law, std::size_t m_cells, double time) {
    SpatialMeasure mu(m_cells, time);
    for (std::size_t c = 0; c < m_cells; ++c) {
        mu.cells_[c].particles.assign(law.begin(), law.end());
    }
    return mu;
}

void write_csv(std::ostream& os, const SpatialMeasure& mu) {
    os << "cell,position,mass\n";
    os.precision(17);
    for (std::size_t c = 0; c < mu.m_cells(); ++c) {
        const auto ps = mu.particles(c);
        for (std::size_t k = 0; k < ps.size(); ++k) {
            os << c << ',' << mu.position(c, k) << ',' << ps[k].mass << '\n';
        }
    }
}

}  // namespace nemf
