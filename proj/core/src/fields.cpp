#include "nemf/fields.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace nemf {

std::size_t FieldHistory::step_index(double t) const noexcept {
    if (steps == 0 || t <= 0.0) {
        return 0;
    }
    const auto k = static_cast<std::size_t>(std::floor(t / dt));
    return std::min(k, steps - 1);
}

double FieldHistory::integrated_at(double t, std::size_t c) const noexcept {
    if (steps == 0) {
        return 0.0;
    }
    const auto k = step_index(t);
    const double base = dt * static_cast<double>(k);
    return integrated(k, c) + input(k, c) * (t - base);
}

std::vector<double> FieldHistory::integrated_at(double t) const {
    std::vector<double> out(m_cells);
    for (std::size_t c = 0; c < m_cells; ++c) {
        out[c] = integrated_at(t, c);
    }
    return out;
}

void write_csv(std::ostream& os, const FieldHistory& field) {
    os << "t,cell,r,h,H\n";
    os.precision(17);
    for (std::size_t k = 0; k <= field.steps; ++k) {
        const double t = field.dt * static_cast<double>(k);
        for (std::size_t c = 0; c < field.m_cells; ++c) {
            os << t << ',' << c << ',' << field.rate(k, c) << ',' << field.input(k, c) << ','
               << field.integrated(k, c) << '\n';
        }
    }
}

}  // namespace nemf
