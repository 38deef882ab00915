#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace nemf {

/// Rate r, input velocity h and integrated input H of a mean-field solve on
/// the grid t_k = k * dt, k = 0..steps, per xi-cell. r_k and h_k are the
/// values used over [t_k, t_{k+1}); H_k = sum_{l<k} h_l * dt.
struct FieldHistory {
    double dt = 0.0;
    std::size_t steps = 0;
    std::size_t m_cells = 0;
    std::vector<double> r;
    std::vector<double> h;
    std::vector<double> H;

    FieldHistory() = default;
    FieldHistory(double dt_, std::size_t steps_, std::size_t m_cells_)
        : dt(dt_), steps(steps_), m_cells(m_cells_),
          r((steps_ + 1) * m_cells_, 0.0), h((steps_ + 1) * m_cells_, 0.0), H((steps_ + 1) * m_cells_, 0.0) {}

    [[nodiscard]] double horizon() const noexcept { return dt * static_cast<double>(steps); }
    [[nodiscard]] double rate(std::size_t k, std::size_t c) const noexcept { return r[k * m_cells + c]; }
    [[nodiscard]] double input(std::size_t k, std::size_t c) const noexcept { return h[k * m_cells + c]; }
    [[nodiscard]] double integrated(std::size_t k, std::size_t c) const noexcept { return H[k * m_cells + c]; }

    /// Index of the step interval containing t (clamped to the grid).
    [[nodiscard]] std::size_t step_index(double t) const noexcept;
    /// H(t, c), linear between grid times (exact for piecewise-constant h).
    [[nodiscard]] double integrated_at(double t, std::size_t c) const noexcept;
    /// Per-cell H(t, .).
    [[nodiscard]] std::vector<double> integrated_at(double t) const;
};

using RateField = FieldHistory;
using InputField = FieldHistory;

/// CSV with columns t,cell,r,h,H.
void write_csv(std::ostream& os, const FieldHistory& field);

}  // namespace nemf
