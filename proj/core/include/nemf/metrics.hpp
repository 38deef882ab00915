#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nemf/dual.hpp"
#include "nemf/graphon.hpp"
#include "nemf/spatial_measure.hpp"

namespace nemf {

struct MeasureDistanceReport {
    std::string metric;
    double value = 0.0;
    bool exact = true;
    nlohmann::json params = nlohmann::json::object();
};

void to_json(nlohmann::json& j, const MeasureDistanceReport& r);

// ---- H^-1 (x) H^-1 -------------------------------------------------------

inline constexpr std::size_t kDefaultPeriodization = 20;

/// Lambda(x) = exp(-|x|) / 2.
double lambda_kernel(double x) noexcept;

/// int_{[a0,a1]} int_{[b0,b1]} Lambda_tilde(xi - zeta) dzeta dxi for the
/// periodization Lambda_tilde(u) = sum_{|n| <= K} Lambda(u + n), in closed form.
double xi_kernel_integral(double a0, double a1, double b0, double b1, std::size_t K = kDefaultPeriodization);

/// Bilinear form <mu1, mu2> of the tensor negative Sobolev norm.
double h11_inner(const SpatialMeasure& mu1, const SpatialMeasure& mu2, std::size_t K = kDefaultPeriodization);

/// ||mu1 - mu2|| with compensated summation.
MeasureDistanceReport h11_distance(const SpatialMeasure& mu1, const SpatialMeasure& mu2,
                                   std::size_t K = kDefaultPeriodization);

/// Same distance from precomputed self terms <mu1,mu1> and <mu2,mu2>.
double h11_distance_from_self(const SpatialMeasure& mu1, const SpatialMeasure& mu2, double self1, double self2,
                              std::size_t K = kDefaultPeriodization);

/// H^-1(R) distance of two finite measures on the line (kernel Lambda).
double h1_line_distance(std::span<const Particle> a, std::span<const Particle> b);

// ---- Phi_w norm ----------------------------------------------------------

struct PhiWNorm {
    double sup = 0.0;
    /// max over cells of the x-total variation (L^1 norm of the x-derivative).
    double l1_dx = 0.0;
    /// max slope of the x-interpolant.
    double sup_dx = 0.0;
    /// Smallest C with shift integral <= C eps(h) over the shift grid; +inf
    /// if eps vanishes at a shift with a nonzero shift integral.
    double shift = 0.0;
    double value = 0.0;
};

/// Exact norm of the grid function (cell-constant in xi, linear in x) with
/// the sup over shifts taken at the breakpoints {k/m} and the knots of eps,
/// where the ratio of the two piecewise-linear functions peaks.
PhiWNorm phi_w_norm(const DualGrid& grid, std::span<const double> values, const ModulusOfContinuity& eps);

/// Same norm for a tensor a(xi) g(x) (a on grid.m_cells cells, g on grid.nx nodes).
PhiWNorm phi_w_norm_tensor(const DualGrid& grid, std::span<const double> a, std::span<const double> g,
                           const ModulusOfContinuity& eps);

/// Shift grid used by phi_w_norm.
std::vector<double> phi_w_shift_grid(std::size_t m, const ModulusOfContinuity& eps);

// ---- Phi_w^-1 lower bound ------------------------------------------------

/// Tensor test family: a(xi) in {1, cos 2 pi k xi, sin 2 pi k xi : k <= max_mode}
/// (cell averages on m_cells cells) times g(x) in {ramps clamp(x - c, -w, w),
/// bumps exp(-(x - c)^2 / (2 w^2))} sampled on [-L, L].
struct TestFamilySpec {
    std::string id = "fourier-ramp-bump";
    std::size_t m_cells = 16;
    std::size_t max_mode = 2;
    std::vector<double> centers;
    std::vector<double> widths{0.25, 0.5, 1.0, 2.0};
    double L = 8.0;
    std::size_t nx = 4001;

    /// Centers from -4 to 4 in steps of 0.25.
    static TestFamilySpec standard();
};

MeasureDistanceReport phi_w_lb_distance(const SpatialMeasure& mu1, const SpatialMeasure& mu2,
                                        const ModulusOfContinuity& eps, const TestFamilySpec& family);

// ---- moments -------------------------------------------------------------

double second_moment(const SpatialMeasure& mu);

}  // namespace nemf
