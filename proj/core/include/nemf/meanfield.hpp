#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nemf/dual.hpp"
#include "nemf/fields.hpp"
#include "nemf/graphon.hpp"
#include "nemf/model.hpp"
#include "nemf/spatial_measure.hpp"

namespace nemf {

struct MeanFieldOptions {
    double T = 1.0;
    double dt = 1e-3;
    std::size_t m_cells = 128;
    /// Snapshot times; each must be a multiple of dt. The initial and final
    /// times are always included.
    std::vector<double> output_times;
    double x_tol = 1e-6;
    /// Particles per cell kept after compaction.
    std::size_t particle_cap = 256;
    /// Allowed deviation of a cell mass from its initial value per unit time.
    double mass_tolerance = 1e-6;
};

struct MeanFieldStats {
    std::size_t steps = 0;
    double max_mass_drift = 0.0;
    std::size_t max_cell_particles = 0;
    std::size_t merges = 0;
    std::vector<std::string> warnings;
};

struct MeanFieldSolution {
    std::vector<SpatialMeasure> snapshots;
    FieldHistory fields;
    MeanFieldStats stats;

    /// Snapshot whose time is closest to t.
    [[nodiscard]] const SpatialMeasure& at(double t) const;
};

/// Particle solver of the transport equation with hazard loss and reset at 0.
/// mu0 must have either options.m_cells cells or a single cell (broadcast).
MeanFieldSolution solve_meanfield(const ModelFunctions& model, const StepGraphon& kernel, const SpatialMeasure& mu0,
                                  const MeanFieldOptions& options);

/// Space-homogeneous reference solver: one population driven by h = w0 * r.
/// Returns one single-cell measure per snapshot time.
MeanFieldSolution solve_exchangeable(const ModelFunctions& model, double w0, std::span<const Particle> law,
                                     const MeanFieldOptions& options);

/// Pushforward by x -> x - H(c) in every cell.
SpatialMeasure shift_by_input(const SpatialMeasure& mu, std::span<const double> H);

// ---- dual-backward equation ---------------------------------------------

struct DualOptions {
    double ds = 1e-3;
    /// Keep every stride-th slice (the first and last are always kept).
    std::size_t store_stride = 0;
    double fixed_point_tol = 1e-10;
    std::size_t max_fixed_point_iterations = 100;
};

struct DualDiagnostics {
    /// max over steps and nodes of |phi(s_k) - phi(s_{k+1})| / ds.
    double max_abs_ds = 0.0;
    std::size_t max_fixed_point_iterations = 0;
    std::size_t steps = 0;
};

struct DualSolution {
    DualTestFunction phi;
    DualDiagnostics diagnostics;
};

/// Called on every computed slice (including the terminal one); lets callers
/// evaluate norms without storing all slices.
using SliceObserver = std::function<void(const DualGrid&, const DualSlice&)>;

/// Backward semi-Lagrangian solve of the dual equation from s = t to s = 0.
/// The terminal slice lives on `grid`; `input.m_cells` must equal grid.m_cells.
DualSolution solve_dual_backward(const ModelFunctions& model, const InputField& input, const DualGrid& grid,
                                 std::span<const double> terminal, double t, const DualOptions& options = {},
                                 const SliceObserver& observer = {});

/// <phi(s), mu_#(s)> with mu_#(s) = mu(s) shifted by -H(s).
double dual_pairing(const DualGrid& grid, const DualSlice& slice, const SpatialMeasure& mu_shifted);

/// |<phi(t), mu_#(t)> - <phi(0), mu_#(0)>|.
double duality_defect(const MeanFieldSolution& solution, const DualTestFunction& phi);

/// Smallest half-width L that covers the support of mu0 plus the transport
/// and input displacement over [0, t], plus one.
double dual_extent(const SpatialMeasure& mu0, const Bounds& bounds, const InputField& input, double t);

// ---- constants -----------------------------------------------------------

struct KappaInputs {
    /// ||w||_{L^inf_xi L^1_zeta}.
    double w_linf_l1 = 1.0;
    /// ||1/eta||_{L^1} for the weight eta; pi for eta = 1 + x^2.
    double eta_inv_l1 = 3.141592653589793;
    /// Uniform bound on the eta-moments of the empirical measures on [0, t].
    std::optional<double> eta_moment;
};

struct KappaReport {
    double t = 0.0;
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double kappa3 = 0.0;
    double kappa = 0.0;
    double kappa4 = 0.0;
    double kappa5 = 0.0;
    /// Present when KappaInputs::eta_moment is set.
    std::optional<double> kappa6;
};

double kappa2(const Bounds& b, double t);
double kappa3(const Bounds& b, double t);
double kappa4(const Bounds& b, double t);

KappaReport kappa_constants(const Bounds& bounds, const KappaInputs& inputs, double t);

}  // namespace nemf
