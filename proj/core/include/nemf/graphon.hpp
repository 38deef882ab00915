#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nemf {

/// Dense N x N synaptic weights, row i / column j = weight from j onto i.
/// The diagonal is always zero.
class WeightMatrix {
public:
    WeightMatrix() = default;
    explicit WeightMatrix(std::size_t n);
    /// Throws std::invalid_argument on size mismatch or a nonzero diagonal.
    WeightMatrix(std::size_t n, std::vector<double> entries);

    [[nodiscard]] std::size_t n() const noexcept { return n_; }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept { return entries_[i * n_ + j]; }
    /// Writes an off-diagonal entry; writes to the diagonal are rejected.
    void set(std::size_t i, std::size_t j, double value);
    [[nodiscard]] double max_abs() const noexcept;
    [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept { return {entries_.data() + i * n_, n_}; }
    [[nodiscard]] const std::vector<double>& entries() const noexcept { return entries_; }

private:
    std::size_t n_ = 0;
    std::vector<double> entries_;
};

/// Interval partition of [0,1) induced by an ordering of the neurons:
/// neuron order[p] occupies [p/n, (p+1)/n). Indices are 0-based.
class Partition {
public:
    Partition() = default;
    /// Throws std::invalid_argument if `order` is not a permutation.
    explicit Partition(std::vector<std::size_t> order);
    static Partition identity(std::size_t n);

    [[nodiscard]] std::size_t n() const noexcept { return order_.size(); }
    [[nodiscard]] std::size_t neuron_at(std::size_t position) const noexcept { return order_[position]; }
    [[nodiscard]] std::size_t position_of(std::size_t neuron) const noexcept { return position_[neuron]; }
    [[nodiscard]] double cell_begin(std::size_t neuron) const noexcept;
    [[nodiscard]] double cell_end(std::size_t neuron) const noexcept;
    [[nodiscard]] const std::vector<std::size_t>& order() const noexcept { return order_; }

private:
    std::vector<std::size_t> order_;
    std::vector<std::size_t> position_;
};

/// Closed-form limit kernels.
struct AnalyticKernel {
    enum class Kind { uniform_attachment_limit, constant };
    Kind kind = Kind::constant;
    double w0 = 1.0;

    [[nodiscard]] double eval(double xi, double zeta) const noexcept;
    /// Exact integral over [xi0,xi1] x [zeta0,zeta1] (subsets of [0,1]).
    [[nodiscard]] double rect_integral(double xi0, double xi1, double zeta0, double zeta1) const noexcept;
    [[nodiscard]] double sup_abs() const noexcept;
    [[nodiscard]] std::string name() const;
};

/// Kernel on [0,1]^2 that is constant on the cells of a uniform m x m grid.
/// An optional analytic kernel records the continuum object the table was
/// sampled from; integrals then use the closed form instead of the table.
class StepGraphon {
public:
    StepGraphon() = default;
    StepGraphon(std::size_t m, std::vector<double> values);
    StepGraphon(std::size_t m, std::vector<double> values, AnalyticKernel analytic);

    /// Cell averages of an analytic kernel on an m x m grid.
    static StepGraphon from_analytic(const AnalyticKernel& kernel, std::size_t m);
    static StepGraphon constant(std::size_t m, double w0);

    [[nodiscard]] std::size_t m() const noexcept { return m_; }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * m_ + j]; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
    [[nodiscard]] const std::optional<AnalyticKernel>& analytic() const noexcept { return analytic_; }

    /// Pointwise value; analytic when available, else the table cell.
    [[nodiscard]] double eval(double xi, double zeta) const noexcept;
    /// Exact integral of the kernel over a rectangle.
    [[nodiscard]] double rect_integral(double xi0, double xi1, double zeta0, double zeta1) const noexcept;
    /// Cell-averaged copy on an m' x m' grid (analytic tag preserved).
    [[nodiscard]] StepGraphon resample(std::size_t m_new) const;
    /// values(perm[i], perm[j]) in cell (i, j).
    [[nodiscard]] StepGraphon permuted(std::span<const std::size_t> perm) const;
    [[nodiscard]] double sup_abs() const noexcept;
    /// ||w||_{L^inf_xi L^1_zeta} of the table.
    [[nodiscard]] double sup_row_l1() const noexcept;

private:
    std::size_t m_ = 0;
    std::vector<double> values_;
    std::optional<AnalyticKernel> analytic_;
};

/// Nondecreasing piecewise-linear modulus eps(h) on [0,1] with eps(0) = 0.
class ModulusOfContinuity {
public:
    ModulusOfContinuity() = default;
    /// knots must be increasing, start at 0, and end at 1; values are
    /// replaced by their running maximum with values[0] = 0.
    ModulusOfContinuity(std::vector<double> knots, std::vector<double> values);
    /// Linear modulus eps(h) = slope * h.
    static ModulusOfContinuity linear(double slope);
    static ModulusOfContinuity zero();

    [[nodiscard]] double operator()(double h) const noexcept;
    [[nodiscard]] const std::vector<double>& knots() const noexcept { return knots_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

private:
    std::vector<double> knots_;
    std::vector<double> values_;
};

struct NormResult {
    double value = 0.0;
    bool exact = false;
};

// ---- generators ----------------------------------------------------------

/// Growing uniform attachment graph on n nodes. Each pair (i<j), 1-based,
/// becomes eligible when node j arrives and is then connected at step k >= j
/// with probability 1/k unless already connected. Sampled through each pair's
/// first-connection step, so graphs for different n from one seed are nested.
WeightMatrix gen_uniform_attachment(std::size_t n, std::uint64_t seed);

enum class SampleMode { bernoulli, deterministic };

/// W-random graph with latent positions xi_i = i/n (0-based i). Bernoulli
/// mode requires kernel values in [0,1]; symmetric kernels yield symmetric
/// matrices (edges drawn once per unordered pair).
WeightMatrix gen_w_random(const StepGraphon& kernel, std::size_t n, std::uint64_t seed,
                          SampleMode mode = SampleMode::bernoulli);

/// Step graphon of a weight matrix under a partition: cell (pos(i), pos(j))
/// holds w_{i,j}.
StepGraphon step_graphon(const WeightMatrix& matrix, const Partition& partition);

// ---- norms and distances -------------------------------------------------

inline constexpr std::size_t kExactOpNormMaxSize = 20;
inline constexpr std::size_t kExactCutDistanceMaxSize = 8;

/// L^inf -> L^1 operator norm of a step graphon,
/// (1/m^2) max_{g in {-1,1}^m} sum_i |sum_j v_ij g_j|.
/// Exhaustive for m <= 20, otherwise a local-search lower bound.
NormResult op_norm_inf_to_1(const StepGraphon& g);
/// Exhaustive sign enumeration (any m; cost 2^(m-1) * m).
double op_norm_exhaustive(std::span<const double> values, std::size_t m);
/// Random-restart single-flip hill climbing; a lower bound on the norm.
double op_norm_local_search(std::span<const double> values, std::size_t m, std::size_t restarts,
                            std::uint64_t seed);

struct CutDistanceBudget {
    std::size_t anneal_iterations = 20000;
    std::uint64_t seed = 1;
};

/// min over re-orderings pi of ||g1^pi - g2||_{inf->1}. Exhaustive for
/// m <= 8 (exact); simulated annealing otherwise (an upper bound).
NormResult cut_distance(const StepGraphon& g1, const StepGraphon& g2, const CutDistanceBudget& budget = {});

struct ShiftDifferences {
    std::vector<double> shifts;
    std::vector<double> xi_direction;
    std::vector<double> zeta_direction;
};

/// Periodic-shift L^1 differences int |w(xi-h,zeta) - w(xi,zeta)| (and the
/// zeta analogue) of a step graphon at arbitrary shifts, computed exactly.
ShiftDifferences shift_differences(const StepGraphon& g, std::span<const double> shifts);

/// Monotone envelope of the measured shift differences at h_k = k/n_shifts.
ModulusOfContinuity modulus_of_continuity(const StepGraphon& g, std::size_t n_shifts);

// ---- CSV -----------------------------------------------------------------

void write_csv(std::ostream& os, const WeightMatrix& w);
void write_csv(std::ostream& os, const StepGraphon& g);
WeightMatrix read_weight_matrix_csv(std::istream& is);
StepGraphon read_step_graphon_csv(std::istream& is);

}  // namespace nemf
