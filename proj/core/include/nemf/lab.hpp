#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nemf/graphon.hpp"
#include "nemf/model.hpp"
#include "nemf/netsim.hpp"

namespace nemf {

enum class ExperimentId { convergence, input_concentration, initial_data, coupling, dual_regularity };

std::string to_string(ExperimentId id);
ExperimentId experiment_from_string(const std::string& name);

/// How weight matrices are drawn and which limit kernel they approximate.
struct KernelSpec {
    enum class Type { constant, uniform_attachment, w_random };
    Type type = Type::constant;
    double w0 = 1.0;
    /// w_random only: limit kernel and sampling mode.
    AnalyticKernel limit{AnalyticKernel::Kind::uniform_attachment_limit, 1.0};
    SampleMode mode = SampleMode::bernoulli;

    [[nodiscard]] AnalyticKernel limit_kernel() const;
    /// Upper bound on max|w_ij| known before sampling.
    [[nodiscard]] double max_abs_bound() const;
    [[nodiscard]] WeightMatrix draw(std::size_t n, std::uint64_t seed) const;
};

void to_json(nlohmann::json& j, const KernelSpec& k);
void from_json(const nlohmann::json& j, KernelSpec& k);

struct DualExperimentSpec {
    std::size_t m_cells = 8;
    double dx = 2.5e-4;
    /// Terminal datum a(xi) g(x): a = cos(2 pi mode xi) (1 when mode = 0),
    /// g a Gaussian bump, normalized to unit Phi_w norm.
    std::size_t mode = 1;
    double center = 0.0;
    double width = 0.5;
    /// Phi_w norms are evaluated on every norm_stride-th slice and the last.
    std::size_t norm_stride = 10;
};

struct ExperimentConfig {
    ExperimentId experiment = ExperimentId::convergence;
    ModelSpec model = acceptance_model_spec();
    KernelSpec kernel;
    InitialLaw initial = InitialLaw::point(0.0);
    std::vector<std::size_t> n_list;
    std::size_t trials = 1;
    double T = 1.0;
    /// Mean-field time step.
    double dt = 1e-3;
    /// Network integration step.
    double sim_dt = 1e-3;
    std::uint64_t seed = 1;
    std::string output_dir;
    std::size_t m_cells = 128;
    std::size_t particle_cap = 256;
    std::size_t coupling_samples = 100;
    /// Largest admissible projected number of candidate events.
    double event_budget = 5e9;
    DualExperimentSpec dual;

    /// Throws std::invalid_argument on an invalid configuration.
    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

struct RawRow {
    std::string experiment;
    std::size_t N = 0;
    std::size_t trial = 0;
    double t = 0.0;
    std::string metric;
    double value = 0.0;
    /// NaN when the metric has no declared bound.
    double bound = 0.0;
    std::uint64_t seed = 0;
};

struct Aggregate {
    std::string metric;
    std::size_t N = 0;
    std::size_t count = 0;
    double mean = 0.0;
    double stderr_ = 0.0;
    double bound = 0.0;
};

struct SlopeFit {
    std::string metric;
    double slope = 0.0;
    double stderr_ = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t points = 0;
};

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
    /// True for "mean <= declared bound" checks; false for trend checks.
    bool bound = false;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<RawRow> rows;
    std::vector<Aggregate> aggregates;
    std::vector<SlopeFit> slopes;
    std::vector<Check> checks;
    nlohmann::json extra = nlohmann::json::object();
    double seconds = 0.0;

    [[nodiscard]] bool passed() const noexcept;
    [[nodiscard]] bool bound_violated() const noexcept;
    [[nodiscard]] const Aggregate* find(const std::string& metric, std::size_t N) const noexcept;
    [[nodiscard]] const SlopeFit* slope(const std::string& metric) const noexcept;
};

/// Projected candidate-event count of the network simulations of a config.
double projected_events(const ExperimentConfig& config);

/// Runs the configured experiment. Throws std::invalid_argument when the
/// projected event count exceeds the configured budget.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Means and standard errors per (metric, N), in first-appearance order.
std::vector<Aggregate> aggregate(const std::vector<RawRow>& rows);

/// OLS of log(mean) on log(N) with a Student-t 95% interval.
SlopeFit fit_loglog_slope(const std::vector<Aggregate>& aggregates, const std::string& metric);

/// Writes raw.csv, summary.json and manifest.json into `dir` (created if
/// missing). Throws std::runtime_error if the directory is not writable.
void emit_report(const ExperimentReport& report, const std::filesystem::path& dir);

void write_raw_csv(std::ostream& os, const std::vector<RawRow>& rows);
std::vector<RawRow> read_raw_csv(std::istream& is);

nlohmann::json summary_json(const ExperimentReport& report);
nlohmann::json manifest_json(const ExperimentReport& report);

/// Gronwall envelope (E0 + C1 t) e^{C2 t} of the mean second moment.
double moment_envelope(const Bounds& bounds, double max_w, std::size_t N, double E0, double t);

/// Per-trial seed used by every experiment.
std::uint64_t trial_seed(std::uint64_t master, std::size_t N, std::size_t trial);

std::string code_version();

}  // namespace nemf
