#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "nemf/fields.hpp"
#include "nemf/graphon.hpp"
#include "nemf/model.hpp"
#include "nemf/rng.hpp"
#include "nemf/spatial_measure.hpp"

namespace nemf {

struct CandidateEvent {
    double t = 0.0;
    double z = 0.0;
};

/// Homogeneous marked Poisson process on [0, horizon) x [0, z_max] for one
/// neuron. Events are produced lazily in increasing time order; the event
/// list depends only on (seed, z_max).
class PoissonStream {
public:
    PoissonStream(std::size_t neuron, double z_max, std::uint64_t seed);

    [[nodiscard]] std::size_t neuron() const noexcept { return neuron_; }
    [[nodiscard]] double z_max() const noexcept { return z_max_; }
    /// Next event; time is +inf when z_max = 0.
    CandidateEvent next();
    /// All events with t < horizon, from a fresh copy of the stream.
    [[nodiscard]] std::vector<CandidateEvent> materialize(double horizon) const;

private:
    std::size_t neuron_;
    double z_max_;
    std::uint64_t seed_;
    Engine eng_;
    double t_ = 0.0;
};

/// Seeds of a trial. Neuron i draws its stream from derive_seed(master, {i}).
struct StreamSeeds {
    std::uint64_t master = 0;
    [[nodiscard]] std::uint64_t stream(std::size_t neuron) const noexcept { return derive_seed(master, {neuron}); }
};

struct SimulationOptions {
    double dt_max = 1e-3;
    /// Nondecreasing times in [0, T] at which the state is recorded (after any
    /// jumps at that instant).
    std::vector<double> sample_times;
    bool record_spikes = true;
};

struct Spike {
    double t = 0.0;
    std::size_t neuron = 0;
    double z = 0.0;
};

struct NetworkState {
    double t = 0.0;
    std::vector<double> x;
};

struct TrajectoryLog {
    std::size_t n = 0;
    double horizon = 0.0;
    std::vector<double> sample_times;
    /// Row-major [sample][neuron].
    std::vector<double> states;
    /// Integrated input H^i at the sample times.
    std::vector<double> inputs;
    /// Compensators int_0^t f(X_i(s)) ds at the sample times.
    std::vector<double> compensators;
    std::vector<Spike> spikes;
    std::uint64_t candidate_events = 0;
    /// Weights of the network run; null for auxiliary runs.
    std::shared_ptr<const WeightMatrix> weights;

    [[nodiscard]] std::size_t n_samples() const noexcept { return sample_times.size(); }
    [[nodiscard]] std::span<const double> state(std::size_t sample) const noexcept {
        return {states.data() + sample * n, n};
    }
    [[nodiscard]] std::span<const double> input(std::size_t sample) const noexcept {
        return {inputs.data() + sample * n, n};
    }
    [[nodiscard]] std::span<const double> compensator(std::size_t sample) const noexcept {
        return {compensators.data() + sample * n, n};
    }
    [[nodiscard]] NetworkState network_state(std::size_t sample) const;
};

/// Exact thinning simulation of the network on [0, T].
TrajectoryLog simulate_network(const ModelFunctions& model, std::shared_ptr<const WeightMatrix> w,
                               std::span<const double> x0, double T, const StreamSeeds& seeds,
                               const SimulationOptions& options = {});

/// Mean-field input seen by each neuron, h_bar_i(t) = sum_d r(t, d) * N * int_{E_i} int_{cell d} w,
/// piecewise constant on the grid of the rate field.
struct AuxiliaryDrive {
    double dt = 0.0;
    std::size_t steps = 0;
    std::size_t n = 0;
    /// Row-major [step][neuron].
    std::vector<double> values;

    [[nodiscard]] double horizon() const noexcept { return dt * static_cast<double>(steps); }
    [[nodiscard]] double at(std::size_t k, std::size_t neuron) const noexcept { return values[k * n + neuron]; }
};

AuxiliaryDrive make_auxiliary_drive(const StepGraphon& kernel, const RateField& rate_field,
                                    const Partition& partition);

/// Neurons driven by the mean-field input instead of the network; consumes
/// the same Poisson streams as simulate_network for equal seeds.
TrajectoryLog simulate_auxiliary(const ModelFunctions& model, const AuxiliaryDrive& drive, std::span<const double> x0,
                                 double T, const StreamSeeds& seeds, const SimulationOptions& options = {});

TrajectoryLog simulate_auxiliary(const ModelFunctions& model, const StepGraphon& kernel, const RateField& rate_field,
                                 std::span<const double> x0, const Partition& partition, double T,
                                 const StreamSeeds& seeds, const SimulationOptions& options = {});

/// (1/N) sum_i max_k min(|X_i(t_k) - Y_i(t_k)|, 1) over the common sample times.
double coupling_distance(const TrajectoryLog& a, const TrajectoryLog& b);

/// Extended empirical measure: cell pos(i) carries a unit atom at x_i.
SpatialMeasure extended_empirical_measure(std::span<const double> x, const Partition& partition, double time = 0.0);

/// Step function H^N(t, .) in position order. Uses the recorded samples when t
/// is a sample time, otherwise replays the spikes against the weights.
std::vector<double> integrated_input_field(const TrajectoryLog& log, const Partition& partition, double t);

// ---- initial data --------------------------------------------------------

/// Law of the initial potentials.
struct InitialLaw {
    enum class Kind { point, uniform, truncated_gaussian, atoms };
    Kind kind = Kind::point;
    /// point: location; uniform: lower end; gaussian: mean.
    double a = 0.0;
    /// uniform: upper end; gaussian: standard deviation.
    double b = 0.0;
    /// gaussian truncation radius R (support [-R, R]).
    double radius = 0.0;
    /// atoms: positions and probabilities.
    std::vector<Particle> atoms;

    static InitialLaw point(double x);
    static InitialLaw uniform(double lo, double hi);
    static InitialLaw truncated_gaussian(double mean, double sd, double radius);
    /// Normalizes the masses; throws on empty or negative input.
    static InitialLaw discrete(std::vector<Particle> atoms);

    [[nodiscard]] double sample(Engine& eng) const;
    /// Atomic representation: exact for point/atoms, otherwise q equal-mass
    /// quantile midpoints.
    [[nodiscard]] std::vector<Particle> particles(std::size_t q = 64) const;
    [[nodiscard]] double second_moment() const;
};

std::vector<double> sample_initial_state(const InitialLaw& law, std::size_t n, std::uint64_t seed);

void to_json(nlohmann::json& j, const InitialLaw& law);
void from_json(const nlohmann::json& j, InitialLaw& law);

// ---- CSV -----------------------------------------------------------------

/// Columns t,neuron,x,H,compensator.
void write_states_csv(std::ostream& os, const TrajectoryLog& log);
/// Columns t,neuron,z.
void write_spikes_csv(std::ostream& os, const TrajectoryLog& log);

}  // namespace nemf
