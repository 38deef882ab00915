#include "nemf/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace nemf {

PoissonStream::PoissonStream(std::size_t neuron, double z_max, std::uint64_t seed)
    : neuron_(neuron), z_max_(z_max), seed_(seed), eng_(make_engine(seed)) {
    if (!(z_max >= 0.0) || !std::isfinite(z_max)) {
        throw std::invalid_argument("mark ceiling must be finite and nonnegative");
    }
}

CandidateEvent PoissonStream::next() {
    if (z_max_ == 0.0) {
        return {std::numeric_limits<double>::infinity(), 0.0};
    }
    t_ += exponential(eng_, z_max_);
    return {t_, z_max_ * uniform01(eng_)};
}

std::vector<CandidateEvent> PoissonStream::materialize(double horizon) const {
    PoissonStream copy(neuron_, z_max_, seed_);
    std::vector<CandidateEvent> events;
    for (auto e = copy.next(); e.t < horizon; e = copy.next()) {
        events.push_back(e);
    }
    return events;
}

NetworkState TrajectoryLog::network_state(std::size_t sample) const {
    const auto s = state(sample);
    return {sample_times.at(sample), std::vector<double>(s.begin(), s.end())};
}

namespace {

void check_sample_times(const std::vector<double>& times, double T) {
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(times[k] >= 0.0 && times[k] <= T)) {
            throw std::invalid_argument("sample times must lie in [0, T]");
        }
        if (k > 0 && times[k] < times[k - 1]) {
            throw std::invalid_argument("sample times must be nondecreasing");
        }
    }
}

struct NoDrive {
    [[nodiscard]] double operator()(std::size_t, double) const noexcept { return 0.0; }
};

struct TableDrive {
    const AuxiliaryDrive* drive;
    [[nodiscard]] double operator()(std::size_t i, double t) const noexcept {
        if (drive->steps == 0) {
            return 0.0;
        }
        auto k = static_cast<std::size_t>(t / drive->dt);
        k = std::min(k, drive->steps - 1);
        return drive->at(k, i);
    }
};

/// Per-neuron lazy integrator. Each neuron keeps its own clock and is
/// advanced on demand; steps never cross the global grid k * dt_max.
template <class Drive>
class Integrator {
public:
    Integrator(const ModelFunctions& model, std::span<const double> x0, double dt, Drive drive)
        : model_(model), dt_(dt), drive_(drive), x_(x0.begin(), x0.end()), t_(x0.size(), 0.0),
          k_(x0.size(), 0), fx_(x0.size()), comp_(x0.size(), 0.0), input_(x0.size(), 0.0) {
        for (std::size_t i = 0; i < x_.size(); ++i) {
            if (!std::isfinite(x_[i])) {
                throw std::invalid_argument("initial state must be finite");
            }
            fx_[i] = model_.f(x_[i]);
        }
    }

    void advance(std::size_t i, double s) {
        while (t_[i] < s) {
            const double grid_next = dt_ * static_cast<double>(k_[i] + 1);
            double target = s;
            if (grid_next <= s) {
                target = grid_next;
                ++k_[i];
            }
            const double h = target - t_[i];
            if (h > 0.0) {
                step(i, h, drive_(i, 0.5 * (t_[i] + target)));
            }
            t_[i] = target;
        }
    }

    void advance_all(double s) {
        for (std::size_t i = 0; i < x_.size(); ++i) {
            advance(i, s);
        }
    }

    void set(std::size_t i, double value) {
        x_[i] = value;
        fx_[i] = model_.f(value);
    }
    void add(std::size_t i, double delta) { set(i, x_[i] + delta); }
    void add_input(std::size_t i, double delta) noexcept { input_[i] += delta; }

    [[nodiscard]] double x(std::size_t i) const noexcept { return x_[i]; }
    [[nodiscard]] double fx(std::size_t i) const noexcept { return fx_[i]; }
    [[nodiscard]] const std::vector<double>& xs() const noexcept { return x_; }
    [[nodiscard]] const std::vector<double>& compensators() const noexcept { return comp_; }
    [[nodiscard]] const std::vector<double>& inputs() const noexcept { return input_; }

private:
    void step(std::size_t i, double h, double d) {
        const double x0 = x_[i];
        const double k1 = model_.b(x0) + d;
        const double k2 = model_.b(x0 + 0.5 * h * k1) + d;
        const double k3 = model_.b(x0 + 0.5 * h * k2) + d;
        const double k4 = model_.b(x0 + h * k3) + d;
        const double x1 = x0 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(x1)) {
            std::ostringstream msg;
            msg << "non-finite state for neuron " << i << " at t=" << t_[i] << " (x=" << x0 << ", step " << h
                << ")";
            throw std::runtime_error(msg.str());
        }
        // Cubic Hermite midpoint for Simpson's rule on the compensator.
        const double xm = 0.5 * (x0 + x1) + h / 8.0 * (k1 - k4);
        const double f1 = model_.f(x1);
        comp_[i] += h / 6.0 * (fx_[i] + 4.0 * model_.f(xm) + f1);
        input_[i] += h * d;
        x_[i] = x1;
        fx_[i] = f1;
    }

    const ModelFunctions& model_;
    double dt_;
    Drive drive_;
    std::vector<double> x_;
    std::vector<double> t_;
    std::vector<std::uint64_t> k_;
    std::vector<double> fx_;
    std::vector<double> comp_;
    std::vector<double> input_;
};

struct QueueEntry {
    double t;
    std::size_t neuron;
    double z;
    bool operator>(const QueueEntry& o) const noexcept { return t > o.t || (t == o.t && neuron > o.neuron); }
};

/// Shared event loop. `on_spike(i, s)` applies the jumps caused by a spike of
/// neuron i at time s (other than the reset of i itself).
template <class Drive, class OnSpike>
TrajectoryLog run_event_loop(const ModelFunctions& model, std::span<const double> x0, double T,
                             const StreamSeeds& seeds, const SimulationOptions& options, Drive drive,
                             OnSpike on_spike_factory) {
    if (!(T > 0.0) || !std::isfinite(T)) {
        throw std::invalid_argument("horizon must be positive");
    }
    if (!(options.dt_max > 0.0)) {
        throw std::invalid_argument("integration step must be positive");
    }
    check_sample_times(options.sample_times, T);

    const std::size_t n = x0.size();
    const double z_max = model.bounds().sup_f;
    Integrator<Drive> integ(model, x0, options.dt_max, drive);
    auto on_spike = on_spike_factory(integ);

    TrajectoryLog log;
    log.n = n;
    log.horizon = T;
    log.sample_times = options.sample_times;
    log.states.reserve(n * options.sample_times.size());
    log.inputs.reserve(n * options.sample_times.size());
    log.compensators.reserve(n * options.sample_times.size());

    std::vector<PoissonStream> streams;
    streams.reserve(n);
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> queue;
    for (std::size_t i = 0; i < n; ++i) {
        streams.emplace_back(i, z_max, seeds.stream(i));
        const auto e = streams[i].next();
        if (e.t < T) {
            queue.push({e.t, i, e.z});
        }
    }

    auto record = [&](double ts) {
        integ.advance_all(ts);
        log.states.insert(log.states.end(), integ.xs().begin(), integ.xs().end());
        log.inputs.insert(log.inputs.end(), integ.inputs().begin(), integ.inputs().end());
        log.compensators.insert(log.compensators.end(), integ.compensators().begin(), integ.compensators().end());
    };

    std::size_t next_sample = 0;
    while (!queue.empty()) {
        const auto ev = queue.top();
        while (next_sample < options.sample_times.size() && options.sample_times[next_sample] < ev.t) {
            record(options.sample_times[next_sample++]);
        }
        queue.pop();
        ++log.candidate_events;
        const std::size_t i = ev.neuron;
        integ.advance(i, ev.t);
        if (ev.z <= integ.fx(i)) {
            on_spike(i, ev.t);
            integ.set(i, 0.0);
            if (options.record_spikes) {
                log.spikes.push_back({ev.t, i, ev.z});
            }
        }
        const auto e = streams[i].next();
        if (e.t < T) {
            queue.push({e.t, i, e.z});
        }
    }
    while (next_sample < options.sample_times.size()) {
        record(options.sample_times[next_sample++]);
    }
    return log;
}

}  // namespace

TrajectoryLog simulate_network(const ModelFunctions& model, std::shared_ptr<const WeightMatrix> w,
                               std::span<const double> x0, double T, const StreamSeeds& seeds,
                               const SimulationOptions& options) {
    if (!w) {
        throw std::invalid_argument("weight matrix required");
    }
    if (w->n() != x0.size()) {
        throw std::invalid_argument("weight matrix and initial state sizes differ");
    }
    const WeightMatrix& weights = *w;
    const std::size_t n = x0.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    auto factory = [&](auto& integ) {
        return [&integ, &weights, n, inv_n](std::size_t i, double s) {
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) {
                    continue;
                }
                const double jump = weights(j, i) * inv_n;
                if (jump != 0.0) {
                    integ.advance(j, s);
                    integ.add(j, jump);
                    integ.add_input(j, jump);
                }
            }
        };
    };
    auto log = run_event_loop(model, x0, T, seeds, options, NoDrive{}, factory);
    log.weights = std::move(w);
    return log;
}

AuxiliaryDrive make_auxiliary_drive(const StepGraphon& kernel, const RateField& rate_field,
                                    const Partition& partition) {
    const std::size_t n = partition.n();
    const std::size_t m = rate_field.m_cells;
    if (n == 0 || m == 0) {
        throw std::invalid_argument("empty partition or rate field");
    }
    const double nd = static_cast<double>(n);
    const double md = static_cast<double>(m);
    std::vector<double> weights(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        const double a0 = partition.cell_begin(i);
        const double a1 = partition.cell_end(i);
        for (std::size_t d = 0; d < m; ++d) {
            weights[i * m + d] =
                nd * kernel.rect_integral(a0, a1, static_cast<double>(d) / md, static_cast<double>(d + 1) / md);
        }
    }
    AuxiliaryDrive drive;
    drive.dt = rate_field.dt;
    drive.steps = rate_field.steps;
    drive.n = n;
    drive.values.assign(drive.steps * n, 0.0);
    for (std::size_t k = 0; k < drive.steps; ++k) {
        const double* r = rate_field.r.data() + k * m;
        for (std::size_t i = 0; i < n; ++i) {
            const double* wi = weights.data() + i * m;
            double acc = 0.0;
            for (std::size_t d = 0; d < m; ++d) {
                acc += wi[d] * r[d];
            }
            drive.values[k * n + i] = acc;
        }
    }
    return drive;
}

TrajectoryLog simulate_auxiliary(const ModelFunctions& model, const AuxiliaryDrive& drive, std::span<const double> x0,
                                 double T, const StreamSeeds& seeds, const SimulationOptions& options) {
    if (drive.n != x0.size()) {
        throw std::invalid_argument("drive and initial state sizes differ");
    }
    if (T > drive.horizon() * (1.0 + 1e-12)) {
        throw std::invalid_argument("rate field horizon shorter than the simulation horizon");
    }
    auto factory = [](auto&) { return [](std::size_t, double) {}; };
    return run_event_loop(model, x0, T, seeds, options, TableDrive{&drive}, factory);
}

TrajectoryLog simulate_auxiliary(const ModelFunctions& model, const StepGraphon& kernel, const RateField& rate_field,
                                 std::span<const double> x0, const Partition& partition, double T,
                                 const StreamSeeds& seeds, const SimulationOptions& options) {
    if (partition.n() != x0.size()) {
        throw std::invalid_argument("partition and initial state sizes differ");
    }
    return simulate_auxiliary(model, make_auxiliary_drive(kernel, rate_field, partition), x0, T, seeds, options);
}

double coupling_distance(const TrajectoryLog& a, const TrajectoryLog& b) {
    if (a.n != b.n || a.sample_times != b.sample_times) {
        throw std::invalid_argument("coupled logs must share size and sample times");
    }
    if (a.n == 0) {
        return 0.0;
    }
    std::vector<double> sup(a.n, 0.0);
    for (std::size_t k = 0; k < a.n_samples(); ++k) {
        const auto xa = a.state(k);
        const auto xb = b.state(k);
        for (std::size_t i = 0; i < a.n; ++i) {
            sup[i] = std::max(sup[i], std::min(std::abs(xa[i] - xb[i]), 1.0));
        }
    }
    double total = 0.0;
    for (double v : sup) {
        total += v;
    }
    return total / static_cast<double>(a.n);
}

SpatialMeasure extended_empirical_measure(std::span<const double> x, const Partition& partition, double time) {
    if (partition.n() != x.size()) {
        throw std::invalid_argument("partition and state sizes differ");
    }
    SpatialMeasure mu(x.size(), time);
    for (std::size_t i = 0; i < x.size(); ++i) {
        mu.add(partition.position_of(i), x[i], 1.0);
    }
    return mu;
}

std::vector<double> integrated_input_field(const TrajectoryLog& log, const Partition& partition, double t) {
    if (partition.n() != log.n) {
        throw std::invalid_argument("partition and log sizes differ");
    }
    if (!(t >= 0.0 && t <= log.horizon)) {
        throw std::invalid_argument("time outside the simulated horizon");
    }
    std::vector<double> out(log.n, 0.0);
    const auto it = std::find(log.sample_times.begin(), log.sample_times.end(), t);
    if (it != log.sample_times.end()) {
        const auto h = log.input(static_cast<std::size_t>(it - log.sample_times.begin()));
        for (std::size_t i = 0; i < log.n; ++i) {
            out[partition.position_of(i)] = h[i];
        }
        return out;
    }
    if (!log.weights) {
        throw std::invalid_argument("input field of an auxiliary run is only available at sample times");
    }
    const auto& w = *log.weights;
    const double inv_n = 1.0 / static_cast<double>(log.n);
    std::vector<double> h(log.n, 0.0);
    for (const auto& s : log.spikes) {
        if (s.t > t) {
            break;
        }
        for (std::size_t i = 0; i < log.n; ++i) {
            if (i != s.neuron) {
                h[i] += w(i, s.neuron) * inv_n;
            }
        }
    }
    for (std::size_t i = 0; i < log.n; ++i) {
        out[partition.position_of(i)] = h[i];
    }
    return out;
}

// ---- initial data --------------------------------------------------------

InitialLaw InitialLaw::point(double x) {
    InitialLaw law;
    law.kind = Kind::point;
    law.a = x;
    return law;
}

InitialLaw InitialLaw::uniform(double lo, double hi) {
    if (!(hi > lo)) {
        throw std::invalid_argument("uniform law needs lo < hi");
    }
    InitialLaw law;
    law.kind = Kind::uniform;
    law.a = lo;
    law.b = hi;
    return law;
}

InitialLaw InitialLaw::truncated_gaussian(double mean, double sd, double radius) {
    if (!(sd > 0.0) || !(radius > 0.0) || std::abs(mean) >= radius) {
        throw std::invalid_argument("truncated gaussian needs sd > 0 and |mean| < radius");
    }
    InitialLaw law;
    law.kind = Kind::truncated_gaussian;
    law.a = mean;
    law.b = sd;
    law.radius = radius;
    return law;
}

InitialLaw InitialLaw::discrete(std::vector<Particle> atoms) {
    double total = 0.0;
    for (const auto& p : atoms) {
        if (!(p.mass >= 0.0) || !std::isfinite(p.x)) {
            throw std::invalid_argument("atom masses must be nonnegative and positions finite");
        }
        total += p.mass;
    }
    if (atoms.empty() || !(total > 0.0)) {
        throw std::invalid_argument("discrete law needs positive total mass");
    }
    for (auto& p : atoms) {
        p.mass /= total;
    }
    InitialLaw law;
    law.kind = Kind::atoms;
    law.atoms = std::move(atoms);
    return law;
}

double InitialLaw::sample(Engine& eng) const {
    switch (kind) {
    case Kind::point:
        return a;
    case Kind::uniform:
        return a + (b - a) * uniform01(eng);
    case Kind::truncated_gaussian:
        for (;;) {
            const double x = a + b * standard_normal(eng);
            if (std::abs(x) <= radius) {
                return x;
            }
        }
    case Kind::atoms: {
        const double u = uniform01(eng);
        double acc = 0.0;
        for (const auto& p : atoms) {
            acc += p.mass;
            if (u < acc) {
                return p.x;
            }
        }
        return atoms.back().x;
    }
    }
    return 0.0;
}

namespace {

double normal_pdf(double z) { return 0.3989422804014327 * std::exp(-0.5 * z * z); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

std::vector<Particle> InitialLaw::particles(std::size_t q) const {
    q = std::max<std::size_t>(q, 1);
    std::vector<Particle> out;
    switch (kind) {
    case Kind::point:
        out.push_back({a, 1.0});
        break;
    case Kind::atoms:
        out = atoms;
        break;
    case Kind::uniform:
        for (std::size_t k = 0; k < q; ++k) {
            out.push_back({a + (b - a) * (static_cast<double>(k) + 0.5) / static_cast<double>(q),
                           1.0 / static_cast<double>(q)});
        }
        break;
    case Kind::truncated_gaussian: {
        // Equal-width bins on [-R, R], each atom at the conditional mean.
        double total = 0.0;
        for (std::size_t k = 0; k < q; ++k) {
            const double lo = -radius + 2.0 * radius * static_cast<double>(k) / static_cast<double>(q);
            const double hi = -radius + 2.0 * radius * static_cast<double>(k + 1) / static_cast<double>(q);
            const double za = (lo - a) / b;
            const double zb = (hi - a) / b;
            const double mass = normal_cdf(zb) - normal_cdf(za);
            if (mass <= 0.0) {
                continue;
            }
            const double mean = a + b * (normal_pdf(za) - normal_pdf(zb)) / mass;
            out.push_back({std::clamp(mean, lo, hi), mass});
            total += mass;
        }
        for (auto& p : out) {
            p.mass /= total;
        }
        break;
    }
    }
    return out;
}

double InitialLaw::second_moment() const {
    if (kind == Kind::uniform) {
        return (a * a + a * b + b * b) / 3.0;
    }
    double total = 0.0;
    for (const auto& p : particles(kind == Kind::truncated_gaussian ? 4096 : 1)) {
        total += p.mass * p.x * p.x;
    }
    return total;
}

std::vector<double> sample_initial_state(const InitialLaw& law, std::size_t n, std::uint64_t seed) {
    auto eng = make_engine(seed);
    std::vector<double> x(n);
    for (auto& v : x) {
        v = law.sample(eng);
    }
    return x;
}

void to_json(nlohmann::json& j, const InitialLaw& law) {
    switch (law.kind) {
    case InitialLaw::Kind::point:
        j = {{"family", "point"}, {"x", law.a}};
        break;
    case InitialLaw::Kind::uniform:
        j = {{"family", "uniform"}, {"lo", law.a}, {"hi", law.b}};
        break;
    case InitialLaw::Kind::truncated_gaussian:
        j = {{"family", "truncated_gaussian"}, {"mean", law.a}, {"sd", law.b}, {"radius", law.radius}};
        break;
    case InitialLaw::Kind::atoms: {
        auto atoms = nlohmann::json::array();
        for (const auto& p : law.atoms) {
            atoms.push_back({p.x, p.mass});
        }
        j = {{"family", "atoms"}, {"atoms", atoms}};
        break;
    }
    }
}

void from_json(const nlohmann::json& j, InitialLaw& law) {
    const auto family = j.at("family").get<std::string>();
    if (family == "point") {
        law = InitialLaw::point(j.at("x").get<double>());
    } else if (family == "uniform") {
        law = InitialLaw::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    } else if (family == "truncated_gaussian") {
        law = InitialLaw::truncated_gaussian(j.at("mean").get<double>(), j.at("sd").get<double>(),
                                             j.at("radius").get<double>());
    } else if (family == "atoms") {
        std::vector<Particle> atoms;
        for (const auto& a : j.at("atoms")) {
            atoms.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
        }
        law = InitialLaw::discrete(std::move(atoms));
    } else {
        throw std::invalid_argument("unknown initial law family: " + family);
    }
}

// ---- CSV -----------------------------------------------------------------

void write_states_csv(std::ostream& os, const TrajectoryLog& log) {
    os << "t,neuron,x,H,compensator\n";
    os.precision(17);
    for (std::size_t k = 0; k < log.n_samples(); ++k) {
        const auto x = log.state(k);
        const auto h = log.input(k);
        const auto c = log.compensator(k);
        for (std::size_t i = 0; i < log.n; ++i) {
            os << log.sample_times[k] << ',' << i << ',' << x[i] << ',' << h[i] << ',' << c[i] << '\n';
        }
    }
}

void write_spikes_csv(std::ostream& os, const TrajectoryLog& log) {
    os << "t,neuron,z\n";
    os.precision(17);
    for (const auto& s : log.spikes) {
        os << s.t << ',' << s.neuron << ',' << s.z << '\n';
    }
}

}  // namespace nemf
