#include "nemf/lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "nemf/meanfield.hpp"
#include "nemf/metrics.hpp"

#ifndef NEMF_VERSION
#define NEMF_VERSION "0.0.0"
#endif

namespace nemf {

std::string code_version() { return NEMF_VERSION; }

std::string to_string(ExperimentId id) {
    switch (id) {
    case ExperimentId::convergence:
        return "convergence";
    case ExperimentId::input_concentration:
        return "input_concentration";
    case ExperimentId::initial_data:
        return "initial_data";
    case ExperimentId::coupling:
        return "coupling";
    case ExperimentId::dual_regularity:
        return "dual_regularity";
    }
    return "unknown";
}

ExperimentId experiment_from_string(const std::string& name) {
    for (auto id : {ExperimentId::convergence, ExperimentId::input_concentration, ExperimentId::initial_data,
                    ExperimentId::coupling, ExperimentId::dual_regularity}) {
        if (to_string(id) == name) {
            return id;
        }
    }
    throw std::invalid_argument("unknown experiment: " + name);
}

// ---- kernel spec ---------------------------------------------------------

AnalyticKernel KernelSpec::limit_kernel() const {
    switch (type) {
    case Type::constant:
        return {AnalyticKernel::Kind::constant, w0};
    case Type::uniform_attachment:
        return {AnalyticKernel::Kind::uniform_attachment_limit, 1.0};
    case Type::w_random:
        return limit;
    }
    return {};
}

double KernelSpec::max_abs_bound() const {
    switch (type) {
    case Type::constant:
        return std::abs(w0);
    case Type::uniform_attachment:
        return 1.0;
    case Type::w_random:
        return mode == SampleMode::bernoulli ? 1.0 : limit.sup_abs();
    }
    return 0.0;
}

WeightMatrix KernelSpec::draw(std::size_t n, std::uint64_t seed) const {
    switch (type) {
    case Type::constant: {
        WeightMatrix w(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i != j) {
                    w.set(i, j, w0);
                }
            }
        }
        return w;
    }
    case Type::uniform_attachment:
        return gen_uniform_attachment(n, seed);
    case Type::w_random:
        return gen_w_random(StepGraphon::from_analytic(limit, std::max<std::size_t>(n, 1)), n, seed, mode);
    }
    return WeightMatrix(n);
}

void to_json(nlohmann::json& j, const KernelSpec& k) {
    switch (k.type) {
    case KernelSpec::Type::constant:
        j = {{"type", "constant"}, {"w0", k.w0}};
        break;
    case KernelSpec::Type::uniform_attachment:
        j = {{"type", "uniform_attachment"}};
        break;
    case KernelSpec::Type::w_random:
        j = {{"type", "w_random"},
             {"limit", k.limit.kind == AnalyticKernel::Kind::constant ? "constant" : "uniform_attachment_limit"},
             {"w0", k.limit.w0},
             {"mode", k.mode == SampleMode::bernoulli ? "bernoulli" : "deterministic"}};
        break;
    }
}

void from_json(const nlohmann::json& j, KernelSpec& k) {
    const auto type = j.at("type").get<std::string>();
    k = KernelSpec{};
    if (type == "constant") {
        k.type = KernelSpec::Type::constant;
        k.w0 = j.value("w0", 1.0);
    } else if (type == "uniform_attachment") {
        k.type = KernelSpec::Type::uniform_attachment;
    } else if (type == "w_random") {
        k.type = KernelSpec::Type::w_random;
        const auto limit = j.value("limit", std::string("uniform_attachment_limit"));
        if (limit == "constant") {
            k.limit = {AnalyticKernel::Kind::constant, j.value("w0", 1.0)};
        } else if (limit == "uniform_attachment_limit") {
            k.limit = {AnalyticKernel::Kind::uniform_attachment_limit, 1.0};
        } else {
            throw std::invalid_argument("unknown limit kernel: " + limit);
        }
        const auto mode = j.value("mode", std::string("bernoulli"));
        if (mode != "bernoulli" && mode != "deterministic") {
            throw std::invalid_argument("unknown sampling mode: " + mode);
        }
        k.mode = mode == "bernoulli" ? SampleMode::bernoulli : SampleMode::deterministic;
    } else {
        throw std::invalid_argument("unknown kernel type: " + type);
    }
}

// ---- config --------------------------------------------------------------

void ExperimentConfig::validate() const {
    if (experiment != ExperimentId::dual_regularity && n_list.empty()) {
        throw std::invalid_argument("N-list must not be empty");
    }
    for (std::size_t k = 0; k < n_list.size(); ++k) {
        if (n_list[k] == 0 || (k > 0 && n_list[k] <= n_list[k - 1])) {
            throw std::invalid_argument("N-list must be positive and strictly increasing");
        }
    }
    if (trials == 0) {
        throw std::invalid_argument("trials must be at least 1");
    }
    if (!(T > 0.0) || !(dt > 0.0) || !(sim_dt > 0.0)) {
        throw std::invalid_argument("T, dt and sim_dt must be positive");
    }
    if (m_cells == 0 || particle_cap < 2) {
        throw std::invalid_argument("m_cells must be positive and particle_cap at least 2");
    }
    if (dual.m_cells == 0 || !(dual.dx > 0.0) || !(dual.width > 0.0)) {
        throw std::invalid_argument("invalid dual settings");
    }
    (void)make_model(model);
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = {{"experiment", to_string(c.experiment)},
         {"model", c.model},
         {"kernel", c.kernel},
         {"initial", c.initial},
         {"n_list", c.n_list},
         {"trials", c.trials},
         {"T", c.T},
         {"dt", c.dt},
         {"sim_dt", c.sim_dt},
         {"seed", c.seed},
         {"output_dir", c.output_dir},
         {"m_cells", c.m_cells},
         {"particle_cap", c.particle_cap},
         {"coupling_samples", c.coupling_samples},
         {"event_budget", c.event_budget},
         {"dual",
          {{"m_cells", c.dual.m_cells},
           {"dx", c.dual.dx},
           {"mode", c.dual.mode},
           {"center", c.dual.center},
           {"width", c.dual.width},
           {"norm_stride", c.dual.norm_stride}}}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c = ExperimentConfig{};
    c.experiment = experiment_from_string(j.at("experiment").get<std::string>());
    if (j.contains("model")) {
        c.model = j.at("model").get<ModelSpec>();
    }
    if (j.contains("kernel")) {
        c.kernel = j.at("kernel").get<KernelSpec>();
    }
    if (j.contains("initial")) {
        c.initial = j.at("initial").get<InitialLaw>();
    }
    c.n_list = j.value("n_list", std::vector<std::size_t>{});
    c.trials = j.value("trials", c.trials);
    c.T = j.value("T", c.T);
    c.dt = j.value("dt", c.dt);
    c.sim_dt = j.value("sim_dt", c.sim_dt);
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.m_cells = j.value("m_cells", c.m_cells);
    c.particle_cap = j.value("particle_cap", c.particle_cap);
    c.coupling_samples = j.value("coupling_samples", c.coupling_samples);
    c.event_budget = j.value("event_budget", c.event_budget);
    if (j.contains("dual")) {
        const auto& d = j.at("dual");
        c.dual.m_cells = d.value("m_cells", c.dual.m_cells);
        c.dual.dx = d.value("dx", c.dual.dx);
        c.dual.mode = d.value("mode", c.dual.mode);
        c.dual.center = d.value("center", c.dual.center);
        c.dual.width = d.value("width", c.dual.width);
        c.dual.norm_stride = d.value("norm_stride", c.dual.norm_stride);
    }
}

// ---- report helpers ------------------------------------------------------

bool ExperimentReport::passed() const noexcept {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

bool ExperimentReport::bound_violated() const noexcept {
    return std::any_of(checks.begin(), checks.end(), [](const Check& c) { return c.bound && !c.passed; });
}

const Aggregate* ExperimentReport::find(const std::string& metric, std::size_t N) const noexcept {
    for (const auto& a : aggregates) {
        if (a.metric == metric && a.N == N) {
            return &a;
        }
    }
    return nullptr;
}

const SlopeFit* ExperimentReport::slope(const std::string& metric) const noexcept {
    for (const auto& s : slopes) {
        if (s.metric == metric) {
            return &s;
        }
    }
    return nullptr;
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t N, std::size_t trial) {
    return derive_seed(master, {static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(trial)});
}

double moment_envelope(const Bounds& b, double max_w, std::size_t N, double E0, double t) {
    const double c1 = b.sup_b * b.sup_b + b.sup_f * max_w * max_w / static_cast<double>(N);
    const double c2 = 1.0 + 2.0 * b.sup_f * max_w;
    return (E0 + c1 * t) * std::exp(c2 * t);
}

std::vector<Aggregate> aggregate(const std::vector<RawRow>& rows) {
    std::vector<Aggregate> out;
    std::map<std::pair<std::string, std::size_t>, std::size_t> index;
    std::vector<std::vector<double>> values;
    for (const auto& r : rows) {
        const auto key = std::make_pair(r.metric, r.N);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, out.size()).first;
            Aggregate a;
            a.metric = r.metric;
            a.N = r.N;
            a.bound = r.bound;
            out.push_back(a);
            values.emplace_back();
        }
        values[it->second].push_back(r.value);
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        const auto& v = values[k];
        double sum = 0.0;
        for (double x : v) {
            sum += x;
        }
        const double mean = sum / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) {
            ss += (x - mean) * (x - mean);
        }
        out[k].count = v.size();
        out[k].mean = mean;
        out[k].stderr_ = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) /
                                                  static_cast<double>(v.size()))
                                      : 0.0;
    }
    return out;
}

namespace {

double student_t975(std::size_t dof) {
    static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                   2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086};
    if (dof == 0) {
        return std::numeric_limits<double>::infinity();
    }
    return dof <= 20 ? table[dof - 1] : 1.96;
}

}  // namespace

SlopeFit fit_loglog_slope(const std::vector<Aggregate>& aggregates, const std::string& metric) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& a : aggregates) {
        if (a.metric == metric && a.mean > 0.0) {
            xs.push_back(std::log(static_cast<double>(a.N)));
            ys.push_back(std::log(a.mean));
        }
    }
    SlopeFit fit;
    fit.metric = metric;
    fit.points = xs.size();
    if (xs.size() < 2) {
        fit.slope = std::numeric_limits<double>::quiet_NaN();
        fit.stderr_ = fit.ci_low = fit.ci_high = fit.slope;
        return fit;
    }
    const double n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        mx += xs[k];
        my += ys[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        sxx += (xs[k] - mx) * (xs[k] - mx);
        sxy += (xs[k] - mx) * (ys[k] - my);
    }
    fit.slope = sxy / sxx;
    double ssr = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double r = ys[k] - my - fit.slope * (xs[k] - mx);
        ssr += r * r;
    }
    const std::size_t dof = xs.size() - 2;
    fit.stderr_ = dof > 0 ? std::sqrt(ssr / static_cast<double>(dof) / sxx) : 0.0;
    const double q = dof > 0 ? student_t975(dof) : 0.0;
    fit.ci_low = fit.slope - q * fit.stderr_;
    fit.ci_high = fit.slope + q * fit.stderr_;
    return fit;
}

double projected_events(const ExperimentConfig& c) {
    const auto model = make_model(c.model);
    double per_trial = 0.0;
    for (auto n : c.n_list) {
        per_trial += static_cast<double>(n) * model.bounds().sup_f * c.T;
    }
    double runs = 0.0;
    switch (c.experiment) {
    case ExperimentId::convergence:
    case ExperimentId::input_concentration:
        runs = 1.0;
        break;
    case ExperimentId::coupling:
        runs = 4.0;  // network and auxiliary, each replayed once
        break;
    case ExperimentId::initial_data:
    case ExperimentId::dual_regularity:
        runs = 0.0;
        break;
    }
    return runs * per_trial * static_cast<double>(c.trials);
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

/// Runs body(trial) for every trial, possibly in parallel; the first
/// exception (by trial index) is rethrown.
template <class Body>
void for_each_trial(std::size_t trials, Body body) {
    std::vector<std::exception_ptr> errors(trials);
    const auto count = static_cast<long long>(trials);
#pragma omp parallel for schedule(dynamic)
    for (long long k = 0; k < count; ++k) {
        try {
            body(static_cast<std::size_t>(k));
        } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

struct TrialSeeds {
    std::uint64_t trial;
    std::uint64_t weights;
    std::uint64_t initial;
    std::uint64_t streams;
};

TrialSeeds seeds_for(const ExperimentConfig& c, std::size_t N, std::size_t trial) {
    const auto s = trial_seed(c.seed, N, trial);
    return {s, derive_seed(s, {1}), derive_seed(s, {2}), derive_seed(s, {3})};
}

void add_bound_checks(ExperimentReport& rep, const std::string& metric) {
    for (const auto& a : rep.aggregates) {
        if (a.metric != metric || std::isnan(a.bound)) {
            continue;
        }
        rep.checks.push_back({metric + " mean <= bound at N=" + std::to_string(a.N), a.mean <= a.bound,
                              "mean " + fmt(a.mean) + ", bound " + fmt(a.bound), true});
    }
}

void add_slope_check(ExperimentReport& rep, const std::string& metric, double lo, double hi) {
    const auto fit = fit_loglog_slope(rep.aggregates, metric);
    rep.slopes.push_back(fit);
    if (fit.points < 2) {
        return;
    }
    rep.checks.push_back({metric + " slope in [" + fmt(lo) + ", " + fmt(hi) + "]",
                          fit.slope >= lo && fit.slope <= hi,
                          "slope " + fmt(fit.slope) + " (95% CI " + fmt(fit.ci_low) + ", " + fmt(fit.ci_high) + ")"});
}

/// Consecutive means may increase by at most the larger of their standard errors.
void add_monotone_check(ExperimentReport& rep, const std::string& metric) {
    std::vector<const Aggregate*> seq;
    for (const auto& a : rep.aggregates) {
        if (a.metric == metric) {
            seq.push_back(&a);
        }
    }
    bool ok = true;
    std::string detail = "means";
    for (std::size_t k = 0; k < seq.size(); ++k) {
        detail += " " + fmt(seq[k]->mean);
        if (k > 0 && seq[k]->mean > seq[k - 1]->mean + std::max(seq[k]->stderr_, seq[k - 1]->stderr_)) {
            ok = false;
        }
    }
    rep.checks.push_back({metric + " nonincreasing in N up to one standard error", ok, detail});
}

std::vector<double> uniform_grid(double T, std::size_t points) {
    std::vector<double> out;
    points = std::max<std::size_t>(points, 1);
    for (std::size_t k = 0; k <= points; ++k) {
        out.push_back(T * static_cast<double>(k) / static_cast<double>(points));
    }
    return out;
}

// ---- experiments ---------------------------------------------------------

void run_input_concentration(const ExperimentConfig& c, ExperimentReport& rep) {
    const auto model = make_model(c.model);
    const double max_w = c.kernel.max_abs_bound();
    const std::string name = to_string(c.experiment);
    for (auto N : c.n_list) {
        const double bound = std::sqrt(max_w * max_w * model.bounds().sup_f * c.T / static_cast<double>(N));
        std::vector<RawRow> rows(c.trials);
        for_each_trial(c.trials, [&](std::size_t trial) {
            const auto s = seeds_for(c, N, trial);
            auto w = std::make_shared<const WeightMatrix>(c.kernel.draw(N, s.weights));
            const auto x0 = sample_initial_state(c.initial, N, s.initial);
            SimulationOptions opt;
            opt.dt_max = c.sim_dt;
            opt.sample_times = {c.T};
            opt.record_spikes = false;
            const auto log = simulate_network(model, w, x0, c.T, StreamSeeds{s.streams}, opt);
            const auto H = log.input(0);
            const auto comp = log.compensator(0);
            double total = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                double hbar = 0.0;
                const auto row = w->row(i);
                for (std::size_t j = 0; j < N; ++j) {
                    hbar += row[j] * comp[j];
                }
                total += std::abs(H[i] - hbar / static_cast<double>(N));
            }
            rows[trial] = {name, N, trial, c.T, "input_deviation", total / static_cast<double>(N), bound, s.trial};
        });
        rep.rows.insert(rep.rows.end(), rows.begin(), rows.end());
    }
    rep.aggregates = aggregate(rep.rows);
    add_bound_checks(rep, "input_deviation");
    add_slope_check(rep, "input_deviation", -0.65, -0.35);
}

void run_initial_data(const ExperimentConfig& c, ExperimentReport& rep) {
    const std::string name = to_string(c.experiment);
    // Reference measure: exact for atomic laws, otherwise 4096 quantile atoms.
    SpatialMeasure target(1);
    for (const auto& p : c.initial.particles(4096)) {
        target.add(0, p.x, p.mass);
    }
    const double target_self = h11_inner(target, target);
    for (auto N : c.n_list) {
        const double bound = 2.0 / std::sqrt(static_cast<double>(N));
        std::vector<RawRow> rows(c.trials);
        for_each_trial(c.trials, [&](std::size_t trial) {
            const auto s = seeds_for(c, N, trial);
            const auto x0 = sample_initial_state(c.initial, N, s.initial);
            const auto mu = extended_empirical_measure(x0, Partition::identity(N));
            const double d = h11_distance_from_self(mu, target, h11_inner(mu, mu), target_self);
            rows[trial] = {name, N, trial, 0.0, "h11_initial", d, bound, s.trial};
        });
        rep.rows.insert(rep.rows.end(), rows.begin(), rows.end());
    }
    rep.aggregates = aggregate(rep.rows);
    add_bound_checks(rep, "h11_initial");
    add_slope_check(rep, "h11_initial", -0.6, -0.4);
}

struct LimitSolve {
    MeanFieldSolution solution;
    SpatialMeasure mu_T;
    double self = 0.0;
};

LimitSolve solve_limit(const ExperimentConfig& c, const ModelFunctions& model) {
    const auto law = c.initial.particles();
    const auto mu0 = SpatialMeasure::uniform_in_xi(law, 1);
    MeanFieldOptions opt;
    opt.T = c.T;
    opt.dt = c.dt;
    opt.m_cells = c.m_cells;
    opt.particle_cap = c.particle_cap;
    const auto kernel = StepGraphon::from_analytic(c.kernel.limit_kernel(), c.m_cells);
    LimitSolve out{solve_meanfield(model, kernel, mu0, opt), {}, 0.0};
    out.mu_T = out.solution.at(c.T);
    out.self = h11_inner(out.mu_T, out.mu_T);
    return out;
}

void record_solver_stats(ExperimentReport& rep, const MeanFieldSolution& sol) {
    rep.extra["meanfield"] = {{"steps", sol.stats.steps},
                              {"max_mass_drift", sol.stats.max_mass_drift},
                              {"max_cell_particles", sol.stats.max_cell_particles},
                              {"merges", sol.stats.merges},
                              {"warnings", sol.stats.warnings}};
}

void run_convergence(const ExperimentConfig& c, ExperimentReport& rep) {
    const auto model = make_model(c.model);
    const std::string name = to_string(c.experiment);
    const auto limit = solve_limit(c, model);
    record_solver_stats(rep, limit.solution);
    for (auto N : c.n_list) {
        std::vector<RawRow> rows(c.trials);
        for_each_trial(c.trials, [&](std::size_t trial) {
            const auto s = seeds_for(c, N, trial);
            auto w = std::make_shared<const WeightMatrix>(c.kernel.draw(N, s.weights));
            const auto x0 = sample_initial_state(c.initial, N, s.initial);
            SimulationOptions opt;
            opt.dt_max = c.sim_dt;
            opt.sample_times = {c.T};
            opt.record_spikes = false;
            const auto log = simulate_network(model, w, x0, c.T, StreamSeeds{s.streams}, opt);
            const auto mu = extended_empirical_measure(log.state(0), Partition::identity(N), c.T);
            const double d = h11_distance_from_self(mu, limit.mu_T, h11_inner(mu, mu), limit.self);
            rows[trial] = {name, N, trial, c.T, "h11", d, std::numeric_limits<double>::quiet_NaN(), s.trial};
        });
        rep.rows.insert(rep.rows.end(), rows.begin(), rows.end());
    }
    rep.aggregates = aggregate(rep.rows);
    add_slope_check(rep, "h11", -std::numeric_limits<double>::infinity(), -0.3);
    add_monotone_check(rep, "h11");
}

std::vector<double> merged_times(std::vector<double> base, const TrajectoryLog& a, const TrajectoryLog& b) {
    for (const auto* log : {&a, &b}) {
        for (const auto& s : log->spikes) {
            base.push_back(s.t);
        }
    }
    std::sort(base.begin(), base.end());
    base.erase(std::unique(base.begin(), base.end()), base.end());
    return base;
}

void run_coupling(const ExperimentConfig& c, ExperimentReport& rep) {
    const auto model = make_model(c.model);
    const std::string name = to_string(c.experiment);
    const auto limit = solve_limit(c, model);
    record_solver_stats(rep, limit.solution);
    const auto kernel = StepGraphon::from_analytic(c.kernel.limit_kernel(), c.m_cells);
    const auto base = uniform_grid(c.T, c.coupling_samples);
    for (auto N : c.n_list) {
        const auto drive = make_auxiliary_drive(kernel, limit.solution.fields, Partition::identity(N));
        std::vector<RawRow> rows(c.trials);
        for_each_trial(c.trials, [&](std::size_t trial) {
            const auto s = seeds_for(c, N, trial);
            auto w = std::make_shared<const WeightMatrix>(c.kernel.draw(N, s.weights));
            const auto x0 = sample_initial_state(c.initial, N, s.initial);
            const StreamSeeds streams{s.streams};
            SimulationOptions opt;
            opt.dt_max = c.sim_dt;
            const auto net = simulate_network(model, w, x0, c.T, streams, opt);
            const auto aux = simulate_auxiliary(model, drive, x0, c.T, streams, opt);
            // Replay with the spike times added to the sample grid so the sup
            // sees both sides of every jump.
            opt.sample_times = merged_times(base, net, aux);
            opt.record_spikes = false;
            const auto net2 = simulate_network(model, w, x0, c.T, streams, opt);
            const auto aux2 = simulate_auxiliary(model, drive, x0, c.T, streams, opt);
            rows[trial] = {name, N, trial, c.T, "coupling", coupling_distance(net2, aux2),
                           std::numeric_limits<double>::quiet_NaN(), s.trial};
        });
        rep.rows.insert(rep.rows.end(), rows.begin(), rows.end());
    }
    rep.aggregates = aggregate(rep.rows);
    add_monotone_check(rep, "coupling");
    if (!c.n_list.empty()) {
        const auto* last = rep.find("coupling", c.n_list.back());
        rep.checks.push_back({"coupling < 0.15 at N=" + std::to_string(c.n_list.back()), last && last->mean < 0.15,
                              last ? "mean " + fmt(last->mean) : "missing"});
    }
    rep.slopes.push_back(fit_loglog_slope(rep.aggregates, "coupling"));
}

struct DualRun {
    double defect = 0.0;
    double max_norm = 0.0;
    double max_ds = 0.0;
    std::size_t nx = 0;
    double L = 0.0;
};

DualRun dual_run(const ExperimentConfig& c, const ModelFunctions& model, double dt, bool with_norms) {
    const std::size_t m = c.dual.m_cells;
    const auto kernel = StepGraphon::from_analytic(c.kernel.limit_kernel(), m);
    const auto mu0 = SpatialMeasure::uniform_in_xi(c.initial.particles(), m);
    MeanFieldOptions opt;
    opt.T = c.T;
    opt.dt = dt;
    opt.m_cells = m;
    opt.particle_cap = c.particle_cap;
    const auto sol = solve_meanfield(model, kernel, mu0, opt);

    DualGrid grid;
    grid.m_cells = m;
    grid.L = dual_extent(mu0, model.bounds(), sol.fields, c.T);
    grid.nx = static_cast<std::size_t>(std::ceil(2.0 * grid.L / c.dual.dx)) + 1;
    const auto eps = modulus_of_continuity(kernel, m);

    std::vector<double> a(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (c.dual.mode == 0) {
            a[i] = 1.0;
        } else {
            const double k = 2.0 * std::numbers::pi * static_cast<double>(c.dual.mode);
            const double x0 = static_cast<double>(i) / static_cast<double>(m);
            const double x1 = static_cast<double>(i + 1) / static_cast<double>(m);
            a[i] = static_cast<double>(m) / k * (std::sin(k * x1) - std::sin(k * x0));
        }
    }
    std::vector<double> g(grid.nx);
    for (std::size_t j = 0; j < grid.nx; ++j) {
        const double z = (grid.node(j) - c.dual.center) / c.dual.width;
        g[j] = std::exp(-0.5 * z * z);
    }
    const double norm = phi_w_norm_tensor(grid, a, g, eps).value;
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw std::invalid_argument("terminal datum has no finite positive Phi_w norm for this kernel");
    }
    std::vector<double> terminal(grid.size());
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < grid.nx; ++j) {
            terminal[i * grid.nx + j] = a[i] * g[j] / norm;
        }
    }
    DualRun out;
    out.nx = grid.nx;
    out.L = grid.L;
    std::size_t slice_index = 0;
    const std::size_t stride = std::max<std::size_t>(c.dual.norm_stride, 1);
    const auto K = static_cast<std::size_t>(std::llround(c.T / dt));
    SliceObserver observer;
    if (with_norms) {
        observer = [&](const DualGrid& gr, const DualSlice& slice) {
            if (slice_index % stride == 0 || slice_index == K) {
                out.max_norm = std::max(out.max_norm, phi_w_norm(gr, slice.values, eps).value);
            }
            ++slice_index;
        };
    }
    DualOptions dopt;
    dopt.ds = dt;
    const auto dual = solve_dual_backward(model, sol.fields, grid, terminal, c.T, dopt, observer);
    out.max_ds = dual.diagnostics.max_abs_ds;
    out.defect = duality_defect(sol, dual.phi);
    return out;
}

void run_dual_regularity(const ExperimentConfig& c, ExperimentReport& rep) {
    const auto model = make_model(c.model);
    const std::string name = to_string(c.experiment);
    const auto kernel = StepGraphon::from_analytic(c.kernel.limit_kernel(), c.dual.m_cells);
    KappaInputs kin;
    kin.w_linf_l1 = kernel.sup_row_l1();
    const auto kappa = kappa_constants(model.bounds(), kin, c.T);
    const auto fine = dual_run(c, model, c.dt, true);
    const auto coarse = dual_run(c, model, 2.0 * c.dt, false);
    const auto N = c.dual.m_cells;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double ratio = coarse.defect / fine.defect;
    rep.rows.push_back({name, N, 0, c.T, "phi_w_norm_max", fine.max_norm, 1.05 * kappa.kappa, c.seed});
    rep.rows.push_back({name, N, 0, c.T, "ds_max", fine.max_ds, 1.05 * kappa.kappa4, c.seed});
    rep.rows.push_back({name, N, 0, c.T, "duality_defect_dt", fine.defect, nan, c.seed});
    rep.rows.push_back({name, N, 0, c.T, "duality_defect_2dt", coarse.defect, nan, c.seed});
    rep.rows.push_back({name, N, 0, c.T, "defect_ratio", ratio, nan, c.seed});
    rep.aggregates = aggregate(rep.rows);
    add_bound_checks(rep, "phi_w_norm_max");
    add_bound_checks(rep, "ds_max");
    rep.checks.push_back({"defect ratio >= 1.7", ratio >= 1.7, "ratio " + fmt(ratio), false});
    rep.extra["kappa"] = {{"t", kappa.t},         {"kappa1", kappa.kappa1}, {"kappa2", kappa.kappa2},
                          {"kappa3", kappa.kappa3}, {"kappa", kappa.kappa},   {"kappa4", kappa.kappa4},
                          {"kappa5", kappa.kappa5}};
    rep.extra["dual_grid"] = {{"L", fine.L}, {"nx", fine.nx}, {"m_cells", N}};
    rep.extra["shift_grid"] = "sup over shifts restricted to {k/m} and the knots of eps_w";
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    const double events = projected_events(config);
    if (events > config.event_budget) {
        std::ostringstream msg;
        msg << "projected event count " << events << " exceeds the budget " << config.event_budget;
        throw std::invalid_argument(msg.str());
    }
    const auto start = std::chrono::steady_clock::now();
    ExperimentReport rep;
    rep.config = config;
    rep.extra["projected_events"] = events;
    switch (config.experiment) {
    case ExperimentId::input_concentration:
        run_input_concentration(config, rep);
        break;
    case ExperimentId::initial_data:
        run_initial_data(config, rep);
        break;
    case ExperimentId::convergence:
        run_convergence(config, rep);
        break;
    case ExperimentId::coupling:
        run_coupling(config, rep);
        break;
    case ExperimentId::dual_regularity:
        run_dual_regularity(config, rep);
        break;
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

// ---- output --------------------------------------------------------------

namespace {

std::string num(double v) {
    if (std::isnan(v)) {
        return "";
    }
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

nlohmann::json json_number(double v) {
    if (!std::isfinite(v)) {
        return nullptr;
    }
    return v;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

void write_raw_csv(std::ostream& os, const std::vector<RawRow>& rows) {
    os << "experiment,N,trial,t,metric,value,bound,seed\n";
    for (const auto& r : rows) {
        os << r.experiment << ',' << r.N << ',' << r.trial << ',' << num(r.t) << ',' << r.metric << ','
           << num(r.value) << ',' << num(r.bound) << ',' << r.seed << '\n';
    }
}

std::vector<RawRow> read_raw_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) {
        throw std::runtime_error("empty raw.csv");
    }
    std::vector<RawRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        const auto f = split(line);
        if (f.size() != 8) {
            throw std::runtime_error("malformed raw.csv line: " + line);
        }
        RawRow r;
        r.experiment = f[0];
        r.N = std::stoull(f[1]);
        r.trial = std::stoull(f[2]);
        r.t = std::stod(f[3]);
        r.metric = f[4];
        r.value = f[5].empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[5]);
        r.bound = f[6].empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[6]);
        r.seed = std::stoull(f[7]);
        rows.push_back(r);
    }
    return rows;
}

nlohmann::json summary_json(const ExperimentReport& rep) {
    nlohmann::json aggs = nlohmann::json::array();
    for (const auto& a : rep.aggregates) {
        aggs.push_back({{"metric", a.metric},
                        {"N", a.N},
                        {"count", a.count},
                        {"mean", json_number(a.mean)},
                        {"stderr", json_number(a.stderr_)},
                        {"bound", json_number(a.bound)}});
    }
    nlohmann::json slopes = nlohmann::json::array();
    for (const auto& s : rep.slopes) {
        slopes.push_back({{"metric", s.metric},
                          {"slope", json_number(s.slope)},
                          {"stderr", json_number(s.stderr_)},
                          {"ci95", {json_number(s.ci_low), json_number(s.ci_high)}},
                          {"points", s.points}});
    }
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : rep.checks) {
        checks.push_back({{"name", c.name}, {"passed", c.passed}, {"bound", c.bound}, {"detail", c.detail}});
    }
    return {{"experiment", to_string(rep.config.experiment)},
            {"aggregates", aggs},
            {"slopes", slopes},
            {"checks", checks},
            {"passed", rep.passed()},
            {"bound_violated", rep.bound_violated()},
            {"extra", rep.extra},
            {"seconds", rep.seconds}};
}

nlohmann::json manifest_json(const ExperimentReport& rep) {
    const auto model = make_model(rep.config.model);
    const auto& b = model.bounds();
    nlohmann::json seeds = nlohmann::json::array();
    for (auto N : rep.config.n_list) {
        for (std::size_t t = 0; t < rep.config.trials; ++t) {
            seeds.push_back({{"N", N}, {"trial", t}, {"seed", trial_seed(rep.config.seed, N, t)}});
        }
    }
    return {{"config", rep.config},
            {"code_version", code_version()},
            {"master_seed", rep.config.seed},
            {"seed_derivation", "splitmix64 chain over (N, trial); then tags 1 weights, 2 initial, 3 streams; "
                                "stream of neuron i uses tag i"},
            {"trial_seeds", seeds},
            {"model_bounds",
             {{"sup_f", b.sup_f}, {"sup_df", b.sup_df}, {"l1_df", b.l1_df}, {"sup_b", b.sup_b}, {"sup_db", b.sup_db}}}};
}

void emit_report(const ExperimentReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    auto open = [&dir](const char* name) {
        std::ofstream os(dir / name, std::ios::trunc);
        if (!os) {
            throw std::runtime_error("cannot write " + (dir / name).string());
        }
        return os;
    };
    {
        auto os = open("raw.csv");
        write_raw_csv(os, report.rows);
    }
    {
        auto os = open("summary.json");
        os << summary_json(report).dump(2) << '\n';
    }
    {
        auto os = open("manifest.json");
        os << manifest_json(report).dump(2) << '\n';
    }
}

}  // namespace nemf
