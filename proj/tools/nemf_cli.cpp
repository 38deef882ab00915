#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nemf/graphon.hpp"
#include "nemf/lab.hpp"
#include "nemf/meanfield.hpp"
#include "nemf/metrics.hpp"
#include "nemf/model.hpp"
#include "nemf/netsim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot open " + path);
    }
    return json::parse(is);
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw std::runtime_error("cannot write " + path.string());
    }
    return os;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

// cell,position,mass; the cell count is the largest cell index plus one
// unless given.
nemf::SpatialMeasure read_measure_csv(const std::string& path, std::size_t m_cells) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot open " + path);
    }
    std::string line;
    std::getline(is, line);
    struct Row {
        std::size_t c;
        double x;
        double mass;
    };
    std::vector<Row> rows;
    std::size_t max_cell = 0;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string a, b, c;
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        std::getline(ss, c, ',');
        Row r{std::stoul(a), std::stod(b), std::stod(c)};
        max_cell = std::max(max_cell, r.c);
        rows.push_back(r);
    }
    const std::size_t m = m_cells > 0 ? m_cells : max_cell + 1;
    nemf::SpatialMeasure mu(m);
    for (const auto& r : rows) {
        if (r.c >= m) {
            throw std::runtime_error("cell index out of range in " + path);
        }
        mu.add(r.c, r.x, r.mass);
    }
    return mu;
}

nemf::ModelSpec model_from(const json& cfg) {
    return cfg.contains("model") ? cfg.at("model").get<nemf::ModelSpec>() : nemf::acceptance_model_spec();
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
    const auto cfg = read_json(config_path);
    const auto model = nemf::make_model(model_from(cfg));
    const auto kernel = cfg.contains("kernel") ? cfg.at("kernel").get<nemf::KernelSpec>() : nemf::KernelSpec{};
    const auto initial =
        cfg.contains("initial") ? cfg.at("initial").get<nemf::InitialLaw>() : nemf::InitialLaw::point(0.0);
    const auto n = cfg.at("N").get<std::size_t>();
    const double T = get_or(cfg, "T", 1.0);
    const auto seed = get_or<std::uint64_t>(cfg, "seed", 1);
    const auto samples = get_or<std::size_t>(cfg, "samples", 10);

    const auto ts = nemf::trial_seed(seed, n, 0);
    auto w = std::make_shared<const nemf::WeightMatrix>(kernel.draw(n, nemf::derive_seed(ts, {1})));
    const auto x0 = nemf::sample_initial_state(initial, n, nemf::derive_seed(ts, {2}));
    nemf::SimulationOptions opt;
    opt.dt_max = get_or(cfg, "sim_dt", 1e-3);
    for (std::size_t k = 0; k <= samples; ++k) {
        opt.sample_times.push_back(T * static_cast<double>(k) / static_cast<double>(std::max<std::size_t>(samples, 1)));
    }
    const auto log = nemf::simulate_network(model, w, x0, T, nemf::StreamSeeds{nemf::derive_seed(ts, {3})}, opt);
    const fs::path dir(out_dir);
    {
        auto os = open_out(dir / "states.csv");
        nemf::write_states_csv(os, log);
    }
    {
        auto os = open_out(dir / "spikes.csv");
        nemf::write_spikes_csv(os, log);
    }
    std::cout << "neurons " << n << ", spikes " << log.spikes.size() << ", candidate events "
              << log.candidate_events << "\n";
    return 0;
}

int cmd_solve_pde(const std::string& config_path, const std::string& out_dir) {
    const auto cfg = read_json(config_path);
    const auto model = nemf::make_model(model_from(cfg));
    const auto kernel = cfg.contains("kernel") ? cfg.at("kernel").get<nemf::KernelSpec>() : nemf::KernelSpec{};
    const auto initial =
        cfg.contains("initial") ? cfg.at("initial").get<nemf::InitialLaw>() : nemf::InitialLaw::point(0.0);
    nemf::MeanFieldOptions opt;
    opt.T = get_or(cfg, "T", opt.T);
    opt.dt = get_or(cfg, "dt", opt.dt);
    opt.m_cells = get_or(cfg, "m_cells", opt.m_cells);
    opt.particle_cap = get_or(cfg, "particle_cap", opt.particle_cap);
    opt.output_times = get_or(cfg, "output_times", std::vector<double>{});
    const auto step = nemf::StepGraphon::from_analytic(kernel.limit_kernel(), opt.m_cells);
    const auto mu0 = nemf::SpatialMeasure::uniform_in_xi(initial.particles(), 1);
    const auto sol = nemf::solve_meanfield(model, step, mu0, opt);

    const fs::path dir(out_dir);
    {
        auto os = open_out(dir / "fields.csv");
        nemf::write_csv(os, sol.fields);
    }
    {
        auto os = open_out(dir / "snapshots.csv");
        os << "t,cell,position,mass\n";
        os.precision(17);
        for (const auto& mu : sol.snapshots) {
            for (std::size_t c = 0; c < mu.m_cells(); ++c) {
                const auto ps = mu.particles(c);
                for (std::size_t k = 0; k < ps.size(); ++k) {
                    os << mu.time() << ',' << c << ',' << mu.position(c, k) << ',' << ps[k].mass << '\n';
                }
            }
        }
    }
    for (const auto& w : sol.stats.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    std::cout << "steps " << sol.stats.steps << ", max mass drift " << sol.stats.max_mass_drift
              << ", merges " << sol.stats.merges << "\n";
    return 0;
}

nemf::StepGraphon load_graphon(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot open " + path);
    }
    return nemf::read_step_graphon_csv(is);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatially extended neuron network simulator and mean-field solver"};
    app.require_subcommand(1);
    app.set_version_flag("--version", nemf::code_version());

    std::string config;
    std::string out = "out";

    auto* sim = app.add_subcommand("simulate", "Simulate one network trial");
    sim->add_option("config", config, "JSON config (model, kernel, initial, N, T, seed, sim_dt, samples)")
        ->required()
        ->check(CLI::ExistingFile);
    sim->add_option("-o,--out", out, "Output directory");

    auto* pde = app.add_subcommand("solve-pde", "Solve the mean-field equation");
    pde->add_option("config", config, "JSON config (model, kernel, initial, T, dt, m_cells, particle_cap)")
        ->required()
        ->check(CLI::ExistingFile);
    pde->add_option("-o,--out", out, "Output directory");

    auto* graphon = app.add_subcommand("graphon", "Graph generators, norms and distances");
    graphon->require_subcommand(1);
    std::string gtype = "uniform_attachment";
    std::size_t gn = 64;
    std::uint64_t gseed = 1;
    std::string gout;
    auto* gen = graphon->add_subcommand("generate", "Sample a weight matrix (CSV)");
    gen->add_option("--type", gtype, "uniform_attachment | w_random")
        ->check(CLI::IsMember({"uniform_attachment", "w_random"}));
    gen->add_option("-n", gn, "Number of nodes");
    gen->add_option("--seed", gseed, "Seed");
    gen->add_option("-o,--out", gout, "Output CSV (stdout if empty)");
    std::string ga;
    std::string gb;
    auto* norm = graphon->add_subcommand("norm", "L-inf to L1 operator norm of a step graphon CSV");
    norm->add_option("graphon", ga, "Step graphon CSV")->required()->check(CLI::ExistingFile);
    auto* dist = graphon->add_subcommand("distance", "Cut distance of two step graphons");
    dist->add_option("a", ga, "Step graphon CSV")->required()->check(CLI::ExistingFile);
    dist->add_option("b", gb, "Step graphon CSV")->required()->check(CLI::ExistingFile);
    std::size_t shifts = 16;
    auto* modulus = graphon->add_subcommand("modulus", "Modulus of continuity of a step graphon");
    modulus->add_option("graphon", ga, "Step graphon CSV")->required()->check(CLI::ExistingFile);
    modulus->add_option("--shifts", shifts, "Number of shifts");

    auto* metric = app.add_subcommand("metric", "Distances between measures given as CSV (cell,position,mass)");
    std::string ma;
    std::string mb;
    std::string which = "h11";
    std::size_t mcells = 0;
    metric->add_option("a", ma, "Measure CSV")->required()->check(CLI::ExistingFile);
    metric->add_option("b", mb, "Measure CSV")->required()->check(CLI::ExistingFile);
    metric->add_option("--metric", which, "h11 | phi_w_lb")->check(CLI::IsMember({"h11", "phi_w_lb"}));
    metric->add_option("--cells", mcells, "Cell count (inferred if 0)");

    auto* exp = app.add_subcommand("experiment", "Run or summarize experiments");
    exp->require_subcommand(1);
    auto* run = exp->add_subcommand("run", "Run an experiment config");
    std::string out_override;
    run->add_option("config", config, "Experiment JSON config")->required()->check(CLI::ExistingFile);
    run->add_option("-o,--out", out_override, "Output directory (overrides output_dir)");
    std::string report_dir;
    auto* report = exp->add_subcommand("report", "Recompute aggregates from raw.csv");
    report->add_option("dir", report_dir, "Report directory")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            return cmd_simulate(config, out);
        }
        if (pde->parsed()) {
            return cmd_solve_pde(config, out);
        }
        if (gen->parsed()) {
            nemf::WeightMatrix w;
            if (gtype == "uniform_attachment") {
                w = nemf::gen_uniform_attachment(gn, gseed);
            } else {
                const auto k = nemf::StepGraphon::from_analytic(
                    {nemf::AnalyticKernel::Kind::uniform_attachment_limit, 1.0}, gn);
                w = nemf::gen_w_random(k, gn, gseed);
            }
            if (gout.empty()) {
                nemf::write_csv(std::cout, w);
            } else {
                auto os = open_out(gout);
                nemf::write_csv(os, w);
            }
            return 0;
        }
        if (norm->parsed()) {
            const auto r = nemf::op_norm_inf_to_1(load_graphon(ga));
            std::cout << json{{"op_norm_inf_to_1", r.value}, {"exact", r.exact}}.dump() << "\n";
            return 0;
        }
        if (dist->parsed()) {
            const auto r = nemf::cut_distance(load_graphon(ga), load_graphon(gb));
            std::cout << json{{"cut_distance", r.value}, {"exact", r.exact}}.dump() << "\n";
            return 0;
        }
        if (modulus->parsed()) {
            const auto eps = nemf::modulus_of_continuity(load_graphon(ga), shifts);
            std::cout << "h,eps\n";
            for (std::size_t k = 0; k < eps.knots().size(); ++k) {
                std::cout << eps.knots()[k] << ',' << eps.values()[k] << '\n';
            }
            return 0;
        }
        if (metric->parsed()) {
            const auto a = read_measure_csv(ma, mcells);
            const auto b = read_measure_csv(mb, mcells);
            if (which == "h11") {
                json j = nemf::h11_distance(a, b);
                std::cout << j.dump() << "\n";
            } else {
                json j = nemf::phi_w_lb_distance(a, b, nemf::ModulusOfContinuity::linear(1.0),
                                                 nemf::TestFamilySpec::standard());
                std::cout << j.dump() << "\n";
            }
            return 0;
        }
        if (run->parsed()) {
            auto cfg = read_json(config).get<nemf::ExperimentConfig>();
            if (!out_override.empty()) {
                cfg.output_dir = out_override;
            }
            if (cfg.output_dir.empty()) {
                cfg.output_dir = out;
            }
            const auto rep = nemf::run_experiment(cfg);
            nemf::emit_report(rep, cfg.output_dir);
            for (const auto& c : rep.checks) {
                std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
            }
            std::cout << "wrote " << cfg.output_dir << " in " << rep.seconds << " s\n";
            return rep.bound_violated() ? 2 : 0;
        }
        if (report->parsed()) {
            std::ifstream is(fs::path(report_dir) / "raw.csv");
            if (!is) {
                throw std::runtime_error("no raw.csv in " + report_dir);
            }
            const auto rows = nemf::read_raw_csv(is);
            const auto aggs = nemf::aggregate(rows);
            std::cout << "metric,N,count,mean,stderr,bound\n";
            std::cout.precision(10);
            bool violated = false;
            for (const auto& a : aggs) {
                std::cout << a.metric << ',' << a.N << ',' << a.count << ',' << a.mean << ',' << a.stderr_ << ','
                          << (std::isnan(a.bound) ? std::string() : std::to_string(a.bound)) << '\n';
                violated = violated || (!std::isnan(a.bound) && a.mean > a.bound);
            }
            return violated ? 2 : 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
