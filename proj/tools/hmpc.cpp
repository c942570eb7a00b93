#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include "hmpc/hmpc.hpp"

namespace {

using namespace hmpc;

enum Exit : int { kOk = 0, kInvalidConfig = 1, kDiverged = 2, kNegotiationFailure = 3, kNoConvergentBeta = 4 };

struct Options {
    std::string config;
    std::string out;
    std::optional<long> seed;
    std::optional<double> beta;
    bool beta_sweep = false;
    std::string mode;
    std::string transport;
    std::string subsystem = "s1";
    std::string listen = "127.0.0.1:0";
    std::string grid = "0:0.5:10";
    long duration = 200;
};

std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

/// Shortest round-trip form that always shows a decimal point.
std::string decimal(double v) {
    std::string s = shortest(v);
    if (std::isfinite(v) && s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
}

RunConfig load(const Options& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
    if (o.seed) {
        if (*o.seed < 0) fail(ErrorCode::InvalidConfig, "--seed must be non-negative");
        c.seed = static_cast<std::uint64_t>(*o.seed);
    }
    if (o.beta) {
        if (!(*o.beta > 0.0 && *o.beta <= 1.0)) fail(ErrorCode::InvalidConfig, "--beta must lie in (0, 1]");
        c.beta = *o.beta;
    }
    if (o.beta_sweep) c.beta.reset();
    if (!o.mode.empty()) c.mode = parse_control_mode(o.mode, "--mode");
    if (!o.transport.empty()) c.transport = o.transport;
    if (!o.out.empty()) c.output_dir = o.out;
    return c;
}

std::filesystem::path out_dir(const RunConfig& c) {
    std::filesystem::path dir(c.output_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) fail(ErrorCode::InvalidConfig, "cannot write " + p.string());
    return f;
}

std::array<std::unique_ptr<SubsystemHandler>, 2> make_handlers(const CoupledPlant& p, const ControllerSetup& s) {
    return {std::make_unique<SubsystemHandler>(p.s1, s.local[0], s.central[0], p.exogenous[0]),
            std::make_unique<SubsystemHandler>(p.s2, s.local[1], s.central[1], p.exogenous[1])};
}

int cmd_certify(const Options& o) {
    const RunConfig c = load(o);
    const CoupledPlant p = build_plant(c);
    const ControllerSetup s = build_setup(c, p);
    auto h = make_handlers(p, s);
    const CertificationReport rep = certify_convergence(EndpointPair{h[0].get(), h[1].get()}, s.certification_grid);
    auto f = open_out(out_dir(c) / "certify.csv");
    f << "beta,rho\n";
    for (const auto& row : rep.rows) f << shortest(row.beta) << ',' << decimal(row.rho) << '\n';
    if (c.beta) {
        const Matrix M1 = coupling_columns(h[0]->sensitivity(), h[0]->info().horizon);
        const Matrix M2 = coupling_columns(h[1]->sensitivity(), h[1]->info().horizon);
        std::cout << "rho(" << shortest(*c.beta) << ") = " << decimal(spectral_radius_from_spectrum(coupling_spectrum(M1, M2), *c.beta)) << '\n';
    }
    if (!rep.certified()) {
        std::cerr << "NO_CONVERGENT_BETA: no grid value of beta gives rho(Z) < 1\n";
        return kNoConvergentBeta;
    }
    std::cout << "recommended beta " << shortest(*rep.recommended_beta) << " (rho " << decimal(rep.recommended_rho) << ")\n";
    return kOk;
}

double pick_beta(const RunConfig& c, const ControllerSetup& s, const EndpointPair& ep) {
    if (c.beta) return *c.beta;
    const CertificationReport rep = certify_convergence(ep, s.certification_grid);
    if (!rep.certified()) fail(ErrorCode::NotPositiveDefinite, "NO_CONVERGENT_BETA");
    return *rep.recommended_beta;
}

int cmd_negotiate(const Options& o) {
    const RunConfig c = load(o);
    const CoupledPlant p = build_plant(c);
    const ControllerSetup s = build_setup(c, p);
    auto h = make_handlers(p, s);
    const EndpointPair ep{h[0].get(), h[1].get()};
    double beta = 0.0;
    try {
        beta = pick_beta(c, s, ep);
    } catch (const Error&) {
        std::cerr << "NO_CONVERGENT_BETA: no grid value of beta gives rho(Z) < 1\n";
        return kNoConvergentBeta;
    }
    CoordinatorConfig cfg = s.coordinator;
    cfg.beta = beta;
    Vector r_d(p.s1.ny() + p.s2.ny());
    r_d << s.central[0].r_d, s.central[1].r_d;
    const Vector r = c.negotiate.r ? *c.negotiate.r : r_d;
    if (r.size() != r_d.size()) fail(ErrorCode::InvalidConfig, "/negotiate/r: expected " + std::to_string(r_d.size()) + " entries");

    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> dist(-c.negotiate.amplitude, c.negotiate.amplitude);
    const auto dir = out_dir(c);
    auto trace = open_out(dir / "negotiate.csv");
    auto summary = open_out(dir / "negotiate_summary.csv");
    trace << "run,sigma,max_error\n";
    summary << "run,iterations,final_error,status\n";
    long diverged = 0, failed = 0, worst = 0;
    double worst_error = 0.0;
    for (long run = 0; run < c.negotiate.count; ++run) {
        ProfilePair v0 = zero_coupling(ep);
        if (c.negotiate.randomize)
            for (auto& prof : v0)
                for (Index i = 0; i < prof.stacked().size(); ++i) prof.stacked()(i) = dist(rng);
        const NegotiationOutcome out = fixed_point_solve(ep, r, r_d, v0, cfg);
        for (std::size_t sg = 0; sg < out.error_trace.size(); ++sg)
            trace << run << ',' << sg + 1 << ',' << shortest(out.error_trace[sg]) << '\n';
        const double fe = out.error_trace.empty() ? 0.0 : out.error_trace.back();
        summary << run << ',' << out.iterations << ',' << shortest(fe) << ',' << to_string(out.status) << '\n';
        diverged += out.status == NegotiationStatus::Diverged ? 1 : 0;
        failed += out.status == NegotiationStatus::BudgetExhausted ? 1 : 0;
        worst = std::max(worst, out.iterations);
        worst_error = std::max(worst_error, fe);
    }
    if (c.negotiate.count > 0)
        summary << "all," << worst << ',' << shortest(worst_error) << ','
                << (c.negotiate.count - diverged - failed) << '/' << c.negotiate.count << " converged\n";
    std::cout << "beta " << shortest(beta) << ": " << c.negotiate.count - diverged - failed << "/" << c.negotiate.count
              << " runs converged, at most " << worst << " iterations\n";
    if (diverged > 0) return kDiverged;
    return failed > 0 ? kNegotiationFailure : kOk;
}

int cmd_simulate(const Options& o) {
    const RunConfig c = load(o);
    const CoupledPlant p = build_plant(c);
    ControllerSetup s = build_setup(c, p);
    const ScenarioScript sc = build_scenario(c);

    std::vector<std::unique_ptr<RemoteSubsystem>> remote;
    std::unique_ptr<ClosedLoop> loop;
    if (c.transport == "inproc") {
        loop = std::make_unique<ClosedLoop>(p, s, sc.mode);
    } else {
        const std::string list = c.transport.substr(5);
        const auto comma = list.find(',');
        if (comma == std::string::npos) fail(ErrorCode::InvalidConfig, "--transport wire needs two addresses: wire:<s1>,<s2>");
        remote.push_back(std::make_unique<RemoteSubsystem>(parse_address(list.substr(0, comma))));
        remote.push_back(std::make_unique<RemoteSubsystem>(parse_address(list.substr(comma + 1))));
        loop = std::make_unique<ClosedLoop>(p, s, sc.mode, std::array<SubsystemAgent*, 2>{remote[0].get(), remote[1].get()});
    }
    if (sc.mode == ControlMode::Hierarchical && !c.beta && !loop->certifications().empty()) {
        if (!loop->certifications().front().report.certified()) {
            std::cerr << "NO_CONVERGENT_BETA: no grid value of beta gives rho(Z) < 1\n";
            return kNoConvergentBeta;
        }
    }
    SimulationLog log = run_scenario(sc, *loop);
    if (std::holds_alternative<SurrogateSource>(c.plant))
        log.notes.push_back("surrogate plant: operating-point offsets U0/Y0 are arbitrary");
    const auto dir = out_dir(c);
    auto csv = open_out(dir / "log.csv");
    write_log_csv(log, csv);
    auto js = open_out(dir / "summary.json");
    js << summary_json(log).dump(2) << '\n';
    for (auto& r : remote) r->shutdown();
    std::cout << "verdict " << to_string(log.verdict) << " after " << log.records.size() << " steps\n";
    switch (log.verdict) {
        case Verdict::Stable: return kOk;
        case Verdict::Diverged: return kDiverged;
        case Verdict::NegotiationFailure: return kNegotiationFailure;
    }
    return kNegotiationFailure;
}

int cmd_serve(const Options& o) {
    const RunConfig c = load(o);
    const CoupledPlant p = build_plant(c);
    const ControllerSetup s = build_setup(c, p);
    const int which = o.subsystem == "s2" ? 1 : 0;
    SubsystemHandler h(p.sub(which), s.local[which], s.central[which], p.exogenous[static_cast<std::size_t>(which)]);
    SubsystemServer server(h, parse_address(o.listen));
    std::cout << "listening on port " << server.port() << std::endl;
    server.run();
    return kOk;
}

int cmd_calibrate(const Options& o) {
    const RunConfig c = load(o);
    const auto* src = std::get_if<SurrogateSource>(&c.plant);
    if (!src) fail(ErrorCode::InvalidConfig, "calibrate needs a surrogate plant");
    double a = 0, b = 0, st = 0;
    char sep1 = 0, sep2 = 0;
    std::istringstream in(o.grid);
    if (!(in >> a >> sep1 >> st >> sep2 >> b) || sep1 != ':' || sep2 != ':')
        fail(ErrorCode::InvalidConfig, "--grid expects start:step:stop");
    const auto res = calibrate_coupling(src->seed, beta_grid(a, b, st), o.duration);
    auto f = open_out(out_dir(c) / "calibrate.csv");
    f << "coupling,peak_output,verdict\n";
    for (const auto& pt : res.points) f << shortest(pt.coupling) << ',' << shortest(pt.peak_output) << ',' << to_string(pt.verdict) << '\n';
    if (!res.coupling) {
        std::cout << "no grid coupling makes the decentralised loop exceed the threshold\n";
        return kNegotiationFailure;
    }
    std::cout << "calibrated coupling " << shortest(*res.coupling) << '\n';
    return kOk;
}

int exit_code(const Error& e) {
    switch (e.code()) {
        case ErrorCode::ProtocolError:
        case ErrorCode::TransportError: return kNegotiationFailure;
        default: return kInvalidConfig;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical MPC coordination: certification, negotiation and closed-loop simulation"};
    app.require_subcommand(1);
    Options o;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "run configuration (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--seed", o.seed, "master random seed");
        auto* beta = sub->add_option("--beta", o.beta, "filter coefficient in (0, 1]");
        auto* sweep = sub->add_flag("--beta-sweep", o.beta_sweep, "use the certified beta from the sweep");
        beta->excludes(sweep);
    };

    auto* certify = app.add_subcommand("certify", "spectral radius of the negotiation iteration over a beta grid");
    common(certify);
    auto* negotiate = app.add_subcommand("negotiate", "fixed-point negotiations from random initial profiles");
    common(negotiate);
    auto* simulate = app.add_subcommand("simulate", "closed-loop scenario run");
    common(simulate);
    simulate->add_option("--mode", o.mode, "hierarchical or decentralized")->check(CLI::IsMember({"hierarchical", "decentralized"}));
    simulate->add_option("--transport", o.transport, "inproc or wire:<host:port>,<host:port>");
    auto* serve = app.add_subcommand("serve", "serve one subsystem over the wire transport");
    common(serve);
    serve->add_option("--subsystem", o.subsystem, "s1 or s2")->check(CLI::IsMember({"s1", "s2"}));
    serve->add_option("--listen", o.listen, "host:port to listen on");
    auto* calibrate = app.add_subcommand("calibrate", "decentralised coupling-strength sweep of the surrogate");
    common(calibrate);
    calibrate->add_option("--grid", o.grid, "coupling grid start:step:stop");
    calibrate->add_option("--duration", o.duration, "samples per run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalidConfig;
    }

    try {
        if (*certify) return cmd_certify(o);
        if (*negotiate) return cmd_negotiate(o);
        if (*simulate) return cmd_simulate(o);
        if (*serve) return cmd_serve(o);
        if (*calibrate) return cmd_calibrate(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalidConfig;
    }
    return kOk;
}
