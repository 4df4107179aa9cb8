// pmflow: shock states, critical angles and the transonic reflection solver
// from the command line.
//
// Exit codes: 0 ok, 2 usage or invalid input, 3 numerical stall, 4 failed
// admissibility checks.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "pmflow/errors.hpp"
#include "pmflow/fbp_solver.hpp"
#include "pmflow/io.hpp"
#include "pmflow/selfsim_states.hpp"
#include "pmflow/steady_polar.hpp"
#include "pmflow/verify.hpp"

using namespace pmflow;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0, kUsage = 2, kStall = 3, kVerifyFail = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    double gamma = 1.4;
    std::optional<double> v_inf, u_inf, u0, beta;
    std::string beta_list;
    std::string grid;
    std::optional<double> tol_pde, tol_shock;
    int jobs = 1;
    std::string out;
    int samples = 256;
    std::string dir;
    std::string what;
};

// "129x65" (node counts) -> ns = 128, nt = 64.
void apply_grid(const std::string& text, SolverConfig& cfg) {
    if (text.empty()) return;
    const size_t x = text.find_first_of("xX");
    if (x == std::string::npos) throw UsageError("--grid expects NSxNT, got '" + text + "'");
    int ns = 0, nt = 0;
    try {
        size_t p1 = 0, p2 = 0;
        ns = std::stoi(text.substr(0, x), &p1);
        nt = std::stoi(text.substr(x + 1), &p2);
        if (p1 != x || p2 != text.size() - x - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw UsageError("--grid expects NSxNT, got '" + text + "'");
    }
    if (ns < 5 || nt < 4) throw UsageError("--grid needs at least 5x4 nodes");
    cfg.ns = ns - 1;
    cfg.nt = nt - 1;
}

SolverConfig solver_config(const Options& o) {
    SolverConfig cfg;
    apply_grid(o.grid, cfg);
    if (o.tol_pde) {
        if (!(*o.tol_pde > 0.0)) throw UsageError("--tol-pde must be positive");
        cfg.tol_pde = *o.tol_pde;
    }
    if (o.tol_shock) {
        if (!(*o.tol_shock > 0.0)) throw UsageError("--tol-shock must be positive");
        cfg.tol_shock = *o.tol_shock;
    }
    return cfg;
}

void check_gamma(double gamma) {
    if (!(gamma >= 1.0) || !std::isfinite(gamma)) throw UsageError("--gamma must be >= 1");
}

// Exactly one of (v_inf, beta) and (u_inf, u0).
SelfSimParams flow_params(const Options& o) {
    check_gamma(o.gamma);
    const bool self_sim = o.v_inf || o.beta;
    const bool physical = o.u_inf || o.u0;
    if (self_sim == physical)
        throw UsageError("give either --v-inf with --beta or --u-inf with --u0");
    if (self_sim) {
        if (!o.v_inf || !o.beta) throw UsageError("--v-inf and --beta go together");
        if (!(*o.v_inf > 0.0)) throw UsageError("--v-inf must be positive");
        return {*o.v_inf, *o.beta};
    }
    if (!o.u_inf || !o.u0) throw UsageError("--u-inf and --u0 go together");
    return map_PW_to_RW(o.gamma, *o.u_inf, *o.u0);
}

int worker_count(int jobs) {
    if (const char* env = std::getenv("PMFLOW_THREADS")) {
        try {
            jobs = std::stoi(env);
        } catch (const std::exception&) {
            throw UsageError(std::string("PMFLOW_THREADS is not an integer: ") + env);
        }
    }
    if (jobs < 1) throw UsageError("--jobs must be at least 1");
    return jobs;
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") {
        std::cout << text;
    } else {
        io::write_text(out, text);
    }
}

int cmd_polar(const Options& o) {
    check_gamma(o.gamma);
    if (!o.u_inf) throw UsageError("polar needs --u-inf");
    if (!(*o.u_inf > 1.0)) throw UsageError("--u-inf must exceed 1 (supersonic upstream)");
    if (o.samples < 2) throw UsageError("samples must be at least 2");
    const SteadyPolar polar(o.gamma, *o.u_inf);
    const CriticalPoints& c = polar.critical_points();
    io::CsvTable t;
    t.comments = {"gamma=" + io::fmt(o.gamma), "u_inf=" + io::fmt(*o.u_inf),
                  "u_hat0=" + io::fmt(c.u_hat0), "u_d=" + io::fmt(c.u_d),
                  "u_s=" + io::fmt(c.u_s), "theta_d=" + io::fmt(c.theta_d),
                  "theta_s=" + io::fmt(c.theta_s)};
    t.header = {"u", "v", "rho", "beta"};
    for (const PolarPoint& p : polar.sample(o.samples)) t.rows.push_back({p.u, p.v, p.rho, p.beta});
    emit(o.out, io::to_csv(t));
    return kOk;
}

// The steady polar seen at one critical angle: (u_inf, u0) from the
// parameter map, then the wedge angle of the downstream velocity.
std::pair<double, double> polar_point_at(double gamma, double v_inf, double beta) {
    const PhysicalParams pw = map_RW_to_PW(gamma, v_inf, beta);
    const SteadyPolar polar(gamma, pw.u_inf);
    return {pw.u0, std::atan2(polar.f_polar(pw.u0), pw.u0)};
}

int cmd_angles(const Options& o) {
    check_gamma(o.gamma);
    if (!o.v_inf) throw UsageError("angles needs --v-inf");
    if (!(*o.v_inf > 0.0)) throw UsageError("--v-inf must be positive");
    const CriticalAngles a = critical_angles(o.gamma, *o.v_inf);
    const auto [u_s, theta_s] = polar_point_at(o.gamma, *o.v_inf, a.beta_s);
    const auto [u_d, theta_d] = polar_point_at(o.gamma, *o.v_inf, a.beta_d);
    const io::json j = {{"gamma", o.gamma},     {"v_inf", *o.v_inf},   {"beta_s", a.beta_s},
                        {"beta_d", a.beta_d},   {"theta_s", theta_s},  {"theta_d", theta_d},
                        {"u_d", u_d},           {"u_s", u_s}};
    std::cout << io::dump(j);
    return kOk;
}

int run_one(double gamma, const SelfSimParams& p, const SolverConfig& cfg, const fs::path& dir,
            FbpResult* keep = nullptr) {
    const FbpResult r = solve_fbp(gamma, p.v_inf, p.beta, cfg);
    io::write_solution(dir, r.field, r.report, cfg);
    if (cfg.run_verify)
        io::write_text(dir / "admissibility.json", io::dump(io::admissibility_to_json(verify_solution(r.field))));
    if (keep) *keep = r;
    return r.report.converged ? kOk : kStall;
}

int cmd_solve(const Options& o) {
    const SelfSimParams p = flow_params(o);
    const SolverConfig cfg = solver_config(o);
    const fs::path dir = o.out.empty() ? fs::path("pmflow_out") : fs::path(o.out);
    FbpResult r;
    const int code = run_one(o.gamma, p, cfg, dir, &r);
    std::cerr << (r.report.converged ? "converged" : "stalled") << ": beta = " << io::fmt(p.beta)
              << ", continuation steps " << r.report.continuation_steps << ", shock move "
              << io::fmt(r.report.shock_move) << ", wall time " << r.report.wall_time << " s\n";
    if (!r.report.message.empty()) std::cerr << r.report.message << "\n";
    return code;
}

int cmd_verify(const Options& o) {
    if (o.dir.empty()) throw UsageError("verify needs a solution directory");
    const SolutionField f = io::read_solution(o.dir);
    const AdmissibilityReport a = verify_solution(f);
    io::write_text(fs::path(o.dir) / "admissibility.json", io::dump(io::admissibility_to_json(a)));
    for (const CheckResult& c : a.checks)
        std::cerr << c.name << ": " << c.status << " (margin " << io::fmt(c.worst_margin) << ")\n";
    return a.pass ? kOk : kVerifyFail;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            out.push_back(io::parse_double(item));
        } catch (const ConfigError&) {
            throw UsageError("--beta-list entry is not a number: '" + item + "'");
        }
    }
    return out;
}

int cmd_sweep(const Options& o) {
    check_gamma(o.gamma);
    if (!o.v_inf || !(*o.v_inf > 0.0)) throw UsageError("sweep needs a positive --v-inf");
    const std::vector<double> betas = parse_list(o.beta_list);
    if (betas.empty()) throw UsageError("sweep needs a non-empty --beta-list");
    const SolverConfig cfg = solver_config(o);
    const double beta_d = critical_angles(o.gamma, *o.v_inf).beta_d;
    for (double b : betas) {
        if (!(b >= 0.0 && b < beta_d - cfg.beta_margin))
            throw UsageError("beta = " + io::fmt(b) + " lies outside the weak range [0, " +
                             io::fmt(beta_d) + ")");
    }
    const fs::path base = o.out.empty() ? fs::path("pmflow_sweep") : fs::path(o.out);
    const int n = static_cast<int>(betas.size());
    const int workers = std::min(worker_count(o.jobs), n);

    std::vector<FbpResult> results(n);
    std::vector<int> codes(n, kOk);
    std::vector<std::string> errors(n);
    std::atomic<int> next{0};
    auto work = [&] {
        for (int k = next++; k < n; k = next++) {
            char name[32];
            std::snprintf(name, sizeof name, "beta_%03d", k);
            try {
                codes[k] = run_one(o.gamma, {*o.v_inf, betas[k]}, cfg, base / name, &results[k]);
            } catch (const std::exception& e) {
                codes[k] = kStall;
                errors[k] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();

    io::CsvTable t;
    t.comments = {"gamma=" + io::fmt(o.gamma), "v_inf=" + io::fmt(*o.v_inf),
                  "beta_s=" + io::fmt(critical_angles(o.gamma, *o.v_inf).beta_s),
                  "sonic_point: 0 = supersonic corner P1, 1 = corner collapsed to P_beta"};
    t.header = {"index", "beta", "converged", "admissible", "continuation_steps",
                "iterations", "mu_el", "shock_left", "shock_right", "sonic_point"};
    int worst = kOk;
    for (int k = 0; k < n; ++k) {
        if (!errors[k].empty()) std::cerr << "beta_" << k << ": " << errors[k] << "\n";
        worst = std::max(worst, codes[k]);
        const FbpResult& r = results[k];
        const MappedDomain dom(o.gamma, *o.v_inf, betas[k]);
        const bool sonic_point = dom.geometry().topology == CornerTopology::SonicPoint;
        double mu = std::nan("");
        bool admissible = !r.report.admissibility.empty();
        for (const auto& [name, ok] : r.report.admissibility) admissible = admissible && ok;
        if (errors[k].empty() && cfg.run_verify) {
            const CheckResult e = check_ellipticity(r.field);
            mu = e.values.at("mu_el");
        }
        const double left = errors[k].empty() ? r.field.shock.value(0) : std::nan("");
        const double right = errors[k].empty() ? r.field.shock.value(r.field.grid.ns()) : std::nan("");
        t.rows.push_back({double(k), betas[k], double(r.report.converged), double(admissible),
                          double(r.report.continuation_steps), double(r.report.total_iterations),
                          mu, left, right, double(sonic_point)});
    }
    io::write_text(base / "summary.csv", io::to_csv(t));
    return worst;
}

int cmd_plotdata(const Options& o) {
    if (o.what != "shock" && o.what != "field" && o.what != "polar")
        throw UsageError("plotdata expects one of shock, field, polar");
    if (o.dir.empty()) throw UsageError("plotdata needs a solution directory");
    const SolutionField f = io::read_solution(o.dir);
    std::string text;
    if (o.what == "shock") {
        const io::CsvTable sh = io::shock_table(f);
        text = "# xi1 xi2\n";
        for (const auto& row : sh.rows) text += io::fmt(row[2]) + " " + io::fmt(row[3]) + "\n";
    } else if (o.what == "field") {
        text = "# s t u\n";
        for (int i = 0; i <= f.grid.ns(); ++i) {
            for (int j = 0; j <= f.grid.nt(); ++j)
                text += io::fmt(f.grid.s[i]) + " " + io::fmt(f.grid.t[j]) + " " + io::fmt(f.at(i, j)) + "\n";
            text += "\n";  // gnuplot block separator
        }
    } else {
        if (f.params.beta <= 0.0) throw UsageError("no steady polar for beta = 0");
        const PhysicalParams pw = map_RW_to_PW(f.gamma, f.params.v_inf, f.params.beta);
        const SteadyPolar polar(f.gamma, pw.u_inf);
        text = "# u v  (u_inf = " + io::fmt(pw.u_inf) + ", u0 = " + io::fmt(pw.u0) + ")\n";
        for (const PolarPoint& p : polar.sample(o.samples)) text += io::fmt(p.u) + " " + io::fmt(p.v) + "\n";
    }
    emit(o.out, text);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-similar potential-flow shock reflection: states, critical angles and the transonic solver"};
    app.require_subcommand(1);
    Options o;

    auto add_gamma = [&](CLI::App* c) { c->add_option("--gamma", o.gamma, "adiabatic exponent (>= 1)")->capture_default_str(); };
    auto add_state = [&](CLI::App* c) {
        c->add_option("--v-inf", o.v_inf, "self-similar upstream speed v_inf > 0");
        c->add_option("--beta", o.beta, "wedge-angle parameter beta in radians");
        c->add_option("--u-inf", o.u_inf, "steady upstream speed u_inf > 1");
        c->add_option("--u0", o.u0, "steady downstream speed on the wedge");
    };
    auto add_solver = [&](CLI::App* c) {
        c->add_option("--grid", o.grid, "node counts NSxNT, e.g. 129x65");
        c->add_option("--tol-pde", o.tol_pde, "interior residual tolerance");
        c->add_option("--tol-shock", o.tol_shock, "shock-update tolerance");
    };

    auto* polar = app.add_subcommand("polar", "sample the steady shock polar to CSV");
    add_gamma(polar);
    polar->add_option("--u-inf", o.u_inf, "upstream speed u_inf > 1")->required();
    polar->add_option("samples", o.samples, "number of samples")->capture_default_str();
    polar->add_option("--out", o.out, "output file (stdout when omitted)");

    auto* angles = app.add_subcommand("angles", "critical angles beta_s and beta_d as JSON");
    add_gamma(angles);
    angles->add_option("--v-inf", o.v_inf, "self-similar upstream speed v_inf > 0")->required();

    auto* solve = app.add_subcommand("solve", "solve the free boundary problem for one angle");
    add_gamma(solve);
    add_state(solve);
    add_solver(solve);
    solve->add_option("--out", o.out, "output directory")->capture_default_str();

    auto* verify = app.add_subcommand("verify", "run the admissibility checks on a solution directory");
    verify->add_option("dir", o.dir, "solution directory")->required();

    auto* sweep = app.add_subcommand("sweep", "solve for a list of angles");
    add_gamma(sweep);
    sweep->add_option("--v-inf", o.v_inf, "self-similar upstream speed v_inf > 0")->required();
    sweep->add_option("--beta-list", o.beta_list, "comma-separated angles in radians")->required();
    add_solver(sweep);
    sweep->add_option("--jobs", o.jobs, "parallel solves (PMFLOW_THREADS overrides)")->capture_default_str();
    sweep->add_option("--out", o.out, "base output directory");

    auto* plot = app.add_subcommand("plotdata", "whitespace-separated data for gnuplot");
    plot->add_option("dir", o.dir, "solution directory")->required();
    plot->add_option("what", o.what, "shock, field or polar")->required();
    plot->add_option("--out", o.out, "output file (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (polar->parsed()) return cmd_polar(o);
        if (angles->parsed()) return cmd_angles(o);
        if (solve->parsed()) return cmd_solve(o);
        if (verify->parsed()) return cmd_verify(o);
        if (sweep->parsed()) return cmd_sweep(o);
        if (plot->parsed()) return cmd_plotdata(o);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what()
                  << " (strong-region angles beta >= beta_d admit no admissible solution)\n";
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kStall;
    }
    return kUsage;
}
