#include "pmflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>

namespace pmflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shared read-only view of a solution: node positions and derivatives.
struct Context {
    MappedDomain dom;
    Discretization disc;
    std::vector<Discretization::NodeDerivatives> d;
    PhysicalSolution phys;
    double h;

    explicit Context(const SolutionField& f)
        : dom(f.gamma, f.params.v_inf, f.params.beta),
          disc(dom, f.grid, f.shock),
          phys(reconstruct_phi(f)),
          h(grid_spacing(f.grid)) {
        d.reserve(f.grid.size());
        for (int i = 0; i <= f.grid.ns(); ++i) {
            for (int j = 0; j <= f.grid.nt(); ++j) d.push_back(disc.derivatives(i, j, f.u));
        }
    }
};

// Distance from p to the arc of the circle (centre, radius) between polar
// angles a0 <= a1.
double arc_distance(Vec2 p, Vec2 centre, double radius, double a0, double a1) {
    const Vec2 q = p - centre;
    const double ang = std::atan2(q.y, q.x);
    if (ang >= a0 && ang <= a1) return std::abs(norm(q) - radius);
    const Vec2 e0 = centre + radius * Vec2{std::cos(a0), std::sin(a0)};
    const Vec2 e1 = centre + radius * Vec2{std::cos(a1), std::sin(a1)};
    return std::min(norm(p - e0), norm(p - e1));
}

double dist_N(const ConfigGeometry& g, Vec2 p) {
    return arc_distance(p, g.O_N, g.c_N, 0.0, std::atan2(g.P2.y, g.P2.x));
}

// Distance to the O-side sonic set plus the supersonic margin at P1.
double dist_O_shifted(const ConfigGeometry& g, Vec2 p) {
    const double margin = g.c_O - norm(g.O_O - g.P1);
    if (g.topology == CornerTopology::SonicPoint) return norm(p - g.P_beta) + margin;
    const double a1 = std::atan2(g.P1.y, g.P1.x - g.u_O);
    return arc_distance(p, g.O_O, g.c_O, a1, 3.14159265358979323846) + margin;
}

void note_worst(CheckResult& r, double margin, Vec2 where) {
    if (margin < r.worst_margin) {
        r.worst_margin = margin;
        r.location = where;
    }
}

CheckResult entropy_rh(const SolutionField& f, const Context& cx, const VerifyConfig& cfg) {
    CheckResult r{"entropy_rh", true, "pass", kInf, {}, {}};
    const ConfigGeometry& g = cx.dom.geometry();
    const double tol = cfg.rh_factor * cx.h * cx.h;
    const int nt = f.grid.nt();
    double worst_rh = 0.0, worst_jump = 0.0, min_mnu = kInf, max_mnu = 0.0, min_minf = kInf;
    for (int i = 0; i <= f.grid.ns(); ++i) {
        const PhysicalSample& p = cx.phys.nodes[f.grid.index(i, nt)];
        if (!p.regular) continue;
        const Vec2 dinf = g.phi_inf.grad(p.xi);
        const Vec2 jump = dinf - p.dphi;
        if (norm(jump) == 0.0) {
            r.pass = false;
            note_worst(r, -1.0, p.xi);
            continue;
        }
        const Vec2 nu = jump / norm(jump);
        const double rh = std::abs(p.rho * dot(p.dphi, nu) - dot(dinf, nu));
        const double cont = std::abs(g.phi_inf.phi(p.xi) - p.phi);
        const double mnu = std::abs(dot(p.dphi, nu)) / p.c;
        const double minf = std::abs(dot(dinf, nu));
        worst_rh = std::max(worst_rh, rh);
        worst_jump = std::max(worst_jump, cont);
        min_mnu = std::min(min_mnu, mnu);
        max_mnu = std::max(max_mnu, mnu);
        min_minf = std::min(min_minf, minf);
        const double margin = std::min({tol - rh, tol - cont, mnu, 1.0 - mnu, minf - 1.0});
        note_worst(r, margin, p.xi);
        if (!(margin > 0.0)) r.pass = false;
    }
    r.status = r.pass ? "pass" : "fail";
    r.values = {{"rh_residual", worst_rh}, {"phi_jump", worst_jump}, {"min_M_nu", min_mnu},
                {"max_M_nu", max_mnu}, {"min_M_inf_nu", min_minf}, {"tol_rh", tol}};
    return r;
}

CheckResult monotone_cone(const SolutionField& f, const Context& cx, const VerifyConfig& cfg) {
    CheckResult r{"monotone_cone", true, "pass", kInf, {}, {}};
    const ConfigGeometry& g = cx.dom.geometry();
    const double b = f.params.beta;
    const double tol = cfg.mono_factor * cx.h * cx.h;
    const Vec2 dirs[3] = {{std::cos(b), std::sin(b)},
                          {-1.0, 0.0},
                          {-std::sin(0.5 * b), std::cos(0.5 * b)}};
    double worst = -kInf;
    for (const PhysicalSample& p : cx.phys.nodes) {
        if (!p.regular) continue;
        const Vec2 diff = g.phi_inf.grad(p.xi) - p.dphi;
        for (const Vec2& e : dirs) {
            const double de = dot(e, diff);
            worst = std::max(worst, de);
            note_worst(r, tol - de, p.xi);
            if (de > tol) r.pass = false;
        }
    }
    r.status = r.pass ? "pass" : "fail";
    r.values = {{"max_directional_derivative", worst}, {"tol_mono", tol}};
    return r;
}

CheckResult ellipticity(const SolutionField&, const Context& cx, const VerifyConfig& cfg) {
    CheckResult r{"ellipticity", true, "pass", kInf, {}, {}};
    const ConfigGeometry& g = cx.dom.geometry();
    double mu = kInf, max_m2 = 0.0;
    Vec2 at;
    for (const PhysicalSample& p : cx.phys.nodes) {
        if (!p.regular) continue;
        const double m2 = p.mach * p.mach;
        max_m2 = std::max(max_m2, m2);
        const double dist =
            std::min({cfg.zeta_hat, dist_N(g, p.xi), dist_O_shifted(g, p.xi)});
        if (dist <= cx.h * cx.h) {
            // On the sonic set only M <= 1 can be asked for.
            const double excess = 1.0 + cfg.mono_factor * cx.h * cx.h - m2;
            if (excess < 0.0 && excess / (cx.h * cx.h) < mu) {
                mu = excess / (cx.h * cx.h);
                at = p.xi;
            }
            continue;
        }
        const double bound = (1.0 - m2) / dist;
        if (bound < mu) {
            mu = bound;
            at = p.xi;
        }
    }
    r.pass = mu >= cfg.mu_min;
    r.status = r.pass ? "pass" : "fail";
    r.worst_margin = mu - cfg.mu_min;
    r.location = at;
    r.values = {{"mu_el", mu}, {"mu_min", cfg.mu_min}, {"max_M2", max_m2}};
    return r;
}

// Derivative at x[0] of the quadratic through three points.
double end_slope(Vec2 a, Vec2 b, Vec2 c) {
    const double h1 = b.x - a.x, h2 = c.x - a.x;
    const double d1 = (b.y - a.y) / h1, d2 = (c.y - a.y) / h2;
    return (d1 * h2 - d2 * h1) / (h2 - h1);
}

CheckResult shock_geometry(const SolutionField& f, const Context& cx, const VerifyConfig& cfg) {
    CheckResult r{"shock_geometry", true, "pass", kInf, {}, {}};
    const ConfigGeometry& g = cx.dom.geometry();
    const double tol = cfg.slope_factor * cx.h;
    const double tb = std::tan(f.params.beta);
    const std::vector<Vec2>& s = cx.phys.shock;
    const int n = static_cast<int>(s.size());
    double min_slope = kInf, max_slope = -kInf;
    for (int i = 0; i + 1 < n; ++i) {
        const double dx = s[i + 1].x - s[i].x;
        if (!(dx > 0.0)) {
            r.pass = false;
            note_worst(r, -1.0, s[i]);
            continue;
        }
        const double k = (s[i + 1].y - s[i].y) / dx;
        min_slope = std::min(min_slope, k);
        max_slope = std::max(max_slope, k);
        const double margin = std::min(k + tol, tb + tol - k);
        note_worst(r, margin, s[i]);
        if (margin < 0.0) r.pass = false;
    }
    const double right = end_slope(s[n - 1], s[n - 2], s[n - 3]);
    note_worst(r, tol - std::abs(right), s[n - 1]);
    if (std::abs(right) > tol) r.pass = false;
    double left = tb;
    if (g.topology == CornerTopology::SupersonicCorner) {
        left = end_slope(s[0], s[1], s[2]);
        note_worst(r, tol - std::abs(left - tb), s[0]);
        if (std::abs(left - tb) > tol) r.pass = false;
    }
    double dist = kInf;
    for (const Vec2& p : s) dist = std::min(dist, norm(p - g.O_inf) - 1.0);
    note_worst(r, dist, {});
    if (!(dist > 0.0)) r.pass = false;
    r.status = r.pass ? "pass" : "fail";
    r.values = {{"min_slope", min_slope},       {"max_slope", max_slope},
                {"slope_left", left},           {"slope_right", right},
                {"tan_beta", tb},               {"tol_slope", tol},
                {"distance_to_unit_circle", dist}};
    return r;
}

// psi_xx at the two innermost interior nodes of every row, extrapolated
// linearly in x to the arc. Rows next to the corners are left out.
struct SonicLimit {
    double limit = 0.0;
    double spread = 0.0;
    int rows = 0;
};

SonicLimit sonic_limit(const SolutionField& f, const Context& cx, SonicSide side) {
    const ConfigGeometry& g = cx.dom.geometry();
    const int ns = f.grid.ns(), nt = f.grid.nt();
    const int i1 = side == SonicSide::N ? ns - 1 : 1, i2 = side == SonicSide::N ? ns - 2 : 2;
    const Vec2 centre = side == SonicSide::N ? g.O_N : g.O_O;
    const double c = side == SonicSide::N ? g.c_N : g.c_O;
    auto rr = [&](int i, int j, double& x) {
        const auto& nd = cx.d[f.grid.index(i, j)];
        const Vec2 q = nd.xi - centre;
        const double r = norm(q);
        const Vec2 e = q / r;
        x = c - r;
        // psi and psi~ differ by an affine function, so the Hessians agree.
        return e.x * e.x * nd.h11 + 2.0 * e.x * e.y * nd.h12 + e.y * e.y * nd.h22;
    };
    std::vector<double> lim;
    for (int j = nt / 4; j <= (3 * nt) / 4; ++j) {
        double x1, x2;
        const double f1 = rr(i1, j, x1), f2 = rr(i2, j, x2);
        if (!(x2 > x1 && x1 > 0.0)) continue;
        lim.push_back(f1 - x1 * (f2 - f1) / (x2 - x1));
    }
    SonicLimit out;
    out.rows = static_cast<int>(lim.size());
    if (lim.empty()) return out;
    std::sort(lim.begin(), lim.end());
    out.limit = lim[lim.size() / 2];
    out.spread = lim.back() - lim.front();
    return out;
}

CheckResult sonic_regularity(const SolutionField& f, const Context& cx, const VerifyConfig& cfg) {
    CheckResult r{"sonic_regularity", true, "skipped", 0.0, {}, {}};
    const double target = 1.0 / (f.gamma + 1.0);
    r.values["target"] = target;
    if (f.params.beta <= 0.0) return r;  // uniform state: nothing to measure
    const SonicLimit n = sonic_limit(f, cx, SonicSide::N);
    r.values["limit_N"] = n.limit;
    r.values["spread_N"] = n.spread;
    r.values["rows_N"] = n.rows;
    if (cx.dom.geometry().topology == CornerTopology::SupersonicCorner) {
        const SonicLimit o = sonic_limit(f, cx, SonicSide::O);
        r.values["limit_O"] = o.limit;
        r.values["rows_O"] = o.rows;
    }
    r.location = cx.dom.geometry().P3;
    if (n.rows < 3) {
        r.status = "inconclusive";
        r.pass = false;
        return r;
    }
    const double err = std::abs(n.limit - target);
    r.worst_margin = cfg.reg_rel_tol * target - err;
    r.pass = r.worst_margin > 0.0;
    r.status = r.pass ? "pass" : "fail";
    return r;
}

CheckResult near_sonic_bounds(const SolutionField& f, const Context& cx, const VerifyConfig& cfg) {
    CheckResult r{"near_sonic_bounds", true, "pass", kInf, {}, {}};
    const ConfigGeometry& g = cx.dom.geometry();
    const double tol = cfg.mono_factor * cx.h * cx.h;
    double L = 0.0, min_psi = kInf, max_slope = 0.0;
    int samples = 0;
    for (const auto& nd : cx.d) {
        if (!nd.regular) continue;
        for (SonicSide side : {SonicSide::N, SonicSide::O}) {
            if (side == SonicSide::O && g.topology == CornerTopology::SonicPoint) continue;
            if (side == SonicSide::N && nd.xi.x < 0.0) continue;
            if (side == SonicSide::O && nd.xi.x > cx.dom.xi1_chi_full()) continue;
            const Vec2 centre = side == SonicSide::N ? g.O_N : g.O_O;
            const double c = side == SonicSide::N ? g.c_N : g.c_O;
            const Vec2 q = nd.xi - centre;
            const double rad = norm(q), x = c - rad;
            // Arc nodes sit at x = 0 up to roundoff and carry no information.
            if (!(x > 1e-8 && x < cfg.strip_width)) continue;
            // psi = phi - phi_state.
            double psi = nd.psi;
            Vec2 dpsi = nd.dpsi;
            if (side == SonicSide::O) {
                psi -= g.phi_O.phi(nd.xi) - g.phi_N.phi(nd.xi);
                dpsi = dpsi - Vec2{g.u_O, 0.0};
            }
            const Vec2 er = q / rad, et{-er.y, er.x};
            const double psx = -dot(er, dpsi);
            const double psy = (side == SonicSide::N ? 1.0 : -1.0) * rad * dot(et, dpsi);
            ++samples;
            min_psi = std::min(min_psi, psi);
            L = std::max({L, psi / (x * x), std::abs(psy) / x});
            max_slope = std::max(max_slope, psx / x);
            if (psi < -tol) {
                r.pass = false;
                note_worst(r, psi + tol, nd.xi);
            }
        }
    }
    if (samples == 0) {
        r.status = "inconclusive";
        r.pass = false;
        return r;
    }
    if (!(L <= cfg.bound_max)) {
        r.pass = false;
        note_worst(r, cfg.bound_max - L, {});
    }
    if (r.worst_margin == kInf) r.worst_margin = cfg.bound_max - L;
    r.status = r.pass ? "pass" : "fail";
    r.values = {{"L", L},
                {"min_psi", min_psi},
                {"max_psi_x_over_x", max_slope},
                {"delta", 2.0 - (f.gamma + 1.0) * max_slope},
                {"samples", samples}};
    return r;
}

using CheckFn = CheckResult (*)(const SolutionField&, const Context&, const VerifyConfig&);

CheckResult run_single(CheckFn fn, const SolutionField& f, const VerifyConfig& cfg) {
    const Context cx(f);
    return fn(f, cx, cfg);
}

}  // namespace

const CheckResult* AdmissibilityReport::find(const std::string& name) const {
    for (const CheckResult& c : checks) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

double grid_spacing(const StripGrid& grid) {
    return std::max(2.0 / grid.ns(), 1.0 / grid.nt());
}

CheckResult check_entropy_rh(const SolutionField& f, const VerifyConfig& cfg) {
    return run_single(entropy_rh, f, cfg);
}
CheckResult check_monotone_cone(const SolutionField& f, const VerifyConfig& cfg) {
    return run_single(monotone_cone, f, cfg);
}
CheckResult check_ellipticity(const SolutionField& f, const VerifyConfig& cfg) {
    return run_single(ellipticity, f, cfg);
}
CheckResult check_shock_geometry(const SolutionField& f, const VerifyConfig& cfg) {
    return run_single(shock_geometry, f, cfg);
}
CheckResult check_sonic_regularity(const SolutionField& f, const VerifyConfig& cfg) {
    return run_single(sonic_regularity, f, cfg);
}
CheckResult check_near_sonic_bounds(const SolutionField& f, const VerifyConfig& cfg) {
    return run_single(near_sonic_bounds, f, cfg);
}

AdmissibilityReport verify_solution(const SolutionField& f, const VerifyConfig& cfg) {
    const Context cx(f);
    const CheckFn fns[] = {entropy_rh,       monotone_cone,    ellipticity,
                           shock_geometry,   sonic_regularity, near_sonic_bounds};
    std::vector<std::future<CheckResult>> jobs;
    for (CheckFn fn : fns) {
        jobs.push_back(std::async(std::launch::async, [&, fn] { return fn(f, cx, cfg); }));
    }
    AdmissibilityReport rep;
    rep.pass = true;
    for (auto& j : jobs) {
        rep.checks.push_back(j.get());
        const CheckResult& c = rep.checks.back();
        if (!(c.pass || c.status == "skipped")) rep.pass = false;
    }
    return rep;
}

}  // namespace pmflow
