#include "pmflow/selfsim_states.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <utility>

#include "pmflow/errors.hpp"
#include "pmflow/roots.hpp"
#include "pmflow/steady_polar.hpp"

namespace pmflow {

namespace {

constexpr double kHalfPi = 1.5707963267948966;
constexpr double kAngleEdge = 1e-8;

void require_v_inf(double v_inf) {
    if (!(v_inf > 0.0) || !std::isfinite(v_inf)) {
        throw DomainError("v_inf must be a positive finite number");
    }
}

void require_gamma(double gamma) {
    if (!(gamma >= 1.0) || !std::isfinite(gamma)) throw DomainError("gamma must be >= 1");
}

void require_beta(double beta, bool allow_zero) {
    const bool ok = allow_zero ? (beta >= 0.0) : (beta > 0.0);
    if (!ok || !(beta < kHalfPi)) {
        std::ostringstream os;
        os.precision(17);
        os << "beta = " << beta << " outside " << (allow_zero ? "[0" : "(0") << ", pi/2)";
        throw DomainError(os.str());
    }
}

// Expands the upper end of [lo, hi] until f changes sign.
template <class F>
double grow_upper(F&& f, double lo, double hi, const char* what) {
    const bool neg_lo = f(lo) < 0.0;
    while ((f(hi) < 0.0) == neg_lo) {
        lo = hi;
        hi = 1.0 + 2.0 * (hi - 1.0);
        if (hi > 1e200) throw NumericalFailure(std::string(what) + ": no upper bracket");
    }
    return hi;
}

// Largest upper end below pi/2 at which f can be evaluated. Very close to
// pi/2 the downstream normal Mach number underflows for gamma near one.
template <class F>
double usable_upper_angle(F&& f) {
    for (double gap = kAngleEdge; gap < 0.5; gap *= 10.0) {
        try {
            if (std::isfinite(f(kHalfPi - gap))) return kHalfPi - gap;
        } catch (const NumericalFailure&) {
        } catch (const VacuumError&) {
        }
    }
    throw NumericalFailure("no usable upper angle below pi/2");
}

}  // namespace

std::string to_string(CornerTopology t) {
    return t == CornerTopology::SupersonicCorner ? "supersonic-corner" : "sonic-point";
}

std::string to_string(LineClass c) {
    switch (c) {
        case LineClass::Above: return "above";
        case LineClass::Tangent: return "tangent";
        case LineClass::Below: return "below";
    }
    return "unknown";
}

NormalState normal_state(double gamma, double v_inf) {
    require_gamma(gamma);
    require_v_inf(v_inf);
    const GasModel gas(gamma, 0.5 * v_inf * v_inf);
    const double v2 = v_inf * v_inf;
    auto f = [&](double rho) { return (gas.enthalpy(rho) - 0.5 * v2) * (rho - 1.0) - v2; };
    const double hi = grow_upper(f, 1.0, 2.0, "normal_state");
    NormalState out;
    out.rho_N = find_root(f, 1.0, hi, "normal_state");
    out.eta_N = v_inf / (out.rho_N - 1.0);
    out.c_N = std::sqrt(gas.enthalpy_and_sound(out.rho_N).c2);
    return out;
}

ObliqueState oblique_state(double gamma, double v_inf, double beta) {
    require_gamma(gamma);
    require_v_inf(v_inf);
    require_beta(beta, true);
    const double e = 2.0 / (gamma + 1.0);
    const double rhs = v_inf / std::cos(beta);
    // q_inf - q_O as a function of the incoming normal Mach number; zero at
    // M = 1 and increasing.
    auto q_O = [&](double m) {
        return std::pow(mach_jump(gamma, m), e) * std::pow(m, 1.0 - e);
    };
    auto f = [&](double m) { return m - q_O(m) - rhs; };
    const double hi = grow_upper(f, 1.0, 2.0, "oblique_state");

    ObliqueState out;
    out.M_inf = find_root(f, 1.0, hi, "oblique_state");
    out.M_O = mach_jump(gamma, out.M_inf);
    out.rho_O = std::pow(out.M_inf / out.M_O, e);
    out.c_O = std::pow(out.rho_O, 0.5 * (gamma - 1.0));
    out.q_O = out.M_O * out.c_O;
    out.xi2_beta = out.M_inf / std::cos(beta) - v_inf;
    out.u_O = -v_inf * std::tan(beta);
    return out;
}

double eta_O(double gamma, double v_inf, double beta) {
    const ObliqueState o = oblique_state(gamma, v_inf, beta);
    const double xi2m = -v_inf + o.M_inf * std::cos(beta);
    return xi2m - o.c_O * std::sqrt(std::max(0.0, 1.0 - o.M_O * o.M_O)) * std::sin(beta);
}

ConfigGeometry landmarks(double gamma, double v_inf, double beta) {
    const ObliqueState o = oblique_state(gamma, v_inf, beta);
    const NormalState n = normal_state(gamma, v_inf);
    const double cb = std::cos(beta), sb = std::sin(beta);

    ConfigGeometry g;
    g.gamma = gamma;
    g.v_inf = v_inf;
    g.beta = beta;
    g.O_inf = {0.0, -v_inf};
    g.O_O = {o.u_O, 0.0};
    g.O_N = {0.0, 0.0};
    g.c_O = o.c_O;
    g.c_N = n.c_N;
    g.rho_O = o.rho_O;
    g.rho_N = n.rho_N;
    g.u_O = o.u_O;
    g.xi2_beta = o.xi2_beta;
    g.eta_N = n.eta_N;
    g.M_inf = o.M_inf;
    g.M_O = o.M_O;
    g.q_O = o.q_O;
    g.xi_m = {-o.M_inf * sb, -v_inf + o.M_inf * cb};

    const double xi1_P2 = std::sqrt(n.c_N * n.c_N - n.eta_N * n.eta_N);
    g.P2 = {xi1_P2, n.eta_N};
    g.P3 = {n.c_N, 0.0};
    g.P_beta = beta > 0.0 ? Vec2{-o.xi2_beta * cb / sb, 0.0}
                          : Vec2{-std::numeric_limits<double>::infinity(), 0.0};

    const double half_chord = o.c_O * std::sqrt(std::max(0.0, 1.0 - o.M_O * o.M_O));
    const Vec2 p1 = g.xi_m - half_chord * Vec2{cb, sb};
    if (p1.y > 0.0) {
        g.topology = CornerTopology::SupersonicCorner;
        g.P1 = p1;
        g.P4 = {o.u_O - o.c_O, 0.0};
    } else {
        g.topology = CornerTopology::SonicPoint;
        g.P1 = g.P_beta;
        g.P4 = g.P_beta;
    }

    g.phi_inf = {0.0, -v_inf, 0.0, 1.0, 1.0};
    g.phi_O = {o.u_O, 0.0, -v_inf * o.xi2_beta, o.rho_O, o.c_O};
    g.phi_N = {0.0, 0.0, -v_inf * n.eta_N, n.rho_N, n.c_N};
    return g;
}

// At P_beta the flux difference D phi_inf - D phi_O is (v tan b, -v), and the
// oblique relation (rho_O - 1) q_O = v sec b removes the remaining explicit v.
// What is left is sin(b) times the first component of G_p; the scaling keeps
// the bracket well conditioned as b -> 0.
double scaled_detach_indicator(double gamma, double v_inf, double beta) {
    require_beta(beta, false);
    const ObliqueState o = oblique_state(gamma, v_inf, beta);
    const double s2 = std::sin(beta) * std::sin(beta);
    const double c2 = std::cos(beta) * std::cos(beta);
    const double m2 = o.M_O * o.M_O;
    return o.rho_O * ((1.0 - m2) * s2 - m2 * c2) - c2;
}

double detach_indicator(double gamma, double v_inf, double beta) {
    return scaled_detach_indicator(gamma, v_inf, beta) / std::sin(beta);
}

double beta_sonic(double gamma, double v_inf) {
    require_v_inf(v_inf);
    auto f = [&](double b) { return eta_O(gamma, v_inf, b); };
    return find_root(f, kAngleEdge, usable_upper_angle(f), "beta_sonic");
}

double beta_detach(double gamma, double v_inf) {
    require_v_inf(v_inf);
    auto f = [&](double b) { return scaled_detach_indicator(gamma, v_inf, b); };
    return find_root(f, kAngleEdge, usable_upper_angle(f), "beta_detach");
}

CriticalAngles critical_angles(double gamma, double v_inf) {
    using Key = std::pair<std::uint64_t, std::uint64_t>;
    static std::map<Key, CriticalAngles> memo;
    static std::shared_mutex mutex;
    const Key key{std::bit_cast<std::uint64_t>(gamma), std::bit_cast<std::uint64_t>(v_inf)};
    {
        std::shared_lock lock(mutex);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
    }
    const CriticalAngles value{beta_sonic(gamma, v_inf), beta_detach(gamma, v_inf)};
    std::unique_lock lock(mutex);
    return memo.emplace(key, value).first->second;
}

PhysicalParams map_RW_to_PW(double gamma, double v_inf, double beta) {
    require_v_inf(v_inf);
    require_beta(beta, false);
    const ObliqueState o = oblique_state(gamma, v_inf, beta);
    const double cot = 1.0 / std::tan(beta);
    const double a = o.xi2_beta * cot;
    const double t1 = std::hypot(v_inf, a);
    const double t2 = (a - v_inf * std::tan(beta)) * a / t1;
    return {t1, t2};
}

SelfSimParams map_PW_to_RW(double gamma, double u_inf, double u0) {
    require_gamma(gamma);
    const SteadyPolar polar(gamma, u_inf);
    const double u_n = polar.critical_points().u_hat0;
    if (!(u0 > u_n && u0 < u_inf)) {
        std::ostringstream os;
        os.precision(17);
        os << "u0 = " << u0 << " outside (" << u_n << ", " << u_inf << ")";
        throw DomainError(os.str());
    }
    const double f = polar.f_polar(u0);
    if (!(f > 0.0)) throw DomainError("u0 too close to u_inf: zero deflection");
    const double theta_w = std::atan(f / u0);
    // tan(beta) = tan(theta_shock - theta_w) with tan(theta_shock) = (u_inf - u0)/f.
    const double beta = std::atan2(u0 * (u_inf - u0) - f * f, u_inf * f);
    if (!(beta > 0.0 && beta < kHalfPi)) throw DomainError("shock angle outside (0, pi/2)");
    return {u_inf * std::sin(theta_w), beta};
}

double tangent_line_function(double gamma, double v_inf, double beta) {
    if (!(v_inf < 1.0)) throw DomainError("tangent line comparison needs v_inf < 1");
    const ConfigGeometry g = landmarks(gamma, v_inf, beta);
    if (g.topology != CornerTopology::SupersonicCorner) {
        throw DomainError("tangent line comparison needs beta < beta_s");
    }
    const double x2 = g.P2.x;
    const double a = v_inf + g.eta_N;
    const double disc = a * a - 1.0 + x2 * x2;
    if (disc < 0.0) throw NumericalFailure("tangent line: P2 inside the unit circle");
    const double tan_inf = (std::sqrt(disc) - a * x2) / (1.0 - x2 * x2);
    const double tan_O = (g.P2.y - g.P1.y) / (g.P2.x - g.P1.x);
    return tan_O - tan_inf;
}

LineClass tangent_line_classify(double gamma, double v_inf, double beta, double tol) {
    if (v_inf >= 1.0) return LineClass::Above;
    const double f = tangent_line_function(gamma, v_inf, beta);
    if (std::abs(f) <= tol) return LineClass::Tangent;
    return f < 0.0 ? LineClass::Above : LineClass::Below;
}

}  // namespace pmflow
