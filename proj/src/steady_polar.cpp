#include "pmflow/steady_polar.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pmflow/errors.hpp"
#include "pmflow/roots.hpp"

namespace pmflow {

double normal_jump_invariant(double gamma, double mach) {
    if (!(mach > 0.0)) throw DomainError("Mach number must be positive");
    if (gamma == 1.0) return mach * mach - 2.0 * std::log(mach);
    const double gm1 = gamma - 1.0;
    return std::log1p(0.5 * gm1 * mach * mach) / (0.5 * gm1) -
           4.0 / (gamma + 1.0) * std::log(mach);
}

double normal_jump_invariant_derivative(double gamma, double mach) {
    const double m2 = mach * mach;
    return 2.0 * mach / (1.0 + 0.5 * (gamma - 1.0) * m2) - 4.0 / ((gamma + 1.0) * mach);
}

double mach_jump(double gamma, double mach_in) {
    if (!(mach_in > 0.0) || !std::isfinite(mach_in)) {
        throw DomainError("mach_jump: input Mach number must be positive");
    }
    if (mach_in == 1.0) return 1.0;
    const double target = normal_jump_invariant(gamma, mach_in);
    auto f = [&](double m) { return normal_jump_invariant(gamma, m) - target; };
    // Within rounding of M = 1 the invariant is flat; the two branches are
    // mirror images there to leading order.
    if (f(1.0) >= 0.0) return 2.0 - mach_in;
    if (mach_in > 1.0) {
        double lo = 0.5;
        while (f(lo) <= 0.0) {
            lo *= 0.5;
            if (lo < 1e-300) throw NumericalFailure("mach_jump: lower bracket underflow");
        }
        return find_root(f, lo, 1.0, "mach_jump");
    }
    double hi = 2.0;
    while (f(hi) <= 0.0) {
        hi *= 2.0;
        if (hi > 1e300) throw NumericalFailure("mach_jump: upper bracket overflow");
    }
    return find_root(f, 1.0, hi, "mach_jump");
}

std::string to_string(ParamClass c) {
    switch (c) {
        case ParamClass::Weak: return "weak";
        case ParamClass::SonicBoundary: return "sonic-boundary";
        case ParamClass::Strong: return "strong";
        case ParamClass::Detached: return "detached";
    }
    return "unknown";
}

SteadyPolar::SteadyPolar(double gamma, double u_inf)
    : gas_(gamma, 0.5 * u_inf * u_inf), u_inf_(u_inf) {
    if (!(u_inf > 1.0) || !std::isfinite(u_inf)) {
        throw DomainError("steady polar requires a supersonic incoming speed u_inf > 1");
    }
    beta_max_ = std::acos(1.0 / u_inf);
    compute_critical_points();
}

double SteadyPolar::g_residual(Vec2 u) const {
    const Vec2 uinf{u_inf_, 0.0};
    const Vec2 d = uinf - u;
    const double nd = norm(d);
    if (!(nd > 1e-14 * u_inf_)) {
        throw SingularDirection("g_residual: u coincides with the incoming velocity");
    }
    const double rho = gas_.density_from_bernoulli(norm2(u), 0.0);
    return dot(rho * u - uinf, d) / nd;
}

PolarPoint SteadyPolar::polar_point(double beta) const {
    if (!(beta >= 0.0) || beta > beta_max_) {
        std::ostringstream os;
        os << "polar_point: beta = " << beta << " outside [0, " << beta_max_ << "]";
        throw DomainError(os.str());
    }
    if (beta == beta_max_) return {u_inf_, 0.0, 1.0, beta};
    const double g = gas_.gamma();
    const double cb = std::cos(beta), sb = std::sin(beta);
    const double mn_in = u_inf_ * cb;
    const double mn = mach_jump(g, mn_in);
    const double rho = std::pow(mn_in / mn, 2.0 / (g + 1.0));
    const double un = mn * std::pow(rho, 0.5 * (g - 1.0));
    const double ut = u_inf_ * sb;
    return {un * cb + ut * sb, -un * sb + ut * cb, rho, beta};
}

PolarDerivative SteadyPolar::polar_derivative(double beta) const {
    const double g = gas_.gamma();
    const double cb = std::cos(beta), sb = std::sin(beta);
    const double a = u_inf_ * cb;
    const double da = -u_inf_ * sb;
    const double m = mach_jump(g, a);
    double dm;
    if (std::abs(a - 1.0) < 1e-7) {
        dm = -da;  // the two branches of the invariant are mirror images at M = 1
    } else {
        dm = normal_jump_invariant_derivative(g, a) * da / normal_jump_invariant_derivative(g, m);
    }
    const double rho = std::pow(a / m, 2.0 / (g + 1.0));
    const double drho = rho * (2.0 / (g + 1.0)) * (da / a - dm / m);
    const double un = m * std::pow(rho, 0.5 * (g - 1.0));
    const double dun = un * (dm / m + 0.5 * (g - 1.0) * drho / rho);
    const double ut = u_inf_ * sb;
    const double dut = u_inf_ * cb;
    return {dun * cb - un * sb + dut * sb + ut * cb, -dun * sb - un * cb + dut * cb - ut * sb};
}

double SteadyPolar::beta_of_u(double u) const {
    const double u0 = crit_.u_hat0;
    if (u < u0 || u > u_inf_) {
        std::ostringstream os;
        os.precision(17);
        os << "f_polar: u = " << u << " outside [" << u0 << ", " << u_inf_ << "]";
        throw DomainError(os.str());
    }
    if (u == u0) return 0.0;
    if (u == u_inf_) return beta_max_;
    return find_root([&](double b) { return polar_point(b).u - u; }, 0.0, beta_max_,
                     "beta_of_u");
}

double SteadyPolar::f_polar(double u) const {
    if (u == crit_.u_hat0 || u == u_inf_) {
        beta_of_u(u);  // range check only
        return 0.0;
    }
    return polar_point(beta_of_u(u)).v;
}

double SteadyPolar::f_polar_derivative(double u) const {
    const PolarDerivative d = polar_derivative(beta_of_u(u));
    return d.dv / d.du;
}

void SteadyPolar::compute_critical_points() {
    crit_.u_hat0 = polar_point(0.0).u;
    const double b_hi = beta_max_ * (1.0 - 1e-9);

    // Detachment: the ray from the origin is tangent to the polar, i.e. the
    // polar angle atan(v/u) is stationary along the curve.
    auto tangency = [&](double b) {
        const PolarPoint p = polar_point(b);
        const PolarDerivative d = polar_derivative(b);
        return d.dv * p.u - d.du * p.v;
    };
    crit_.beta_d = find_root(tangency, 1e-12, b_hi, "detachment point");
    const PolarPoint pd = polar_point(crit_.beta_d);
    crit_.u_d = pd.u;
    crit_.theta_d = std::atan2(pd.v, pd.u);

    // Sonic point: |u|^2 = c^2 with steady Bernoulli, which reduces to
    // |u|^2 = (2 + (gamma-1) u_inf^2) / (gamma+1).
    const double g = gas_.gamma();
    const double k0 = (2.0 + (g - 1.0) * u_inf_ * u_inf_) / (g + 1.0);
    auto sonic = [&](double b) {
        const PolarPoint p = polar_point(b);
        return p.u * p.u + p.v * p.v - k0;
    };
    crit_.beta_s = find_root(sonic, 0.0, b_hi, "sonic point");
    const PolarPoint ps = polar_point(crit_.beta_s);
    crit_.u_s = ps.u;
    crit_.theta_s = std::atan2(ps.v, ps.u);
}

ParamClassification SteadyPolar::classify(double u0) const {
    if (!(u0 > crit_.u_hat0 && u0 < u_inf_)) {
        throw DomainError("classify_params: u0 must lie strictly between u_hat0 and u_inf");
    }
    ParamClassification out;
    if (std::abs(u0 - crit_.u_d) < kClassifyTol) {
        out.kind = ParamClass::Detached;
    } else {
        out.kind = u0 > crit_.u_d ? ParamClass::Weak : ParamClass::Strong;
    }
    out.sonic_boundary = std::abs(u0 - crit_.u_s) < kClassifyTol;
    return out;
}

std::vector<PolarPoint> SteadyPolar::sample(int n) const {
    if (n < 2) throw DomainError("polar sampling needs at least two samples");
    // Fine reference grid in beta, then equidistribute a monitor combining
    // arc length and turning angle so that the curved parts get more points.
    const int m = std::max(4096, 16 * n);
    std::vector<PolarPoint> ref(m + 1);
    for (int i = 0; i <= m; ++i) ref[i] = polar_point(beta_max_ * i / m);
    ref[m] = {u_inf_, 0.0, 1.0, beta_max_};
    const double scale = u_inf_ - crit_.u_hat0;
    std::vector<double> cum(m + 1, 0.0);
    for (int i = 1; i <= m; ++i) {
        const double ds = std::hypot(ref[i].u - ref[i - 1].u, ref[i].v - ref[i - 1].v);
        double turn = 0.0;
        if (i >= 2) {
            const Vec2 a{ref[i - 1].u - ref[i - 2].u, ref[i - 1].v - ref[i - 2].v};
            const Vec2 b{ref[i].u - ref[i - 1].u, ref[i].v - ref[i - 1].v};
            turn = std::abs(std::atan2(cross(a, b), dot(a, b)));
        }
        cum[i] = cum[i - 1] + ds / scale + turn / 3.141592653589793;
    }
    std::vector<PolarPoint> out;
    out.reserve(n);
    out.push_back(polar_point(0.0));
    for (int k = 1; k < n - 1; ++k) {
        const double target = cum[m] * k / (n - 1);
        const auto it = std::lower_bound(cum.begin(), cum.end(), target);
        const int i = std::clamp(static_cast<int>(it - cum.begin()), 1, m);
        const double w = (target - cum[i - 1]) / (cum[i] - cum[i - 1]);
        const double b = ref[i - 1].beta + w * (ref[i].beta - ref[i - 1].beta);
        out.push_back(polar_point(b));
    }
    out.push_back({u_inf_, 0.0, 1.0, beta_max_});
    return out;
}

}  // namespace pmflow
