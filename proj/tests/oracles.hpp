#pragma once

// Independent reference computations for the tests. Everything here is plain
// bisection or direct evaluation so that it shares no code path with the
// library beyond the C++ standard library.

#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracle {

inline double bisect(const std::function<double(double)>& f, double a, double b, int iters = 200) {
    double fa = f(a);
    const double fb = f(b);
    if ((fa > 0) == (fb > 0)) throw std::runtime_error("oracle bisect: no sign change");
    for (int i = 0; i < iters; ++i) {
        const double m = 0.5 * (a + b);
        if (m == a || m == b) break;
        const double fm = f(m);
        if ((fm > 0) == (fa > 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

// (M^2 + 2/(g-1)) M^(-2(g-1)/(g+1)) compared through logarithms.
inline double log_invariant(double g, double m) {
    if (g == 1.0) return m * m - 2.0 * std::log(m);
    return std::log(m * m + 2.0 / (g - 1.0)) - 2.0 * (g - 1.0) / (g + 1.0) * std::log(m);
}

inline double mach_out(double g, double m_in) {
    if (std::abs(m_in - 1.0) < 1e-7) return 2.0 - m_in;  // symmetric to leading order
    const double t = log_invariant(g, m_in);
    return bisect([&](double m) { return log_invariant(g, m) - t; }, 1e-300, 1.0 - 1e-15);
}

inline double enthalpy(double g, double rho) {
    return g == 1.0 ? std::log(rho) : (std::pow(rho, g - 1.0) - 1.0) / (g - 1.0);
}

struct Normal {
    double rho, eta, c;
};

inline Normal normal(double g, double v) {
    const double rho = bisect(
        [&](double r) { return enthalpy(g, r) * (r - 1.0) - 0.5 * v * v * (r - 1.0) - v * v; },
        1.0, 1.0 + 1e3);
    return {rho, v / (rho - 1.0), std::pow(rho, 0.5 * (g - 1.0))};
}

struct Oblique {
    double M_inf, M_O, rho_O, c_O, xi2, u_O;
};

// Outer bisection on q_inf - q_O = v sec(beta) with the inner jump solved by
// its own bisection.
inline Oblique oblique(double g, double v, double beta) {
    auto qO = [&](double m) {
        const double mo = mach_out(g, m);
        return std::pow(mo, 2.0 / (g + 1.0)) * std::pow(m, (g - 1.0) / (g + 1.0));
    };
    const double rhs = v / std::cos(beta);
    const double m = bisect([&](double mm) { return mm - qO(mm) - rhs; }, 1.0 + 1e-6, 20.0);
    const double mo = mach_out(g, m);
    const double rho = std::pow(m / mo, 2.0 / (g + 1.0));
    return {m, mo, rho, std::pow(rho, 0.5 * (g - 1.0)), m / std::cos(beta) - v,
            -v * std::tan(beta)};
}

}  // namespace oracle
