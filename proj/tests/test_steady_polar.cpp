#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pmflow/errors.hpp"
#include "pmflow/steady_polar.hpp"

using namespace pmflow;

namespace {

// Reference polar point built from the oracle jump; shares nothing with the
// library path beyond the algebra of the jump relations.
struct RefPoint {
    double u, v, rho;
};
RefPoint ref_point(double g, double uinf, double beta) {
    const double mn = uinf * std::cos(beta);
    const double mo = oracle::mach_out(g, mn);
    const double rho = std::pow(mn / mo, 2.0 / (g + 1.0));
    const double un = mo * std::pow(rho, 0.5 * (g - 1.0));
    const double ut = uinf * std::sin(beta);
    return {un * std::cos(beta) + ut * std::sin(beta), -un * std::sin(beta) + ut * std::cos(beta),
            rho};
}

}  // namespace

TEST_CASE("mach_jump") {
    CHECK(mach_jump(1.4, 1.0) == 1.0);
    CHECK(mach_jump(1.4, 2.0) == doctest::Approx(oracle::mach_out(1.4, 2.0)).epsilon(1e-12));
    CHECK(mach_jump(1.0, 2.0) == doctest::Approx(oracle::mach_out(1.0, 2.0)).epsilon(1e-12));
    CHECK(mach_jump(1.4, 2.1) < mach_jump(1.4, 2.0));
    // Potential-flow jump (mass and Bernoulli only), not the Euler table value.
    CHECK(mach_jump(1.4, 2.0) < 0.57735);
    CHECK(mach_jump(1.4, 1.0 + 1e-12) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(mach_jump(1.4, 0.0), DomainError);
    // Round trip through the subsonic branch.
    CHECK(mach_jump(1.4, mach_jump(1.4, 3.0)) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("polar points satisfy the jump conditions") {
    const SteadyPolar p(1.4, 2.0);
    const auto b0 = p.polar_point(0.0);
    CHECK(b0.v == 0.0);
    CHECK(b0.u == doctest::Approx(p.critical_points().u_hat0));
    CHECK(p.g_residual({b0.u, 0.0}) == doctest::Approx(0.0).epsilon(1e-12));

    const auto q = p.polar_point(0.3);
    const RefPoint r = ref_point(1.4, 2.0, 0.3);
    CHECK(q.u == doctest::Approx(r.u).epsilon(1e-11));
    CHECK(q.v == doctest::Approx(r.v).epsilon(1e-11));
    CHECK(q.rho == doctest::Approx(r.rho).epsilon(1e-11));

    double prev_rho = 1e300;
    for (int i = 0; i < 100; ++i) {
        const double b = p.beta_max() * (i + 0.5) / 100.0;
        const auto pt = p.polar_point(b);
        CHECK(std::abs(p.g_residual({pt.u, pt.v})) < 1e-10);
        CHECK(pt.rho > 1.0);
        CHECK(pt.rho < prev_rho);
        prev_rho = pt.rho;
        // tangential velocity is continuous across the shock
        CHECK(pt.u * std::sin(b) + pt.v * std::cos(b) == doctest::Approx(2.0 * std::sin(b)));
    }
    const auto near_max = p.polar_point(p.beta_max() * (1.0 - 1e-10));
    CHECK(near_max.u == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(std::abs(near_max.v) < 1e-4);
    CHECK_THROWS_AS(p.polar_point(-0.1), DomainError);
    CHECK_THROWS_AS(p.polar_point(p.beta_max() + 1e-3), DomainError);
}

TEST_CASE("g_residual errors and sign") {
    const SteadyPolar p(1.4, 2.0);
    CHECK_THROWS_AS(p.g_residual({2.0, 0.0}), SingularDirection);
    CHECK_THROWS_AS(p.g_residual({0.0, 10.0}), VacuumError);
    const double g = p.g_residual({1.0, 2.0});
    CHECK(g != 0.0);
    CHECK(std::isfinite(g));
}

TEST_CASE("f_polar and critical points against bisection oracles") {
    const double gam = 1.4, uinf = 2.0;
    const SteadyPolar p(gam, uinf);
    const auto& c = p.critical_points();

    const double bmax = std::acos(1.0 / uinf);
    // û0: the polar at beta = 0.
    CHECK(c.u_hat0 == doctest::Approx(ref_point(gam, uinf, 0.0).u).epsilon(1e-12));
    // u_s: intersection with the sonic circle.
    const double k0 = 2.0 * (gam - 1.0) / (gam + 1.0) * (0.5 * uinf * uinf + 1.0 / (gam - 1.0));
    const double bs = oracle::bisect(
        [&](double b) {
            const auto r = ref_point(gam, uinf, b);
            return r.u * r.u + r.v * r.v - k0;
        },
        1e-9, bmax - 1e-9);
    CHECK(c.u_s == doctest::Approx(ref_point(gam, uinf, bs).u).epsilon(1e-10));
    CHECK(c.u_s * c.u_s + std::pow(p.f_polar(c.u_s), 2) == doctest::Approx(k0).epsilon(1e-10));
    // u_d: maximal turning angle; locate by bisection on the discrete slope
    // of atan(v/u) in beta.
    auto angle = [&](double b) {
        const auto r = ref_point(gam, uinf, b);
        return std::atan2(r.v, r.u);
    };
    const double bd = oracle::bisect(
        [&](double b) { return angle(b + 1e-6) - angle(b - 1e-6); }, 1e-3, bmax - 1e-3);
    CHECK(c.u_d == doctest::Approx(ref_point(gam, uinf, bd).u).epsilon(1e-7));
    CHECK(c.theta_d == doctest::Approx(angle(bd)).epsilon(1e-10));

    CHECK(c.u_hat0 < c.u_d);
    CHECK(c.u_d < c.u_s);
    CHECK(c.u_s < uinf);
    CHECK(c.theta_s < c.theta_d);
    // u_d is where the ray from the origin is tangent: f = u f'.
    CHECK(p.f_polar(c.u_d) - c.u_d * p.f_polar_derivative(c.u_d) ==
          doctest::Approx(0.0).epsilon(1e-8));

    const SteadyPolar p2(gam, uinf + 1e-6);
    const auto& c2 = p2.critical_points();
    CHECK(std::abs(c2.u_d - c.u_d) <= 1e-4);
    CHECK(std::abs(c2.u_s - c.u_s) <= 1e-4);
    CHECK(std::abs(c2.theta_d - c.theta_d) <= 1e-4);
}

TEST_CASE("f_polar endpoints, concavity and consistency") {
    const SteadyPolar p(1.4, 2.0);
    const double u0 = p.critical_points().u_hat0;
    CHECK(p.f_polar(u0) == 0.0);
    CHECK(p.f_polar(2.0) == 0.0);
    CHECK_THROWS_AS(p.f_polar(u0 - 1e-3), DomainError);
    CHECK_THROWS_AS(p.f_polar(2.0 + 1e-3), DomainError);

    const double scale = 2.0 - u0;
    const int n = 200;
    const double h = scale / (n + 1);
    for (int i = 1; i < n; ++i) {
        const double u = u0 + h * (i + 1);
        const double d2 = p.f_polar(u + h) - 2.0 * p.f_polar(u) + p.f_polar(u - h);
        CHECK(d2 <= 1e-8 * scale);
    }
    for (double b : {0.1, 0.4, 0.8}) {
        const auto pt = p.polar_point(b);
        CHECK(p.f_polar(pt.u) == doctest::Approx(pt.v).epsilon(1e-9));
    }
}

TEST_CASE("isothermal polar") {
    const SteadyPolar p(1.0, 2.0);
    const auto& c = p.critical_points();
    CHECK(c.u_s * c.u_s + std::pow(p.f_polar(c.u_s), 2) == doctest::Approx(1.0).epsilon(1e-10));
    // rho u0 = u_inf and u0^2/2 + ln rho = u_inf^2/2 on the normal shock.
    const double u0 = c.u_hat0;
    CHECK(0.5 * u0 * u0 + std::log(2.0 / u0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(c.u_d < c.u_s);
}

TEST_CASE("classification") {
    const SteadyPolar p(1.4, 2.0);
    const auto& c = p.critical_points();
    CHECK(p.classify(0.5 * (c.u_d + 2.0)).kind == ParamClass::Weak);
    CHECK(p.classify(0.5 * (c.u_hat0 + c.u_d)).kind == ParamClass::Strong);
    CHECK(p.classify(c.u_d).kind == ParamClass::Detached);
    const auto s = p.classify(c.u_s);
    CHECK(s.kind == ParamClass::Weak);
    CHECK(s.sonic_boundary);
    CHECK_THROWS_AS(p.classify(c.u_hat0), DomainError);
    CHECK_THROWS_AS(p.classify(2.0), DomainError);
    CHECK_THROWS_AS(SteadyPolar(1.4, 1.0), DomainError);
}

TEST_CASE("adaptive sampling") {
    const SteadyPolar p(1.4, 2.0);
    const auto s = p.sample(256);
    REQUIRE(s.size() == 256);
    CHECK(s.front().u == doctest::Approx(p.critical_points().u_hat0));
    CHECK(s.back().u == 2.0);
    for (size_t i = 1; i < s.size(); ++i) CHECK(s[i].u > s[i - 1].u);
}
