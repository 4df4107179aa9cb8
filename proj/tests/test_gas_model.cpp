#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pmflow/errors.hpp"
#include "pmflow/gas_model.hpp"
#include "pmflow/selfsim_states.hpp"

using namespace pmflow;

TEST_CASE("enthalpy and sound speed closed forms") {
    for (double g : {1.0, 1.1, 1.4, 2.0, 3.0}) {
        CHECK(GasModel(g, 0.0).enthalpy(1.0) == doctest::Approx(0.0));
    }
    const auto e2 = GasModel(2.0, 0.0).enthalpy_and_sound(3.0);
    CHECK(e2.h == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(e2.c2 == doctest::Approx(3.0).epsilon(1e-15));
    const auto e1 = GasModel(1.0, 0.0).enthalpy_and_sound(std::exp(1.0));
    CHECK(e1.h == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(e1.c2 == 1.0);
    CHECK_THROWS_AS(GasModel(1.4, 0.0).enthalpy_and_sound(0.0), DomainError);
    CHECK_THROWS_AS(GasModel(1.4, 0.0).enthalpy_and_sound(-1.0), DomainError);
}

TEST_CASE("sound speed and monotone enthalpy over a density range") {
    for (double g : {1.0, 1.1, 1.4, 2.0, 3.0}) {
        const GasModel gas(g, 0.0);
        double prev = -1e300;
        for (int i = 0; i <= 90; ++i) {
            const double rho = 0.5 + 0.05 * i;
            const auto hs = gas.enthalpy_and_sound(rho);
            CHECK(hs.c2 == doctest::Approx(std::pow(rho, g - 1.0)).epsilon(1e-15));
            CHECK(hs.h > prev);
            prev = hs.h;
        }
    }
}

TEST_CASE("isothermal limit is continuous") {
    const GasModel near(1.0 + 1e-6, 0.0);
    for (int i = 0; i <= 45; ++i) {
        const double rho = 0.5 + 0.1 * i;
        CHECK(std::abs(near.enthalpy(rho) - std::log(rho)) <= 1e-4);
    }
}

TEST_CASE("density from the Bernoulli relation") {
    const GasModel g14(1.4, 0.125);
    CHECK(g14.density_from_bernoulli(0.2, 0.025) == doctest::Approx(1.0).epsilon(1e-15));
    // B - speed2/2 - z = 1/(gamma-1) = 1 at gamma = 2
    CHECK(GasModel(2.0, 1.5).density_from_bernoulli(1.0, 0.0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(GasModel(1.4, 0.0).density_from_bernoulli(0.0, 2.5 * (1.0 + 1e-12)), VacuumError);
    CHECK_THROWS_AS(GasModel(1.4, 0.0).density_from_bernoulli(0.0, 3.0), VacuumError);
    CHECK(GasModel(1.0, 0.5).density_from_bernoulli(0.0, -0.5) == doctest::Approx(std::exp(1.0)));

    for (double g : {1.0, 1.4, 2.0}) {
        const GasModel gas(g, 0.3);
        for (double s2 : {0.0, 0.1, 0.4}) {
            for (double z : {-0.2, 0.0, 0.1}) {
                const double rho = gas.density_from_bernoulli(s2, z);
                CHECK(gas.enthalpy(rho) + 0.5 * s2 + z == doctest::Approx(0.3).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("pseudo-Mach number") {
    const GasModel gas(1.4, 0.125);
    CHECK(gas.pseudo_mach({0.0, 0.0}, 0.0) == 0.0);
    // Incoming state on its sonic circle |xi - O_inf| = 1.
    const double v = 0.5;
    const Vec2 xi{0.6, -v + 0.8};
    const Vec2 grad{-xi.x, -xi.y - v};
    const double z = -0.5 * norm2(xi) - v * xi.y;
    CHECK(gas.pseudo_mach(grad, z) == doctest::Approx(1.0).epsilon(1e-13));

    const ConfigGeometry g = landmarks(1.4, v, 0.3);
    CHECK(gas.pseudo_mach(g.phi_N.grad(g.P2), g.phi_N.phi(g.P2)) ==
          doctest::Approx(1.0).epsilon(1e-12));
}
