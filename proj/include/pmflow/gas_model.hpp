#pragma once

#include "pmflow/vec2.hpp"

namespace pmflow {

struct EnthalpySound {
    double h;   // specific enthalpy
    double c2;  // sound speed squared
};

// Polytropic closure normalised so that the reference state has rho = 1 and
// c = 1. The pseudo-Bernoulli constant is shared by the whole configuration,
// so it is stored here instead of being passed to every call.
class GasModel {
public:
    GasModel(double gamma, double bernoulli);

    double gamma() const { return gamma_; }
    double bernoulli() const { return bernoulli_; }
    bool isothermal() const { return isothermal_; }

    EnthalpySound enthalpy_and_sound(double rho) const;
    double enthalpy(double rho) const { return enthalpy_and_sound(rho).h; }

    // c^2 = 1 + (gamma-1)(B - speed2/2 - z); identically 1 when gamma = 1.
    // Throws VacuumError when the value is not positive.
    double sound_speed2(double speed2, double z) const;
    double density_from_bernoulli(double speed2, double z) const;
    double pseudo_mach(Vec2 grad, double z) const;

private:
    double gamma_;
    double bernoulli_;
    bool isothermal_;
};

}  // namespace pmflow
