#include "pmflow/gas_model.hpp"

#include <cmath>
#include <sstream>

#include "pmflow/errors.hpp"

namespace pmflow {

GasModel::GasModel(double gamma, double bernoulli)
    : gamma_(gamma), bernoulli_(bernoulli), isothermal_(gamma == 1.0) {
    if (!(gamma >= 1.0) || !std::isfinite(gamma)) {
        throw DomainError("gamma must be a finite number >= 1");
    }
    if (!std::isfinite(bernoulli)) throw DomainError("Bernoulli constant must be finite");
}

EnthalpySound GasModel::enthalpy_and_sound(double rho) const {
    if (!(rho > 0.0) || !std::isfinite(rho)) {
        throw DomainError("density must be positive and finite");
    }
    if (isothermal_) return {std::log(rho), 1.0};
    const double gm1 = gamma_ - 1.0;
    // expm1 keeps h accurate for gamma close to one.
    const double h = std::expm1(gm1 * std::log(rho)) / gm1;
    return {h, std::pow(rho, gm1)};
}

double GasModel::sound_speed2(double speed2, double z) const {
    if (isothermal_) return 1.0;
    const double c2 = 1.0 + (gamma_ - 1.0) * (bernoulli_ - 0.5 * speed2 - z);
    if (!(c2 > 0.0)) {
        std::ostringstream os;
        os << "vacuum: 1 + (gamma-1)(B - |Dphi|^2/2 - phi) = " << c2;
        throw VacuumError(os.str());
    }
    return c2;
}

double GasModel::density_from_bernoulli(double speed2, double z) const {
    const double arg = bernoulli_ - 0.5 * speed2 - z;
    if (isothermal_) return std::exp(arg);
    const double gm1 = gamma_ - 1.0;
    const double base = 1.0 + gm1 * arg;
    if (!(base > 0.0)) {
        std::ostringstream os;
        os << "vacuum: Bernoulli argument " << base << " <= 0";
        throw VacuumError(os.str());
    }
    return std::exp(std::log1p(gm1 * arg) / gm1);
}

double GasModel::pseudo_mach(Vec2 grad, double z) const {
    const double q2 = norm2(grad);
    const double c2 = sound_speed2(q2, z);
    return std::sqrt(q2 / c2);
}

}  // namespace pmflow
