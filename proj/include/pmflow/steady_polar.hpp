#pragma once

#include <string>
#include <vector>

#include "pmflow/gas_model.hpp"
#include "pmflow/vec2.hpp"

namespace pmflow {

// Monotone transform of the normal-shock invariant
//   (M^2 + 2/(gamma-1)) M^(-2(gamma-1)/(gamma+1)),
// scaled so that it stays well conditioned as gamma -> 1, where it becomes
// M^2 - 2 ln M. Minimal at M = 1.
double normal_jump_invariant(double gamma, double mach);
double normal_jump_invariant_derivative(double gamma, double mach);

// Normal Mach number on the other side of a normal shock: the nontrivial
// root of invariant(M_out) = invariant(M_in). M_in = 1 maps to 1.
double mach_jump(double gamma, double mach_in);

struct PolarPoint {
    double u = 0.0;
    double v = 0.0;
    double rho = 1.0;
    double beta = 0.0;  // angle of the shock normal from the incoming direction
};

struct PolarDerivative {
    double du = 0.0;  // d u / d beta
    double dv = 0.0;  // d v / d beta
};

struct CriticalPoints {
    double u_hat0 = 0.0;
    double u_d = 0.0;
    double u_s = 0.0;
    double theta_d = 0.0;
    double theta_s = 0.0;
    double beta_d = 0.0;  // polar parameter at the detachment point
    double beta_s = 0.0;  // polar parameter at the sonic point
};

enum class ParamClass { Weak, SonicBoundary, Strong, Detached };

struct ParamClassification {
    ParamClass kind = ParamClass::Weak;
    bool sonic_boundary = false;  // |u0 - u_s| below tolerance
};

std::string to_string(ParamClass c);

// Steady potential-flow shock polar for the incoming state rho = 1, (u_inf, 0)
// with c_inf = 1.
class SteadyPolar {
public:
    static constexpr double kClassifyTol = 1e-10;

    SteadyPolar(double gamma, double u_inf);

    double gamma() const { return gas_.gamma(); }
    double u_inf() const { return u_inf_; }
    double m_inf() const { return u_inf_; }
    double beta_max() const { return beta_max_; }
    const GasModel& gas() const { return gas_; }

    double g_residual(Vec2 u) const;
    PolarPoint polar_point(double beta) const;
    PolarDerivative polar_derivative(double beta) const;

    // Inverse of the monotone map beta -> u along the polar.
    double beta_of_u(double u) const;
    double f_polar(double u) const;
    double f_polar_derivative(double u) const;

    const CriticalPoints& critical_points() const { return crit_; }
    ParamClassification classify(double u0) const;

    // Samples ordered by increasing u from (u_hat0, 0) to (u_inf, 0), placed
    // by equidistributing arc length weighted with curvature.
    std::vector<PolarPoint> sample(int n) const;

private:
    void compute_critical_points();

    GasModel gas_;
    double u_inf_;
    double beta_max_;
    CriticalPoints crit_;
};

}  // namespace pmflow
