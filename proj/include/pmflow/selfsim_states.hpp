#pragma once

#include <string>

#include "pmflow/gas_model.hpp"
#include "pmflow/vec2.hpp"

namespace pmflow {

struct SelfSimParams {
    double v_inf = 0.0;
    double beta = 0.0;
};

// phi(xi) = -|xi|^2/2 + u xi1 + v xi2 + k.
struct UniformPseudoState {
    double u = 0.0;
    double v = 0.0;
    double k = 0.0;
    double rho = 1.0;
    double c = 1.0;

    Vec2 center() const { return {u, v}; }
    double phi(Vec2 xi) const { return -0.5 * norm2(xi) + u * xi.x + v * xi.y + k; }
    Vec2 grad(Vec2 xi) const { return Vec2{u, v} - xi; }
};

struct NormalState {
    double rho_N = 1.0;
    double eta_N = 1.0;
    double c_N = 1.0;
};

struct ObliqueState {
    double u_O = 0.0;
    double xi2_beta = 0.0;
    double rho_O = 1.0;
    double c_O = 1.0;
    double M_inf = 1.0;  // normal Mach number of the incoming flow at S0
    double M_O = 1.0;    // normal Mach number behind S0
    double q_O = 0.0;    // dist(O_O, S0) = M_O c_O
};

// supersonic-corner: a sonic arc of the O-state meets S0 above the wedge.
// sonic-point: the arc has shrunk to P_beta and the corner is not supersonic.
enum class CornerTopology { SupersonicCorner, SonicPoint };
std::string to_string(CornerTopology t);

struct ConfigGeometry {
    double gamma = 1.4;
    double v_inf = 0.0;
    double beta = 0.0;

    Vec2 O_inf, O_O, O_N;
    double c_O = 1.0, c_N = 1.0;
    double rho_O = 1.0, rho_N = 1.0;
    double u_O = 0.0;
    double xi2_beta = 0.0;
    double eta_N = 1.0;
    double M_inf = 1.0, M_O = 1.0;
    double q_O = 0.0;
    Vec2 xi_m;  // foot of the perpendicular from O_O (and O_inf) to S0
    Vec2 P1, P2, P3, P4, P_beta;
    CornerTopology topology = CornerTopology::SupersonicCorner;

    UniformPseudoState phi_inf, phi_O, phi_N;
};

NormalState normal_state(double gamma, double v_inf);
ObliqueState oblique_state(double gamma, double v_inf, double beta);
ConfigGeometry landmarks(double gamma, double v_inf, double beta);

// Height of the lower intersection of S0 with the sonic circle of the O-state;
// decreasing in beta, vanishes at beta_s.
double eta_O(double gamma, double v_inf, double beta);

// First component of the derivative in p of the shock functional for the
// O-state at P_beta; negative exactly on the weak range.
double detach_indicator(double gamma, double v_inf, double beta);
double scaled_detach_indicator(double gamma, double v_inf, double beta);

double beta_sonic(double gamma, double v_inf);
double beta_detach(double gamma, double v_inf);

struct CriticalAngles {
    double beta_s = 0.0;
    double beta_d = 0.0;
};
// Memoised pair (beta_s, beta_d); safe for concurrent callers.
CriticalAngles critical_angles(double gamma, double v_inf);

struct PhysicalParams {
    double u_inf = 0.0;
    double u0 = 0.0;
};

PhysicalParams map_RW_to_PW(double gamma, double v_inf, double beta);
SelfSimParams map_PW_to_RW(double gamma, double u_inf, double u0);

enum class LineClass { Above, Tangent, Below };
std::string to_string(LineClass c);

// tan(theta_O) - tan(theta_inf) for the line through O_O tangent to the sonic
// circle of the N-state, compared with the tangent from O_inf.
double tangent_line_function(double gamma, double v_inf, double beta);
LineClass tangent_line_classify(double gamma, double v_inf, double beta, double tol = 1e-12);

}  // namespace pmflow
