#pragma once

#include <functional>
#include <vector>

#include "pmflow/selfsim_states.hpp"
#include "pmflow/vec2.hpp"

namespace pmflow {

// Quintic smoothstep from 0 at x = a to 1 at x = b (a > b gives a falling
// profile). C2, slope at most 15/(8|b-a|).
struct Ramp {
    double value;
    double d1;
    double d2;
};
Ramp ramp(double x, double a, double b);

enum class SonicSide { O, N };

struct LocalXY {
    double x = 0.0;
    double y = 0.0;
};

// Shifted polar coordinates around the centre of the O- or N-state.
// N: (x, y) = (c_N - r, theta); O: (x, y) = (c_O - r, pi - theta).
LocalXY xy_local(const ConfigGeometry& g, Vec2 p, SonicSide side);
Vec2 xy_to_point(const ConfigGeometry& g, LocalXY q, SonicSide side);

// Constants of the coordinate pipeline that depend only on (gamma, v_inf):
// the shift delta0 of the shock lines bounding Q_beta and the cutoff scale k.
struct MappingConstants {
    double delta0 = 0.0;
    double k = 8.0;
};
MappingConstants mapping_constants(double gamma, double v_inf);

struct PhiStar {
    double value = 0.0;
    Vec2 grad;
    double h11 = 0.0, h12 = 0.0, h22 = 0.0;
};

class MappedDomain {
public:
    MappedDomain(double gamma, double v_inf, double beta);

    const ConfigGeometry& geometry() const { return geo_; }
    double k() const { return k_; }
    double delta0() const { return delta0_; }
    double c_hat_O() const { return c_hat_O_; }
    double x_beta() const { return x_beta_; }
    double s_beta() const { return s_beta_; }
    double u_O_delta0() const { return u_O_delta0_; }
    double xi1_I() const { return xi1_I_; }
    double xi1_chi_full() const { return xi1_chi_full_; }
    bool sonic_point() const { return geo_.topology == CornerTopology::SonicPoint; }

    // F1 = (h1, xi2) and F2 = (s, h2).
    double h1(Vec2 xi) const;
    double dh1_dxi1(Vec2 xi) const;  // closed-form sum a1 + a2 + a3
    double h2(double s, double t) const;
    double dh2_dt(double s, double t) const;
    Vec2 F1(Vec2 xi) const { return {h1(xi), xi.y}; }
    Vec2 F1_inverse(Vec2 st) const;
    Vec2 F2(Vec2 st) const { return {st.x, h2(st.x, st.y)}; }
    Vec2 F2_inverse(Vec2 sp_tp) const;

    Vec2 G1(Vec2 xi) const { return F2(F1(xi)); }
    Vec2 G1_inverse(Vec2 sp_tp) const { return F1_inverse(F2_inverse(sp_tp)); }

    double L(double s_prime) const;
    double L_inverse(double s) const;
    // (L(s'), t') and its inverse: the chart with s in [-1, 1].
    Vec2 to_strip(Vec2 xi) const;
    Vec2 from_strip(Vec2 s_tp) const;

    // Height in t' of the upper boundary of the image of Q_beta.
    double f_beta(double s) const;
    bool in_Q_beta(Vec2 xi) const;

    // Pinned endpoint values and slopes of the shock graph in the chart.
    double g_left() const { return g_left_; }
    double g_right() const { return g_right_; }
    double dg_left() const { return dg_left_; }
    double dg_right() const { return dg_right_; }

    // y-coordinate of S0 (O side) or S1 (N side) as a function of x.
    double shock_line_y(SonicSide side, double x) const;
    double shock_line_dy(SonicSide side, double x) const;

    double chi_star(double xi1) const;
    PhiStar phi_star(Vec2 xi) const;

    // Far-field potential minus phi_star, used by the shock update.
    double w_inf(Vec2 xi) const;

private:
    double r_O(Vec2 xi) const;
    double r_N(Vec2 xi) const;
    double t_max(double s) const;

    ConfigGeometry geo_;
    double k_ = 8.0;
    double delta0_ = 0.0;
    double c_hat_O_ = 1.0;
    double x_beta_ = 0.0;
    double s_beta_ = 0.0;
    double q_O_delta0_ = 0.0;
    double u_O_delta0_ = 0.0;
    double xi1_I_ = 0.0;
    double xi1_chi_full_ = 0.0;  // chi_star = 1 left of this
    double g_left_ = 0.0, g_right_ = 0.0, dg_left_ = 0.0, dg_right_ = 0.0;
};

// Shock graph t' = g(s) sampled on an increasing grid of [-1, 1] (uniform
// unless nodes are given), evaluated by a clamped cubic spline that carries
// the pinned endpoint slopes.
class ShockGraph {
public:
    ShockGraph() = default;
    ShockGraph(std::vector<double> values, double slope_left, double slope_right);
    ShockGraph(std::vector<double> nodes, std::vector<double> values, double slope_left,
               double slope_right);

    int intervals() const { return static_cast<int>(values_.size()) - 1; }
    double node(int i) const { return nodes_[i]; }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& values() const { return values_; }
    double value(int i) const { return values_[i]; }
    double slope_left() const { return slope_left_; }
    double slope_right() const { return slope_right_; }

    double operator()(double s) const;
    double derivative(double s) const;
    double lipschitz() const;

    // The growth cone with parameter n3: bounds from below by the slow
    // growth off g(-1), from above by fast growth and by f_beta - 1/n3.
    bool in_growth_cone(const MappedDomain& dom, double n3, double* worst = nullptr) const;

private:
    void build();
    int interval_of(double s) const;

    std::vector<double> nodes_;
    std::vector<double> values_;
    std::vector<double> m_;  // spline second derivatives
    double slope_left_ = 0.0;
    double slope_right_ = 0.0;
};

// Shock graph of the domain's own shock lines (S0 near the O side, S1 near
// the N side): the image of {phi_inf = max(phi_O, phi_N)}.
ShockGraph reference_shock(const MappedDomain& dom, int intervals);
ShockGraph reference_shock(const MappedDomain& dom, const std::vector<double>& nodes);
// Image of the straight normal shock xi2 = eta_N.
ShockGraph flat_shock(const MappedDomain& dom, int intervals);
ShockGraph flat_shock(const MappedDomain& dom, const std::vector<double>& nodes);

// Regularized distance from a point (s, t') above the graph to the graph.
double regularized_distance(const ShockGraph& g, Vec2 p);
double polyline_distance(const ShockGraph& g, Vec2 p);

// Kernel supported in [1, 2] with unit mass and vanishing first and second
// moments.
double extension_kernel(double lambda);
struct KernelQuadrature {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const KernelQuadrature& extension_quadrature();

struct ExtensionSettings {
    double kappa = 0.25;
    double c_star = 0.0;  // 0 selects the smallest admissible value for g
};

struct ExtensionProbe {
    double value = 0.0;
    bool admissible = true;  // every sample stayed inside the closed domain
};

// Extension across the graph: v itself below g, the reflected kernel
// average above it.
ExtensionProbe extend_value(const std::function<double(double, double)>& v, const ShockGraph& g,
                            double s, double tp, const ExtensionSettings& settings = {});
std::vector<double> extend_field(const std::function<double(double, double)>& v,
                                 const ShockGraph& g, const std::vector<Vec2>& points,
                                 const ExtensionSettings& settings = {});
// Largest kappa for which the extension of g stays inside {t' >= 0}.
double kappa_bound(const ShockGraph& g, const ExtensionSettings& settings = {});

}  // namespace pmflow
