#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pmflow/gas_model.hpp"
#include "pmflow/geometry_map.hpp"
#include "pmflow/selfsim_states.hpp"

namespace pmflow {

// Tensor grid on the closed strip [-1, 1] x [0, 1]. The s-nodes are graded
// toward both sonic ends by s = tanh(a sigma)/tanh(a) with sigma uniform
// (a = 0 is uniform). Near s = +-1 the cells grow geometrically by exp(2 a h),
// which resolves the thin layer where psi_xx settles to its sonic limit.
struct StripGrid {
    std::vector<double> s;
    std::vector<double> t;

    int ns() const { return static_cast<int>(s.size()) - 1; }
    int nt() const { return static_cast<int>(t.size()) - 1; }
    int index(int i, int j) const { return i * (nt() + 1) + j; }
    int size() const { return static_cast<int>(s.size() * t.size()); }
};
StripGrid make_grid(int ns, int nt, double grading);

struct SolutionField {
    double gamma = 1.4;
    SelfSimParams params;  // (v_inf, beta)
    StripGrid grid;
    std::vector<double> u;  // u(s_i, t_j) at grid.index(i, j)
    ShockGraph shock;       // t' = g(s) on the grid's s-nodes

    GasModel gas() const { return GasModel(gamma, 0.5 * params.v_inf * params.v_inf); }
    double at(int i, int j) const { return u[grid.index(i, j)]; }
};

struct SolveReport {
    bool converged = false;
    bool stalled = false;
    int iterations = 0;         // outer interior/shock alternations at the target angle
    int total_iterations = 0;   // summed over the continuation
    int newton_iterations = 0;  // summed over the continuation
    int continuation_steps = 0;
    double beta_reached = 0.0;
    double shock_move = 0.0;
    double residual = 0.0;
    double transversality = 0.0;  // smallest -d/dt'(w_inf - E w) at the last update
    int ellipticity_flags = 0;    // interior nodes with an indefinite coefficient matrix
    double wall_time = 0.0;
    std::string message;
    std::map<std::string, bool> admissibility;  // verify checks by name
};

struct SolverConfig {
    int ns = 128;  // intervals in s (129 nodes)
    int nt = 64;   // intervals in t (65 nodes)
    double tol_pde = 1e-9;
    double tol_shock = 1e-8;
    // Looser tolerances for intermediate continuation angles.
    double tol_pde_path = 1e-7;
    double tol_shock_path = 1e-5;
    double d_beta0 = 0.0;  // 0 selects beta_d / 64
    int max_halvings = 24;
    double min_d_beta = 1e-6;
    double beta_margin = 1e-6;
    int max_newton = 30;
    int max_outer = 200;
    double sonic_corner_refine = 4.0;  // grid grading toward s = +-1 (tanh strength, 0 = uniform)
    double mu0 = 0.1;                   // ellipticity cutoff margin
    bool run_verify = true;
};

// Ellipticity cutoff: identity on |q| <= (2 - mu0/5)/(1+gamma), constant
// beyond 2/(1+gamma), odd and C2.
double zeta1(double q, double gamma, double mu0);

// Which polar strip a node belongs to for the cutoff.
enum class StripSide { None, O, N };

// Everything the discrete operator needs that does not depend on u: node
// positions, metric derivatives, the cutoff data and phi_star.
class Discretization {
public:
    Discretization(const MappedDomain& dom, const StripGrid& grid, const ShockGraph& shock,
                   double mu0 = 0.1);

    const MappedDomain& domain() const { return dom_; }
    const StripGrid& grid() const { return grid_; }
    const ShockGraph& shock() const { return shock_; }
    Vec2 node(int i, int j) const { return X_[grid_.index(i, j)]; }
    StripSide strip(int i, int j) const { return strip_[grid_.index(i, j)]; }
    double mu0() const { return mu0_; }

    // Manufactured-solution hooks: forcing subtracted from interior rows and
    // Dirichlet data; by default zero data and the shock condition on top.
    std::vector<double> forcing;
    std::vector<double> dirichlet;
    bool shock_dirichlet = false;

    std::vector<double> residual(const std::vector<double>& u) const;
    double residual_row(int i, int j, const std::vector<double>& u) const;

    // Residual of the interior operator at a point from exact derivatives of
    // psi~ = phi - phi_N (used to build manufactured forcing).
    double interior_operator(int i, int j, double psi, Vec2 dpsi, double h11, double h12,
                             double h22) const;

    // Newton on u with everything else frozen.
    struct NewtonResult {
        std::vector<double> u;
        double residual = 0.0;
        int iterations = 0;
        bool converged = false;
        int ellipticity_flags = 0;
    };
    NewtonResult newton(std::vector<double> u, double tol, int max_iter) const;

    // Gradient and Hessian of psi~ = u + phi_star - phi_N at a node, by
    // differences of the nodal psi~. One-sided closures on the boundary.
    struct NodeDerivatives {
        Vec2 xi;
        double psi = 0.0;
        Vec2 dpsi;
        double h11 = 0.0, h12 = 0.0, h22 = 0.0;
        bool regular = true;  // false where the chart is singular (collapsed column)
    };
    NodeDerivatives derivatives(int i, int j, const std::vector<double>& u) const;

    int ellipticity_flags(const std::vector<double>& u) const;

private:
    struct Metric {
        Vec2 xs, xt, xss, xst, xtt;
        double det = 0.0;
    };
    template <class T>
    T row(int i, int j, const T (&w)[3][3]) const;
    int row_j0(int j) const;
    Metric metric_at(int i, int j, bool need_second) const;
    void init_row_scale();

    MappedDomain dom_;
    StripGrid grid_;
    ShockGraph shock_;
    double mu0_;
    double hs_, ht_;
    std::vector<Vec2> X_;
    std::vector<Metric> metric_;
    std::vector<PhiStar> star_;
    std::vector<double> K_;  // phi_star - phi_N at the nodes
    std::vector<StripSide> strip_;
    std::vector<double> scale_;  // inverse diagonal of the row Jacobian at u = 0
    struct Polar {
        Vec2 er;          // outward radial unit vector from the state's centre
        double x = 0.0;   // depth inside the sonic circle
        double c = 1.0;   // sound speed of the state
        Vec2 shift;       // gradient of (phi_state - phi_N)
    };
    std::vector<Polar> polar_;
};

SolutionField exact_normal_solution(double gamma, double v_inf, const SolverConfig& config = {});

// Discrete nonlinear operator for a fixed shock; one entry per node.
std::vector<double> assemble_interior(const SolutionField& field, const ShockGraph& shock,
                                      const SolverConfig& config = {});

// Shock condition with phi = phi_inf substituted into the position, from the
// gradient p and value z of psi~ = phi - phi_N at a point with first
// coordinate xi1.
double shock_bc_value(const ConfigGeometry& g, Vec2 p, double z, double xi1);
double shock_bc_residual(const SolutionField& field, const ShockGraph& shock, int i);

SolutionField solve_interior(const ShockGraph& shock, double beta, const SolutionField& init,
                             const SolverConfig& config = {}, SolveReport* report = nullptr);

struct ShockUpdate {
    ShockGraph shock;
    double move = 0.0;
    double margin = 0.0;  // smallest transversality margin over the columns
    bool clipped = false;
};
ShockUpdate update_shock(const SolutionField& field, const ShockGraph& shock,
                         double damping = 1.0);

// Progress callback: (beta, outer iteration, shock move, residual).
using ProgressFn = std::function<void(double, int, double, double)>;

struct FbpResult {
    SolutionField field;
    SolveReport report;
};
FbpResult solve_fbp(double gamma, double v_inf, double beta_target,
                    const SolverConfig& config = {}, const ProgressFn& progress = {});

struct PhysicalSample {
    int i = 0, j = 0;
    Vec2 xi;
    double phi = 0.0;
    Vec2 dphi;
    double rho = 1.0;
    double c = 1.0;
    double mach = 0.0;
    bool regular = true;
};
struct PhysicalSolution {
    std::vector<PhysicalSample> nodes;
    std::vector<Vec2> shock;  // xi-coordinates of the top row, left to right
};
PhysicalSolution reconstruct_phi(const SolutionField& field);

}  // namespace pmflow
