#pragma once

#include <map>
#include <string>
#include <vector>

#include "pmflow/fbp_solver.hpp"

namespace pmflow {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string status;  // "pass", "fail", "skipped" or "inconclusive"
    double worst_margin = 0.0;
    Vec2 location;
    std::map<std::string, double> values;  // fitted constants and diagnostics
};

struct AdmissibilityReport {
    std::vector<CheckResult> checks;
    bool pass = false;

    const CheckResult* find(const std::string& name) const;
};

// Tolerances scale with the computational spacing h = max(2/ns, 1/nt).
struct VerifyConfig {
    double mono_factor = 5.0;    // tol_mono = 5 h^2
    double slope_factor = 5.0;   // tol_slope = 5 h
    double rh_factor = 10.0;     // tol_rh = 10 h^2
    double mu_min = 1e-3;
    double zeta_hat = 0.5;       // cap on the modified distance to the sonic arcs
    double reg_rel_tol = 0.05;   // relative tolerance on the sonic limit 1/(gamma+1)
    double strip_width = 0.1;    // depth of the near-sonic strips
    double bound_max = 20.0;     // largest accepted constant in the near-sonic bounds
};

double grid_spacing(const StripGrid& grid);

CheckResult check_entropy_rh(const SolutionField& f, const VerifyConfig& cfg = {});
CheckResult check_monotone_cone(const SolutionField& f, const VerifyConfig& cfg = {});
CheckResult check_ellipticity(const SolutionField& f, const VerifyConfig& cfg = {});
CheckResult check_shock_geometry(const SolutionField& f, const VerifyConfig& cfg = {});
CheckResult check_sonic_regularity(const SolutionField& f, const VerifyConfig& cfg = {});
CheckResult check_near_sonic_bounds(const SolutionField& f, const VerifyConfig& cfg = {});

// Runs every check concurrently; the verdict is the conjunction.
AdmissibilityReport verify_solution(const SolutionField& f, const VerifyConfig& cfg = {});

}  // namespace pmflow
