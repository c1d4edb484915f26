#pragma once

#include "disorder/model.hpp"

#include <utility>
#include <vector>

namespace disorder {

struct CoeffPair {
    double c0 = 0.0; // multiplies the decreasing solution (Q_0 / G_00)
    double c1 = 0.0; // multiplies the increasing solution (Q_1 / G_11)
};

// Solve the 2x2 value/slope matching system at a single point x, with the
// obstacle piece R_0/S_0 (lower boundary) or R_1/S_1 (upper boundary).
// Direct elimination; the printed closed-form quotients are never used.
CoeffPair coeffs_at_lower(const Model& m, Formulation form, double x);
CoeffPair coeffs_at_upper(const Model& m, Formulation form, double x);

// Interior bounds bracketing the optimal thresholds. F1 is closed form; F2
// solves the coupled bound equations, falling back to 1/2 when they have no
// solution, then applies the min/max composition.
std::pair<double, double> admissible_bounds(const Model& m, Formulation form);

struct AdmissibilityReport {
    bool pass = false;
    double slack_lower = 0.0; // a + V1'(bar_lower) - V0'(bar_lower), > 0 required
    double slack_upper = 0.0; // V1'(bar_upper) + b - V0'(bar_upper), > 0 required
    double bar_lower = 0.0;
    double bar_upper = 0.0;
};

AdmissibilityReport check_admissibility(const Model& m, Formulation form);

struct FitResiduals {
    double match_c0 = 0.0;      // coefficient matching for the decreasing branch
    double match_c1 = 0.0;      // coefficient matching for the increasing branch
    double instop_lower = 0.0;  // value matching at the lower threshold
    double instop_upper = 0.0;  // value matching at the upper threshold
    double smooth_lower = 0.0;  // slope matching at the lower threshold
    double smooth_upper = 0.0;  // slope matching at the upper threshold
};

struct ThresholdSolution {
    Formulation formulation = Formulation::F1;
    double lower = 0.0;       // g* or p*
    double upper = 0.0;       // h* or q*
    double coeff_lower = 0.0; // coefficient of Q_0/G_00 in the phase-0 value
    double coeff_upper = 0.0; // coefficient of Q_1/G_11 in the phase-1 value
    double bar_lower = 0.0;
    double bar_upper = 0.0;
    FitResiduals residuals;
    bool admissible = false;
};

// Solve the coupled matching system for (lower, upper). Checks admissibility
// first (throws Inadmissible), then runs the nested root find (throws
// NoSolution with the residual sign pattern when no bracket exists).
ThresholdSolution solve_boundaries(const Model& m, Formulation form);

struct VariationalReport {
    double min_gap_lower = 0.0;     // obstacle gap on the continuation side of lower
    double min_gap_upper = 0.0;     // obstacle gap on the continuation side of upper
    double min_gen_lower = 0.0;     // generator slack in the stopping region below lower
    double min_gen_upper = 0.0;     // generator slack in the stopping region above upper
    double max_boundary_gap = 0.0;  // |obstacle gap| at the two thresholds
    std::vector<double> violations; // grid points where a strict inequality failed
    bool pass = false;
};

// Grid check of the strict variational inequalities on [1e-4, 1-1e-4].
// Throws VerificationFailure listing violating points unless throw_on_violation
// is false, in which case the report carries them.
VariationalReport verify_variational(const Model& m, const ThresholdSolution& sol, int grid_n,
                                     bool throw_on_violation = true);

// Piecewise Bayesian risk of phase i at belief pi (clamped to the evaluation
// window at the endpoints).
double bayes_risk(const Model& m, const ThresholdSolution& sol, int i, double pi);

// Pointwise minimum over the two phases.
double minimal_risk(const Model& m, const ThresholdSolution& sol, double pi);

// Candidate value function of the given formulation (Q-based for F1,
// G-based for F2) with an explicit coefficient.
Jet2 candidate_jet(const Model& m, Formulation form, int i, double pi, double coeff);

} // namespace disorder
