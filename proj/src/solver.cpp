#include "disorder/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>

namespace disorder {

namespace {

// classic Brent root finder; fa, fb must have opposite signs
double brent(const std::function<double(double)>& f, double a, double b, double fa, double fb,
             double xtol, int max_iter = 200) {
    double c = a, fc = fa, d = b - a, e = d;
    for (int it = 0; it < max_iter; ++it) {
        if (std::fabs(fc) < std::fabs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol1 = 2.0 * 1e-16 * std::fabs(b) + 0.5 * xtol;
        const double xm = 0.5 * (c - b);
        if (std::fabs(xm) <= tol1 || fb == 0.0) return b;
        if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
            double p, q, r;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                q = fa / fc;
                r = fb / fc;
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
                q = (q - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::fabs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::fabs(tol1 * q), std::fabs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += (std::fabs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
        if ((fb > 0) == (fc > 0)) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        fb = f(b);
    }
    return b;
}

Jet2 branch_jet(const Model& m, Formulation form, int i, double pi) {
    return form == Formulation::F1 ? m.q_jet(i, pi) : m.g_jet(i, i, pi);
}

CoeffPair solve_matching(const Model& m, Formulation form, int which, double x) {
    if (!(x > kPiLo * (1.0 - 1e-9) && x < kPiHi * (1.0 + 1e-9)))
        throw DomainError("coeffs: x outside the evaluation window");
    const Jet2 k0 = branch_jet(m, form, 0, x);
    const Jet2 k1 = branch_jet(m, form, 1, x);
    const double rv = form == Formulation::F1 ? m.r_fn(which, x) : m.s_fn(which, x);
    const double rd = form == Formulation::F1 ? m.r_fn_deriv(which) : m.s_fn_deriv(which);
    // c1 K1 - c0 K0 = R ; c1 K1' - c0 K0' = R'
    const double det = k1.f * k0.df - k1.df * k0.f;
    const double scale = std::fabs(k1.f * k0.df) + std::fabs(k1.df * k0.f);
    if (std::fabs(det) < 1e-14 * std::max(1.0, scale)) {
        std::ostringstream os;
        os << "coeffs: fundamental-solution system is singular at x = " << x;
        throw SingularSystem(os.str());
    }
    CoeffPair out;
    out.c0 = (rv * k1.df - rd * k1.f) / det;
    out.c1 = (rv * k0.df - rd * k0.f) / det;
    return out;
}

} // namespace

CoeffPair coeffs_at_lower(const Model& m, Formulation form, double x) {
    return solve_matching(m, form, 0, x);
}

CoeffPair coeffs_at_upper(const Model& m, Formulation form, double x) {
    return solve_matching(m, form, 1, x);
}

Jet2 candidate_jet(const Model& m, Formulation form, int i, double pi, double coeff) {
    return form == Formulation::F1 ? m.value_v_jet(i, pi, coeff) : m.value_u_jet(i, pi, coeff);
}

namespace {

struct Bracket {
    double lo, hi, flo, fhi;
};

// scans may probe points where the fundamental solutions overflow or a series
// stalls; such points are treated as undefined rather than fatal
double guarded_eval(const std::function<double(double)>& f, double x) {
    try {
        return f(x);
    } catch (const Error&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

std::vector<Bracket> scan_brackets(const std::function<double(double)>& f, double lo, double hi,
                                   int n) {
    std::vector<Bracket> out;
    double xprev = lo, fprev = guarded_eval(f, lo);
    for (int k = 1; k <= n; ++k) {
        const double x = lo + (hi - lo) * k / n;
        const double fx = guarded_eval(f, x);
        if (std::isfinite(fprev) && std::isfinite(fx) && (fprev <= 0.0) != (fx <= 0.0))
            out.push_back({xprev, x, fprev, fx});
        xprev = x;
        fprev = fx;
    }
    return out;
}

// F2 bound equations; solved for (p_hat, q_hat) when a solution exists.
// E1(p,q) = (2 + a(l+r)) p - r/(l+r) + l D11(q) G11'(p)
// E2(p,q) = (2 + b(l+r)) (1-q) - r/(l+r) - l D00(p) G00'(q)
std::pair<double, double> f2_hat_bounds(const Model& m) {
    const double lam = m.params().lambda, r = m.params().r;
    const double a = m.params().a, b = m.params().b;
    const double margin = 1e-3;

    auto e2_root_q = [&](double p) -> std::optional<double> {
        const double d00 = coeffs_at_lower(m, Formulation::F2, p).c0;
        auto e2 = [&](double q) {
            return (2.0 + b * (lam + r)) * (1.0 - q) - r / (lam + r) -
                   lam * d00 * m.g_jet(0, 0, q).df;
        };
        const auto brs = scan_brackets(e2, 0.5 + margin, kPiHi, 40);
        if (brs.empty()) return std::nullopt;
        const auto& br = brs.front();
        return brent(e2, br.lo, br.hi, br.flo, br.fhi, 1e-13);
    };

    auto e1 = [&](double p) -> double {
        const auto q = e2_root_q(p);
        if (!q) return std::numeric_limits<double>::quiet_NaN();
        const double d11 = coeffs_at_upper(m, Formulation::F2, *q).c1;
        return (2.0 + a * (lam + r)) * p - r / (lam + r) + lam * d11 * m.g_jet(1, 1, p).df;
    };

    const auto brs = scan_brackets(e1, kPiLo, 0.5 - margin, 40);
    if (brs.empty()) return {0.5, 0.5}; // no solution: hat pair degenerates to 1/2
    const auto& br = brs.front();
    const double p_hat = brent(e1, br.lo, br.hi, br.flo, br.fhi, 1e-13);
    const auto q_hat = e2_root_q(p_hat);
    if (!q_hat) return {0.5, 0.5};
    return {p_hat, *q_hat};
}

} // namespace

std::pair<double, double> admissible_bounds(const Model& m, Formulation form) {
    const double lam = m.params().lambda, r = m.params().r;
    const double a = m.params().a, b = m.params().b;
    if (form == Formulation::F1) {
        const double bar_g = (1.0 + lam * a) / (2.0 + a * (2.0 * lam + r));
        const double bar_h = (1.0 + b * (lam + r)) / (2.0 + b * (2.0 * lam + r));
        return {bar_g, bar_h};
    }
    const auto [p_hat, q_hat] = f2_hat_bounds(m);
    const double p_cap = r / ((lam + r) * (2.0 + a * (lam + r)));
    const double q_cap = (lam + (lam + r) * (1.0 + b * (lam + r))) / ((lam + r) * (2.0 + b * (lam + r)));
    return {std::min(p_hat, p_cap), std::max(q_hat, q_cap)};
}

AdmissibilityReport check_admissibility(const Model& m, Formulation form) {
    AdmissibilityReport rep;
    const auto [bl, bu] = admissible_bounds(m, form);
    rep.bar_lower = bl;
    rep.bar_upper = bu;
    if (!(bl > kPiLo && bu < kPiHi && bl < bu)) {
        rep.pass = false;
        return rep;
    }
    const double cl = coeffs_at_lower(m, form, bl).c0;
    const double cu = coeffs_at_upper(m, form, bu).c1;
    const double a = m.params().a, b = m.params().b;
    const double v0p_l = candidate_jet(m, form, 0, bl, cl).df;
    const double v1p_l = candidate_jet(m, form, 1, bl, cu).df;
    const double v0p_u = candidate_jet(m, form, 0, bu, cl).df;
    const double v1p_u = candidate_jet(m, form, 1, bu, cu).df;
    rep.slack_lower = a + v1p_l - v0p_l;           // V0' < a + V1' at bar_lower
    rep.slack_upper = v1p_u - (-b + v0p_u);        // V1' > -b + V0' at bar_upper
    rep.pass = rep.slack_lower > 0.0 && rep.slack_upper > 0.0;
    return rep;
}

namespace {

std::string sign_pattern(const std::function<double(double)>& f, double lo, double hi, int n) {
    std::ostringstream os;
    os.precision(6);
    for (int k = 0; k <= n; ++k) {
        const double x = lo + (hi - lo) * k / n;
        const double v = f(x);
        os << "(" << x << ", " << (std::isnan(v) ? "undef" : (v > 0 ? "+" : "-")) << ") ";
    }
    return os.str();
}

} // namespace

ThresholdSolution solve_boundaries(const Model& m, Formulation form) {
    const auto adm = check_admissibility(m, form);
    if (!adm.pass) {
        std::ostringstream os;
        os << "solve_boundaries(" << to_string(form) << "): parameters inadmissible, slacks ("
           << adm.slack_lower << ", " << adm.slack_upper << ") at bounds (" << adm.bar_lower
           << ", " << adm.bar_upper << ")";
        throw Inadmissible(os.str());
    }
    const double margin = 1e-9;
    const double x_lo = kPiLo, x_hi = adm.bar_lower - margin;
    const double y_lo = adm.bar_upper + margin, y_hi = kPiHi;

    // inner: match the decreasing-branch coefficient at the upper boundary
    auto upper_for = [&](const CoeffPair& at_x) -> std::optional<double> {
        auto f = [&](double y) { return coeffs_at_upper(m, form, y).c0 - at_x.c0; };
        auto brs = scan_brackets(f, y_lo, y_hi, 48);
        if (brs.empty()) return std::nullopt;
        double best_y = 0.0, best_res = std::numeric_limits<double>::infinity();
        for (const auto& br : brs) {
            const double y = brent(f, br.lo, br.hi, br.flo, br.fhi, 1e-15);
            const double res = std::fabs(coeffs_at_upper(m, form, y).c1 - at_x.c1);
            if (res < best_res) {
                best_res = res;
                best_y = y;
            }
        }
        return best_y;
    };

    auto outer = [&](double x) -> double {
        const CoeffPair at_x = coeffs_at_lower(m, form, x);
        const auto y = upper_for(at_x);
        if (!y) return std::numeric_limits<double>::quiet_NaN();
        return coeffs_at_upper(m, form, *y).c1 - at_x.c1;
    };

    const auto brs = scan_brackets(outer, x_lo, x_hi, 48);
    if (brs.empty()) {
        std::ostringstream os;
        os << "solve_boundaries(" << to_string(form)
           << "): no sign change of the matching residual on the admissible range; pattern: "
           << sign_pattern(outer, x_lo, x_hi, 16);
        throw NoSolution(os.str());
    }
    const auto& br = brs.front();
    double lower = brent(outer, br.lo, br.hi, br.flo, br.fhi, 1e-15);
    const auto upper_seed = upper_for(coeffs_at_lower(m, form, lower));
    if (!upper_seed)
        throw NoSolution("solve_boundaries: inner matching lost its bracket at the solution");
    double upper = *upper_seed;

    // Newton polish of the 2x2 matching system with a finite-difference
    // Jacobian; drives both residuals to evaluation-noise level
    for (int it = 0; it < 4; ++it) {
        const CoeffPair cl = coeffs_at_lower(m, form, lower);
        const CoeffPair cu = coeffs_at_upper(m, form, upper);
        const double f0 = cl.c0 - cu.c0;
        const double f1 = cl.c1 - cu.c1;
        const double hx = 1e-7 * std::max(lower, 1e-3);
        const double hy = 1e-7 * std::max(1.0 - upper, 1e-3);
        const CoeffPair clh = coeffs_at_lower(m, form, lower + hx);
        const CoeffPair cuh = coeffs_at_upper(m, form, upper + hy);
        const double j00 = (clh.c0 - cl.c0) / hx, j01 = -(cuh.c0 - cu.c0) / hy;
        const double j10 = (clh.c1 - cl.c1) / hx, j11 = -(cuh.c1 - cu.c1) / hy;
        const double det = j00 * j11 - j01 * j10;
        if (!(std::fabs(det) > 0.0)) break;
        const double dx = (f0 * j11 - f1 * j01) / det;
        const double dy = (j00 * f1 - j10 * f0) / det;
        const double next_lower = std::clamp(lower - dx, x_lo, x_hi);
        const double next_upper = std::clamp(upper - dy, y_lo, y_hi);
        if (next_lower == lower && next_upper == upper) break;
        lower = next_lower;
        upper = next_upper;
    }

    const CoeffPair at_l = coeffs_at_lower(m, form, lower);
    const CoeffPair at_u = coeffs_at_upper(m, form, upper);

    ThresholdSolution sol;
    sol.formulation = form;
    sol.lower = lower;
    sol.upper = upper;
    sol.coeff_lower = at_l.c0;
    sol.coeff_upper = at_u.c1;
    sol.bar_lower = adm.bar_lower;
    sol.bar_upper = adm.bar_upper;

    sol.residuals.match_c0 = std::fabs(at_l.c0 - at_u.c0) / (1.0 + std::fabs(at_l.c0));
    sol.residuals.match_c1 = std::fabs(at_l.c1 - at_u.c1) / (1.0 + std::fabs(at_l.c1));

    const double a = m.params().a, b = m.params().b;
    const Jet2 v0l = candidate_jet(m, form, 0, lower, sol.coeff_lower);
    const Jet2 v1l = candidate_jet(m, form, 1, lower, sol.coeff_upper);
    const Jet2 v0u = candidate_jet(m, form, 0, upper, sol.coeff_lower);
    const Jet2 v1u = candidate_jet(m, form, 1, upper, sol.coeff_upper);
    sol.residuals.instop_lower =
        std::fabs(v0l.f - (a * lower + v1l.f)) / (1.0 + std::fabs(v0l.f));
    sol.residuals.smooth_lower = std::fabs(v0l.df - (a + v1l.df)) / (1.0 + std::fabs(v0l.df));
    sol.residuals.instop_upper =
        std::fabs(v1u.f - (b * (1.0 - upper) + v0u.f)) / (1.0 + std::fabs(v1u.f));
    sol.residuals.smooth_upper = std::fabs(v1u.df - (-b + v0u.df)) / (1.0 + std::fabs(v1u.df));

    const bool ordered = 0.0 < lower && lower < sol.bar_lower && sol.bar_lower < 0.5 &&
                         0.5 < sol.bar_upper && sol.bar_upper < upper && upper < 1.0;
    const bool tight = sol.residuals.match_c0 <= 1e-10 && sol.residuals.match_c1 <= 1e-10 &&
                       sol.residuals.instop_lower <= 1e-8 && sol.residuals.instop_upper <= 1e-8 &&
                       sol.residuals.smooth_lower <= 1e-8 && sol.residuals.smooth_upper <= 1e-8;
    sol.admissible = ordered && tight;
    return sol;
}

namespace {

// piecewise jets of the assembled risk functions
Jet2 risk_jet(const Model& m, const ThresholdSolution& sol, int i, double pi) {
    const double a = m.params().a, b = m.params().b;
    if (i == 0) {
        if (pi > sol.lower) return candidate_jet(m, sol.formulation, 0, pi, sol.coeff_lower);
        Jet2 j = candidate_jet(m, sol.formulation, 1, pi, sol.coeff_upper);
        j.f += a * pi;
        j.df += a;
        return j;
    }
    if (pi < sol.upper) return candidate_jet(m, sol.formulation, 1, pi, sol.coeff_upper);
    Jet2 j = candidate_jet(m, sol.formulation, 0, pi, sol.coeff_lower);
    j.f += b * (1.0 - pi);
    j.df -= b;
    return j;
}

} // namespace

double bayes_risk(const Model& m, const ThresholdSolution& sol, int i, double pi) {
    if (i != 0 && i != 1) throw DomainError("bayes_risk: i must be 0 or 1");
    if (!(pi >= 0.0 && pi <= 1.0)) throw DomainError("bayes_risk: pi outside [0,1]");
    return risk_jet(m, sol, i, clamp_pi(pi)).f;
}

double minimal_risk(const Model& m, const ThresholdSolution& sol, double pi) {
    return std::min(bayes_risk(m, sol, 0, pi), bayes_risk(m, sol, 1, pi));
}

VariationalReport verify_variational(const Model& m, const ThresholdSolution& sol, int grid_n,
                                     bool throw_on_violation) {
    if (grid_n < 8) throw DomainError("verify_variational: grid_n too small");
    VariationalReport rep;
    rep.min_gap_lower = rep.min_gap_upper = std::numeric_limits<double>::infinity();
    rep.min_gen_lower = rep.min_gen_upper = std::numeric_limits<double>::infinity();

    const double a = m.params().a, b = m.params().b, r = m.params().r;
    const GeneratorKind gen0 =
        sol.formulation == Formulation::F1 ? GeneratorKind::Chain : GeneratorKind::Drop;
    const GeneratorKind gen1 =
        sol.formulation == Formulation::F1 ? GeneratorKind::Chain : GeneratorKind::Rise;

    // coefficients re-derived from the thresholds being verified, so a
    // hand-perturbed pair is judged by its own one-sided fits
    ThresholdSolution v = sol;
    v.coeff_lower = coeffs_at_lower(m, sol.formulation, sol.lower).c0;
    v.coeff_upper = coeffs_at_upper(m, sol.formulation, sol.upper).c1;

    for (int k = 0; k <= grid_n; ++k) {
        const double pi = kPiLo + (kPiHi - kPiLo) * k / grid_n;
        if (std::fabs(pi - sol.lower) < 1e-9 || std::fabs(pi - sol.upper) < 1e-9) continue;
        const Jet2 j0 = risk_jet(m, v, 0, pi);
        const Jet2 j1 = risk_jet(m, v, 1, pi);

        bool bad = false;
        if (pi > sol.lower) { // continuation side of phase 0: V0 < a pi + V1 strictly
            const double gap = a * pi + j1.f - j0.f;
            rep.min_gap_lower = std::min(rep.min_gap_lower, gap);
            bad |= !(gap > 0.0);
        } else { // stopping side: generator inequality strict
            const double slack = m.apply_generator(gen0, j0, pi) - r * j0.f + (1.0 - pi);
            rep.min_gen_lower = std::min(rep.min_gen_lower, slack);
            bad |= !(slack > 0.0);
        }
        if (pi < sol.upper) { // continuation side of phase 1: V1 < b(1-pi) + V0 strictly
            const double gap = b * (1.0 - pi) + j0.f - j1.f;
            rep.min_gap_upper = std::min(rep.min_gap_upper, gap);
            bad |= !(gap > 0.0);
        } else {
            const double slack = m.apply_generator(gen1, j1, pi) - r * j1.f + pi;
            rep.min_gen_upper = std::min(rep.min_gen_upper, slack);
            bad |= !(slack > 0.0);
        }
        if (bad) rep.violations.push_back(pi);
    }

    // instantaneous stopping at both thresholds, evaluated with the smooth pieces
    const Jet2 v0l = candidate_jet(m, sol.formulation, 0, sol.lower, v.coeff_lower);
    const Jet2 v1l = candidate_jet(m, sol.formulation, 1, sol.lower, v.coeff_upper);
    const Jet2 v0u = candidate_jet(m, sol.formulation, 0, sol.upper, v.coeff_lower);
    const Jet2 v1u = candidate_jet(m, sol.formulation, 1, sol.upper, v.coeff_upper);
    rep.max_boundary_gap = std::max(std::fabs(a * sol.lower + v1l.f - v0l.f),
                                    std::fabs(b * (1.0 - sol.upper) + v0u.f - v1u.f));

    rep.pass = rep.violations.empty() && rep.max_boundary_gap <= 1e-8;
    if (!rep.pass && throw_on_violation) {
        std::ostringstream os;
        os << "verify_variational: " << rep.violations.size()
           << " violating grid points; boundary gap " << rep.max_boundary_gap << "; points:";
        os.precision(10);
        for (size_t idx = 0; idx < rep.violations.size() && idx < 20; ++idx)
            os << " " << rep.violations[idx];
        throw VerificationFailure(os.str());
    }
    return rep;
}

} // namespace disorder
