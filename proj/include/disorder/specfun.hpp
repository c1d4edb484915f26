#pragma once

#include "disorder/errors.hpp"

#include <cstdint>

namespace disorder::specfun {

// Truncation policy for all series evaluations in this module.
struct SeriesControl {
    double rel_tol = 1e-12;
    int max_terms = 10000;

    void validate() const {
        if (!(rel_tol > 0.0)) throw DomainError("SeriesControl: rel_tol must be > 0");
        if (max_terms < 16) throw DomainError("SeriesControl: max_terms must be >= 16");
    }
};

// Euler Gamma for real arguments away from the poles at 0, -1, -2, ...
// Relative error <= 1e-13 on [-50, 50].
double gamma_fn(double x);

// Kummer confluent hypergeometric function of the first kind,
// Phi(alpha, beta; x) = sum_k (alpha)_k / (beta)_k * x^k / k!,  x >= 0.
double kummer_phi(double alpha, double beta, double x, const SeriesControl& ctl = {});

// Kummer function of the second kind, assembled from two Phi evaluations,
// Gamma factors and sin(pi*beta); large arguments switch to the standard
// asymptotic expansion where the assembly would cancel catastrophically.
// Throws DegenerateParameter when beta is within 1e-8 of an integer.
double kummer_psi(double alpha, double beta, double x, const SeriesControl& ctl = {});

// d/dx Phi = (alpha/beta) Phi(alpha+1, beta+1; x)
double kummer_phi_deriv(double alpha, double beta, double x, const SeriesControl& ctl = {});

// d/dx Psi = -alpha Psi(alpha+1, beta+1; x)
double kummer_psi_deriv(double alpha, double beta, double x, const SeriesControl& ctl = {});

// Heun double confluent function, normalized by H(0) = 1, H'(0) = 0.
// Inside the unit interval the power series around 0 is used (ODE
// integration from 0 as fallback when the series stalls near |x| = 1);
// for |x| > 1 the continuation identity
//   H(a, b, c, d; x) = H(-a, -d, -c, -b; 1/x)
// is applied once.
double heun_dc(double alpha, double beta, double gamma, double delta, double x,
               const SeriesControl& ctl = {});

// dH/dx, through the chain rule on the continuation branch.
double heun_dc_deriv(double alpha, double beta, double gamma, double delta, double x,
                     const SeriesControl& ctl = {});

// Value, first and second derivative in one evaluation, plus diagnostics.
// H'' comes from the defining ODE once H and H' are known.
struct HeunEval {
    double h = 0.0;
    double dh = 0.0;
    double d2h = 0.0;
    int terms_used = 0;      // series terms consumed (0 when the ODE path ran)
    bool used_ode_fallback = false;
};

HeunEval heun_dc_eval(double alpha, double beta, double gamma, double delta, double x,
                      const SeriesControl& ctl = {});

namespace detail {
// Reciprocal Gamma; returns 0 at the non-positive-integer poles so that
// vanishing Psi terms come out as the correct limit.
double inv_gamma(double x);

// sin(pi*x) with exact integer reduction.
double sin_pi(double x);
} // namespace detail

} // namespace disorder::specfun
