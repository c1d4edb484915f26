#pragma once

#include "disorder/specfun.hpp"

#include <functional>
#include <string>

namespace disorder {

// Problem constants. mu0/mu1 are the two drift regimes of the observation,
// sigma its volatility, lambda the switching intensity, r the discount rate,
// a and b the false-alarm cost weights (a multiplies Pi at a lower-threshold
// alarm, b multiplies 1-Pi at an upper-threshold alarm), pi0 the initial belief.
struct ModelParams {
    double mu0 = -1.0;
    double mu1 = 1.0;
    double sigma = 1.0;
    double lambda = 1.0;
    double r = 1.0;
    double a = 1.0;
    double b = 1.0;
    double pi0 = 0.5;

    void validate() const;
};

// Constants derived from ModelParams: signal-to-noise rho, the Heun parameter
// triple (phi, psi, xi_h) and the characteristic exponents gamma_plus/minus.
struct DerivedConstants {
    double rho = 0.0;
    double phi = 0.0;
    double psi = 0.0;
    double xi_h = 0.0;
    double gamma_plus = 0.0;
    double gamma_minus = 0.0;
};

DerivedConstants derive(const ModelParams& p);

// F1: free-running telegraph regime; F2: disorders re-armed by each alarm.
enum class Formulation { F1, F2 };

const char* to_string(Formulation f);
Formulation formulation_from_string(const std::string& s);

// Value together with first and second derivative at a point.
struct Jet2 {
    double f = 0.0;
    double df = 0.0;
    double d2f = 0.0;
};

enum class GeneratorKind { Chain, Drop, Rise };

// All pi-grid work stays inside this window; the discarded fundamental
// solutions blow up at the endpoints.
inline constexpr double kPiLo = 1e-4;
inline constexpr double kPiHi = 1.0 - 1e-4;

inline double clamp_pi(double pi) { return pi < kPiLo ? kPiLo : (pi > kPiHi ? kPiHi : pi); }

// Closed-form building blocks for both formulations.
class Model {
public:
    explicit Model(const ModelParams& p, specfun::SeriesControl ctl = {});

    const ModelParams& params() const { return p_; }
    const DerivedConstants& dc() const { return dc_; }
    const specfun::SeriesControl& series_control() const { return ctl_; }

    // Non-empty when lambda had to be nudged off an integer Kummer beta.
    const std::string& warning() const { return warning_; }

    // Q_i and its derivatives: sqrt(pi(1-pi)) exp(2 lambda / (rho pi)) ... times
    // the Heun factor at 1/(1-2 pi); i = 0 decreasing, i = 1 increasing.
    double q_fn(int i, double pi) const { return q_jet(i, pi).f; }
    double q_fn_deriv(int i, double pi) const { return q_jet(i, pi).df; }
    Jet2 q_jet(int i, double pi) const;

    // G_ij and derivatives; j = 0 uses Kummer Psi (singular end 0 for i = 0),
    // j = 1 uses Kummer Phi.
    double g_fn(int i, int j, double pi) const { return g_jet(i, j, pi).f; }
    double g_fn_deriv(int i, int j, double pi) const { return g_jet(i, j, pi).df; }
    Jet2 g_jet(int i, int j, double pi) const;

    // Affine obstacle pieces entering the threshold systems.
    double r_fn(int i, double pi) const;
    double r_fn_deriv(int i) const;
    double s_fn(int i, double pi) const;
    double s_fn_deriv(int i) const;

    // Candidate value functions: coeff * Q_i + particular part (first
    // formulation)  /  coeff * G_ii + particular part (second formulation).
    double value_v(int i, double pi, double coeff) const { return value_v_jet(i, pi, coeff).f; }
    double value_v_deriv(int i, double pi, double coeff) const { return value_v_jet(i, pi, coeff).df; }
    Jet2 value_v_jet(int i, double pi, double coeff) const;

    double value_u(int i, double pi, double coeff) const { return value_u_jet(i, pi, coeff).f; }
    double value_u_deriv(int i, double pi, double coeff) const { return value_u_jet(i, pi, coeff).df; }
    Jet2 value_u_jet(int i, double pi, double coeff) const;

    // Infinitesimal generators acting on a C^2 function handle.
    double apply_generator(GeneratorKind which, const Jet2& f_at_pi, double pi) const;
    double apply_generator(GeneratorKind which, const std::function<Jet2(double)>& f,
                           double pi) const {
        return apply_generator(which, f(pi), pi);
    }

    // Kummer parameter pair used by every G_ij.
    double kummer_alpha() const { return dc_.gamma_plus - 1.0; }
    double kummer_beta() const { return dc_.gamma_plus - dc_.gamma_minus + 1.0; }

private:
    ModelParams p_;
    DerivedConstants dc_;
    specfun::SeriesControl ctl_;
    std::string warning_;

    // Q construction: the printed Heun combination carries a component of the
    // complementary (growing) solution; conn_t_ removes it, and near each
    // recessive endpoint the pure solution is continued by the asymptotic
    // expansion of the bounded branch at the degenerate boundary.
    double conn_t_ = 0.0;
    double tail_scale_hi_ = 1.0; // matches the Q_0 tail at the switch point
    double tail_scale_lo_ = 1.0; // matches the Q_1 tail at the switch point
    std::vector<double> edge_coeffs_;

    Jet2 raw_q_jet(int which, double pi) const;
    Jet2 tail_w_jet(double s) const; // bounded branch as a function of endpoint distance
};

} // namespace disorder
