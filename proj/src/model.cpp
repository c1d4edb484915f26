#include "disorder/model.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <sstream>

namespace disorder {

void ModelParams::validate() const {
    if (!(sigma > 0.0)) throw DomainError("ModelParams: sigma must be > 0");
    if (!(lambda > 0.0)) throw DomainError("ModelParams: lambda must be > 0");
    if (!(r > 0.0)) throw DomainError("ModelParams: r must be > 0");
    if (!(a > 0.0)) throw DomainError("ModelParams: a must be > 0");
    if (!(b > 0.0)) throw DomainError("ModelParams: b must be > 0");
    if (!(pi0 >= 0.0 && pi0 <= 1.0)) throw DomainError("ModelParams: pi0 must be in [0,1]");
    if (mu0 == mu1) throw DomainError("ModelParams: mu0 and mu1 must differ");
}

DerivedConstants derive(const ModelParams& p) {
    p.validate();
    DerivedConstants d;
    const double snr = (p.mu1 - p.mu0) / p.sigma;
    d.rho = snr * snr;
    d.phi = 8.0 * p.lambda / d.rho;
    d.psi = d.phi * d.phi / 4.0 + d.phi - 8.0 * p.r / d.rho - 1.0;
    d.xi_h = 4.0 * d.phi - d.psi;
    const double s = 0.5 + p.lambda / d.rho;
    const double root = std::sqrt(s * s + 2.0 * p.r / d.rho);
    d.gamma_plus = s + root;
    d.gamma_minus = s - root;
    return d;
}

const char* to_string(Formulation f) { return f == Formulation::F1 ? "f1" : "f2"; }

Formulation formulation_from_string(const std::string& s) {
    if (s == "f1" || s == "F1") return Formulation::F1;
    if (s == "f2" || s == "F2") return Formulation::F2;
    throw DomainError("formulation must be f1 or f2, got '" + s + "'");
}

namespace {

// switch between the subtraction form of Q and its endpoint tails
constexpr double kQTailSwitch = 0.05;
// asymptotic edge expansion usable below this endpoint distance
constexpr double kEdgeSeries = 0.02;

} // namespace

Model::Model(const ModelParams& p, specfun::SeriesControl ctl) : p_(p), ctl_(ctl) {
    ctl_.validate();
    dc_ = derive(p_);
    const double beta0 = dc_.gamma_plus - dc_.gamma_minus + 1.0;
    if (std::fabs(beta0 - std::nearbyint(beta0)) < 1.5e-8) {
        // integer beta degenerates the second Kummer solution; nudge lambda in
        // relative 1e-9 steps until beta clears the detection window
        for (int k = 0; k < 1000; ++k) {
            p_.lambda *= 1.0 + 1e-9;
            dc_ = derive(p_);
            const double beta = dc_.gamma_plus - dc_.gamma_minus + 1.0;
            if (std::fabs(beta - std::nearbyint(beta)) >= 1.5e-8) break;
        }
        std::ostringstream os;
        os << "Kummer beta = " << beta0 << " was numerically integer; lambda perturbed to "
           << p_.lambda;
        warning_ = os.str();
    }

    // Expansion of the bounded branch at the degenerate endpoints, u(s) = sum a_k s^k
    // with lambda u'(0) = r u(0). The series is asymptotic (the endpoints are
    // irregular); evaluation truncates at the smallest term.
    {
        const double lam = p_.lambda, r = p_.r, rho = dc_.rho;
        edge_coeffs_.assign(64, 0.0);
        edge_coeffs_[0] = 1.0;
        for (int n = 0; n + 1 < (int)edge_coeffs_.size(); ++n) {
            const double an = edge_coeffs_[size_t(n)];
            const double an1 = n >= 1 ? edge_coeffs_[size_t(n - 1)] : 0.0;
            const double an2 = n >= 2 ? edge_coeffs_[size_t(n - 2)] : 0.0;
            edge_coeffs_[size_t(n + 1)] =
                ((2.0 * lam * n + r - 0.5 * rho * n * (n - 1.0)) * an +
                 rho * (n - 1.0) * (n - 2.0) * an1 - 0.5 * rho * (n - 2.0) * (n - 3.0) * an2) /
                (lam * (n + 1.0));
        }
    }

    // Connection coefficient removing the complementary component: the ratio of
    // the two raw combinations converges to it at the blow-up end.
    conn_t_ = raw_q_jet(0, 0.99).f / raw_q_jet(1, 0.99).f;

    // Scale the endpoint tails to the subtraction form at the switch points.
    const double sw = kQTailSwitch;
    const double q0_at_switch =
        raw_q_jet(0, 1.0 - sw).f - conn_t_ * raw_q_jet(1, 1.0 - sw).f;
    const double q1_at_switch = raw_q_jet(1, sw).f - conn_t_ * raw_q_jet(0, sw).f;
    const double w_at_switch = tail_w_jet(sw).f;
    tail_scale_hi_ = q0_at_switch / w_at_switch;
    tail_scale_lo_ = q1_at_switch / w_at_switch;
}

namespace {

void require_interior(double pi, const char* who) {
    if (!(pi > 0.0 && pi < 1.0)) {
        std::ostringstream os;
        os << who << ": pi = " << pi << " outside (0,1)";
        throw DomainError(os.str());
    }
}

} // namespace

Jet2 Model::raw_q_jet(int i, double pi) const {
    require_interior(pi, "q_fn");

    const double lam = p_.lambda;
    const double rho = dc_.rho;
    // exponential prefactor exp(2 lambda / (rho pi)) resp. /(rho (1-pi))
    const double den = (i == 0) ? pi : 1.0 - pi;
    const double e = 2.0 * lam / (rho * den);
    if (e > 700.0) {
        std::ostringstream os;
        os << "q_fn: exponential prefactor overflows at pi = " << pi << " for Q_" << i;
        throw OverflowSignal(os.str());
    }
    const double de = (i == 0) ? -2.0 * lam / (rho * pi * pi)
                               : 2.0 * lam / (rho * (1.0 - pi) * (1.0 - pi));
    const double d2e = (i == 0) ? 4.0 * lam / (rho * pi * pi * pi)
                                : 4.0 * lam / (rho * (1.0 - pi) * (1.0 - pi) * (1.0 - pi));

    const double P = std::sqrt(pi * (1.0 - pi));
    const double dP = (1.0 - 2.0 * pi) / (2.0 * P);
    const double d2P = -1.0 / P - (1.0 - 2.0 * pi) * (1.0 - 2.0 * pi) / (4.0 * P * P * P);
    const double E = std::exp(e);
    const double A = P * E;
    const double dA = (dP + P * de) * E;
    const double d2A = (d2P + 2.0 * dP * de + P * (de * de + d2e)) * E;

    // The defining equation (L - r)Q = 0 pins this sign pairing through the
    // continuation at 1/(1-2pi); the opposite one solves nothing.
    const double ha = (i == 1) ? -dc_.phi : dc_.phi;
    const double u = 1.0 - 2.0 * pi;

    double H, Hp, Hpp; // Heun factor as a function of pi
    if (std::fabs(u) < 1e-13) {
        // limit branch at pi = 1/2: the continuation identity evaluated at 1/x = u
        const specfun::HeunEval hs = specfun::heun_dc_eval(-ha, -dc_.xi_h, 0.0, -dc_.psi, u, ctl_);
        H = hs.h;
        Hp = -2.0 * hs.dh;
        Hpp = 4.0 * hs.d2h;
    } else {
        const double x = 1.0 / u; // |x| > 1; handled by the continuation branch
        const specfun::HeunEval he = specfun::heun_dc_eval(ha, dc_.psi, 0.0, dc_.xi_h, x, ctl_);
        const double dx = 2.0 / (u * u);
        const double d2x = 8.0 / (u * u * u);
        H = he.h;
        Hp = he.dh * dx;
        Hpp = he.d2h * dx * dx + he.dh * d2x;
    }

    Jet2 out;
    out.f = A * H;
    out.df = dA * H + A * Hp;
    out.d2f = d2A * H + 2.0 * dA * Hp + A * Hpp;
    if (!std::isfinite(out.f) || !std::isfinite(out.df) || !std::isfinite(out.d2f)) {
        std::ostringstream os;
        os << "q_fn: non-finite value at pi = " << pi << " for Q_" << i;
        throw OverflowSignal(os.str());
    }
    return out;
}

namespace {

// adaptive Dormand-Prince 5(4) for the pair (w, w') of the endpoint-distance
// form of the homogeneous generator equation
void integrate_edge_ode(double lam, double r, double rho, double s0, double s1, double* w,
                        double* dw) {
    auto d2 = [&](double s, double w0, double w1) {
        return (r * w0 - lam * (1.0 - 2.0 * s) * w1) /
               (0.5 * rho * s * s * (1.0 - s) * (1.0 - s));
    };
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                     b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    const double rtol = 1e-11, atol = 1e-300;

    double x = s0, y0 = *w, y1 = *dw;
    const double dir = (s1 >= s0) ? 1.0 : -1.0;
    double h = dir * 1e-4;
    auto f = [&](double xx, double u0, double u1, double* g0, double* g1) {
        *g0 = u1;
        *g1 = d2(xx, u0, u1);
    };
    for (long steps = 0; steps < 2000000; ++steps) {
        if (dir * (s1 - x) <= 0.0) break;
        if (dir * (x + h) > dir * s1) h = s1 - x;
        double k10, k11, k20, k21, k30, k31, k40, k41, k50, k51, k60, k61, k70, k71;
        f(x, y0, y1, &k10, &k11);
        f(x + c2 * h, y0 + h * a21 * k10, y1 + h * a21 * k11, &k20, &k21);
        f(x + c3 * h, y0 + h * (a31 * k10 + a32 * k20), y1 + h * (a31 * k11 + a32 * k21), &k30,
          &k31);
        f(x + c4 * h, y0 + h * (a41 * k10 + a42 * k20 + a43 * k30),
          y1 + h * (a41 * k11 + a42 * k21 + a43 * k31), &k40, &k41);
        f(x + c5 * h, y0 + h * (a51 * k10 + a52 * k20 + a53 * k30 + a54 * k40),
          y1 + h * (a51 * k11 + a52 * k21 + a53 * k31 + a54 * k41), &k50, &k51);
        f(x + h, y0 + h * (a61 * k10 + a62 * k20 + a63 * k30 + a64 * k40 + a65 * k50),
          y1 + h * (a61 * k11 + a62 * k21 + a63 * k31 + a64 * k41 + a65 * k51), &k60, &k61);
        const double z0 = y0 + h * (b1 * k10 + b3 * k30 + b4 * k40 + b5 * k50 + b6 * k60);
        const double z1 = y1 + h * (b1 * k11 + b3 * k31 + b4 * k41 + b5 * k51 + b6 * k61);
        f(x + h, z0, z1, &k70, &k71);
        const double er0 = h * (e1 * k10 + e3 * k30 + e4 * k40 + e5 * k50 + e6 * k60 + e7 * k70);
        const double er1 = h * (e1 * k11 + e3 * k31 + e4 * k41 + e5 * k51 + e6 * k61 + e7 * k71);
        const double sc0 = atol + rtol * std::max(std::fabs(y0), std::fabs(z0));
        const double sc1 = atol + rtol * std::max(std::fabs(y1), std::fabs(z1));
        const double err =
            std::sqrt(0.5 * ((er0 / sc0) * (er0 / sc0) + (er1 / sc1) * (er1 / sc1)));
        if (!std::isfinite(err)) throw NonConvergence("q_fn: endpoint tail integration failed");
        if (err <= 1.0) {
            x += h;
            y0 = z0;
            y1 = z1;
        }
        h *= std::clamp(0.9 * std::pow(std::max(err, 1e-16), -0.2), 0.2, 5.0);
        if (std::fabs(h) < 1e-17) throw NonConvergence("q_fn: endpoint tail step underflow");
    }
    *w = y0;
    *dw = y1;
}

} // namespace

Jet2 Model::tail_w_jet(double s) const {
    const double lam = p_.lambda, r = p_.r, rho = dc_.rho;
    const double s_series = std::min(s, kEdgeSeries);

    // asymptotic sum truncated at the smallest term
    double w = edge_coeffs_[0], dw = 0.0, d2w = 0.0;
    double prev_mag = std::numeric_limits<double>::max();
    double sk = 1.0; // s^(k-1) while appending term k
    for (size_t k = 1; k < edge_coeffs_.size(); ++k) {
        const double term_d = double(k) * edge_coeffs_[k] * sk;
        const double term_d2 = double(k) * double(k - 1) * edge_coeffs_[k] *
                               (k >= 2 ? sk / s_series : 0.0);
        sk *= s_series;
        const double term = edge_coeffs_[k] * sk;
        if (std::fabs(term) >= prev_mag) break; // asymptotic turnover
        w += term;
        dw += term_d;
        d2w += term_d2;
        prev_mag = std::fabs(term);
        if (std::fabs(term) < 1e-16 * std::fabs(w)) break;
    }

    Jet2 out;
    if (s <= kEdgeSeries) {
        out.f = w;
        out.df = dw;
        out.d2f = d2w;
    } else {
        integrate_edge_ode(lam, r, rho, s_series, s, &w, &dw);
        out.f = w;
        out.df = dw;
        out.d2f = (r * w - lam * (1.0 - 2.0 * s) * dw) /
                  (0.5 * rho * s * s * (1.0 - s) * (1.0 - s));
    }
    return out;
}

Jet2 Model::q_jet(int i, double pi) const {
    if (i != 0 && i != 1) throw DomainError("q_fn: i must be 0 or 1");
    require_interior(pi, "q_fn");

    if (i == 0 && pi > 1.0 - kQTailSwitch) {
        const Jet2 w = tail_w_jet(1.0 - pi);
        return {tail_scale_hi_ * w.f, -tail_scale_hi_ * w.df, tail_scale_hi_ * w.d2f};
    }
    if (i == 1 && pi < kQTailSwitch) {
        const Jet2 w = tail_w_jet(pi);
        return {tail_scale_lo_ * w.f, tail_scale_lo_ * w.df, tail_scale_lo_ * w.d2f};
    }
    const Jet2 r0 = raw_q_jet(i, pi);
    const Jet2 r1 = raw_q_jet(1 - i, pi);
    return {r0.f - conn_t_ * r1.f, r0.df - conn_t_ * r1.df, r0.d2f - conn_t_ * r1.d2f};
}

Jet2 Model::g_jet(int i, int j, double pi) const {
    if ((i != 0 && i != 1) || (j != 0 && j != 1)) throw DomainError("g_fn: i, j must be 0 or 1");
    require_interior(pi, "g_fn");

    const double lam = p_.lambda;
    const double rho = dc_.rho;
    const double c = dc_.gamma_plus;
    const double al = kummer_alpha();
    const double be = kummer_beta();

    double A, dA, d2A;   // elementary prefactor
    double x, dx, d2x;   // Kummer argument
    if (i == 0) {
        A = std::pow(pi, c) * std::pow(1.0 - pi, 1.0 - c);
        dA = std::pow(pi, c - 1.0) * std::pow(1.0 - pi, -c) * (c - pi);
        d2A = std::pow(pi, c - 2.0) * std::pow(1.0 - pi, -c - 1.0) *
              ((c - 1.0) * (1.0 - pi) * (c - pi) + c * pi * (c - pi) - pi * (1.0 - pi));
        x = 2.0 * lam * pi / (rho * (1.0 - pi));
        dx = 2.0 * lam / (rho * (1.0 - pi) * (1.0 - pi));
        d2x = 4.0 * lam / (rho * (1.0 - pi) * (1.0 - pi) * (1.0 - pi));
    } else {
        A = std::pow(pi, 1.0 - c) * std::pow(1.0 - pi, c);
        dA = std::pow(pi, -c) * std::pow(1.0 - pi, c - 1.0) * (1.0 - c - pi);
        d2A = std::pow(pi, -c - 1.0) * std::pow(1.0 - pi, c - 2.0) *
              (-c * (1.0 - pi) * (1.0 - c - pi) - (c - 1.0) * pi * (1.0 - c - pi) -
               pi * (1.0 - pi));
        x = 2.0 * lam * (1.0 - pi) / (rho * pi);
        dx = -2.0 * lam / (rho * pi * pi);
        d2x = 4.0 * lam / (rho * pi * pi * pi);
    }

    double F, dF, d2F;
    if (i == j) { // diagonal entries take the recessive (second-kind) solution
        F = specfun::kummer_psi(al, be, x, ctl_);
        dF = -al * specfun::kummer_psi(al + 1.0, be + 1.0, x, ctl_);
        d2F = al * (al + 1.0) * specfun::kummer_psi(al + 2.0, be + 2.0, x, ctl_);
    } else {
        F = specfun::kummer_phi(al, be, x, ctl_);
        dF = al / be * specfun::kummer_phi(al + 1.0, be + 1.0, x, ctl_);
        d2F = al * (al + 1.0) / (be * (be + 1.0)) * specfun::kummer_phi(al + 2.0, be + 2.0, x, ctl_);
    }

    Jet2 out;
    out.f = A * F;
    out.df = dA * F + A * dF * dx;
    out.d2f = d2A * F + 2.0 * dA * dF * dx + A * (d2F * dx * dx + dF * d2x);
    if (!std::isfinite(out.f) || !std::isfinite(out.df) || !std::isfinite(out.d2f)) {
        std::ostringstream os;
        os << "g_fn: non-finite value at pi = " << pi << " for G_" << i << j;
        throw OverflowSignal(os.str());
    }
    return out;
}

double Model::r_fn(int i, double pi) const {
    if (!(pi >= 0.0 && pi <= 1.0)) throw DomainError("r_fn: pi outside [0,1]");
    const double lin = (1.0 - 2.0 * pi) / (2.0 * p_.lambda + p_.r);
    return (i == 0) ? -p_.a * pi + lin : p_.b * (1.0 - pi) + lin;
}

double Model::r_fn_deriv(int i) const {
    const double lin = -2.0 / (2.0 * p_.lambda + p_.r);
    return (i == 0) ? -p_.a + lin : -p_.b + lin;
}

double Model::s_fn(int i, double pi) const {
    if (!(pi >= 0.0 && pi <= 1.0)) throw DomainError("s_fn: pi outside [0,1]");
    const double lin = (1.0 - 2.0 * pi) / (p_.lambda + p_.r);
    return (i == 0) ? -p_.a * pi + lin : p_.b * (1.0 - pi) + lin;
}

double Model::s_fn_deriv(int i) const {
    const double lin = -2.0 / (p_.lambda + p_.r);
    return (i == 0) ? -p_.a + lin : -p_.b + lin;
}

Jet2 Model::value_v_jet(int i, double pi, double coeff) const {
    const double lam = p_.lambda;
    const double r = p_.r;
    const Jet2 q = q_jet(i, pi);
    Jet2 out;
    const double part = (i == 0) ? (lam + r * (1.0 - pi)) / (r * (2.0 * lam + r))
                                 : (lam + r * pi) / (r * (2.0 * lam + r));
    const double dpart = (i == 0) ? -1.0 / (2.0 * lam + r) : 1.0 / (2.0 * lam + r);
    out.f = coeff * q.f + part;
    out.df = coeff * q.df + dpart;
    out.d2f = coeff * q.d2f;
    return out;
}

Jet2 Model::value_u_jet(int i, double pi, double coeff) const {
    const double lam = p_.lambda;
    const double r = p_.r;
    const Jet2 g = g_jet(i, i, pi);
    Jet2 out;
    const double part = (i == 0) ? (lam + r * (1.0 - pi)) / (r * (lam + r))
                                 : (lam + r * pi) / (r * (lam + r));
    const double dpart = (i == 0) ? -1.0 / (lam + r) : 1.0 / (lam + r);
    out.f = coeff * g.f + part;
    out.df = coeff * g.df + dpart;
    out.d2f = coeff * g.d2f;
    return out;
}

double Model::apply_generator(GeneratorKind which, const Jet2& f, double pi) const {
    require_interior(pi, "apply_generator");
    const double diff = 0.5 * dc_.rho * pi * pi * (1.0 - pi) * (1.0 - pi) * f.d2f;
    switch (which) {
        case GeneratorKind::Chain: return p_.lambda * (1.0 - 2.0 * pi) * f.df + diff;
        case GeneratorKind::Drop: return -p_.lambda * pi * f.df + diff;
        case GeneratorKind::Rise: return p_.lambda * (1.0 - pi) * f.df + diff;
    }
    throw DomainError("apply_generator: bad generator kind");
}

} // namespace disorder
