#pragma once

// Test-only adaptive Runge-Kutta-Fehlberg 4(5) integrator, deliberately a
// different scheme from anything in the library.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

using Rhs = std::function<void(double x, const std::vector<double>& y, std::vector<double>& dy)>;

struct RkfOptions {
    double rel_tol = 1e-12;
    double abs_tol = 1e-14;
    long max_steps = 4000000;
};

// Integrates y' = f(x, y) from x0 to x1 (either direction); y updated in place.
inline void rkf45(const Rhs& f, double x0, double x1, std::vector<double>& y,
                  const RkfOptions& opt = {}) {
    const size_t n = y.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), tmp(n), y5(n), y4(n);
    const double dir = (x1 >= x0) ? 1.0 : -1.0;
    double x = x0;
    double h = dir * std::max(1e-10, std::min(1e-2, std::fabs(x1 - x0)));

    for (long step = 0; step < opt.max_steps; ++step) {
        if (dir * (x1 - x) <= 0.0) return;
        if (dir * (x + h) > dir * x1) h = x1 - x;

        f(x, y, k1);
        for (size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k1[i] / 4.0;
        f(x + h / 4.0, tmp, k2);
        for (size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (3.0 * k1[i] + 9.0 * k2[i]) / 32.0;
        f(x + 3.0 * h / 8.0, tmp, k3);
        for (size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (1932.0 * k1[i] - 7200.0 * k2[i] + 7296.0 * k3[i]) / 2197.0;
        f(x + 12.0 * h / 13.0, tmp, k4);
        for (size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (439.0 / 216.0 * k1[i] - 8.0 * k2[i] + 3680.0 / 513.0 * k3[i] -
                                 845.0 / 4104.0 * k4[i]);
        f(x + h, tmp, k5);
        for (size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (-8.0 / 27.0 * k1[i] + 2.0 * k2[i] - 3544.0 / 2565.0 * k3[i] +
                                 1859.0 / 4104.0 * k4[i] - 11.0 / 40.0 * k5[i]);
        f(x + h / 2.0, tmp, k6);

        double err = 0.0;
        for (size_t i = 0; i < n; ++i) {
            y5[i] = y[i] + h * (16.0 / 135.0 * k1[i] + 6656.0 / 12825.0 * k3[i] +
                                28561.0 / 56430.0 * k4[i] - 9.0 / 50.0 * k5[i] + 2.0 / 55.0 * k6[i]);
            y4[i] = y[i] + h * (25.0 / 216.0 * k1[i] + 1408.0 / 2565.0 * k3[i] +
                                2197.0 / 4104.0 * k4[i] - 1.0 / 5.0 * k5[i]);
            const double sc = opt.abs_tol + opt.rel_tol * std::max(std::fabs(y[i]), std::fabs(y5[i]));
            const double e = (y5[i] - y4[i]) / sc;
            err += e * e;
        }
        err = std::sqrt(err / n);

        if (err <= 1.0) {
            x += h;
            y = y5;
        }
        const double fac = std::clamp(0.84 * std::pow(std::max(err, 1e-16), -0.25), 0.1, 4.0);
        h *= fac;
        if (std::fabs(h) < 1e-17) throw std::runtime_error("rkf45: step underflow");
    }
    throw std::runtime_error("rkf45: max steps exceeded");
}

} // namespace oracle
