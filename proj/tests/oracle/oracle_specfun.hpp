#pragma once

// High-precision reference evaluations used only by tests. Independent of
// the library implementation: different arithmetic (BigFloat), different
// algorithms (Spouge Gamma, plain multiprecision series).

#include "bigfloat.hpp"

namespace oracle {

// Gamma to ~57 digits.
double gamma_ref(double x);

// Kummer Phi by direct multiprecision series summation.
double kummer_phi_ref(double alpha, double beta, double x);

// Kummer Psi assembled from the defining combination in multiprecision;
// the ~e^x cancellation is harmless at 160 digits.
double kummer_psi_ref(double alpha, double beta, double x);

} // namespace oracle
