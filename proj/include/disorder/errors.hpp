#pragma once

#include <stdexcept>
#include <string>

namespace disorder {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Argument outside the stated domain of an operation.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Gamma function evaluated at a non-positive integer.
class PoleError : public DomainError {
public:
    explicit PoleError(const std::string& msg) : DomainError(msg) {}
};

// A series or iteration hit its budget before the stopping rule fired.
class NonConvergence : public Error {
public:
    explicit NonConvergence(const std::string& msg) : Error(msg) {}
};

// Heun function requested exactly on the unit-circle singularity.
class SingularArgument : public DomainError {
public:
    explicit SingularArgument(const std::string& msg) : DomainError(msg) {}
};

// Kummer Psi with (numerically) integer second parameter; caller perturbs.
class DegenerateParameter : public Error {
public:
    explicit DegenerateParameter(const std::string& msg) : Error(msg) {}
};

// Exponential prefactor of Q/G left the double range.
class OverflowSignal : public Error {
public:
    explicit OverflowSignal(const std::string& msg) : Error(msg) {}
};

// Wronskian-like denominator of the 2x2 coefficient system degenerated.
class SingularSystem : public Error {
public:
    explicit SingularSystem(const std::string& msg) : Error(msg) {}
};

// Free-boundary root find could not bracket a solution.
class NoSolution : public Error {
public:
    explicit NoSolution(const std::string& msg) : Error(msg) {}
};

// Admissibility conditions fail for the given parameters.
class Inadmissible : public Error {
public:
    explicit Inadmissible(const std::string& msg) : Error(msg) {}
};

// A variational inequality was violated on the verification grid.
class VerificationFailure : public Error {
public:
    explicit VerificationFailure(const std::string& msg) : Error(msg) {}
};

} // namespace disorder
