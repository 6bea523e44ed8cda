#pragma once

#include <stdexcept>
#include <string>

namespace kolmo {

// Every failure raised by the library derives from kolmo::Error and carries a
// coarse category. The CLI maps categories onto process exit codes.
enum class ErrorKind {
    Dimension,        // shape mismatch, non-square input
    Domain,           // argument outside the admissible range
    Scaling,          // matrix exponential could not be scaled into range
    Definiteness,     // matrix expected to be SPD is not
    Symmetry,         // matrix expected to be symmetric is not
    Structure,        // block structure of B violates the standing hypothesis
    Ellipticity,      // diffusion matrix violates the ellipticity bounds
    Hypoellipticity,  // covariance C(t) numerically singular
    Accuracy,         // quadrature / finite-difference self-check failed
    Support,          // kernel derivative requested outside t > tau
    Solve,            // linear solve has no solution in the expected subspace
    NonConvergence,   // iterative procedure hit its cap
    PlanIntegrity,    // path plan does not chain / re-execute
    Applicability,    // identity requested for an operator it does not hold for
    Manufacture,      // analytic derivative disagrees with finite differences
    Usage,            // malformed input file or argument
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Dimension: return "dimension";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Scaling: return "scaling";
        case ErrorKind::Definiteness: return "definiteness";
        case ErrorKind::Symmetry: return "symmetry";
        case ErrorKind::Structure: return "structure";
        case ErrorKind::Ellipticity: return "ellipticity";
        case ErrorKind::Hypoellipticity: return "hypoellipticity";
        case ErrorKind::Accuracy: return "accuracy";
        case ErrorKind::Support: return "support";
        case ErrorKind::Solve: return "solve";
        case ErrorKind::NonConvergence: return "non-convergence";
        case ErrorKind::PlanIntegrity: return "plan-integrity";
        case ErrorKind::Applicability: return "applicability";
        case ErrorKind::Manufacture: return "manufacture";
        case ErrorKind::Usage: return "usage";
    }
    return "unknown";
}

}  // namespace kolmo
