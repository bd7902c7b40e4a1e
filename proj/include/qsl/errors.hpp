#ifndef QSL_ERRORS_HPP
#define QSL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qsl {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A nonlinear solve stopped before reaching its residual tolerance.
struct NonConvergence : Error {
  int iterations;
  double residual;
  NonConvergence(int it, double res)
      : Error("solver did not converge: residual " + std::to_string(res) +
              " after " + std::to_string(it) + " iterations"),
        iterations(it), residual(res) {}
};

/// Newton linear system could not be factorized.
struct SingularJacobian : Error {
  using Error::Error;
};

/// An operation required the antiderivative of H and none was supplied.
struct MissingAntiderivative : Error {
  MissingAntiderivative() : Error("nonlinearity has no antiderivative") {}
};

/// Scalar-only operation called on a multi-component field.
struct NotScalar : Error {
  explicit NotScalar(int m)
      : Error("operation is defined for scalar fields only (m=1), got m=" +
              std::to_string(m) + "; multi-component deficit is exploratory") {}
};

/// A monotonicity hypothesis failed (derivative changes sign above floor).
struct NotMonotone : Error {
  using Error::Error;
};

/// Requested box projects outside the generating profile's domain.
struct DomainTooSmall : Error {
  using Error::Error;
};

/// A hypothesis of the identity being checked fails on the given data.
struct HypothesisViolated : Error {
  using Error::Error;
};

/// Zero gradient met where the operator coefficient is singular.
struct DegenerateGradient : Error {
  using Error::Error;
};

/// |grad u| dropped below the quotient floor on too many nodes.
struct GradientFloorViolation : Error {
  using Error::Error;
};

/// Coupling derivative changes sign on the sampled range.
struct CouplingSignIndeterminate : Error {
  using Error::Error;
};

/// The product d_jH_i * d_iH_j is negative somewhere on the sampled range.
struct NegativeCouplingProduct : Error {
  using Error::Error;
};

/// Radii span too small for a growth fit.
struct InsufficientRange : Error {
  using Error::Error;
};

/// sum |u_i'|^p vanishes on a subinterval of a chain-of-inequalities check.
struct DegenerateDerivative : Error {
  using Error::Error;
};

/// Scenario file could not be parsed.
struct ParseError : Error {
  int line;
  ParseError(int ln, const std::string& what)
      : Error("parse error at line " + std::to_string(ln) + ": " + what),
        line(ln) {}
};

/// Scenario parsed but a field is invalid or inconsistent.
struct ValidationError : Error {
  std::string field;
  ValidationError(std::string f, const std::string& what)
      : Error("invalid scenario field '" + f + "': " + what),
        field(std::move(f)) {}
};

/// Eigen factorization/eigensolve failure.
struct LinearAlgebraFailure : Error {
  using Error::Error;
};

}  // namespace qsl

#endif  // QSL_ERRORS_HPP
