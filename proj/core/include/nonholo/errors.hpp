#pragma once

#include <stdexcept>
#include <string>

namespace nonholo {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A state does not satisfy the nonholonomic constraint to the required tolerance.
struct ConstraintViolation : Error {
    using Error::Error;
};

/// An input lies outside the validity interval declared by a coupling function.
struct DomainViolation : Error {
    using Error::Error;
};

/// An operation that requires epsilon = 0 was called on a perturbed spec.
struct PerturbationPresent : Error {
    using Error::Error;
};

/// Newton iteration for the perturbed momentum fibre did not converge.
struct FibreSolveFailure : Error {
    using Error::Error;
};

/// Implicit stepper iteration did not converge.
struct NonConvergence : Error {
    using Error::Error;
};

/// Adaptive step control drove the step size below the representable minimum.
struct StepSizeUnderflow : Error {
    using Error::Error;
};

/// No first return to the subsystem section was found within the time cap.
struct NoClosedOrbit : Error {
    using Error::Error;
};

/// The level set F(q3, 0) = a has no root in the search window.
struct NoSectionCrossing : Error {
    using Error::Error;
};

/// The subsystem frequency vanishes; the monodromy construction degenerates.
struct OmegaZero : Error {
    using Error::Error;
};

/// Input matrix fails the orthogonality / determinant preconditions.
struct NotARotation : Error {
    using Error::Error;
};

/// The monodromy is a half turn (rotation angle pi); the principal logarithm
/// exists but its axis sign is ambiguous and reversibility is not guaranteed.
struct HalfTurn : Error {
    using Error::Error;
};

/// The monodromy rotation angle is (numerically) zero; the rotation plane and
/// the (b, c, phi) decomposition are undefined.
struct DegenerateRotation : Error {
    using Error::Error;
};

/// A trajectory never crosses the requested Poincare section.
struct NoCrossings : Error {
    using Error::Error;
};

/// A frequency-map grid has fewer valid points than required.
struct InsufficientGrid : Error {
    using Error::Error;
};

/// A system spec or experiment configuration violates a declared invariant.
struct SpecError : Error {
    using Error::Error;
};

} // namespace nonholo
