#pragma once

#include <stdexcept>
#include <string>

namespace netident {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A transfer function was evaluated at (or too close to) a denominator root.
class SingularEvaluationError : public Error {
public:
    explicit SingularEvaluationError(const std::string& what) : Error(what) {}
};

/// Config file could not be parsed; message carries line/field location.
class ConfigParseError : public Error {
public:
    explicit ConfigParseError(const std::string& what) : Error(what) {}
};

/// (I - G_ZZ) singular at a grid frequency during immersion.
class ImmersionSingularityError : public Error {
public:
    explicit ImmersionSingularityError(const std::string& what) : Error(what) {}
};

/// Instantaneous loop matrix (I - D0) is singular; the network is not well posed.
class AlgebraicLoopError : public Error {
public:
    explicit AlgebraicLoopError(const std::string& what) : Error(what) {}
};

/// Simulation refused because the closed loop is unstable.
class UnstableNetworkError : public Error {
public:
    explicit UnstableNetworkError(const std::string& what) : Error(what) {}
};

/// Exhaustive blocking-node search found no subset satisfying Property 1.
class NoValidBlockingSetError : public Error {
public:
    explicit NoValidBlockingSetError(const std::string& what) : Error(what) {}
};

/// Parameter point left the admissible set (unstable predictor, residual blow-up).
class DomainViolationError : public Error {
public:
    explicit DomainViolationError(const std::string& what) : Error(what) {}
};

/// Residual sample covariance is singular; the ML determinant criterion degenerates.
class DegenerateResidualError : public Error {
public:
    explicit DegenerateResidualError(const std::string& what) : Error(what) {}
};

} // namespace netident
