#pragma once

#include <stdexcept>
#include <string>

namespace pbem {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or inconsistent configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Mesh topology or geometry violates a SurfaceMesh invariant.
class MeshError : public Error {
public:
    using Error::Error;
};

/// Evaluation point outside the domain of an operation (charge outside the surface,
/// target on a panel, coincident points).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Iterative solver failed to reach its tolerance.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double best_residual, int iterations)
        : Error(what), best_residual_(best_residual), iterations_(iterations) {}

    double best_residual() const noexcept { return best_residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double best_residual_;
    int iterations_;
};

/// Series or sequence did not behave as required (non-converged, non-monotone).
class NumericError : public Error {
public:
    NumericError(const std::string& what, double estimate = 0.0) : Error(what), estimate_(estimate) {}

    double estimate() const noexcept { return estimate_; }

private:
    double estimate_;
};

} // namespace pbem
