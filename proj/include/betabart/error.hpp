#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace betabart {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed input data: boundary responses, ragged rows, empty files.
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid user configuration (unknown column, bad restriction, bad option).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Base for failures of the numerical machinery itself.
class NumericalError : public Error {
public:
    using Error::Error;
};

class RankDeficientError : public NumericalError {
public:
    RankDeficientError(const std::string& what, long rank, long columns)
        : NumericalError(what), rank_(rank), columns_(columns) {}

    long rank() const noexcept { return rank_; }
    long columns() const noexcept { return columns_; }

private:
    long rank_;
    long columns_;
};

class SingularInformationError : public NumericalError {
public:
    SingularInformationError(const std::string& what, double condition)
        : NumericalError(what), condition_(condition) {}

    /// Reciprocal condition estimate of the offending matrix (0 when exactly singular).
    double rcond() const noexcept { return condition_; }

private:
    double condition_;
};

/// The maximizer ran out of iterations or step halvings.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, std::vector<double> loglik_trace)
        : NumericalError(what), trace_(std::move(loglik_trace)) {}

    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

} // namespace betabart
