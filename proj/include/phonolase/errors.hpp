#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace phonolase {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Parameter-file problems. Carries the 1-based line number (0 when not tied to a line).
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NoConvergence : public Error {
public:
    using Error::Error;
};

class StepSizeUnderflow : public Error {
public:
    using Error::Error;
};

class EigenSolverFailure : public Error {
public:
    using Error::Error;
};

class PoleAtFrequency : public Error {
public:
    PoleAtFrequency(const std::string& what, double omega) : Error(what), omega_(omega) {}
    double omega() const noexcept { return omega_; }

private:
    double omega_;
};

class TailDivergence : public Error {
public:
    using Error::Error;
};

class DegenerateDenominator : public Error {
public:
    using Error::Error;
};

}  // namespace phonolase
