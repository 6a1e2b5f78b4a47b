#pragma once

#include <stdexcept>
#include <string>

namespace streetrisk {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

/// Malformed input: bad header, unknown identifier, violated precondition.
class InputError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "input_error"; }
};

/// All ratings fall in a single category, so chance agreement is 1.
class DegenerateAgreement : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "degenerate_agreement"; }
};

/// A GLM coefficient diverged past the configured cap.
class QuasiSeparation : public Error {
public:
    QuasiSeparation(std::string column, double value)
        : Error("quasi-separation on column '" + column + "' (|beta| = " + std::to_string(value) + ")"),
          column_(std::move(column)) {}
    const char* kind() const noexcept override { return "quasi_separation"; }
    const std::string& column() const noexcept { return column_; }

private:
    std::string column_;
};

/// Lorenz curve requested for a set with no observed outcomes.
class UndefinedLorenz : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "undefined_lorenz"; }
};

/// Transient provider or network failure; the caller may retry.
class RetriableError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "retriable_error"; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io_error"; }
};

} // namespace streetrisk
