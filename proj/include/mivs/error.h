#pragma once

#include <stdexcept>
#include <string>

namespace mivs {

// Base of every error raised by the library. `kind()` is a stable machine
// readable tag used by the CLI's error JSON.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept { return "error"; }
};

// Input-side failures: unreadable files, malformed cells, schema mismatches.
class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io"; }
};

class ParseError : public IoError {
public:
    using IoError::IoError;
    const char* kind() const noexcept override { return "parse"; }
};

class SchemaError : public IoError {
public:
    using IoError::IoError;
    const char* kind() const noexcept override { return "schema"; }
};

// Bad configuration: unknown column references, invalid parameters.
class SpecError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "spec"; }
};

class CalibrationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "calibration"; }
};

class ImputationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "imputation"; }
};

class FitError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "fit"; }
};

class SelectionError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "selection"; }
};

class PipelineError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "pipeline"; }
};

} // namespace mivs
