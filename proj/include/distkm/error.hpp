#pragma once

#include <stdexcept>
#include <string>

namespace distkm {

/// Base of every error the library throws. `exit_code()` is the CLI status.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Malformed or out-of-contract input data (dimension mismatch, N < 2, ...).
class InputError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Invalid parameters or configuration (kernel params, grid sizes, presets).
class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Operation not defined for this payload (e.g. exact Gram on samples).
class ModeError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Synthetic generation failed (invalid intervals, infeasible Pearson draws).
class GenerationError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// I/O and decoding failures.
class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Too many failed replications in an experiment run.
class ReplicationError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

}  // namespace distkm
