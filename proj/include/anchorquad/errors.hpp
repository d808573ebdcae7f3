#pragma once

#include <stdexcept>
#include <string>

namespace anchorquad {

/// Base of every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Errors caused by bad user input (arguments, specs, configs). The CLI maps these to exit code 2.
struct InputError : Error {
    using Error::Error;
};

struct DomainError : InputError {
    using InputError::InputError;
};
struct ShapeError : InputError {
    using InputError::InputError;
};
struct ParameterError : InputError {
    using InputError::InputError;
};
struct ConfigurationError : InputError {
    using InputError::InputError;
};

struct NotInSpaceError : Error {
    using Error::Error;
};
struct IntegrationError : Error {
    using Error::Error;
};
struct EnumerationError : Error {
    using Error::Error;
};
struct BudgetError : Error {
    using Error::Error;
};
struct UnsupportedFamilyError : Error {
    using Error::Error;
};
struct DegenerateInputError : Error {
    using Error::Error;
};
struct ClassError : Error {
    using Error::Error;
};

}  // namespace anchorquad
