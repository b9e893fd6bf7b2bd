#pragma once

#include <stdexcept>
#include <string>

namespace latentfuse {

// Base of every error thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape or rank mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Parameters, weights or settings that cannot work together.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

// A caller broke an operation precondition (empty key set, street branch
// without street views, backward on a non-scalar, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

// Malformed input data: non-binary masks or targets, bad split fractions,
// mismatched report taxonomies, unreadable files.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A forward op produced NaN or Inf.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

// Training produced non-finite losses or gradients.
class DivergenceError : public Error {
public:
    using Error::Error;
};

} // namespace latentfuse
