#pragma once

#include <stdexcept>
#include <string>

namespace skewcp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (bad fractions, levels, ids...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Problems with the data itself: malformed CSV, missing cells, dimension mismatch.
class DataError : public Error {
public:
    using Error::Error;
};

/// The calibration set is too small for the requested miscoverage level,
/// i.e. ceil((1 - alpha)(n + 1)) > n.
class AdmissibilityError : public Error {
public:
    using Error::Error;
};

} // namespace skewcp
