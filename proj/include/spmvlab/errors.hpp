#pragma once

#include <stdexcept>
#include <string>

namespace spmvlab {

/// Base class for all errors raised by this library.
class error : public std::runtime_error {
public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// A generation or benchmark spec failed validation (bad probabilities,
/// scale out of range, zero thread count, ...).
class invalid_spec_error : public error {
public:
    using error::error;
};

/// Requested density cannot be realized (more nonzeros than n*n cells).
class infeasible_density_error : public invalid_spec_error {
public:
    using invalid_spec_error::invalid_spec_error;
};

/// Dimension/index mismatch: out-of-range entries, non-square input where
/// square is required, vector length not matching the matrix.
class shape_error : public error {
public:
    using error::error;
};

/// Address-space layout for trace generation is invalid (overlap, alignment).
class layout_error : public error {
public:
    using error::error;
};

/// File or stream level failure: bad magic, truncation, unwritable path.
class io_error : public error {
public:
    using error::error;
};

/// The platform cannot provide a requested facility (hardware counters).
class capability_error : public error {
public:
    using error::error;
};

/// A metric is undefined for the given counters (zero denominator).
class metric_error : public error {
public:
    using error::error;
};

} // namespace spmvlab
