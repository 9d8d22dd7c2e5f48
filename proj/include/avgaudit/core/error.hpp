#pragma once

#include <stdexcept>
#include <string>

namespace avgaudit {

// ---------------------------------------------------------------------------
// Error hierarchy. The CLI maps each family onto a process exit code:
//   ConfigError -> 2, DataError -> 3, AdapterError -> 4, NumericError -> 5.
// ---------------------------------------------------------------------------
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Bad input data: wrong shapes, too few items, unreadable files.
class DataError : public Error {
public:
    using Error::Error;
};

// PNG decode failures (unreadable file, unsupported depth or channel count).
class DecodeError : public DataError {
public:
    using DataError::DataError;
};

// Malformed binary or text formats (AVGI rasters, checkpoints, filter banks).
class FormatError : public DataError {
public:
    using DataError::DataError;
};

class AdapterError : public Error {
public:
    AdapterError(const std::string& what, std::string captured_stderr = {})
        : Error(what), stderr_(std::move(captured_stderr)) {}

    const std::string& captured_stderr() const noexcept { return stderr_; }

private:
    std::string stderr_;
};

// Divergence (NaN loss) and other numeric breakdowns.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace avgaudit
