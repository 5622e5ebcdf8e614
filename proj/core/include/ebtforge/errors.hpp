#pragma once

#include <stdexcept>
#include <string>

namespace ebtforge {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unit-level parse failure.
class ParseError : public Error {
public:
    ParseError(std::string path, int line, const std::string& what)
        : Error(path + ":" + std::to_string(line) + ": " + what), path_(std::move(path)), line_(line) {}

    [[nodiscard]] const std::string& path() const { return path_; }
    [[nodiscard]] int line() const { return line_; }

private:
    std::string path_;
    int line_;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

class PreparationError : public Error {
public:
    using Error::Error;
};

/// Trace and source disagree (call site or throw missing from a frame).
class AnalysisError : public Error {
public:
    using Error::Error;
};

/// Neither a recorded trace nor a static call path links MUT and throw.
class NoTraceError : public Error {
public:
    using Error::Error;
};

class BackendError : public Error {
public:
    using Error::Error;
};

class FixtureMissError : public BackendError {
public:
    explicit FixtureMissError(std::string hash)
        : BackendError("no replay fixture for prompt hash " + hash), hash_(std::move(hash)) {}
    [[nodiscard]] const std::string& hash() const { return hash_; }

private:
    std::string hash_;
};

/// Runner infrastructure failure (not a compile failure, which is a verdict).
class RunnerError : public Error {
public:
    using Error::Error;
};

}  // namespace ebtforge
