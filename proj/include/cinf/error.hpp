#pragma once

#include <stdexcept>
#include <string>

namespace cinf {

// Process exit codes used by the CLI.
enum class ExitCode : int {
    Ok = 0,
    Failure = 1,
    Config = 2,
    UpstreamMissing = 3,
    Numerical = 4,
};

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, ExitCode code = ExitCode::Failure)
        : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

// Malformed input files, bad records, empty inputs.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what, ExitCode::Failure) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what, ExitCode::Config) {}
};

class UpstreamMissingError : public Error {
public:
    explicit UpstreamMissingError(const std::string& what)
        : Error(what, ExitCode::UpstreamMissing) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what, ExitCode::Numerical) {}
};

}  // namespace cinf
