#pragma once

#include <stdexcept>
#include <string>

namespace ch {

// Error taxonomy shared by the library and the CLI. The CLI maps kinds to
// exit codes (config -> 2, dependency -> 3, io -> 4, everything else -> 1).
enum class ErrorKind {
    config,      // bad configuration value or malformed config file
    data,        // malformed input data (CSV schema, parse, referential integrity)
    domain,      // value outside an operation's mathematical domain
    dependency,  // required stage output missing
    io,          // filesystem failure
    internal,    // invariant violation inside the library
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace ch
