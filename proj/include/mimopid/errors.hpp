#pragma once

#include <stdexcept>
#include <string>

namespace mimopid {

/// Runtime fault inside a control loop (non-finite signal, broken invariant).
class FaultError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Scenario file could not be parsed. Carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

/// Scenario parsed but violates an invariant or names an unknown key.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Scenario or output file could not be read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mimopid
