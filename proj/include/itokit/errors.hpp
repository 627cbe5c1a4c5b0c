#pragma once

#include <stdexcept>
#include <string>

namespace itokit {

// Invalid configuration: bad dimensions, empty grids, mismatched drivers.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A mark measure that can neither be integrated analytically nor sampled.
class UnsupportedMeasureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Simulation produced a non-finite state.
class BlowupError : public std::runtime_error {
public:
    BlowupError(const std::string& what, double t)
        : std::runtime_error(what), first_bad_time(t) {}
    double first_bad_time;
};

// A ledger declined to evaluate because a required integral was flagged
// divergent and the caller did not force evaluation.
class LedgerRefusal : public std::runtime_error {
public:
    LedgerRefusal(const std::string& what, std::string term_name)
        : std::runtime_error(what), term(std::move(term_name)) {}
    std::string term;
};

} // namespace itokit
