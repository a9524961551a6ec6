#pragma once

#include <stdexcept>
#include <string>

namespace gridstate {

/// Failure categories. The CLI maps each category onto a fixed exit code.
enum class ErrorKind {
    invalid_argument,  // bad sizes, non-finite inputs
    domain,            // load evaluated below its voltage floor
    singular,          // a linear solve hit a singular matrix
    no_convergence,    // Newton ran out of iterations
    infeasible,        // no steady state exists for the given data
    validation,        // physics/parameter validation failed
    parse,             // document syntax error
    schema,            // document structure error
    certification,     // a constructed steady state failed verification
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::domain: return "domain";
        case ErrorKind::singular: return "singular";
        case ErrorKind::no_convergence: return "no-convergence";
        case ErrorKind::infeasible: return "infeasible";
        case ErrorKind::validation: return "validation";
        case ErrorKind::parse: return "parse";
        case ErrorKind::schema: return "schema";
        case ErrorKind::certification: return "certification";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace gridstate
