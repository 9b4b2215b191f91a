#pragma once

#include <stdexcept>
#include <string>

namespace latentmark {

// Error taxonomy used across the toolkit. The CLI maps these onto exit codes
// (usage 2, validation 3, runtime 4).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : ValidationError {
    using ValidationError::ValidationError;
};

struct ParseError : ValidationError {
    using ValidationError::ValidationError;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

inline void check_shape(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

}  // namespace latentmark
