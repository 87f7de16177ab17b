#pragma once

#include <stdexcept>
#include <string>

namespace mvc {

// Error taxonomy shared by the library and the CLI exit-code mapping.
enum class ErrorKind {
    invalid_argument,  // bad call-site arguments, violated preconditions
    config,            // inconsistent or unusable configuration
    shape,             // tensor/matrix dimension mismatch
    numeric,           // NaN/Inf propagation, divergence, degenerate steps
    storage,           // file I/O failures
    parse,             // malformed file contents
    leakage,           // train/test contamination
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) fail(kind, message);
}

}  // namespace mvc
