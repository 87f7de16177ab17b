#include "mvc/errors.hpp"

namespace mvc {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::config: return "config";
        case ErrorKind::shape: return "shape";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::storage: return "storage";
        case ErrorKind::parse: return "parse";
        case ErrorKind::leakage: return "leakage";
    }
    return "unknown";
}

}  // namespace mvc
