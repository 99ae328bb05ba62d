#include "ethcast/common.hpp"

#include <charconv>

namespace ethcast {

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Usage: return "usage error";
        case ErrorKind::Config: return "config error";
        case ErrorKind::Io: return "I/O error";
        case ErrorKind::Schema: return "schema error";
        case ErrorKind::Parse: return "parse error";
        case ErrorKind::EmptyInput: return "empty-input error";
        case ErrorKind::Duplicate: return "duplicate error";
        case ErrorKind::Continuity: return "continuity error";
        case ErrorKind::Split: return "split spec error";
        case ErrorKind::InsufficientData: return "insufficient-data error";
        case ErrorKind::Shape: return "shape error";
        case ErrorKind::NumericFailure: return "numeric failure";
        case ErrorKind::Integrity: return "integrity error";
    }
    return "error";
}

std::string format_double(double value) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, end);
}

}  // namespace ethcast
