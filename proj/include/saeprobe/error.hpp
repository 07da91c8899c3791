#ifndef SAEPROBE_ERROR_HPP
#define SAEPROBE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace saeprobe {

enum class ErrorKind {
    Storage,            // I/O failure
    Format,             // bad magic, malformed structure
    UnsupportedVersion,
    Corruption,         // truncated or inconsistent payload
    Validation,         // non-finite values, invalid labels
    Shape,              // dimension mismatch
    Capacity,           // not enough examples/names to satisfy a request
    Configuration,
    DegenerateLabels,
    DegenerateVector,
    Training,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Storage: return "storage";
        case ErrorKind::Format: return "format";
        case ErrorKind::UnsupportedVersion: return "unsupported-version";
        case ErrorKind::Corruption: return "corruption";
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::Capacity: return "capacity";
        case ErrorKind::Configuration: return "configuration";
        case ErrorKind::DegenerateLabels: return "degenerate-labels";
        case ErrorKind::DegenerateVector: return "degenerate-vector";
        case ErrorKind::Training: return "training";
    }
    return "unknown";
}

}  // namespace saeprobe

#endif  // SAEPROBE_ERROR_HPP
