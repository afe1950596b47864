#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace alignretrieve {

enum class ErrorKind {
    InvalidParameter,
    InvalidInput,
    InvalidConfig,
    DegenerateInput,
    StaleIndex,
    BackendUnavailable,
    MalformedResponse,
    NoInteriorOptimum,
    ClusterUnusable,
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

// Non-fatal warnings collected along a run. Callers that don't care pass null.
using Diagnostics = std::vector<std::string>;

inline void warn(Diagnostics* diags, std::string message) {
    if (diags != nullptr) {
        diags->push_back(std::move(message));
    }
}

}  // namespace alignretrieve
