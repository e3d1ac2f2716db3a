#pragma once

#include <stdexcept>
#include <string>

namespace mcpforge {

// Broad failure classes. The CLI maps each one to a distinct exit code.
enum class ErrorKind {
    config,    // bad configuration or flag values
    input,     // malformed or invalid input data
    provider,  // LLM / embedding / tool backend failure
    corrupt,   // integrity check failed on a persisted artifact
    version,   // artifact written by an incompatible format version
    protocol,  // wire-protocol violation
    internal,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace mcpforge
