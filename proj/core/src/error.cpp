#include "mcpforge/error.hpp"

namespace mcpforge {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::input: return "input";
        case ErrorKind::provider: return "provider";
        case ErrorKind::corrupt: return "corrupt";
        case ErrorKind::version: return "version";
        case ErrorKind::protocol: return "protocol";
        case ErrorKind::internal: return "internal";
    }
    return "internal";
}

}  // namespace mcpforge
