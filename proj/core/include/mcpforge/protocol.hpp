#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace mcpforge::protocol {

using json = nlohmann::json;

inline constexpr const char* protocol_version = "2025-06-18";

// JSON-RPC 2.0 error codes.
inline constexpr int parse_error = -32700;
inline constexpr int invalid_request = -32600;
inline constexpr int method_not_found = -32601;
inline constexpr int invalid_params = -32602;
inline constexpr int internal_error = -32603;

json make_request(const json& id, const std::string& method, json params = json::object());
json make_notification(const std::string& method, json params = json::object());
json make_result(const json& id, json result);
json make_error(const json& id, int code, const std::string& message, json data = nullptr);

// Frames are "Content-Length: N\r\n\r\n" followed by N bytes of JSON.
// A reader also accepts a bare JSON line, which is how many MCP clients
// speak stdio.
void write_frame(std::ostream& out, const std::string& payload);
void write_frame(int fd, const std::string& payload);

// nullopt on clean EOF. Throws Error(protocol) on a malformed header.
// `length_framed` reports whether the frame carried a Content-Length header.
std::optional<std::string> read_frame(std::istream& in, bool* length_framed = nullptr);

// Incremental decoder for raw byte streams (pipes with timeouts).
class FrameDecoder {
public:
    void feed(std::string_view bytes);
    std::optional<std::string> next();
    bool empty() const noexcept { return buffer_.empty(); }

private:
    std::string buffer_;
};

}  // namespace mcpforge::protocol
