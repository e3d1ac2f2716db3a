#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcpforge/executor.hpp"
#include "mcpforge/protocol.hpp"
#include "mcpforge/retriever.hpp"

namespace mcpforge {

enum class ClientErrorKind { connection, protocol, unknown_tool, validation, timeout };
const char* to_string(ClientErrorKind kind);

class ClientError : public std::runtime_error {
public:
    ClientError(ClientErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    ClientErrorKind kind() const noexcept { return kind_; }

private:
    ClientErrorKind kind_;
};

// Carries one JSON-RPC exchange to a server.
class McpTransport {
public:
    virtual ~McpTransport() = default;
    // Sends a request and returns the matching response.
    virtual json request(const json& message) = 0;
    virtual void notify(const json& message) = 0;
};

// POST {base_url}/mcp, echoing the Mcp-Session-Id header after initialize.
class HttpTransport : public McpTransport {
public:
    explicit HttpTransport(std::string base_url, std::chrono::milliseconds timeout = std::chrono::seconds(30));
    json request(const json& message) override;
    void notify(const json& message) override;

private:
    json post(const json& message, bool expect_body);

    std::string base_url_;
    std::chrono::milliseconds timeout_;
    std::string session_id_;
};

// Spawns `argv` and speaks framed JSON-RPC over its stdin and stdout.
class StdioTransport : public McpTransport {
public:
    explicit StdioTransport(const std::vector<std::string>& argv,
                            std::chrono::milliseconds timeout = std::chrono::seconds(30));
    ~StdioTransport() override;
    StdioTransport(const StdioTransport&) = delete;
    StdioTransport& operator=(const StdioTransport&) = delete;
    json request(const json& message) override;
    void notify(const json& message) override;

private:
    std::string read_reply();

    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::chrono::milliseconds timeout_;
    protocol::FrameDecoder decoder_;
};

// One MCP session. Not safe for concurrent calls.
class McpClient {
public:
    // Performs initialize; with a query the server exposes its filtered view.
    static McpClient connect(std::unique_ptr<McpTransport> transport, std::optional<std::string> query = {});

    const std::string& session_id() const noexcept { return session_id_; }
    const std::optional<std::string>& query() const noexcept { return query_; }
    // Descriptors are cached for the life of the session.
    const std::vector<json>& list_tools();
    // Validates against the cached descriptor before sending. Tool failures
    // come back in the result; timeouts, unknown tools and invalid arguments
    // raise ClientError.
    ToolResult call_tool(const std::string& name, const json& arguments);

private:
    McpClient(std::unique_ptr<McpTransport> transport, std::optional<std::string> query);
    json call(const std::string& method, json params);

    std::unique_ptr<McpTransport> transport_;
    std::optional<std::string> query_;
    std::string session_id_;
    std::optional<std::vector<json>> tools_;
    long next_id_ = 1;
};

// Parameter specs recovered from a tools/list descriptor.
std::vector<ParameterSpec> parameters_from_descriptor(const json& descriptor);

// Inverse of tool_result_payload.
ToolResult tool_result_from_payload(const json& payload);

// POST {base_url}/retrieve.
RetrievalResult remote_retrieve(const std::string& base_url, const std::string& query,
                                const json& overrides = json::object());
RetrievalResult retrieval_from_json(const json& j);

}  // namespace mcpforge
