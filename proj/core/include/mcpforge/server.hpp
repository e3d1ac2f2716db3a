#pragma once

#include <atomic>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mcpforge/executor.hpp"
#include "mcpforge/retriever.hpp"

namespace httplib {
class Server;
}

namespace mcpforge {

// One client session: a fixed filtered view of the box.
class ToolSession {
public:
    ToolSession(std::string id, std::optional<std::string> query, RetrievalResult retrieval,
                std::vector<AbstractedMcp> tools);

    const std::string& id() const noexcept { return id_; }
    const std::optional<std::string>& query() const noexcept { return query_; }
    const std::vector<AbstractedMcp>& tools() const noexcept { return tools_; }
    const AbstractedMcp* find_tool(const std::string& name) const;
    const RetrievalResult& retrieval() const noexcept { return retrieval_; }

private:
    std::string id_;
    std::optional<std::string> query_;
    RetrievalResult retrieval_;
    std::vector<AbstractedMcp> tools_;
};

struct ServerConfig {
    SelectionConfig selection;
    std::string server_name = "mcpforge";
    std::string server_version = "0.3.0";
};

// Transport-independent MCP request handling over an immutable box.
class ToolServer {
public:
    ToolServer(std::shared_ptr<const McpBox> box, std::shared_ptr<Embedder> embedder,
               std::shared_ptr<ToolExecutor> executor, ServerConfig config = {});

    // Creates a session. With no query the whole box is visible.
    std::shared_ptr<ToolSession> open_session(std::optional<std::string> query);
    std::shared_ptr<ToolSession> find_session(const std::string& id) const;

    // Handles one decoded JSON-RPC message. `session` is replaced on
    // initialize. Returns nullopt for notifications.
    std::optional<json> handle(const json& message, std::shared_ptr<ToolSession>& session);

    // Same, from raw frame text; malformed JSON yields a parse-error response.
    std::optional<json> handle_text(const std::string& text, std::shared_ptr<ToolSession>& session);

    // Serves frames until EOF. `query` seeds the session for clients that do
    // not send one in initialize.
    void serve_stdio(std::istream& in, std::ostream& out, std::optional<std::string> query = {});

    // Registers POST /mcp and POST /retrieve on `http`.
    void mount_http(httplib::Server& http);

    RetrievalResult retrieve(const std::string& query, const SelectionConfig& config) const;

    const McpBox& box() const noexcept { return *box_; }

private:
    json handle_initialize(const json& params, std::shared_ptr<ToolSession>& session);
    json handle_tools_list(const ToolSession& session) const;
    json handle_tools_call(const json& id, const json& params, const ToolSession& session);

    std::shared_ptr<const McpBox> box_;
    std::shared_ptr<Embedder> embedder_;
    std::shared_ptr<ToolExecutor> executor_;
    ServerConfig config_;

    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<ToolSession>> sessions_;
    std::atomic<unsigned long> next_session_{1};
};

// tools/call result body for an executed tool.
json tool_result_payload(const ToolResult& result);

}  // namespace mcpforge
