#include <httplib.h>

#include "mcpforge/client.hpp"

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "mcpforge/error.hpp"
#include "mcpforge/protocol.hpp"

namespace mcpforge {

namespace rpc = protocol;

const char* to_string(ClientErrorKind kind) {
    switch (kind) {
        case ClientErrorKind::connection: return "connection";
        case ClientErrorKind::protocol: return "protocol";
        case ClientErrorKind::unknown_tool: return "unknown tool";
        case ClientErrorKind::validation: return "validation";
        case ClientErrorKind::timeout: return "timeout";
    }
    return "protocol";
}

namespace {

[[noreturn]] void client_fail(ClientErrorKind kind, const std::string& message) { throw ClientError(kind, message); }

void set_timeouts(httplib::Client& c, std::chrono::milliseconds t) {
    const auto secs = t.count() / 1000;
    const auto usecs = (t.count() % 1000) * 1000;
    c.set_connection_timeout(secs, usecs);
    c.set_read_timeout(secs, usecs);
    c.set_write_timeout(secs, usecs);
}

SplitUrl checked_url(const std::string& base_url) {
    try {
        return split_url(base_url);
    } catch (const Error& e) {
        client_fail(ClientErrorKind::connection, e.what());
    }
}

ToolStatus parse_status(const std::string& s) {
    for (auto st : {ToolStatus::ok, ToolStatus::tool_error, ToolStatus::timeout, ToolStatus::crashed}) {
        if (s == to_string(st)) return st;
    }
    client_fail(ClientErrorKind::protocol, "unknown tool status: " + s);
}

}  // namespace

// ---------------------------------------------------------------------------
// HTTP

HttpTransport::HttpTransport(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

json HttpTransport::post(const json& message, bool expect_body) {
    const auto url = checked_url(base_url_);
    httplib::Client client(url.origin);
    set_timeouts(client, timeout_);
    httplib::Headers headers;
    if (!session_id_.empty()) headers.emplace("Mcp-Session-Id", session_id_);
    auto res = client.Post(url.path + "/mcp", headers, message.dump(), "application/json");
    if (!res) client_fail(ClientErrorKind::connection, "cannot reach " + base_url_ + ": " + httplib::to_string(res.error()));
    if (res->has_header("Mcp-Session-Id")) session_id_ = res->get_header_value("Mcp-Session-Id");
    if (res->status == 202 && !expect_body) return nullptr;
    if (res->status != 200) {
        client_fail(ClientErrorKind::protocol, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 512));
    }
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        client_fail(ClientErrorKind::protocol, std::string("malformed response: ") + e.what());
    }
}

json HttpTransport::request(const json& message) { return post(message, true); }

void HttpTransport::notify(const json& message) { post(message, false); }

// ---------------------------------------------------------------------------
// stdio

StdioTransport::StdioTransport(const std::vector<std::string>& argv, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
    if (argv.empty()) client_fail(ClientErrorKind::connection, "empty server command");
    std::signal(SIGPIPE, SIG_IGN);
    int in[2], out[2];
    if (::pipe(in) != 0) client_fail(ClientErrorKind::connection, std::string("pipe: ") + std::strerror(errno));
    if (::pipe(out) != 0) {
        ::close(in[0]);
        ::close(in[1]);
        client_fail(ClientErrorKind::connection, std::string("pipe: ") + std::strerror(errno));
    }
    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);
    pid_ = ::fork();
    if (pid_ < 0) client_fail(ClientErrorKind::connection, std::string("fork: ") + std::strerror(errno));
    if (pid_ == 0) {
        ::dup2(in[0], STDIN_FILENO);
        ::dup2(out[1], STDOUT_FILENO);
        ::close(in[0]);
        ::close(in[1]);
        ::close(out[0]);
        ::close(out[1]);
        ::execvp(cargv[0], cargv.data());
        ::_exit(127);
    }
    ::close(in[0]);
    ::close(out[1]);
    to_child_ = in[1];
    from_child_ = out[0];
    ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
    ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);
}

StdioTransport::~StdioTransport() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    if (pid_ > 0) {
        // The server exits on stdin EOF; give it a moment before forcing it.
        for (int i = 0; i < 100; ++i) {
            if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
            ::usleep(10000);
        }
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, nullptr, 0);
    }
}

std::string StdioTransport::read_reply() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (true) {
        std::optional<std::string> frame;
        try {
            frame = decoder_.next();
        } catch (const Error& e) {
            client_fail(ClientErrorKind::protocol, e.what());
        }
        if (frame) return *frame;
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) client_fail(ClientErrorKind::timeout, "no reply from server");
        pollfd p{from_child_, POLLIN, 0};
        const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
        if (rc <= 0) continue;
        char buf[8192];
        const auto n = ::read(from_child_, buf, sizeof buf);
        if (n <= 0) client_fail(ClientErrorKind::connection, "server closed the connection");
        decoder_.feed({buf, static_cast<std::size_t>(n)});
    }
}

json StdioTransport::request(const json& message) {
    notify(message);
    while (true) {
        json reply;
        try {
            reply = json::parse(read_reply());
        } catch (const json::exception& e) {
            client_fail(ClientErrorKind::protocol, std::string("malformed response: ") + e.what());
        }
        // Skip server-initiated notifications.
        if (reply.contains("id") && reply["id"] == message.value("id", json(nullptr))) return reply;
    }
}

void StdioTransport::notify(const json& message) {
    try {
        rpc::write_frame(to_child_, message.dump());
    } catch (const Error& e) {
        client_fail(ClientErrorKind::connection, std::string("server unavailable: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Session

McpClient::McpClient(std::unique_ptr<McpTransport> transport, std::optional<std::string> query)
    : transport_(std::move(transport)), query_(std::move(query)) {}

McpClient McpClient::connect(std::unique_ptr<McpTransport> transport, std::optional<std::string> query) {
    if (!transport) client_fail(ClientErrorKind::connection, "no transport");
    McpClient client(std::move(transport), std::move(query));
    json params{{"protocolVersion", rpc::protocol_version},
                {"capabilities", json::object()},
                {"clientInfo", {{"name", "mcpforge-client"}, {"version", "1"}}}};
    if (client.query_) params["query"] = *client.query_;
    json result;
    try {
        result = client.call("initialize", params);
    } catch (const ClientError& e) {
        if (e.kind() == ClientErrorKind::timeout) throw;
        client_fail(ClientErrorKind::connection, std::string("handshake failed: ") + e.what());
    }
    if (!result.is_object() || !result.contains("protocolVersion")) {
        client_fail(ClientErrorKind::connection, "handshake failed: initialize result lacks protocolVersion");
    }
    client.session_id_ = result.value("sessionId", std::string{});
    client.transport_->notify(rpc::make_notification("notifications/initialized"));
    return client;
}

json McpClient::call(const std::string& method, json params) {
    const auto reply = transport_->request(rpc::make_request(next_id_++, method, std::move(params)));
    if (auto err = reply.find("error"); err != reply.end()) {
        const auto message = err->value("message", std::string("error"));
        const auto data = err->value("data", json::object());
        if (data.is_object() && data.value("kind", "") == "validation") client_fail(ClientErrorKind::validation, message);
        if (message.rfind("tool not available", 0) == 0) client_fail(ClientErrorKind::unknown_tool, message);
        client_fail(ClientErrorKind::protocol, message);
    }
    if (!reply.contains("result")) client_fail(ClientErrorKind::protocol, "response lacks a result");
    return reply["result"];
}

const std::vector<json>& McpClient::list_tools() {
    if (!tools_) {
        const auto result = call("tools/list", json::object());
        std::vector<json> tools;
        for (const auto& t : result.value("tools", json::array())) tools.push_back(t);
        tools_ = std::move(tools);
    }
    return *tools_;
}

ToolResult McpClient::call_tool(const std::string& name, const json& arguments) {
    const json* descriptor = nullptr;
    for (const auto& t : list_tools()) {
        if (t.value("name", "") == name) descriptor = &t;
    }
    if (!descriptor) client_fail(ClientErrorKind::unknown_tool, "tool not available in filtered set: " + name);
    AbstractedMcp shape;
    shape.mcp_id = name;
    shape.parameters = parameters_from_descriptor(*descriptor);
    try {
        validate_arguments(shape, arguments);
    } catch (const ArgumentError& e) {
        client_fail(ClientErrorKind::validation, e.what());
    }
    auto result = tool_result_from_payload(call("tools/call", {{"name", name}, {"arguments", arguments}}));
    if (result.status == ToolStatus::timeout) client_fail(ClientErrorKind::timeout, result.text + ": " + result.diagnostics);
    return result;
}

std::vector<ParameterSpec> parameters_from_descriptor(const json& descriptor) {
    std::vector<ParameterSpec> out;
    const auto schema = descriptor.value("inputSchema", json::object());
    const auto required = schema.value("required", json::array());
    const auto properties = schema.value("properties", json::object());
    for (const auto& [name, prop] : properties.items()) {
        ParameterSpec p;
        p.name = name;
        const auto tag = parse_type_tag(prop.value("type", "string"));
        if (!tag) client_fail(ClientErrorKind::protocol, "unknown parameter type in descriptor: " + prop.value("type", ""));
        p.type_tag = *tag;
        p.description = prop.value("description", "");
        p.required = std::find(required.begin(), required.end(), name) != required.end();
        if (prop.contains("default")) p.default_value = prop["default"];
        out.push_back(std::move(p));
    }
    return out;
}

ToolResult tool_result_from_payload(const json& payload) {
    if (!payload.is_object()) client_fail(ClientErrorKind::protocol, "tools/call result must be an object");
    ToolResult r;
    const auto content = payload.value("content", json::array());
    if (!content.empty() && content[0].value("type", "") == "text") r.text = content[0].value("text", "");
    const auto meta = payload.value("_meta", json::object());
    if (meta.contains("status")) {
        r.status = parse_status(meta["status"].get<std::string>());
    } else {
        r.status = payload.value("isError", false) ? ToolStatus::tool_error : ToolStatus::ok;
    }
    r.truncated = meta.value("truncated", false);
    r.diagnostics = meta.value("diagnostics", std::string{});
    return r;
}

RetrievalResult retrieval_from_json(const json& j) {
    auto list = [&](const char* key) {
        std::vector<ScoredMcp> out;
        for (const auto& s : j.at(key)) out.push_back({s.at("mcp_id").get<std::string>(), s.at("score").get<double>()});
        return out;
    };
    try {
        RetrievalResult r;
        r.query_context = j.at("query_context").get<std::string>();
        r.scored = list("scored");
        r.selected = list("selected");
        return r;
    } catch (const json::exception& e) {
        client_fail(ClientErrorKind::protocol, std::string("malformed retrieval result: ") + e.what());
    }
}

RetrievalResult remote_retrieve(const std::string& base_url, const std::string& query, const json& overrides) {
    const auto url = checked_url(base_url);
    httplib::Client client(url.origin);
    set_timeouts(client, std::chrono::seconds(30));
    json body = overrides.is_object() ? overrides : json::object();
    body["query"] = query;
    auto res = client.Post(url.path + "/retrieve", body.dump(), "application/json");
    if (!res) client_fail(ClientErrorKind::connection, "cannot reach " + base_url + ": " + httplib::to_string(res.error()));
    if (res->status != 200) {
        client_fail(ClientErrorKind::protocol, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 512));
    }
    try {
        return retrieval_from_json(json::parse(res->body));
    } catch (const json::exception& e) {
        client_fail(ClientErrorKind::protocol, std::string("malformed response: ") + e.what());
    }
}

}  // namespace mcpforge
