#include <httplib.h>

#include "mcpforge/server.hpp"

#include <istream>
#include <ostream>

#include "mcpforge/error.hpp"
#include "mcpforge/log.hpp"
#include "mcpforge/protocol.hpp"

namespace mcpforge {

namespace rpc = protocol;

ToolSession::ToolSession(std::string id, std::optional<std::string> query, RetrievalResult retrieval,
                         std::vector<AbstractedMcp> tools)
    : id_(std::move(id)), query_(std::move(query)), retrieval_(std::move(retrieval)), tools_(std::move(tools)) {}

const AbstractedMcp* ToolSession::find_tool(const std::string& name) const {
    for (const auto& t : tools_) {
        if (t.mcp_id == name) return &t;
    }
    return nullptr;
}

json tool_result_payload(const ToolResult& result) {
    json content = json::array({{{"type", "text"}, {"text", result.text}}});
    if (!result.ok() && !result.diagnostics.empty()) content.push_back({{"type", "text"}, {"text", result.diagnostics}});
    return {{"content", content},
            {"isError", !result.ok()},
            {"_meta",
             {{"status", to_string(result.status)},
              {"truncated", result.truncated},
              {"diagnostics", result.diagnostics}}}};
}

ToolServer::ToolServer(std::shared_ptr<const McpBox> box, std::shared_ptr<Embedder> embedder,
                       std::shared_ptr<ToolExecutor> executor, ServerConfig config)
    : box_(std::move(box)), embedder_(std::move(embedder)), executor_(std::move(executor)), config_(std::move(config)) {
    if (!box_) fail(ErrorKind::config, "server requires a loaded box");
    if (!executor_) fail(ErrorKind::config, "server requires an executor");
    config_.selection.check();
}

RetrievalResult ToolServer::retrieve(const std::string& query, const SelectionConfig& config) const {
    if (!embedder_) fail(ErrorKind::config, "server has no embedder; query filtering unavailable");
    return mcpforge::retrieve(query, *box_, config, *embedder_);
}

std::shared_ptr<ToolSession> ToolServer::open_session(std::optional<std::string> query) {
    RetrievalResult retrieval;
    std::vector<AbstractedMcp> tools;
    if (query && !query->empty()) {
        retrieval = retrieve(*query, config_.selection);
        tools = filtered_view(*box_, retrieval);
    } else {
        query.reset();
        for (const auto& e : box_->entries) tools.push_back(e.mcp);
    }
    auto id = "session-" + std::to_string(next_session_++);
    auto session = std::make_shared<ToolSession>(id, std::move(query), std::move(retrieval), std::move(tools));
    std::lock_guard lock(sessions_mutex_);
    sessions_[id] = session;
    return session;
}

std::shared_ptr<ToolSession> ToolServer::find_session(const std::string& id) const {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

json ToolServer::handle_initialize(const json& params, std::shared_ptr<ToolSession>& session) {
    std::optional<std::string> query;
    if (auto it = params.find("query"); it != params.end() && it->is_string()) query = it->get<std::string>();
    if (!query && session && session->query()) query = session->query();
    session = open_session(query);
    json selected = json::array();
    for (const auto& t : session->tools()) selected.push_back(t.mcp_id);
    return {{"protocolVersion", rpc::protocol_version},
            {"capabilities", {{"tools", {{"listChanged", false}}}}},
            {"serverInfo", {{"name", config_.server_name}, {"version", config_.server_version}}},
            {"sessionId", session->id()},
            {"_meta", {{"query", session->query() ? json(*session->query()) : json(nullptr)},
                       {"selected", selected}}}};
}

json ToolServer::handle_tools_list(const ToolSession& session) const {
    json tools = json::array();
    for (const auto& t : session.tools()) tools.push_back(tool_descriptor(t));
    return {{"tools", tools}};
}

json ToolServer::handle_tools_call(const json& id, const json& params, const ToolSession& session) {
    if (!params.is_object() || !params.contains("name") || !params["name"].is_string()) {
        return rpc::make_error(id, rpc::invalid_params, "tools/call requires a string 'name'");
    }
    const auto name = params["name"].get<std::string>();
    const auto arguments = params.value("arguments", json::object());
    const auto* tool = session.find_tool(name);
    if (!tool) return rpc::make_error(id, rpc::invalid_params, "tool not available in filtered set: " + name);
    try {
        validate_arguments(*tool, arguments);
    } catch (const ArgumentError& e) {
        return rpc::make_error(id, rpc::invalid_params, e.what(), {{"kind", "validation"}});
    }
    ToolResult result;
    try {
        result = executor_->execute(*tool, arguments);
    } catch (const ArgumentError& e) {
        return rpc::make_error(id, rpc::invalid_params, e.what(), {{"kind", "validation"}});
    } catch (const std::exception& e) {
        result.status = ToolStatus::crashed;
        result.text = "tool crashed";
        result.diagnostics = e.what();
    }
    return rpc::make_result(id, tool_result_payload(result));
}

std::optional<json> ToolServer::handle(const json& message, std::shared_ptr<ToolSession>& session) {
    if (!message.is_object()) return rpc::make_error(nullptr, rpc::invalid_request, "message must be a JSON object");
    const bool has_id = message.contains("id");
    const json id = has_id ? message["id"] : json(nullptr);
    if (has_id && !(id.is_string() || id.is_number() || id.is_null())) {
        return rpc::make_error(nullptr, rpc::invalid_request, "invalid id");
    }
    auto mit = message.find("method");
    if (mit == message.end()) {
        if (message.contains("result") || message.contains("error")) return std::nullopt;  // stray response
        return rpc::make_error(id, rpc::invalid_request, "missing method");
    }
    if (!mit->is_string()) return rpc::make_error(id, rpc::invalid_request, "method must be a string");
    const auto method = mit->get<std::string>();
    const json params = message.value("params", json::object());
    if (!params.is_object()) return has_id ? std::optional<json>(rpc::make_error(id, rpc::invalid_params, "params must be an object")) : std::nullopt;

    try {
        if (method == "initialize") {
            auto result = handle_initialize(params, session);
            return has_id ? std::optional<json>(rpc::make_result(id, std::move(result))) : std::nullopt;
        }
        if (!has_id) return std::nullopt;  // notifications, including notifications/initialized
        if (method == "ping") return rpc::make_result(id, json::object());
        if (!session) session = open_session(std::nullopt);
        if (method == "tools/list") return rpc::make_result(id, handle_tools_list(*session));
        if (method == "tools/call") return handle_tools_call(id, params, *session);
        return rpc::make_error(id, rpc::method_not_found, "method not found: " + method);
    } catch (const Error& e) {
        return rpc::make_error(id, rpc::internal_error, e.what(), {{"kind", to_string(e.kind())}});
    }
}

std::optional<json> ToolServer::handle_text(const std::string& text, std::shared_ptr<ToolSession>& session) {
    json message;
    try {
        message = json::parse(text);
    } catch (const json::exception& e) {
        return rpc::make_error(nullptr, rpc::parse_error, std::string("parse error: ") + e.what());
    }
    return handle(message, session);
}

void ToolServer::serve_stdio(std::istream& in, std::ostream& out, std::optional<std::string> query) {
    std::shared_ptr<ToolSession> session;
    if (query) session = open_session(query);
    while (true) {
        bool framed = true;
        std::optional<std::string> frame;
        try {
            frame = rpc::read_frame(in, &framed);
        } catch (const Error& e) {
            log::warn(std::string("stdio: ") + e.what());
            if (in.eof()) break;
            rpc::write_frame(out, rpc::make_error(nullptr, rpc::parse_error, e.what()).dump());
            continue;
        }
        if (!frame) break;
        auto reply = handle_text(*frame, session);
        if (!reply) continue;
        if (framed) {
            rpc::write_frame(out, reply->dump());
        } else {
            out << reply->dump() << '\n';
            out.flush();
        }
    }
}

void ToolServer::mount_http(httplib::Server& http) {
    http.Post("/mcp", [this](const httplib::Request& req, httplib::Response& res) {
        std::shared_ptr<ToolSession> session;
        if (req.has_header("Mcp-Session-Id")) {
            session = find_session(req.get_header_value("Mcp-Session-Id"));
            if (!session) {
                res.status = 404;
                res.set_content(rpc::make_error(nullptr, rpc::invalid_request, "unknown session").dump(),
                                "application/json");
                return;
            }
        }
        auto reply = handle_text(req.body, session);
        if (session) res.set_header("Mcp-Session-Id", session->id());
        if (!reply) {
            res.status = 202;
            return;
        }
        res.set_content(reply->dump(), "application/json");
    });

    http.Post("/retrieve", [this](const httplib::Request& req, httplib::Response& res) {
        auto bad = [&](int status, const std::string& msg) {
            res.status = status;
            res.set_content(json{{"error", msg}}.dump(), "application/json");
        };
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            return bad(400, std::string("invalid JSON: ") + e.what());
        }
        try {
            if (!body.is_object() || !body.contains("query") || !body["query"].is_string()) {
                return bad(400, "body requires a string 'query'");
            }
            SelectionConfig cfg = config_.selection;
            if (body.contains("mode")) cfg.mode = parse_selection_mode(body["mode"].get<std::string>());
            if (body.contains("tau")) cfg.tau = body["tau"].get<double>();
            if (body.contains("k")) cfg.k = body["k"].get<int>();
            if (body.contains("empty_fallback")) cfg.empty_fallback = parse_empty_fallback(body["empty_fallback"].get<std::string>());
            res.set_content(to_json(retrieve(body["query"].get<std::string>(), cfg)).dump(), "application/json");
        } catch (const Error& e) {
            bad(e.kind() == ErrorKind::provider ? 502 : 400, e.what());
        } catch (const json::exception& e) {
            bad(400, e.what());
        }
    });

    http.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"status":"ok"})", "application/json");
    });
}

}  // namespace mcpforge
