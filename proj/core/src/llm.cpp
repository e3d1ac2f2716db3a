#include <httplib.h>

#include "mcpforge/llm.hpp"

#include "mcpforge/error.hpp"

namespace mcpforge {

SplitUrl split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) fail(ErrorKind::config, "endpoint URL needs a scheme: " + url);
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, ""};
    std::string path = url.substr(slash);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {url.substr(0, slash), path};
}

json post_json(const ApiEndpoint& endpoint, const std::string& path, const json& body) {
    const auto url = split_url(endpoint.base_url);
    httplib::Client client(url.origin);
    const auto secs = endpoint.timeout.count() / 1000;
    const auto usecs = (endpoint.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);

    auto res = client.Post(url.path + path, headers, body.dump(), "application/json");
    if (!res) {
        fail(ErrorKind::provider, "request to " + endpoint.base_url + path + " failed: " +
                                      httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        fail(ErrorKind::provider, "HTTP " + std::to_string(res->status) + " from " + endpoint.base_url + path +
                                      ": " + res->body.substr(0, 512));
    }
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        fail(ErrorKind::provider, std::string("non-JSON response: ") + e.what());
    }
}

HttpChatClient::HttpChatClient(ApiEndpoint endpoint, double temperature)
    : endpoint_(std::move(endpoint)), temperature_(temperature) {
    if (endpoint_.base_url.empty()) fail(ErrorKind::config, "chat endpoint URL is not configured");
    if (endpoint_.model.empty()) fail(ErrorKind::config, "chat model is not configured");
}

ChatResponse HttpChatClient::complete(const std::vector<ChatMessage>& messages) {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    json body{{"model", endpoint_.model}, {"messages", msgs}, {"temperature", temperature_}};
    const auto res = post_json(endpoint_, "/chat/completions", body);
    ChatResponse out;
    try {
        const auto& content = res.at("choices").at(0).at("message").at("content");
        out.content = content.is_string() ? content.get<std::string>() : std::string{};
    } catch (const json::exception& e) {
        fail(ErrorKind::provider, std::string("unexpected chat response shape: ") + e.what());
    }
    if (auto it = res.find("usage"); it != res.end() && it->is_object()) {
        out.total_tokens = it->value("total_tokens", 0L);
    }
    return out;
}

json extract_json_object(const std::string& text) {
    // Scan for a balanced {...} that parses, skipping braces inside strings.
    for (std::size_t start = text.find('{'); start != std::string::npos; start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (c == '\\') {
                    ++i;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}' && --depth == 0) {
                try {
                    auto j = json::parse(text.substr(start, i - start + 1));
                    if (j.is_object()) return j;
                } catch (const json::exception&) {
                }
                break;
            }
        }
    }
    fail(ErrorKind::input, "no JSON object found in model output");
}

}  // namespace mcpforge
