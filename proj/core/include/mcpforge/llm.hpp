#pragma once

#include <chrono>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mcpforge {

using json = nlohmann::json;

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

struct ChatResponse {
    std::string content;
    long total_tokens = 0;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual ChatResponse complete(const std::vector<ChatMessage>& messages) = 0;
    virtual std::string model() const = 0;
};

struct ApiEndpoint {
    std::string base_url;  // e.g. "https://api.openai.com/v1"
    std::string model;
    std::string api_key;   // resolved from the environment, never argv
    std::chrono::milliseconds timeout{60000};
};

// Splits "https://host:port/prefix" into scheme+authority and path prefix.
struct SplitUrl {
    std::string origin;
    std::string path;
};
SplitUrl split_url(const std::string& url);

// OpenAI-compatible POST {base_url}/chat/completions.
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(ApiEndpoint endpoint, double temperature = 0.0);
    ChatResponse complete(const std::vector<ChatMessage>& messages) override;
    std::string model() const override { return endpoint_.model; }

private:
    ApiEndpoint endpoint_;
    double temperature_;
};

// Extracts the first top-level JSON object from model output, tolerating
// surrounding prose and ``` fences.
nlohmann::json extract_json_object(const std::string& text);

// POSTs a JSON body and returns the parsed JSON response. Shared by the chat
// and embedding clients. Throws Error(provider) on transport/HTTP failure.
nlohmann::json post_json(const ApiEndpoint& endpoint, const std::string& path,
                         const nlohmann::json& body);

}  // namespace mcpforge
