#include "mcpforge/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "mcpforge/error.hpp"

namespace mcpforge {

void PipelineConfig::check() const {
    selection.check();
    if (embedder.dims == 0) fail(ErrorKind::config, "embedder.dims must be positive");
    if (max_retries < 0) fail(ErrorKind::config, "abstraction.max_retries must be >= 0");
    if (parallelism < 1) fail(ErrorKind::config, "parallelism must be >= 1");
    if (step_budget < 1) fail(ErrorKind::config, "step_budget must be >= 1");
    if (tool_timeout_ms <= 0) fail(ErrorKind::config, "executor.timeout_ms must be positive");
    if (validator.min_literal_length == 0) fail(ErrorKind::config, "abstraction.min_literal_length must be positive");
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) fail(ErrorKind::config, where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.contains(key)) fail(ErrorKind::config, "unknown config key: " + where + "." + key);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void read_provider(const json& j, ProviderSettings& p, const std::string& where, std::set<std::string> extra = {}) {
    extra.insert({"provider", "endpoint", "model", "api_key_env", "timeout_ms"});
    reject_unknown(j, extra, where);
    read(j, "provider", p.provider);
    read(j, "endpoint", p.endpoint);
    read(j, "model", p.model);
    read(j, "api_key_env", p.api_key_env);
    read(j, "timeout_ms", p.timeout_ms);
}

}  // namespace

PipelineConfig apply_config(PipelineConfig c, const json& j) {
    try {
        reject_unknown(j, {"embedder", "abstraction", "engine", "selection", "context_mode", "parallelism",
                           "step_budget", "executor"},
                       "config");
        if (auto e = j.find("embedder"); e != j.end()) {
            reject_unknown(*e, {"provider", "endpoint", "model", "dims", "table", "api_key_env", "timeout_ms"},
                           "embedder");
            read(*e, "provider", c.embedder.provider);
            read(*e, "endpoint", c.embedder.endpoint);
            read(*e, "model", c.embedder.model);
            read(*e, "dims", c.embedder.dims);
            read(*e, "table", c.embedder.table);
            read(*e, "api_key_env", c.embedder.api_key_env);
            read(*e, "timeout_ms", c.embedder.timeout_ms);
        }
        if (auto a = j.find("abstraction"); a != j.end()) {
            read_provider(*a, c.abstraction, "abstraction", {"prompt_template", "max_retries", "min_literal_length"});
            read(*a, "prompt_template", c.abstraction_prompt);
            read(*a, "max_retries", c.max_retries);
            read(*a, "min_literal_length", c.validator.min_literal_length);
        }
        if (auto en = j.find("engine"); en != j.end()) read_provider(*en, c.engine, "engine");
        if (auto s = j.find("selection"); s != j.end()) {
            reject_unknown(*s, {"mode", "tau", "k", "empty_fallback"}, "selection");
            if (s->contains("mode")) c.selection.mode = parse_selection_mode(s->at("mode").get<std::string>());
            read(*s, "tau", c.selection.tau);
            read(*s, "k", c.selection.k);
            if (s->contains("empty_fallback")) {
                c.selection.empty_fallback = parse_empty_fallback(s->at("empty_fallback").get<std::string>());
            }
        }
        if (j.contains("context_mode")) c.context_mode = parse_context_mode(j.at("context_mode").get<std::string>());
        read(j, "parallelism", c.parallelism);
        read(j, "step_budget", c.step_budget);
        if (auto x = j.find("executor"); x != j.end()) {
            reject_unknown(*x, {"timeout_ms", "output_cap"}, "executor");
            read(*x, "timeout_ms", c.tool_timeout_ms);
            read(*x, "output_cap", c.tool_output_cap);
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::config, std::string("config value has the wrong type: ") + e.what());
    }
    c.check();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::config, "cannot read config file: " + path.string());
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        fail(ErrorKind::config, "config file " + path.string() + ": " + e.what());
    }
    return apply_config(PipelineConfig{}, j);
}

json to_json(const PipelineConfig& c) {
    auto provider = [](const ProviderSettings& p) {
        return json{{"provider", p.provider},
                    {"endpoint", p.endpoint},
                    {"model", p.model},
                    {"api_key_env", p.api_key_env},
                    {"timeout_ms", p.timeout_ms}};
    };
    json abstraction = provider(c.abstraction);
    abstraction["prompt_template"] = c.abstraction_prompt;
    abstraction["max_retries"] = c.max_retries;
    abstraction["min_literal_length"] = c.validator.min_literal_length;
    return {{"embedder",
             {{"provider", c.embedder.provider},
              {"endpoint", c.embedder.endpoint},
              {"model", c.embedder.model},
              {"dims", c.embedder.dims},
              {"table", c.embedder.table},
              {"api_key_env", c.embedder.api_key_env},
              {"timeout_ms", c.embedder.timeout_ms}}},
            {"abstraction", abstraction},
            {"engine", provider(c.engine)},
            {"selection",
             {{"mode", to_string(c.selection.mode)},
              {"tau", c.selection.tau},
              {"k", c.selection.k},
              {"empty_fallback", to_string(c.selection.empty_fallback)}}},
            {"context_mode", to_string(c.context_mode)},
            {"parallelism", c.parallelism},
            {"step_budget", c.step_budget},
            {"executor", {{"timeout_ms", c.tool_timeout_ms}, {"output_cap", c.tool_output_cap}}}};
}

std::string resolve_api_key(const std::string& env_name) {
    if (env_name.empty()) return {};
    const char* v = std::getenv(env_name.c_str());
    return v ? std::string(v) : std::string{};
}

std::shared_ptr<Embedder> make_embedder(const EmbedderSettings& s) {
    if (s.provider == "hashing") return std::make_shared<HashingEmbedder>(s.dims);
    if (s.provider == "api") {
        ApiEndpoint ep{s.endpoint, s.model, resolve_api_key(s.api_key_env), std::chrono::milliseconds(s.timeout_ms)};
        return std::make_shared<ApiEmbedder>(std::move(ep), s.dims);
    }
    if (s.provider == "fixture") {
        if (s.table.empty()) fail(ErrorKind::config, "fixture embedder requires embedder.table");
        return load_fixture_embedder(s.table);
    }
    fail(ErrorKind::config, "unknown embedder provider: " + s.provider);
}

std::shared_ptr<ChatClient> make_chat_client(const ProviderSettings& s) {
    ApiEndpoint ep{s.endpoint, s.model, resolve_api_key(s.api_key_env), std::chrono::milliseconds(s.timeout_ms)};
    return std::make_shared<HttpChatClient>(std::move(ep));
}

}  // namespace mcpforge
