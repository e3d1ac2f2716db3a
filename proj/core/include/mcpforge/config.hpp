#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "mcpforge/abstraction.hpp"
#include "mcpforge/box.hpp"
#include "mcpforge/embedding.hpp"
#include "mcpforge/llm.hpp"
#include "mcpforge/retriever.hpp"

namespace mcpforge {

struct ProviderSettings {
    std::string provider = "mock";  // "mock" | "api"
    std::string endpoint;
    std::string model;
    // Name of the environment variable holding the API token.
    std::string api_key_env = "MCPFORGE_API_KEY";
    long timeout_ms = 60000;
};

inline ProviderSettings scripted_engine_settings() {
    ProviderSettings p;
    p.provider = "scripted";  // "scripted" | "api"
    return p;
}

struct EmbedderSettings {
    std::string provider = "hashing";  // "hashing" | "api" | "fixture"
    std::string endpoint;
    std::string model = "text-embedding-3-large";
    std::size_t dims = 256;
    // Fixture provider only: vector table file.
    std::string table;
    std::string api_key_env = "MCPFORGE_API_KEY";
    long timeout_ms = 60000;
};

struct PipelineConfig {
    EmbedderSettings embedder;
    ProviderSettings abstraction;
    std::string abstraction_prompt = LlmAbstractionProvider::default_prompt_template();
    int max_retries = 2;
    ValidatorConfig validator;
    ProviderSettings engine = scripted_engine_settings();
    SelectionConfig selection;
    ContextMode context_mode = ContextMode::both;
    int parallelism = 1;
    int step_budget = 20;
    long tool_timeout_ms = 10000;
    std::size_t tool_output_cap = 64 * 1024;

    // Throws Error(config) on out-of-range values.
    void check() const;
};

// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
PipelineConfig apply_config(PipelineConfig base, const json& j);
PipelineConfig load_config(const std::filesystem::path& path);
json to_json(const PipelineConfig& config);

// Looks the token up in the environment; empty when unset.
std::string resolve_api_key(const std::string& env_name);

std::shared_ptr<Embedder> make_embedder(const EmbedderSettings& settings);
std::shared_ptr<ChatClient> make_chat_client(const ProviderSettings& settings);

}  // namespace mcpforge
