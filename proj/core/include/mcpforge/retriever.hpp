#pragma once

#include <string>
#include <vector>

#include "mcpforge/box.hpp"

namespace mcpforge {

enum class SelectionMode { threshold, top_k };
enum class EmptyFallback { allow_empty, fall_back_top_1 };

const char* to_string(SelectionMode mode);
SelectionMode parse_selection_mode(std::string_view text);
const char* to_string(EmptyFallback fallback);
EmptyFallback parse_empty_fallback(std::string_view text);

inline constexpr double default_tau = 0.7;

struct SelectionConfig {
    SelectionMode mode = SelectionMode::threshold;
    double tau = default_tau;
    int k = 3;
    EmptyFallback empty_fallback = EmptyFallback::allow_empty;

    // Throws Error(config) for tau outside (0, 1] or k < 1.
    void check() const;
};

struct ScoredMcp {
    std::string mcp_id;
    double score = 0.0;
    bool operator==(const ScoredMcp&) const = default;
};

struct RetrievalResult {
    std::vector<ScoredMcp> scored;    // descending score, then ascending mcp_id
    std::vector<ScoredMcp> selected;  // subset of scored, same order
    std::string query_context;

    bool operator==(const RetrievalResult&) const = default;
};

json to_json(const RetrievalResult& result);

EmbeddingVector embed_query(const std::string& query, Embedder& embedder);

std::vector<ScoredMcp> score_all(const EmbeddingVector& query, const McpBox& box);

// Sorts a copy of the scores into the canonical order and applies the mode.
RetrievalResult select(std::vector<ScoredMcp> scores, const SelectionConfig& config);

RetrievalResult retrieve(const std::string& query, const McpBox& box,
                         const SelectionConfig& config, Embedder& embedder);

// Entries of the box that were selected, in selection order.
std::vector<AbstractedMcp> filtered_view(const McpBox& box, const RetrievalResult& result);

}  // namespace mcpforge
