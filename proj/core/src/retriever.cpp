#include "mcpforge/retriever.hpp"

#include <algorithm>
#include <cmath>

#include "mcpforge/error.hpp"

namespace mcpforge {

const char* to_string(SelectionMode mode) {
    return mode == SelectionMode::threshold ? "threshold" : "top_k";
}

SelectionMode parse_selection_mode(std::string_view text) {
    if (text == "threshold") return SelectionMode::threshold;
    if (text == "top_k" || text == "top-k" || text == "topk") return SelectionMode::top_k;
    fail(ErrorKind::config, "unknown selection mode: " + std::string(text));
}

const char* to_string(EmptyFallback fallback) {
    return fallback == EmptyFallback::allow_empty ? "allow_empty" : "fall_back_top_1";
}

EmptyFallback parse_empty_fallback(std::string_view text) {
    if (text == "allow_empty") return EmptyFallback::allow_empty;
    if (text == "fall_back_top_1") return EmptyFallback::fall_back_top_1;
    fail(ErrorKind::config, "unknown empty_fallback: " + std::string(text));
}

void SelectionConfig::check() const {
    if (!(tau > 0.0 && tau <= 1.0)) fail(ErrorKind::config, "tau must be in (0, 1]");
    if (k < 1) fail(ErrorKind::config, "k must be >= 1");
}

json to_json(const RetrievalResult& result) {
    auto list = [](const std::vector<ScoredMcp>& v) {
        json out = json::array();
        for (const auto& s : v) out.push_back({{"mcp_id", s.mcp_id}, {"score", s.score}});
        return out;
    };
    return {{"query_context", result.query_context},
            {"scored", list(result.scored)},
            {"selected", list(result.selected)}};
}

EmbeddingVector embed_query(const std::string& query, Embedder& embedder) {
    if (query.empty()) fail(ErrorKind::input, "query must be non-empty");
    std::vector<std::vector<double>> raw;
    try {
        raw = embedder.embed({query});
    } catch (const Error& e) {
        fail(ErrorKind::provider, std::string("embedding unavailable: ") + e.what());
    }
    if (raw.size() != 1) fail(ErrorKind::provider, "embedding unavailable: empty batch");
    if (raw.front().size() != embedder.dims()) fail(ErrorKind::provider, "embedding unavailable: wrong dims");
    return normalized(std::move(raw.front()));
}

std::vector<ScoredMcp> score_all(const EmbeddingVector& query, const McpBox& box) {
    if (!box.entries.empty() && query.dims() != box.dims) {
        fail(ErrorKind::input, "query has " + std::to_string(query.dims()) + " dims, box has " +
                                   std::to_string(box.dims));
    }
    std::vector<ScoredMcp> out;
    out.reserve(box.size());
    for (const auto& e : box.entries) {
        // Unit vectors, so the cosine is the inner product; clamp rounding drift.
        const double s = std::clamp(dot(query.values, e.embedding.values), -1.0, 1.0);
        out.push_back({e.mcp.mcp_id, s});
    }
    return out;
}

RetrievalResult select(std::vector<ScoredMcp> scores, const SelectionConfig& config) {
    std::sort(scores.begin(), scores.end(), [](const ScoredMcp& a, const ScoredMcp& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.mcp_id < b.mcp_id;
    });
    RetrievalResult out;
    if (config.mode == SelectionMode::threshold) {
        for (const auto& s : scores) {
            if (s.score >= config.tau) out.selected.push_back(s);
        }
        if (out.selected.empty() && !scores.empty() && config.empty_fallback == EmptyFallback::fall_back_top_1) {
            out.selected.push_back(scores.front());
        }
    } else {
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(config.k, 0)), scores.size());
        out.selected.assign(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k));
    }
    out.scored = std::move(scores);
    return out;
}

RetrievalResult retrieve(const std::string& query, const McpBox& box, const SelectionConfig& config,
                         Embedder& embedder) {
    config.check();
    if (query.empty()) fail(ErrorKind::input, "query must be non-empty");
    RetrievalResult out;
    if (!box.entries.empty()) {
        if (embedder.id() != box.embedder_id) {
            fail(ErrorKind::config, "embedder " + embedder.id() + " does not match box embedder " + box.embedder_id);
        }
        out = select(score_all(embed_query(query, embedder), box), config);
    }
    out.query_context = query;
    return out;
}

std::vector<AbstractedMcp> filtered_view(const McpBox& box, const RetrievalResult& result) {
    std::vector<AbstractedMcp> out;
    for (const auto& s : result.selected) {
        if (const auto* e = box.find(s.mcp_id)) out.push_back(e->mcp);
    }
    return out;
}

}  // namespace mcpforge
