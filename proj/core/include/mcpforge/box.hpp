#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mcpforge/abstraction.hpp"
#include "mcpforge/embedding.hpp"

namespace mcpforge {

// Which metadata fields feed the retrieval context of an entry.
enum class ContextMode { both, description_only, use_case_only };

const char* to_string(ContextMode mode);
ContextMode parse_context_mode(std::string_view text);

inline constexpr char context_separator = '\n';

// description + '\n' + use_case (or one of them, per mode).
std::string compose_context(const AbstractedMcp& mcp, ContextMode mode = ContextMode::both);

struct BoxEntry {
    AbstractedMcp mcp;
    std::string context;
    EmbeddingVector embedding;

    bool operator==(const BoxEntry&) const = default;
};

inline constexpr int current_box_version = 2;

struct McpBox {
    int box_version = current_box_version;
    std::string embedder_id;
    std::size_t dims = 0;
    ContextMode context_mode = ContextMode::both;
    int iteration_count = 0;
    std::vector<BoxEntry> entries;  // ordered by provenance

    std::size_t size() const noexcept { return entries.size(); }
    const BoxEntry* find(const std::string& mcp_id) const;
    bool operator==(const McpBox&) const = default;
};

// Throws Error(input) when a box invariant does not hold.
void check_box(const McpBox& box);

McpBox build_box(const std::vector<AbstractedMcp>& mcps, Embedder& embedder,
                 ContextMode mode = ContextMode::both);

McpBox merge_boxes(const std::vector<McpBox>& boxes);

// Row-major M x M matrix of inner products of the stored unit vectors.
class SimilarityMatrix {
public:
    SimilarityMatrix() = default;
    explicit SimilarityMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }

    // Values of the strict upper triangle in row order.
    std::vector<double> upper_triangle() const;

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

SimilarityMatrix pairwise_similarity(const McpBox& box);

struct BoxStats {
    std::size_t mcp_count = 0;
    std::optional<double> mean_similarity;    // absent when M < 2
    std::optional<double> median_similarity;  // absent when M < 2
    std::size_t cluster_count = 0;
    double coverage_ratio = 0.0;
    double threshold = 0.7;
};

// Connected components of the graph linking pairs with similarity >= tau.
std::size_t count_components(const SimilarityMatrix& sim, double tau);

BoxStats compute_stats(const McpBox& box, double tau = 0.7);

json to_json(const BoxStats& stats);

// Binary box file: magic, manifest JSON, entry records, raw little-endian
// embedding block, trailing SHA-256 over everything before it.
void save_box(const McpBox& box, const std::filesystem::path& path);
McpBox load_box(const std::filesystem::path& path);

std::string serialize_box(const McpBox& box);
McpBox deserialize_box(const std::string& bytes);

}  // namespace mcpforge
