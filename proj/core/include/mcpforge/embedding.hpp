#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mcpforge/llm.hpp"

namespace mcpforge {

// Fixed-length real vector. Vectors stored in a box or produced for a query
// are unit l2-norm.
struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dims() const noexcept { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Returns the unit vector; throws Error(input) on zero, empty or non-finite input.
EmbeddingVector normalized(std::vector<double> values);

// phi. Implementations must be safe for concurrent calls.
class Embedder {
public:
    virtual ~Embedder() = default;
    // Raw (not necessarily normalized) embedding of each text.
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
    virtual std::string id() const = 0;
    virtual std::size_t dims() const = 0;
};

// Signed feature hashing over lowercase alphanumeric tokens. Deterministic
// and offline; texts sharing vocabulary score high.
class HashingEmbedder : public Embedder {
public:
    explicit HashingEmbedder(std::size_t dims = 256);
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
    std::string id() const override;
    std::size_t dims() const override { return dims_; }

private:
    std::size_t dims_;
};

// Returns recorded vectors for known texts. Unknown texts go to the fallback
// embedder if one is given, otherwise they fail.
class FixtureEmbedder : public Embedder {
public:
    FixtureEmbedder(std::string id, std::size_t dims,
                    std::map<std::string, std::vector<double>> table,
                    std::shared_ptr<Embedder> fallback = nullptr);
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
    std::string id() const override { return id_; }
    std::size_t dims() const override { return dims_; }

    void record(const std::string& text, std::vector<double> vector);
    const std::map<std::string, std::vector<double>>& table() const noexcept { return table_; }

private:
    std::string id_;
    std::size_t dims_;
    std::map<std::string, std::vector<double>> table_;
    std::shared_ptr<Embedder> fallback_;
};

// OpenAI-compatible POST {base_url}/embeddings.
class ApiEmbedder : public Embedder {
public:
    ApiEmbedder(ApiEndpoint endpoint, std::size_t dims);
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
    std::string id() const override;
    std::size_t dims() const override { return dims_; }

private:
    ApiEndpoint endpoint_;
    std::size_t dims_;
};

// Fixture table file: {"id": ..., "dims": n, "vectors": {text: [..]}}.
json to_json(const FixtureEmbedder& embedder);
std::shared_ptr<FixtureEmbedder> fixture_embedder_from_json(const json& j);
std::shared_ptr<FixtureEmbedder> load_fixture_embedder(const std::filesystem::path& path);

}  // namespace mcpforge
