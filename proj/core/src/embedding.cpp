#include "mcpforge/embedding.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <mutex>

#include "mcpforge/error.hpp"

namespace mcpforge {

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) fail(ErrorKind::input, "dimension mismatch in dot product");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

double l2_norm(std::span<const double> v) {
    double sum = 0.0;
    for (double x : v) sum += x * x;
    return std::sqrt(sum);
}

EmbeddingVector normalized(std::vector<double> values) {
    if (values.empty()) fail(ErrorKind::input, "empty embedding");
    for (double x : values) {
        if (!std::isfinite(x)) fail(ErrorKind::input, "non-finite embedding component");
    }
    const double norm = l2_norm(values);
    if (!(norm > 0.0)) fail(ErrorKind::input, "zero embedding cannot be normalized");
    for (double& x : values) x /= norm;
    return EmbeddingVector{std::move(values)};
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

HashingEmbedder::HashingEmbedder(std::size_t dims) : dims_(dims) {
    if (dims_ == 0) fail(ErrorKind::config, "embedding dims must be positive");
}

std::string HashingEmbedder::id() const { return "hashing-v1/" + std::to_string(dims_); }

std::vector<std::vector<double>> HashingEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> v(dims_, 0.0);
        std::string token;
        bool any = false;
        auto flush = [&] {
            if (token.empty()) return;
            const auto h = fnv1a(token);
            v[h % dims_] += (h >> 63) ? -1.0 : 1.0;
            token.clear();
            any = true;
        };
        for (unsigned char c : text) {
            if (std::isalnum(c)) {
                token.push_back(static_cast<char>(std::tolower(c)));
            } else {
                flush();
            }
        }
        flush();
        bool nonzero = false;
        for (double x : v) nonzero = nonzero || x != 0.0;
        if (!any || !nonzero) {
            // Token-free (or fully cancelled) text still needs a direction.
            v[fnv1a(text) % dims_] = 1.0;
        }
        out.push_back(std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------------------

FixtureEmbedder::FixtureEmbedder(std::string id, std::size_t dims,
                                 std::map<std::string, std::vector<double>> table,
                                 std::shared_ptr<Embedder> fallback)
    : id_(std::move(id)), dims_(dims), table_(std::move(table)), fallback_(std::move(fallback)) {
    for (const auto& [text, v] : table_) {
        if (v.size() != dims_) fail(ErrorKind::input, "fixture vector has wrong dims for: " + text);
    }
    if (fallback_ && fallback_->dims() != dims_) fail(ErrorKind::config, "fallback embedder dims mismatch");
}

void FixtureEmbedder::record(const std::string& text, std::vector<double> vector) {
    if (vector.size() != dims_) fail(ErrorKind::input, "fixture vector has wrong dims");
    table_[text] = std::move(vector);
}

std::vector<std::vector<double>> FixtureEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        if (auto it = table_.find(text); it != table_.end()) {
            out.push_back(it->second);
        } else if (fallback_) {
            out.push_back(fallback_->embed({text}).front());
        } else {
            fail(ErrorKind::provider, "fixture embedder has no vector for text: " + text.substr(0, 80));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

ApiEmbedder::ApiEmbedder(ApiEndpoint endpoint, std::size_t dims) : endpoint_(std::move(endpoint)), dims_(dims) {
    if (endpoint_.base_url.empty()) fail(ErrorKind::config, "embedding endpoint URL is not configured");
    if (dims_ == 0) fail(ErrorKind::config, "embedding dims must be positive");
}

std::string ApiEmbedder::id() const { return "api:" + endpoint_.model + "/" + std::to_string(dims_); }

std::vector<std::vector<double>> ApiEmbedder::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    json body{{"model", endpoint_.model}, {"input", texts}, {"dimensions", dims_}};
    const auto res = post_json(endpoint_, "/embeddings", body);
    std::vector<std::vector<double>> out(texts.size());
    try {
        for (const auto& item : res.at("data")) {
            const auto index = item.value("index", std::size_t{0});
            if (index >= out.size()) fail(ErrorKind::provider, "embedding index out of range");
            out[index] = item.at("embedding").get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::provider, std::string("unexpected embedding response shape: ") + e.what());
    }
    for (const auto& v : out) {
        if (v.size() != dims_) {
            fail(ErrorKind::provider, "embedding has " + std::to_string(v.size()) + " dims, expected " +
                                          std::to_string(dims_));
        }
    }
    return out;
}

json to_json(const FixtureEmbedder& embedder) {
    json vectors = json::object();
    for (const auto& [text, v] : embedder.table()) vectors[text] = v;
    return {{"id", embedder.id()}, {"dims", embedder.dims()}, {"vectors", vectors}};
}

std::shared_ptr<FixtureEmbedder> fixture_embedder_from_json(const json& j) {
    try {
        std::map<std::string, std::vector<double>> table;
        for (const auto& [text, v] : j.at("vectors").items()) table[text] = v.get<std::vector<double>>();
        return std::make_shared<FixtureEmbedder>(j.at("id").get<std::string>(), j.at("dims").get<std::size_t>(),
                                                 std::move(table));
    } catch (const json::exception& e) {
        fail(ErrorKind::input, std::string("invalid fixture embedder table: ") + e.what());
    }
}

std::shared_ptr<FixtureEmbedder> load_fixture_embedder(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::input, "cannot read fixture embedder table: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::input, "fixture embedder table " + path.string() + ": " + e.what());
    }
    return fixture_embedder_from_json(j);
}

}  // namespace mcpforge
