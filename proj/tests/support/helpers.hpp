#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "mcpforge/abstraction.hpp"
#include "mcpforge/box.hpp"
#include "mcpforge/digest.hpp"
#include "mcpforge/embedding.hpp"

namespace testing {

using mcpforge::json;

inline std::filesystem::path fixture(const std::string& relative) {
    return std::filesystem::path(MCPFORGE_FIXTURE_DIR) / relative;
}

inline const char* fixture_tool() { return MCPFORGE_FIXTURE_TOOL; }

// Scratch directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("mcpforge-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// A valid abstracted tool with a single string parameter.
inline mcpforge::AbstractedMcp make_tool(const std::string& name, const std::string& description = {},
                                         const std::string& use_case = {}) {
    mcpforge::AbstractedMcp m;
    m.name = name;
    m.description = description.empty() ? "Tool " + name : description;
    m.use_case = use_case.empty() ? "Use case for " + name : use_case;
    m.parameters = {{"text", mcpforge::TypeTag::string, "Input text.", true, std::nullopt}};
    m.code = "def " + name + "(text):\n    return text\n";
    m.docstring = m.description;
    m.provenance = mcpforge::sha256_hex(std::string_view("provenance:" + name + ":" + m.description + m.use_case));
    m.mcp_id = mcpforge::make_mcp_id(m.name, m.provenance);
    m.runtime = mcpforge::BuiltinRuntime{"echo"};
    return m;
}

// Box whose i-th tool carries vectors[i] (normalized at build time).
struct VectorBox {
    mcpforge::McpBox box;
    std::shared_ptr<mcpforge::FixtureEmbedder> embedder;
};

inline VectorBox make_vector_box(const std::vector<std::vector<double>>& vectors, const std::string& prefix = "t",
                                 const std::string& embedder_id = "fixture/test") {
    const std::size_t dims = vectors.empty() ? 1 : vectors.front().size();
    std::map<std::string, std::vector<double>> table;
    std::vector<mcpforge::AbstractedMcp> tools;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        auto t = make_tool(prefix + std::to_string(i));
        table[mcpforge::compose_context(t)] = vectors[i];
        tools.push_back(std::move(t));
    }
    auto embedder = std::make_shared<mcpforge::FixtureEmbedder>(embedder_id, dims, table);
    auto box = mcpforge::build_box(tools, *embedder);
    return {std::move(box), std::move(embedder)};
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t dims) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dims);
    double norm = 0.0;
    do {
        for (auto& x : v) x = n(rng);
        norm = 0.0;
        for (double x : v) norm += x * x;
    } while (norm < 1e-12);
    return v;
}

}  // namespace testing
