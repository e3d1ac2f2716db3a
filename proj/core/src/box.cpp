#include "mcpforge/box.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "mcpforge/digest.hpp"
#include "mcpforge/error.hpp"

namespace mcpforge {

const char* to_string(ContextMode mode) {
    switch (mode) {
        case ContextMode::both: return "both";
        case ContextMode::description_only: return "description_only";
        case ContextMode::use_case_only: return "use_case_only";
    }
    return "both";
}

ContextMode parse_context_mode(std::string_view text) {
    if (text == "both") return ContextMode::both;
    if (text == "description_only" || text == "description") return ContextMode::description_only;
    if (text == "use_case_only" || text == "use_case") return ContextMode::use_case_only;
    fail(ErrorKind::config, "unknown context mode: " + std::string(text));
}

std::string compose_context(const AbstractedMcp& mcp, ContextMode mode) {
    switch (mode) {
        case ContextMode::description_only: return mcp.description;
        case ContextMode::use_case_only: return mcp.use_case;
        case ContextMode::both: break;
    }
    std::string out;
    out.reserve(mcp.description.size() + 1 + mcp.use_case.size());
    out += mcp.description;
    out += context_separator;
    out += mcp.use_case;
    return out;
}

const BoxEntry* McpBox::find(const std::string& mcp_id) const {
    for (const auto& e : entries) {
        if (e.mcp.mcp_id == mcp_id) return &e;
    }
    return nullptr;
}

void check_box(const McpBox& box) {
    std::set<std::string> ids;
    for (const auto& e : box.entries) {
        if (!ids.insert(e.mcp.mcp_id).second) fail(ErrorKind::input, "duplicate mcp_id in box: " + e.mcp.mcp_id);
        if (e.embedding.dims() != box.dims) fail(ErrorKind::input, "embedding dims mismatch for " + e.mcp.mcp_id);
        for (double x : e.embedding.values) {
            if (!std::isfinite(x)) fail(ErrorKind::input, "non-finite embedding for " + e.mcp.mcp_id);
        }
        if (std::abs(l2_norm(e.embedding.values) - 1.0) > 1e-9) {
            fail(ErrorKind::input, "embedding is not unit norm for " + e.mcp.mcp_id);
        }
        if (e.context != compose_context(e.mcp, box.context_mode)) {
            fail(ErrorKind::input, "stale retrieval context for " + e.mcp.mcp_id);
        }
    }
}

namespace {

void sort_entries(std::vector<BoxEntry>& entries) {
    std::stable_sort(entries.begin(), entries.end(), [](const BoxEntry& a, const BoxEntry& b) {
        return std::tie(a.mcp.provenance, a.mcp.mcp_id) < std::tie(b.mcp.provenance, b.mcp.mcp_id);
    });
}

}  // namespace

McpBox build_box(const std::vector<AbstractedMcp>& mcps, Embedder& embedder, ContextMode mode) {
    McpBox box;
    box.embedder_id = embedder.id();
    box.dims = embedder.dims();
    box.context_mode = mode;
    box.iteration_count = 1;

    std::set<std::string> ids;
    std::vector<std::string> contexts;
    for (const auto& m : mcps) {
        if (!ids.insert(m.mcp_id).second) fail(ErrorKind::input, "duplicate mcp_id: " + m.mcp_id);
        if (m.description.empty() || m.use_case.empty()) {
            fail(ErrorKind::input, "MCP lacks description or use_case: " + m.mcp_id);
        }
        contexts.push_back(compose_context(m, mode));
    }
    if (mcps.empty()) return box;

    std::vector<std::vector<double>> vectors;
    try {
        vectors = embedder.embed(contexts);
        if (vectors.size() != mcps.size()) fail(ErrorKind::provider, "embedder returned wrong batch size");
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::provider) throw;
        std::string ids_text;
        for (const auto& m : mcps) ids_text += (ids_text.empty() ? "" : ", ") + m.mcp_id;
        fail(ErrorKind::provider, std::string(e.what()) + "; unembedded: " + ids_text);
    }
    for (std::size_t i = 0; i < mcps.size(); ++i) {
        if (vectors[i].size() != box.dims) {
            fail(ErrorKind::provider, "embedding dimension mismatch for " + mcps[i].mcp_id + ": got " +
                                          std::to_string(vectors[i].size()) + ", expected " +
                                          std::to_string(box.dims));
        }
        box.entries.push_back({mcps[i], std::move(contexts[i]), normalized(std::move(vectors[i]))});
    }
    sort_entries(box.entries);
    return box;
}

McpBox merge_boxes(const std::vector<McpBox>& boxes) {
    McpBox out;
    if (boxes.empty()) return out;
    out.embedder_id = boxes.front().embedder_id;
    out.dims = boxes.front().dims;
    out.context_mode = boxes.front().context_mode;
    std::set<std::string> seen;
    for (const auto& b : boxes) {
        if (b.embedder_id != out.embedder_id || b.dims != out.dims) {
            fail(ErrorKind::input, "cannot merge boxes from different embedders: " + out.embedder_id + " vs " +
                                       b.embedder_id);
        }
        if (b.context_mode != out.context_mode) fail(ErrorKind::input, "cannot merge boxes with different context modes");
        out.iteration_count += b.iteration_count;
        for (const auto& e : b.entries) {
            if (seen.insert(e.mcp.provenance).second) out.entries.push_back(e);
        }
    }
    sort_entries(out.entries);
    check_box(out);
    return out;
}

std::vector<double> SimilarityMatrix::upper_triangle() const {
    std::vector<double> out;
    if (n_ >= 2) out.reserve(n_ * (n_ - 1) / 2);
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i + 1; j < n_; ++j) out.push_back((*this)(i, j));
    }
    return out;
}

SimilarityMatrix pairwise_similarity(const McpBox& box) {
    const auto n = box.size();
    if (n < 2) fail(ErrorKind::input, "insufficient entries: pairwise similarity needs at least 2");
    SimilarityMatrix sim(n);
    for (std::size_t i = 0; i < n; ++i) {
        sim(i, i) = dot(box.entries[i].embedding.values, box.entries[i].embedding.values);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = dot(box.entries[i].embedding.values, box.entries[j].embedding.values);
            sim(i, j) = s;
            sim(j, i) = s;
        }
    }
    return sim;
}

std::size_t count_components(const SimilarityMatrix& sim, double tau) {
    const auto n = sim.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    std::size_t components = n;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (sim(i, j) < tau) continue;
            const auto a = find(i);
            const auto b = find(j);
            if (a != b) {
                parent[a] = b;
                --components;
            }
        }
    }
    return components;
}

BoxStats compute_stats(const McpBox& box, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) fail(ErrorKind::config, "tau must be in (0, 1], got " + std::to_string(tau));
    if (box.size() == 0) fail(ErrorKind::input, "cannot compute statistics of an empty box");

    BoxStats stats;
    stats.mcp_count = box.size();
    stats.threshold = tau;
    if (box.size() == 1) {
        stats.cluster_count = 1;
        stats.coverage_ratio = 1.0;
        return stats;
    }
    const auto sim = pairwise_similarity(box);
    auto pairs = sim.upper_triangle();
    stats.mean_similarity = std::accumulate(pairs.begin(), pairs.end(), 0.0) / static_cast<double>(pairs.size());
    std::sort(pairs.begin(), pairs.end());
    const auto mid = pairs.size() / 2;
    stats.median_similarity = pairs.size() % 2 == 1 ? pairs[mid] : 0.5 * (pairs[mid - 1] + pairs[mid]);
    stats.cluster_count = count_components(sim, tau);
    stats.coverage_ratio = static_cast<double>(stats.cluster_count) / static_cast<double>(stats.mcp_count);
    return stats;
}

json to_json(const BoxStats& stats) {
    json j{{"mcp_count", stats.mcp_count},
           {"cluster_count", stats.cluster_count},
           {"coverage_ratio", stats.coverage_ratio},
           {"threshold", stats.threshold}};
    j["mean_similarity"] = stats.mean_similarity ? json(*stats.mean_similarity) : json(nullptr);
    j["median_similarity"] = stats.median_similarity ? json(*stats.median_similarity) : json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr std::string_view magic{"MCPBOX\0\n", 8};
constexpr std::size_t digest_size = 64;  // hex SHA-256

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

[[noreturn]] void corrupt(const std::string& why) { fail(ErrorKind::corrupt, "corrupt box: " + why); }

}  // namespace

std::string serialize_box(const McpBox& box) {
    std::vector<std::string> records;
    json index = json::array();
    for (const auto& e : box.entries) {
        records.push_back(json{{"mcp", to_json(e.mcp)}, {"context", e.context}}.dump());
        index.push_back({{"mcp_id", e.mcp.mcp_id}, {"record_bytes", records.back().size()}});
    }
    const json manifest{{"box_version", box.box_version},
                        {"embedder_id", box.embedder_id},
                        {"dims", box.dims},
                        {"context_mode", to_string(box.context_mode)},
                        {"separator", std::string(1, context_separator)},
                        {"iteration_count", box.iteration_count},
                        {"entries", index}};
    const auto manifest_text = manifest.dump();

    std::string out(magic);
    put_u64(out, manifest_text.size());
    out += manifest_text;
    for (const auto& r : records) out += r;
    for (const auto& e : box.entries) {
        for (double x : e.embedding.values) put_u64(out, std::bit_cast<std::uint64_t>(x));
    }
    out += sha256_hex(out);
    return out;
}

McpBox deserialize_box(const std::string& bytes) {
    const std::string_view in(bytes);
    if (in.size() < magic.size() + 8 + digest_size || in.substr(0, magic.size()) != magic) {
        corrupt("bad header");
    }
    const auto manifest_len = get_u64(in, magic.size());
    std::size_t pos = magic.size() + 8;
    if (manifest_len > in.size() - pos) corrupt("truncated manifest");

    json manifest;
    try {
        manifest = json::parse(in.substr(pos, manifest_len));
    } catch (const json::exception&) {
        corrupt("unreadable manifest");
    }
    pos += manifest_len;

    McpBox box;
    std::vector<std::size_t> record_sizes;
    try {
        box.box_version = manifest.at("box_version").get<int>();
        if (box.box_version != current_box_version) {
            fail(ErrorKind::version, "unsupported box version " + std::to_string(box.box_version) +
                                         " (this build reads version " + std::to_string(current_box_version) +
                                         "); rebuild the box");
        }
        box.embedder_id = manifest.at("embedder_id").get<std::string>();
        box.dims = manifest.at("dims").get<std::size_t>();
        box.context_mode = parse_context_mode(manifest.at("context_mode").get<std::string>());
        box.iteration_count = manifest.at("iteration_count").get<int>();
        if (box.dims > (1u << 20)) corrupt("implausible dims");
        if (manifest.value("separator", std::string(1, context_separator)) != std::string(1, context_separator)) {
            corrupt("unexpected context separator");
        }
        for (const auto& e : manifest.at("entries")) record_sizes.push_back(e.at("record_bytes").get<std::size_t>());
    } catch (const json::exception&) {
        corrupt("incomplete manifest");
    }

    std::size_t expected = pos + digest_size;
    for (auto s : record_sizes) expected += s;
    expected += record_sizes.size() * box.dims * 8;
    if (in.size() != expected) corrupt(in.size() < expected ? "truncated embedding block" : "trailing bytes");
    const auto body = in.substr(0, in.size() - digest_size);
    if (sha256_hex(body) != in.substr(in.size() - digest_size)) corrupt("digest mismatch");

    for (auto size : record_sizes) {
        BoxEntry e;
        try {
            const auto r = json::parse(in.substr(pos, size));
            e.mcp = abstracted_from_json(r.at("mcp"));
            e.context = r.at("context").get<std::string>();
        } catch (const json::exception&) {
            corrupt("unreadable entry record");
        }
        box.entries.push_back(std::move(e));
        pos += size;
    }
    for (auto& e : box.entries) {
        e.embedding.values.resize(box.dims);
        for (auto& x : e.embedding.values) {
            x = std::bit_cast<double>(get_u64(in, pos));
            pos += 8;
        }
    }
    try {
        check_box(box);
    } catch (const Error& err) {
        corrupt(err.what());
    }
    return box;
}

void save_box(const McpBox& box, const std::filesystem::path& path) {
    const auto bytes = serialize_box(box);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::input, "cannot write box file: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::input, "short write to box file: " + path.string());
}

McpBox load_box(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::input, "cannot read box file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_box(buf.str());
}

}  // namespace mcpforge
