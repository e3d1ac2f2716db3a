#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mcpforge/abstraction.hpp"
#include "mcpforge/embedding.hpp"
#include "mcpforge/runtime.hpp"

namespace mcpforge::synthetic {

// Portable deterministic generator (splitmix64). Unlike the standard
// distributions its output is identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    double uniform();                // [0, 1)
    double symmetric();              // [-1, 1)
    std::size_t below(std::size_t n);

private:
    std::uint64_t state_;
};

// Families introduced and near-duplicates added per generation iteration.
struct IterationPlan {
    int new_families = 0;
    int near_duplicates = 0;
};

struct RedundancyCorpusSpec {
    std::uint64_t seed = 20251014;
    std::size_t dims = 96;
    // Weight of the component shared by every vector; sets the mean similarity.
    double shared_weight = 0.6;
    // Relative noise added to a family direction to create a near-duplicate.
    double duplicate_noise = 0.45;
    std::vector<IterationPlan> iterations = {{26, 0}, {15, 5}, {11, 17}, {8, 20}, {5, 21}};
};

struct RedundancyCorpus {
    RedundancyCorpusSpec spec;
    // MCPs harvested in each iteration.
    std::vector<std::vector<AbstractedMcp>> iterations;
    // Context text -> raw embedding, for a FixtureEmbedder.
    std::map<std::string, std::vector<double>> vectors;

    std::string embedder_id() const;
    std::shared_ptr<FixtureEmbedder> embedder() const;
};

// Injects controlled near-duplicates across generation iterations.
RedundancyCorpus make_redundancy_corpus(const RedundancyCorpusSpec& spec = {});

json to_json(const RedundancyCorpus& corpus);

// Ten-task suite; four tasks are answerable only through a tool.
struct ScriptedSuite {
    std::vector<TaskSpec> tasks;
    std::vector<AbstractedMcp> tools;
    std::map<std::string, TaskScript> scripts;
    std::shared_ptr<FixtureEmbedder> embedder;
    std::vector<std::string> tool_dependent;  // task ids
};

ScriptedSuite make_scripted_suite();

}  // namespace mcpforge::synthetic
