#include "mcpforge/synthetic.hpp"

#include <cmath>

#include "mcpforge/box.hpp"
#include "mcpforge/digest.hpp"
#include "mcpforge/error.hpp"

namespace mcpforge::synthetic {

std::uint64_t Rng::next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::symmetric() { return 2.0 * uniform() - 1.0; }

std::size_t Rng::below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

namespace {

// Irwin-Hall approximation of a standard normal; portable bit-for-bit.
double approx_normal(Rng& rng) {
    double sum = 0.0;
    for (int i = 0; i < 12; ++i) sum += rng.uniform();
    return sum - 6.0;
}

std::vector<double> random_unit(Rng& rng, std::size_t dims) {
    std::vector<double> v(dims);
    for (auto& x : v) x = approx_normal(rng);
    return normalized(std::move(v)).values;
}

std::vector<double> combine(const std::vector<double>& a, double wa, const std::vector<double>& b, double wb) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = wa * a[i] + wb * b[i];
    return out;
}

AbstractedMcp synthetic_mcp(std::size_t family, int iteration, int serial, bool duplicate, std::uint64_t seed) {
    AbstractedMcp m;
    m.name = "family_" + std::to_string(family) + "_tool";
    m.description = "Synthetic capability family " + std::to_string(family) +
                    (duplicate ? " (near-duplicate variant " + std::to_string(serial) + ")" : " (original)");
    m.use_case = "Harvested in generation iteration " + std::to_string(iteration) + " as item " +
                 std::to_string(serial);
    m.code = "def " + m.name + "(query):\n    return query\n";
    m.parameters = {{"query", TypeTag::string, "Input forwarded to the tool.", true, std::nullopt}};
    m.docstring = m.description + "\n\nArgs:\n    query (string): Input forwarded to the tool.";
    m.provenance = field_digest({"synthetic-redundancy", std::to_string(seed), std::to_string(iteration),
                                 std::to_string(serial)});
    m.mcp_id = make_mcp_id(m.name, m.provenance);
    m.runtime = BuiltinRuntime{"echo"};
    return m;
}

}  // namespace

std::string RedundancyCorpus::embedder_id() const {
    return "synthetic-redundancy/" + std::to_string(spec.seed) + "/" + std::to_string(spec.dims);
}

std::shared_ptr<FixtureEmbedder> RedundancyCorpus::embedder() const {
    return std::make_shared<FixtureEmbedder>(embedder_id(), spec.dims, vectors);
}

RedundancyCorpus make_redundancy_corpus(const RedundancyCorpusSpec& spec) {
    if (spec.dims < 2) fail(ErrorKind::config, "corpus dims must be >= 2");
    Rng rng(spec.seed);
    RedundancyCorpus corpus;
    corpus.spec = spec;

    const auto shared = random_unit(rng, spec.dims);
    std::vector<std::vector<double>> families;

    int iteration = 0;
    for (const auto& plan : spec.iterations) {
        ++iteration;
        if (plan.near_duplicates > 0 && families.empty() && plan.new_families == 0) {
            fail(ErrorKind::config, "near-duplicates need an existing family");
        }
        std::vector<AbstractedMcp> batch;
        int serial = 0;
        for (int i = 0; i < plan.new_families; ++i) {
            families.push_back(random_unit(rng, spec.dims));
            auto m = synthetic_mcp(families.size() - 1, iteration, serial++, false, spec.seed);
            corpus.vectors[compose_context(m)] = combine(shared, spec.shared_weight, families.back(), 1.0);
            batch.push_back(std::move(m));
        }
        for (int i = 0; i < plan.near_duplicates; ++i) {
            const auto family = rng.below(families.size());
            const auto noise = random_unit(rng, spec.dims);
            const auto variant = normalized(combine(families[family], 1.0, noise, spec.duplicate_noise)).values;
            auto m = synthetic_mcp(family, iteration, serial++, true, spec.seed);
            corpus.vectors[compose_context(m)] = combine(shared, spec.shared_weight, variant, 1.0);
            batch.push_back(std::move(m));
        }
        corpus.iterations.push_back(std::move(batch));
    }
    return corpus;
}

json to_json(const RedundancyCorpus& corpus) {
    json iterations = json::array();
    for (const auto& batch : corpus.iterations) {
        json items = json::array();
        for (const auto& m : batch) {
            items.push_back({{"mcp_id", m.mcp_id},
                             {"provenance", m.provenance},
                             {"context", compose_context(m)},
                             {"vector", corpus.vectors.at(compose_context(m))}});
        }
        iterations.push_back(std::move(items));
    }
    return {{"embedder_id", corpus.embedder_id()},
            {"seed", corpus.spec.seed},
            {"dims", corpus.spec.dims},
            {"iterations", iterations}};
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t suite_dims = 8;

std::vector<double> axis(std::size_t i, double w = 1.0) {
    std::vector<double> v(suite_dims, 0.0);
    v[i] = w;
    return v;
}

AbstractedMcp suite_tool(const std::string& name, const std::string& description, const std::string& use_case,
                         std::vector<ParameterSpec> params) {
    AbstractedMcp m;
    m.name = name;
    m.description = description;
    m.use_case = use_case;
    m.parameters = std::move(params);
    std::string sig;
    for (const auto& p : m.parameters) sig += (sig.empty() ? "" : ", ") + p.name;
    m.code = "def " + name + "(" + sig + "):\n    ...\n";
    m.docstring = description;
    m.provenance = field_digest({"scripted-suite", name});
    m.mcp_id = make_mcp_id(name, m.provenance);
    m.runtime = BuiltinRuntime{name};
    return m;
}

ParameterSpec param(std::string name, TypeTag tag, std::string description) {
    return {std::move(name), tag, std::move(description), true, std::nullopt};
}

}  // namespace

ScriptedSuite make_scripted_suite() {
    ScriptedSuite suite;
    suite.tools = {
        suite_tool("extract_measurement", "Extracts numeric measurements with units from document text",
                   "Find the burn volume reported in a thermodynamics paper",
                   {param("text", TypeTag::string, "Document text to scan.")}),
        suite_tool("add", "Adds two numbers exactly", "Sum two decimal quantities",
                   {param("a", TypeTag::number, "First addend."), param("b", TypeTag::number, "Second addend.")}),
        suite_tool("word_count", "Counts whitespace-separated words in a passage", "Count the words of a quotation",
                   {param("text", TypeTag::string, "Passage to count.")}),
        suite_tool("concat", "Joins string parts with a separator", "Assemble a hyphenated code word",
                   {{"parts", TypeTag::array, "Parts to join.", true, std::nullopt},
                    {"separator", TypeTag::string, "Separator between parts.", false, json("")}}),
        suite_tool("echo", "Returns its input text unchanged", "Repeat a phrase back verbatim",
                   {param("text", TypeTag::string, "Text to repeat.")}),
    };

    std::map<std::string, std::vector<double>> table;
    for (std::size_t i = 0; i < suite.tools.size(); ++i) table[compose_context(suite.tools[i])] = axis(i);

    auto add_task = [&](std::string id, std::string prompt, std::string expected, std::vector<double> vec,
                        TaskScript script) {
        table[prompt] = std::move(vec);
        suite.tasks.push_back({id, prompt, expected, {}});
        suite.scripts.emplace(std::move(id), std::move(script));
    };
    auto near = [](std::size_t tool, std::size_t other) {
        auto v = axis(tool, 0.95);
        v[other] = 0.3;
        return v;
    };
    // Orthogonal to every tool: threshold retrieval selects nothing.
    auto off_topic = [](double tilt) {
        auto v = axis(6, 1.0);
        v[7] = tilt;
        return v;
    };

    const std::string report = "Lab notes: after ignition the reported burn volume was 55 mL at 300 K.";
    add_task("t01", "From this thermodynamics lab report, what burn volume was measured? " + report, "55 mL",
             near(0, 4), {{{"extract_measurement", {{"text", report}}}}, true, "60 mL", {}});
    add_task("t02", "What is the exact sum of 1234.5 and 8765.25?", "9999.75", near(1, 2),
             {{{"add", {{"a", 1234.5}, {"b", 8765.25}}}}, true, "9999.7", {}});
    add_task("t03", "How many words are in the quotation 'the quick brown fox jumps over the lazy sleeping dog today'?",
             "11", near(2, 1), {{{"word_count", {{"text", "the quick brown fox jumps over the lazy sleeping dog today"}}}},
                                true, "10", {}});
    add_task("t04", "Assemble the code word from ALPHA, BRAVO and CHARLIE joined by hyphens.", "ALPHA-BRAVO-CHARLIE",
             near(3, 0),
             {{{"concat", {{"parts", {"ALPHA", "BRAVO", "CHARLIE"}}, {"separator", "-"}}}}, true, "ALPHABRAVOCHARLIE", {}});
    suite.tool_dependent = {"t01", "t02", "t03", "t04"};

    add_task("t05", "What is the capital of France?", "Paris", off_topic(0.1), {{}, true, "Paris", {}});
    add_task("t06", "What is the chemical symbol for gold?", "Au", off_topic(0.2), {{}, true, "Au", {}});
    add_task("t07", "How many sides does a hexagon have?", "6", off_topic(0.3), {{}, true, "6", {}});
    add_task("t08", "Which planet is known as the Red Planet?", "Mars", off_topic(0.4), {{}, true, "Mars", {}});
    add_task("t09", "What is the boiling point of water at sea level in Celsius?", "100", off_topic(0.5),
             {{}, true, "100", {}});
    add_task("t10", "Who wrote the play Hamlet?", "William Shakespeare", off_topic(0.6),
             {{}, true, "William Shakespeare", {}});

    suite.embedder = std::make_shared<FixtureEmbedder>("scripted-suite/8", suite_dims, std::move(table));
    return suite;
}

}  // namespace mcpforge::synthetic
