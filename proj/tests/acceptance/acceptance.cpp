// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "mcpforge/config.hpp"
#include "mcpforge/error.hpp"
#include "mcpforge/runtime.hpp"
#include "mcpforge/synthetic.hpp"

using namespace mcpforge;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& why) {
        if (!ok && pass) {
            pass = false;
            detail = why;
        }
    }
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int digits = 3) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    return json::parse(in, nullptr, true, true);
}

// ---------------------------------------------------------------------------
// Selection oracle

// Canonical order, (score desc, id asc), by repeated extraction of the best element.
std::vector<ScoredMcp> extract_in_order(std::vector<ScoredMcp> pool, std::size_t limit) {
    std::vector<ScoredMcp> out;
    while (!pool.empty() && out.size() < limit) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < pool.size(); ++i) {
            const bool higher = pool[i].score > pool[best].score;
            const bool tie_lower_id = pool[i].score == pool[best].score && pool[i].mcp_id < pool[best].mcp_id;
            if (higher || tie_lower_id) best = i;
        }
        out.push_back(pool[best]);
        pool.erase(pool.begin() + static_cast<long>(best));
    }
    return out;
}

std::vector<ScoredMcp> oracle_threshold(const std::vector<ScoredMcp>& scores, double tau, bool fall_back) {
    std::vector<ScoredMcp> kept;
    for (const auto& s : scores) {
        if (s.score >= tau) kept.push_back(s);
    }
    if (kept.empty() && fall_back) return extract_in_order(scores, 1);
    return extract_in_order(kept, kept.size());
}

Verdict selection_oracle() {
    Verdict v;
    std::mt19937_64 rng(1001);
    const auto start = Clock::now();
    std::size_t ties = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = rng() % 201;
        // Scores on a coarse grid so ties and exact threshold hits are common.
        const int grid = 1 + static_cast<int>(rng() % 40);
        std::vector<ScoredMcp> scores;
        std::set<std::string> used;
        for (std::size_t i = 0; i < m; ++i) {
            std::string id;
            do {
                id = "mcp_" + std::to_string(rng() % 100000);
            } while (!used.insert(id).second);
            const double s = static_cast<double>(static_cast<int>(rng() % (2 * grid + 1)) - grid) / grid;
            scores.push_back({id, s});
        }
        std::set<double> distinct;
        for (const auto& s : scores) distinct.insert(s.score);
        ties += scores.size() - distinct.size();

        SelectionConfig th;
        th.tau = std::max(1.0 / grid, static_cast<double>(rng() % (grid + 1)) / grid);
        th.empty_fallback = rng() % 2 ? EmptyFallback::fall_back_top_1 : EmptyFallback::allow_empty;
        const auto got = select(scores, th);
        v.require(got.selected == oracle_threshold(scores, th.tau, th.empty_fallback == EmptyFallback::fall_back_top_1),
                  "threshold mismatch at trial " + std::to_string(trial));
        v.require(got.scored == extract_in_order(scores, scores.size()), "scored order mismatch");

        SelectionConfig tk;
        tk.mode = SelectionMode::top_k;
        tk.k = 1 + static_cast<int>(rng() % 250);
        v.require(select(scores, tk).selected == extract_in_order(scores, static_cast<std::size_t>(tk.k)),
                  "top-k mismatch at trial " + std::to_string(trial));
    }
    const double t = seconds_since(start);
    v.require(ties > 0, "no ties generated");
    v.require(t < 10.0, "runtime " + fmt(t) + " s");
    if (v.pass) v.detail = "1000 sets, " + std::to_string(ties) + " tied scores, " + fmt(t) + " s < 10 s";
    return v;
}

// ---------------------------------------------------------------------------
// Clustering oracle

std::size_t dfs_components(const std::vector<std::vector<double>>& unit, double tau) {
    const auto n = unit.size();
    std::vector<bool> seen(n, false);
    std::size_t count = 0;
    for (std::size_t root = 0; root < n; ++root) {
        if (seen[root]) continue;
        ++count;
        std::vector<std::size_t> stack{root};
        seen[root] = true;
        while (!stack.empty()) {
            const auto i = stack.back();
            stack.pop_back();
            for (std::size_t j = 0; j < n; ++j) {
                if (seen[j]) continue;
                double s = 0.0;
                for (std::size_t d = 0; d < unit[i].size(); ++d) s += unit[i][d] * unit[j][d];
                if (s >= tau) {
                    seen[j] = true;
                    stack.push_back(j);
                }
            }
        }
    }
    return count;
}

Verdict clustering_oracle() {
    Verdict v;
    std::mt19937_64 rng(2002);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::size_t nontrivial = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t m = 1 + rng() % 10;
        const std::size_t dims = 2 + rng() % 8;
        // A few centers with jitter give a mix of linked and isolated tools.
        std::vector<std::vector<double>> centers;
        for (std::size_t c = 0; c < 1 + rng() % 4; ++c) centers.push_back(testing::random_vector(rng, dims));
        const double spread = 0.05 + 0.6 * static_cast<double>(rng() % 100) / 100.0;
        std::vector<std::vector<double>> vs;
        for (std::size_t i = 0; i < m; ++i) {
            auto x = centers[rng() % centers.size()];
            for (auto& c : x) c += spread * noise(rng);
            vs.push_back(x);
        }
        const auto box = testing::make_vector_box(vs).box;
        std::vector<std::vector<double>> unit;
        for (const auto& e : box.entries) {
            std::vector<double> u = e.embedding.values;
            unit.push_back(u);
        }
        const double tau = 0.05 + 0.95 * static_cast<double>(rng() % 1000) / 1000.0;
        const auto stats = compute_stats(box, tau);
        const auto expected = dfs_components(unit, tau);
        v.require(stats.cluster_count == expected, "trial " + std::to_string(trial) + ": " +
                                                       std::to_string(stats.cluster_count) + " vs " +
                                                       std::to_string(expected));
        v.require(std::abs(stats.coverage_ratio - static_cast<double>(expected) / static_cast<double>(m)) < 1e-12,
                  "coverage mismatch");
        if (expected != 1 && expected != m) ++nontrivial;
        if (m >= 2) {
            const auto sim = pairwise_similarity(box);
            for (std::size_t i = 0; i < m; ++i) {
                v.require(std::abs(sim(i, i) - 1.0) <= 1e-9, "diagonal not unit");
                for (std::size_t j = 0; j < m; ++j) {
                    v.require(std::abs(sim(i, j) - sim(j, i)) <= 1e-9, "matrix not symmetric");
                }
            }
        }
    }
    v.require(nontrivial > 50, "too few boxes with partial clustering");
    if (v.pass) v.detail = "500 boxes, " + std::to_string(nontrivial) + " with partial clustering";
    return v;
}

// ---------------------------------------------------------------------------
// Redundancy trend on the synthetic corpus

Verdict redundancy_trend() {
    Verdict v;
    const auto corpus = synthetic::make_redundancy_corpus();
    v.require(synthetic::to_json(corpus) == read_json(testing::fixture("redundancy/corpus.json")),
              "generator output differs from committed corpus");
    const auto expected = read_json(testing::fixture("redundancy/expected.json"));
    const double tau = expected["threshold"].get<double>();
    auto embedder = corpus.embedder();
    McpBox acc;
    double previous = 2.0;
    std::string trail;
    for (std::size_t i = 0; i < corpus.iterations.size(); ++i) {
        auto box = build_box(corpus.iterations[i], *embedder);
        acc = i == 0 ? box : merge_boxes({acc, box});
        const auto s = compute_stats(acc, tau);
        const auto& row = expected["rows"][i];
        const auto tag = "iteration " + std::to_string(i + 1);
        v.require(s.mcp_count == row["mcp_count"].get<std::size_t>(), tag + " mcp_count");
        v.require(s.cluster_count == row["cluster_count"].get<std::size_t>(), tag + " cluster_count");
        v.require(std::abs(s.coverage_ratio - row["coverage_ratio"].get<double>()) <= 1e-9, tag + " coverage");
        v.require(std::abs(*s.mean_similarity - row["mean_similarity"].get<double>()) <= 1e-9, tag + " mean");
        v.require(std::abs(*s.median_similarity - row["median_similarity"].get<double>()) <= 1e-9, tag + " median");
        if (i == 0) v.require(s.coverage_ratio == 1.0, "coverage at iteration 1 is not 1.00");
        v.require(s.coverage_ratio <= previous, tag + " coverage increased");
        previous = s.coverage_ratio;
        trail += (i ? " -> " : "") + std::to_string(s.cluster_count) + "/" + std::to_string(s.mcp_count);
    }
    if (v.pass) v.detail = trail + " (coverage " + fmt(previous, 2) + ")";
    return v;
}

// ---------------------------------------------------------------------------
// Box versus no box on the scripted suite

Verdict eval_contract() {
    Verdict v;
    const auto start = Clock::now();
    const auto suite = synthetic::make_scripted_suite();
    const auto box = build_box(suite.tools, *suite.embedder);
    ScriptedEngine engine(suite.scripts);
    McpExecutor executor;
    const RuntimeConfig config;
    const EvalOptions options;

    const auto base = evaluate(suite.tasks, nullptr, config, nullptr, engine, executor, options);
    const auto with = evaluate(suite.tasks, &box, config, suite.embedder.get(), engine, executor, options);
    const auto again = evaluate(suite.tasks, &box, config, suite.embedder.get(), engine, executor, options);
    const double gain = 100.0 * (with.summary.pass_at_1 - base.summary.pass_at_1);
    const double t = seconds_since(start);
    v.require(suite.tasks.size() == 10 && suite.tool_dependent.size() == 4, "suite shape");
    v.require(gain >= 30.0 - 1e-9, "gain " + fmt(gain, 1) + " points");
    v.require(to_records(with.runs) == to_records(again.runs), "runs not deterministic");
    v.require(t < 5.0, "runtime " + fmt(t) + " s");
    if (v.pass) {
        v.detail = "pass@1 " + fmt(base.summary.pass_at_1, 2) + " -> " + fmt(with.summary.pass_at_1, 2) + " (+" +
                   fmt(gain, 1) + " points), " + fmt(t) + " s < 5 s";
    }
    return v;
}

// ---------------------------------------------------------------------------
// Shipped defaults

Verdict defaults_conformance() {
    Verdict v;
    const auto config = load_config(std::filesystem::path(MCPFORGE_CONFIG_DIR) / "default.json");
    v.require(config.selection.mode == SelectionMode::threshold, "mode is not threshold");
    v.require(config.selection.tau == 0.7, "tau is not 0.7");
    const auto expected = read_json(testing::fixture("defaults/expected.json"));
    const auto box = load_box(testing::fixture("defaults/defaults.mcpbox"));
    auto embedder = load_fixture_embedder(testing::fixture("defaults/embedder.json"));
    const auto r = retrieve(expected["query"].get<std::string>(), box, config.selection, *embedder);
    std::vector<std::string> got;
    for (const auto& s : r.selected) got.push_back(s.mcp_id);
    v.require(got == expected["selected"].get<std::vector<std::string>>(), "selected set differs");
    if (v.pass) v.detail = "threshold, tau 0.7, selected " + std::to_string(got.size()) + " of " + std::to_string(box.size());
    return v;
}

// ---------------------------------------------------------------------------
// Abstraction validator

AbstractedMcp clean_for(const RawMcp& raw) {
    AbstractedMcp m;
    m.name = "echo_text";
    m.parameters = {{"text", TypeTag::string, "Text to return.", true, std::nullopt}};
    m.code = "def echo_text(text):\n    return text\n";
    m.description = raw.description;
    m.use_case = raw.use_case;
    m.docstring = "Returns text unchanged.";
    m.provenance = raw.content_hash;
    m.mcp_id = make_mcp_id(m.name, m.provenance);
    return m;
}

// Leaks the task URL on the first attempts, then lifts it once told about it.
class FeedbackProvider : public AbstractionProvider {
public:
    FeedbackProvider(std::string url, int stubborn) : url_(std::move(url)), stubborn_(stubborn) {}
    AbstractedMcp abstract(const AbstractionRequest& req) override {
        auto m = clean_for(req.raw);
        m.name = "fetch_csv";
        m.mcp_id = make_mcp_id(m.name, m.provenance);
        const bool told = !req.feedback.empty() && req.feedback[0].check_name == checks::parameterization;
        if (told && req.attempt > stubborn_) {
            m.parameters = {{"url", TypeTag::string, "Address of the CSV file.", true, std::nullopt}};
            m.code = "def fetch_csv(url):\n    return get(url)\n";
        } else {
            m.parameters.clear();
            m.code = "def fetch_csv():\n    return get('" + url_ + "')\n";
        }
        return m;
    }
    std::string id() const override { return "feedback"; }

private:
    std::string url_;
    int stubborn_;
};

Verdict validator_fixtures() {
    Verdict v;
    const std::string url = "https://example.org/data/x.csv";
    v.require(url.size() == 30, "URL fixture is not 30 characters");
    const auto url_raw = make_raw_mcp("def fetch():\n    return get('" + url + "')\n", "Downloads a CSV file",
                                      "Download '" + url + "' and sum column B");
    auto leaked = clean_for(url_raw);
    leaked.name = "fetch";
    leaked.mcp_id = make_mcp_id(leaked.name, leaked.provenance);
    leaked.parameters.clear();
    leaked.code = url_raw.code;
    const auto r1 = validate_abstraction(leaked, url_raw);
    v.require(!r1.accepted && r1.violations.size() == 1 && r1.violations[0].check_name == checks::parameterization,
              "URL literal retention not reported as the single parameterization violation");

    const auto raw = make_raw_mcp("def f(): pass", "Echoes text", "Echo the word hello");
    auto undocumented = clean_for(raw);
    undocumented.parameters[0].description.clear();
    const auto r2 = validate_abstraction(undocumented, raw);
    v.require(!r2.accepted && r2.violations ==
                                  std::vector<Violation>{{checks::descriptor_completeness,
                                                          "parameter missing description: text"}},
              "missing description not reported as the single completeness violation");

    const auto r3 = validate_abstraction(clean_for(raw), raw);
    v.require(r3.accepted && r3.violations.empty(), "clean fixture not accepted");

    // Converges using the feedback, within two retries.
    int worst = 0;
    for (int stubborn = 1; stubborn <= 2; ++stubborn) {
        FeedbackProvider provider(url, stubborn);
        const auto outcome = abstract_mcp(url_raw, provider, 2);
        v.require(outcome.report.accepted, "retry loop did not converge");
        v.require(outcome.report.attempts == stubborn + 1, "unexpected attempt count");
        worst = std::max(worst, outcome.report.attempts - 1);
    }
    // One more stubborn attempt exceeds the retry budget.
    FeedbackProvider hopeless(url, 3);
    bool rejected = false;
    try {
        abstract_mcp(url_raw, hopeless, 2);
    } catch (const AbstractionRejected& e) {
        rejected = e.report().attempts == 3;
    }
    v.require(rejected, "provider needing 3 retries was not rejected after 3 attempts");
    if (v.pass) v.detail = "3 fixtures exact, converged after " + std::to_string(worst) + " retries (budget 2)";
    return v;
}

// ---------------------------------------------------------------------------
// Box round-trip

McpBox random_box(std::mt19937_64& rng) {
    const std::size_t m = rng() % 12;
    const std::size_t dims = 1 + rng() % 40;
    std::vector<std::vector<double>> vs;
    for (std::size_t i = 0; i < m; ++i) vs.push_back(testing::random_vector(rng, dims));
    auto box = testing::make_vector_box(vs, "r" + std::to_string(rng() % 1000) + "_", "fixture/rt" + std::to_string(dims)).box;
    box.iteration_count = 1 + static_cast<int>(rng() % 9);
    box.context_mode = static_cast<ContextMode>(rng() % 3);
    for (auto& e : box.entries) {
        if (rng() % 2) e.mcp.runtime = SubprocessRuntime{"python3 -m tools.{tool} --stdio"};
        if (rng() % 2) {
            e.mcp.parameters.push_back({"limit", TypeTag::integer, "Upper bound.", false, json(static_cast<int>(rng() % 50))});
        }
        e.mcp.use_case += " with \"quotes\", unicode é and\nnewlines";
        e.context = compose_context(e.mcp, box.context_mode);
    }
    if (m == 0) box.dims = 0;
    return box;
}

Verdict box_round_trip() {
    Verdict v;
    testing::TempDir dir;
    std::mt19937_64 rng(3003);
    for (int trial = 0; trial < 100; ++trial) {
        const auto box = random_box(rng);
        const auto path = dir / ("b" + std::to_string(trial) + ".mcpbox");
        save_box(box, path);
        const auto back = load_box(path);
        v.require(back == box, "structural mismatch at trial " + std::to_string(trial));
        for (std::size_t i = 0; i < box.size() && i < back.size(); ++i) {
            const auto& a = box.entries[i].embedding.values;
            const auto& b = back.entries[i].embedding.values;
            v.require(a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0,
                      "embedding bits changed");
        }
    }
    int rejected = 0;
    const std::vector<std::string> damaged = {"flipped_byte", "truncated",  "bad_magic",     "empty",
                                              "old_version",  "future_version", "trailing_bytes"};
    for (const auto& name : damaged) {
        try {
            load_box(testing::fixture("corrupt/" + name + ".mcpbox"));
            v.require(false, name + " was accepted");
        } catch (const Error& e) {
            const bool version = name.find("version") != std::string::npos;
            v.require(e.kind() == (version ? ErrorKind::version : ErrorKind::corrupt), name + " wrong error kind");
            ++rejected;
        }
    }
    if (v.pass) v.detail = "100 boxes bit-exact, " + std::to_string(rejected) + "/7 damaged files rejected";
    return v;
}

// ---------------------------------------------------------------------------
// Metrics accounting

Verdict metrics_accounting() {
    Verdict v;
    // Hand-written schedule: calls per task, baseline correctness and
    // correctness with the box.
    const int calls[20] = {0, 1, 2, 3, 1, 0, 2, 1, 4, 0, 1, 1, 3, 0, 2, 2, 1, 0, 5, 1};
    const std::set<int> baseline_wrong = {2, 3, 5, 8, 13, 19};
    const std::set<int> now_wrong = {0, 5, 13};
    // Worked by hand: 30 calls over 20 tasks; improved tasks {2, 3, 8, 19}
    // take 2 + 3 + 4 + 1 = 10 calls; task 0 flips the other way.
    const double expected_avg_all = 1.5;
    const double expected_avg_improved = 2.5;
    const int expected_w2r = 4, expected_r2w = 1;
    const double expected_pass1 = 17.0 / 20.0;

    auto vb = testing::make_vector_box({{1.0, 0.0}});
    const auto tool = vb.box.entries[0].mcp;
    std::vector<TaskSpec> tasks;
    std::map<std::string, TaskScript> scripts;
    std::vector<MetricsRecord> baseline;
    for (int i = 0; i < 20; ++i) {
        const auto id = "Q" + std::to_string(i);
        const auto answer = "answer " + std::to_string(i);
        tasks.push_back({id, "question " + std::to_string(i), answer, {}});
        vb.embedder->record(tasks.back().prompt, {1.0, 0.02 * i});
        TaskScript s;
        for (int c = 0; c < calls[i]; ++c) s.calls.push_back({tool.name, {{"text", answer}}});
        const bool right = !now_wrong.contains(i);
        s.answer_from_tool = right && calls[i] > 0;
        s.fallback_answer = right ? answer : "no idea";
        if (!right && calls[i] > 0) s.calls.back().arguments["text"] = "no idea";
        scripts[id] = s;
        baseline.push_back({id, 1, !baseline_wrong.contains(i), 0, 0});
    }
    ScriptedEngine engine(scripts);
    McpExecutor inner;
    RecordingExecutor executor(inner);
    RuntimeConfig config;
    config.selection.tau = 0.5;
    const auto r = evaluate(tasks, &vb.box, config, vb.embedder.get(), engine, executor, EvalOptions{}, &baseline);
    v.require(r.summary.avg_calls_all == expected_avg_all, "avg calls " + fmt(r.summary.avg_calls_all, 6));
    v.require(r.summary.avg_calls_improved == expected_avg_improved,
              "avg calls improved " + fmt(r.summary.avg_calls_improved.value_or(-1), 6));
    v.require(r.summary.wrong_to_right == expected_w2r, "wrong_to_right");
    v.require(r.summary.right_to_wrong == expected_r2w, "right_to_wrong");
    v.require(r.summary.pass_at_1 == expected_pass1, "pass@1 " + fmt(r.summary.pass_at_1, 6));
    v.require(executor.calls().size() == 30, "executor saw " + std::to_string(executor.calls().size()) + " calls");
    for (std::size_t i = 0; i < r.runs.size(); ++i) v.require(r.runs[i].mcp_calls == calls[i], "per-run calls");

    // Randomized engines: pass@3 never below pass@1 and equal to any-of-three.
    class RandomEngine : public ReasoningEngine {
    public:
        RandomEngine(std::uint64_t seed, double p) : seed_(seed), p_(p) {}
        EngineStep next_step(const InferenceContext& c) override {
            std::seed_seq seq{seed_, std::hash<std::string>{}(c.task.task_id), static_cast<std::uint64_t>(c.attempt)};
            std::mt19937_64 rng(seq);
            const bool right = std::uniform_real_distribution<double>(0, 1)(rng) < p_;
            return {"", Answer{right ? *c.task.expected_answer : "wrong"}, 1};
        }

    private:
        std::uint64_t seed_;
        double p_;
    };
    std::mt19937_64 rng(4004);
    for (int fixture = 0; fixture < 200; ++fixture) {
        RandomEngine random(rng(), static_cast<double>(rng() % 101) / 100.0);
        EvalOptions opts;
        opts.attempts = 3;
        const auto e = evaluate(tasks, nullptr, RuntimeConfig{}, nullptr, random, inner, opts);
        v.require(e.summary.pass_at_3 >= e.summary.pass_at_1, "pass@3 < pass@1 at fixture " + std::to_string(fixture));
        std::map<std::string, bool> any;
        for (const auto& run : e.runs) any[run.task_id] = any[run.task_id] || run.correct.value_or(false);
        std::size_t hits = 0;
        for (const auto& [_, ok] : any) hits += ok;
        v.require(e.summary.pass_at_3 == static_cast<double>(hits) / 20.0, "pass@3 differs from any-of-three");
    }
    if (v.pass) v.detail = "avg calls 1.5 / improved 2.5 exact, pass@3 >= pass@1 on 200 engines";
    return v;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"selection_oracle", selection_oracle},
        {"clustering_oracle", clustering_oracle},
        {"redundancy_trend", redundancy_trend},
        {"box_vs_baseline", eval_contract},
        {"defaults_conformance", defaults_conformance},
        {"abstraction_validator", validator_fixtures},
        {"box_round_trip", box_round_trip},
        {"metrics_accounting", metrics_accounting},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        if (!v.pass) ++failures;
        std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
    }
    return failures ? 1 : 0;
}
