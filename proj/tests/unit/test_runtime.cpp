#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "mcpforge/error.hpp"
#include "mcpforge/runtime.hpp"
#include "mcpforge/synthetic.hpp"

using namespace mcpforge;

namespace {

// Calls the same tool forever.
class LoopEngine : public ReasoningEngine {
public:
    explicit LoopEngine(std::string id) : id_(std::move(id)) {}
    EngineStep next_step(const InferenceContext& c) override {
        return {"still thinking " + std::to_string(c.transcript.size()), CallTool{id_, {{"text", "x"}}}, 5};
    }

private:
    std::string id_;
};

// Answers from a per-attempt table without tools.
class TableEngine : public ReasoningEngine {
public:
    explicit TableEngine(std::map<std::pair<std::string, int>, std::string> answers) : answers_(std::move(answers)) {}
    EngineStep next_step(const InferenceContext& c) override {
        auto it = answers_.find({c.task.task_id, c.attempt});
        return {"", Answer{it == answers_.end() ? "?" : it->second}, 1};
    }

private:
    std::map<std::pair<std::string, int>, std::string> answers_;
};

class ThrowingExecutor : public ToolExecutor {
public:
    ToolResult execute(const AbstractedMcp&, const json&) override { throw std::runtime_error("boom"); }
};

struct Fixture {
    testing::VectorBox vb = testing::make_vector_box({{1.0, 0.0}, {0.0, 1.0}});
    AbstractedMcp relevant = vb.box.entries[0].mcp;
    AbstractedMcp other = vb.box.entries[1].mcp;
    TaskSpec task{"T1", "needs the relevant tool", "the answer", {}};
    std::map<std::string, TaskScript> scripts;
    McpExecutor executor;
    RuntimeConfig config;

    Fixture() {
        vb.embedder->record(task.prompt, vb.box.entries[0].embedding.values);
        scripts["T1"] = {{{relevant.name, {{"text", "the answer"}}}}, true, "a guess", {}};
    }
};

}  // namespace

TEST_CASE("run_inference with and without the box") {
    Fixture f;
    ScriptedEngine engine(f.scripts);
    const auto with = run_inference(f.task, &f.vb.box, f.config, f.vb.embedder.get(), engine, f.executor);
    CHECK(with.answer == "the answer");
    CHECK(with.correct == true);
    CHECK(with.mcp_calls == 1);
    CHECK(with.complete);
    CHECK(with.selected_mcp_ids == std::vector<std::string>{f.relevant.mcp_id});
    CHECK(with.tokens_estimated);
    CHECK(with.tokens_used > 0);

    const auto base = run_inference(f.task, nullptr, f.config, nullptr, engine, f.executor);
    CHECK(base.answer == "a guess");
    CHECK(base.correct == false);
    CHECK(base.mcp_calls == 0);
    CHECK(base.selected_mcp_ids.empty());
}

TEST_CASE("an engine that answers at once makes no calls") {
    Fixture f;
    TableEngine engine({{{"T1", 1}, "the answer"}});
    const auto r = run_inference(f.task, &f.vb.box, f.config, f.vb.embedder.get(), engine, f.executor);
    CHECK(r.mcp_calls == 0);
    CHECK(r.correct == true);
    CHECK(r.tokens_used == 1);
    CHECK_FALSE(r.tokens_estimated);
}

TEST_CASE("step budget bounds every run") {
    Fixture f;
    LoopEngine engine(f.relevant.mcp_id);
    for (int budget : {1, 3, 20}) {
        f.config.step_budget = budget;
        const auto r = run_inference(f.task, &f.vb.box, f.config, f.vb.embedder.get(), engine, f.executor);
        CHECK_FALSE(r.complete);
        CHECK(r.correct == false);
        CHECK(r.mcp_calls == budget);
        CHECK(r.transcript.size() == static_cast<std::size_t>(budget));
        CHECK(r.answer == "still thinking " + std::to_string(budget - 1));
        CHECK(r.tokens_used == 5L * budget);
    }
    f.config.step_budget = 0;
    CHECK_THROWS_AS(run_inference(f.task, &f.vb.box, f.config, f.vb.embedder.get(), engine, f.executor), Error);
}

TEST_CASE("calls outside the filtered box are refused and not counted") {
    Fixture f;
    f.config.step_budget = 4;
    LoopEngine engine(f.other.mcp_id);
    McpExecutor inner;
    RecordingExecutor rec(inner);
    const auto r = run_inference(f.task, &f.vb.box, f.config, f.vb.embedder.get(), engine, rec);
    CHECK(rec.calls().empty());
    CHECK(r.mcp_calls == 0);
    REQUIRE(r.transcript.size() == 4);
    CHECK(r.transcript[0].error.value_or("").find("tool not available in filtered set") == 0);
}

TEST_CASE("executor failures become observations") {
    Fixture f;
    ScriptedEngine engine(f.scripts);
    ThrowingExecutor ex;
    const auto r = run_inference(f.task, &f.vb.box, f.config, f.vb.embedder.get(), engine, ex);
    REQUIRE(r.transcript.size() == 1);
    CHECK(r.transcript[0].tool_result->status == ToolStatus::crashed);
    CHECK(r.mcp_calls == 1);
    CHECK(r.answer == "a guess");
}

TEST_CASE("mcp_calls equals the executor's record") {
    const auto suite = synthetic::make_scripted_suite();
    auto box = build_box(suite.tools, *suite.embedder);
    ScriptedEngine engine(suite.scripts);
    RuntimeConfig config;
    for (const auto& t : suite.tasks) {
        McpExecutor inner;
        RecordingExecutor rec(inner);
        const auto r = run_inference(t, &box, config, suite.embedder.get(), engine, rec);
        CHECK(static_cast<std::size_t>(r.mcp_calls) == rec.calls().size());
        for (const auto& id : rec.calls()) {
            CHECK(std::find(r.selected_mcp_ids.begin(), r.selected_mcp_ids.end(), id) != r.selected_mcp_ids.end());
        }
    }
}

TEST_CASE("pass@n and flip counts") {
    std::vector<TaskSpec> tasks;
    for (int i = 1; i <= 8; ++i) tasks.push_back({"T" + std::to_string(i), "p", "yes", {}});
    tasks.push_back({"U", "unlabeled", std::nullopt, {}});

    // T2 is right only on attempt 2; every other task is right on attempt 1 except T3 and T7.
    std::map<std::pair<std::string, int>, std::string> answers;
    for (int i = 1; i <= 8; ++i) {
        for (int a = 1; a <= 3; ++a) answers[{"T" + std::to_string(i), a}] = "yes";
    }
    answers[{"T2", 1}] = "no";
    answers[{"T2", 3}] = "no";
    for (int a = 1; a <= 3; ++a) answers[{"T3", a}] = answers[{"T7", a}] = "no";
    answers[{"T3", 1}] = "yes";

    TableEngine engine(answers);
    McpExecutor ex;
    EvalOptions opts;
    opts.attempts = 3;

    std::vector<MetricsRecord> baseline;
    for (int i = 1; i <= 8; ++i) baseline.push_back({"T" + std::to_string(i), 1, i != 3 && i != 7, 0, 0});
    const auto r = evaluate(tasks, nullptr, RuntimeConfig{}, nullptr, engine, ex, opts, &baseline);
    CHECK(r.summary.task_count == 8);
    CHECK(r.summary.excluded == std::vector<std::string>{"U"});
    CHECK(r.summary.pass_at_1 == 6.0 / 8.0);  // T2 and T7 wrong on attempt 1
    CHECK(r.summary.pass_at_3 == 7.0 / 8.0);  // T2 recovers
    CHECK(r.summary.wrong_to_right == 1);      // T3
    CHECK(r.summary.right_to_wrong == 1);      // T2
    CHECK(r.summary.avg_calls_improved == 0.0);
    CHECK(r.runs.size() == 24);
    CHECK(r.summary.avg_tokens == 1.0);

    opts.workers = 4;
    const auto parallel = evaluate(tasks, nullptr, RuntimeConfig{}, nullptr, engine, ex, opts, &baseline);
    CHECK(to_json(parallel.summary) == to_json(r.summary));
    CHECK(to_records(parallel.runs) == to_records(r.runs));
}

TEST_CASE("deterministic engine gives pass@1 equal to pass@3") {
    const auto suite = synthetic::make_scripted_suite();
    auto box = build_box(suite.tools, *suite.embedder);
    ScriptedEngine engine(suite.scripts);
    McpExecutor ex;
    EvalOptions opts;
    opts.attempts = 3;
    const auto r = evaluate(suite.tasks, &box, RuntimeConfig{}, suite.embedder.get(), engine, ex, opts);
    CHECK(r.summary.pass_at_1 == r.summary.pass_at_3);
    CHECK_FALSE(r.summary.wrong_to_right.has_value());
    opts.attempts = 0;
    CHECK_THROWS_AS(evaluate(suite.tasks, &box, RuntimeConfig{}, suite.embedder.get(), engine, ex, opts), Error);
}

TEST_CASE("metrics records round-trip") {
    const std::vector<MetricsRecord> records = {{"a", 1, true, 2, 300}, {"b", 3, false, 0, 0}};
    std::stringstream ss;
    write_metrics(ss, records);
    CHECK(read_metrics(ss) == records);
    std::istringstream bad("{\"task_id\":\"a\"}\n");
    CHECK_THROWS_AS(read_metrics(bad), Error);
}

TEST_CASE("scripted engine json round-trip and attempt overrides") {
    std::map<std::string, TaskScript> scripts;
    TaskScript script;
    script.calls.push_back({"add", json{{"a", 1}, {"b", 2}}});
    script.answer_from_tool = false;
    script.fallback_answer = "fallback";
    script.attempt_answers[2] = "second";
    scripts["T"] = script;
    const auto engine = ScriptedEngine::from_json(scripts_to_json(scripts));
    CHECK(scripts_to_json(engine.scripts()) == scripts_to_json(scripts));

    ScriptedEngine e(scripts);
    InferenceContext c;
    c.task = {"T", "p", std::nullopt, {}};
    c.attempt = 2;
    CHECK(std::get<Answer>(e.next_step(c).decision).text == "second");
    c.attempt = 1;
    CHECK(std::get<Answer>(e.next_step(c).decision).text == "fallback");
    c.task.task_id = "missing";
    CHECK(std::get<Answer>(e.next_step(c).decision).text.empty());
}

TEST_CASE("llm engine reply parsing") {
    const auto call = LlmEngine::parse(R"(Sure. {"thought":"t","action":"call_tool","tool":"x_1","arguments":{"a":1}})", 9);
    REQUIRE(std::holds_alternative<CallTool>(call.decision));
    CHECK(std::get<CallTool>(call.decision).mcp_id == "x_1");
    CHECK(call.token_usage == 9);
    const auto answer = LlmEngine::parse("```json\n{\"thought\":\"t\",\"action\":\"answer\",\"answer\":42}\n```", 1);
    CHECK(std::get<Answer>(answer.decision).text == "42");
    const auto prose = LlmEngine::parse("  Paris  ", 1);
    CHECK(std::get<Answer>(prose.decision).text == "Paris");

    InferenceContext c;
    c.task = {"T", "What is it?", std::nullopt, {}};
    c.filtered_box = {testing::make_tool("helper")};
    const auto messages = LlmEngine::render(c);
    REQUIRE(messages.size() == 2);
    CHECK(messages[0].content.find(c.filtered_box[0].mcp_id) != std::string::npos);
    CHECK(messages[1].content == "What is it?");
}
