#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mcpforge/executor.hpp"
#include "mcpforge/llm.hpp"
#include "mcpforge/retriever.hpp"
#include "mcpforge/trajectory.hpp"

namespace mcpforge {

struct TranscriptEntry {
    std::string thought;
    std::optional<std::string> tool_call;  // mcp_id
    json arguments = nullptr;
    std::optional<ToolResult> tool_result;
    std::optional<std::string> error;  // call refused before execution
};

struct InferenceContext {
    TaskSpec task;
    std::vector<AbstractedMcp> filtered_box;
    std::vector<TranscriptEntry> transcript;
    int step_budget = 20;
    long tokens_used = 0;
    int attempt = 1;

    const AbstractedMcp* find_tool(const std::string& mcp_id) const;
    const AbstractedMcp* find_tool_by_name(const std::string& name) const;
};

struct CallTool {
    std::string mcp_id;
    json arguments = json::object();
};

struct Answer {
    std::string text;
};

struct EngineStep {
    std::string thought;
    std::variant<CallTool, Answer> decision;
    long token_usage = 0;
};

class ReasoningEngine {
public:
    virtual ~ReasoningEngine() = default;
    virtual EngineStep next_step(const InferenceContext& context) = 0;
    // True when token_usage is an estimate rather than provider-reported.
    virtual bool tokens_estimated() const { return false; }
};

// One task's behaviour under the scripted engine. The engine walks `calls`
// in order, skipping entries whose tool is not in the filtered set, then
// answers: with the last successful tool output when `answer_from_tool` and
// at least one call succeeded, otherwise with `fallback_answer`.
struct ScriptedCall {
    std::string tool;  // tool name (not id)
    json arguments = json::object();
};

struct TaskScript {
    std::vector<ScriptedCall> calls;
    bool answer_from_tool = true;
    std::string fallback_answer;
    // Per-attempt overrides of the fallback answer (attempt -> answer).
    std::map<int, std::string> attempt_answers;
};

// Deterministic engine for tests and desk-scale evaluation. Token usage is a
// character-count proxy: ceil(chars / 4) of thought plus decision payload.
class ScriptedEngine : public ReasoningEngine {
public:
    explicit ScriptedEngine(std::map<std::string, TaskScript> scripts);
    EngineStep next_step(const InferenceContext& context) override;
    bool tokens_estimated() const override { return true; }

    static ScriptedEngine from_json(const json& j);
    const std::map<std::string, TaskScript>& scripts() const noexcept { return scripts_; }

private:
    std::map<std::string, TaskScript> scripts_;
};

// {task_id: {calls: [{tool, arguments}], answer_from_tool, fallback_answer, attempt_answers}}
json scripts_to_json(const std::map<std::string, TaskScript>& scripts);

// Chat-completion engine: tool descriptors are rendered into the system
// prompt; each reply must be a JSON object
// {"thought": ..., "action": "call_tool"|"answer", "tool": ..., "arguments": {...}, "answer": ...}.
class LlmEngine : public ReasoningEngine {
public:
    explicit LlmEngine(std::shared_ptr<ChatClient> client);
    EngineStep next_step(const InferenceContext& context) override;

    static std::vector<ChatMessage> render(const InferenceContext& context);
    static EngineStep parse(const std::string& reply, long tokens);

private:
    std::shared_ptr<ChatClient> client_;
};

struct RuntimeConfig {
    SelectionConfig selection;
    int step_budget = 20;
};

struct RunMetrics {
    std::string task_id;
    int attempt = 1;
    std::string answer;
    bool complete = true;  // false when the step budget ran out
    std::optional<bool> correct;
    int mcp_calls = 0;
    long tokens_used = 0;
    bool tokens_estimated = false;
    std::vector<std::string> selected_mcp_ids;
    std::vector<TranscriptEntry> transcript;
};

// Retrieval once up front, then the engine/executor loop. A null box is the
// baseline agent with no tools.
RunMetrics run_inference(const TaskSpec& task, const McpBox* box, const RuntimeConfig& config,
                         Embedder* embedder, ReasoningEngine& engine, ToolExecutor& executor,
                         int attempt = 1, const AnswerComparator& comparator = default_comparator);

struct EvalSummary {
    std::size_t task_count = 0;
    double pass_at_1 = 0.0;
    double pass_at_3 = 0.0;
    double avg_tokens = 0.0;
    std::optional<int> wrong_to_right;
    std::optional<int> right_to_wrong;
    double avg_calls_all = 0.0;
    std::optional<double> avg_calls_improved;
    std::vector<std::string> excluded;  // unlabeled task ids
};

struct EvalResult {
    EvalSummary summary;
    std::vector<RunMetrics> runs;  // sorted by (task order, attempt)
};

// Metrics file records: {task_id, attempt, correct, mcp_calls, tokens}.
struct MetricsRecord {
    std::string task_id;
    int attempt = 1;
    bool correct = false;
    int mcp_calls = 0;
    long tokens = 0;
    bool operator==(const MetricsRecord&) const = default;
};

std::vector<MetricsRecord> to_records(const std::vector<RunMetrics>& runs);
void write_metrics(std::ostream& out, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_metrics(std::istream& in);

struct EvalOptions {
    int attempts = 1;
    int workers = 1;
    AnswerComparator comparator = default_comparator;
};

EvalResult evaluate(const std::vector<TaskSpec>& tasks, const McpBox* box,
                    const RuntimeConfig& config, Embedder* embedder, ReasoningEngine& engine,
                    ToolExecutor& executor, const EvalOptions& options,
                    const std::vector<MetricsRecord>* baseline = nullptr);

// Summary from per-attempt records; shared by evaluate and the CLI.
EvalSummary summarize(const std::vector<std::string>& task_order,
                      const std::vector<MetricsRecord>& records,
                      const std::vector<MetricsRecord>* baseline);

json to_json(const EvalSummary& summary);
json to_json(const RunMetrics& metrics);

}  // namespace mcpforge
