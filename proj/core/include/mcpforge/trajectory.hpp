#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace mcpforge {

using json = nlohmann::json;

struct TaskSpec {
    std::string task_id;
    std::string prompt;
    std::optional<std::string> expected_answer;
    std::vector<std::string> tags;

    bool operator==(const TaskSpec&) const = default;
};

// {code, description, use_case} as emitted by the master agent, plus origin.
struct RawMcp {
    std::string code;
    std::string description;
    std::string use_case;
    std::string origin_task;
    int origin_run = 1;
    std::string content_hash;

    bool operator==(const RawMcp&) const = default;
};

// Builds a RawMcp with its content hash filled in. Throws on empty fields.
RawMcp make_raw_mcp(std::string code, std::string description, std::string use_case,
                    std::string origin_task = {}, int origin_run = 1);

// Pure function of the three text fields.
std::string raw_mcp_hash(const std::string& code, const std::string& description,
                         const std::string& use_case);

struct ToolCallAction {
    std::string name;
    json arguments = json::object();
    bool operator==(const ToolCallAction&) const = default;
};

struct McpCreateAction {
    RawMcp mcp;
    bool operator==(const McpCreateAction&) const = default;
};

struct FinalAnswerAction {
    std::string text;
    bool operator==(const FinalAnswerAction&) const = default;
};

using StepAction = std::variant<ToolCallAction, McpCreateAction, FinalAnswerAction>;

struct TrajectoryStep {
    std::string reasoning;
    StepAction action;
    std::string observation;

    bool operator==(const TrajectoryStep&) const = default;
};

struct ExecutionRun {
    std::string task_id;
    int run_index = 1;
    std::vector<TrajectoryStep> steps;
    std::string final_answer;
    bool success = false;
    int mcp_count = 0;

    bool operator==(const ExecutionRun&) const = default;
};

using AnswerComparator = std::function<bool(const std::string& answer, const std::string& expected)>;

// Case-insensitive, whitespace-trimmed exact match.
bool default_comparator(const std::string& answer, const std::string& expected);

// Compares the leading numeric token of each side ("55 mL" == "55").
// Falls back to the default comparator when either side has no number.
bool numeric_unit_comparator(const std::string& answer, const std::string& expected);

ExecutionRun record_run(const TaskSpec& task, std::vector<TrajectoryStep> steps, int run_index);

ExecutionRun judge_success(ExecutionRun run, const TaskSpec& task,
                           const AnswerComparator& comparator = default_comparator);

// Raw MCP pool from successful runs. Byte-identical MCPs collapse onto the
// earliest origin (lowest run_index, then input order).
std::vector<RawMcp> extract_raw_pool(const std::vector<ExecutionRun>& runs);

// Line-delimited persistence: one record per line.
json to_json(const TaskSpec& task);
json to_json(const RawMcp& mcp);
json to_json(const TrajectoryStep& step);
json to_json(const ExecutionRun& run);
TaskSpec task_from_json(const json& j);
RawMcp raw_mcp_from_json(const json& j);
TrajectoryStep step_from_json(const json& j);
ExecutionRun run_from_json(const json& j);

std::vector<TaskSpec> read_tasks(std::istream& in);
std::vector<ExecutionRun> read_runs(std::istream& in);
std::vector<RawMcp> read_raw_pool(std::istream& in);
void write_runs(std::ostream& out, const std::vector<ExecutionRun>& runs);
void write_raw_pool(std::ostream& out, const std::vector<RawMcp>& pool);

// Validates uniqueness of task_id and non-empty prompts.
void check_task_collection(const std::vector<TaskSpec>& tasks);

}  // namespace mcpforge
