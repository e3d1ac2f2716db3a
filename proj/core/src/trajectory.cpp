#include "mcpforge/trajectory.hpp"

#include <cstdlib>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include "mcpforge/digest.hpp"
#include "mcpforge/error.hpp"
#include "text.hpp"

namespace mcpforge {

std::string raw_mcp_hash(const std::string& code, const std::string& description,
                         const std::string& use_case) {
    return field_digest({code, description, use_case});
}

RawMcp make_raw_mcp(std::string code, std::string description, std::string use_case,
                    std::string origin_task, int origin_run) {
    if (code.empty() || description.empty() || use_case.empty()) {
        fail(ErrorKind::input, "raw MCP requires non-empty code, description and use_case");
    }
    RawMcp mcp;
    mcp.content_hash = raw_mcp_hash(code, description, use_case);
    mcp.code = std::move(code);
    mcp.description = std::move(description);
    mcp.use_case = std::move(use_case);
    mcp.origin_task = std::move(origin_task);
    mcp.origin_run = origin_run;
    return mcp;
}

bool default_comparator(const std::string& answer, const std::string& expected) {
    return text::lower(text::trim(answer)) == text::lower(text::trim(expected));
}

namespace {

std::optional<double> leading_number(std::string_view s) {
    s = text::trim(s);
    if (s.empty()) return std::nullopt;
    std::string buf(s);
    char* end = nullptr;
    double v = std::strtod(buf.c_str(), &end);
    if (end == buf.c_str()) return std::nullopt;
    return v;
}

}  // namespace

bool numeric_unit_comparator(const std::string& answer, const std::string& expected) {
    auto a = leading_number(answer);
    auto e = leading_number(expected);
    if (a && e) return *a == *e;
    return default_comparator(answer, expected);
}

ExecutionRun record_run(const TaskSpec& task, std::vector<TrajectoryStep> steps, int run_index) {
    if (steps.empty()) fail(ErrorKind::input, "empty trajectory");
    if (run_index < 1) fail(ErrorKind::input, "run_index must be >= 1");
    for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
        if (std::holds_alternative<FinalAnswerAction>(steps[i].action)) {
            fail(ErrorKind::input, "final_answer must be the last step");
        }
    }
    const auto* last = std::get_if<FinalAnswerAction>(&steps.back().action);
    if (!last) fail(ErrorKind::input, "truncated trajectory: last action is not final_answer");

    ExecutionRun run;
    run.task_id = task.task_id;
    run.run_index = run_index;
    run.final_answer = last->text;
    for (auto& step : steps) {
        if (auto* create = std::get_if<McpCreateAction>(&step.action)) {
            auto& m = create->mcp;
            m = make_raw_mcp(std::move(m.code), std::move(m.description), std::move(m.use_case),
                             task.task_id, run_index);
            ++run.mcp_count;
        }
    }
    run.steps = std::move(steps);
    return run;
}

ExecutionRun judge_success(ExecutionRun run, const TaskSpec& task,
                           const AnswerComparator& comparator) {
    if (!task.expected_answer) fail(ErrorKind::input, "unlabeled task: " + task.task_id);
    run.success = comparator(run.final_answer, *task.expected_answer);
    return run;
}

std::vector<RawMcp> extract_raw_pool(const std::vector<ExecutionRun>& runs) {
    // Earliest origin wins: stable order by run_index keeps input order among equals.
    std::vector<const ExecutionRun*> ordered;
    for (const auto& run : runs) {
        if (run.success) ordered.push_back(&run);
    }
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto* a, const auto* b) { return a->run_index < b->run_index; });

    std::vector<RawMcp> pool;
    std::set<std::string> seen;
    for (const auto* run : ordered) {
        for (const auto& step : run->steps) {
            const auto* create = std::get_if<McpCreateAction>(&step.action);
            if (!create) continue;
            if (seen.insert(create->mcp.content_hash).second) pool.push_back(create->mcp);
        }
    }
    return pool;
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const TaskSpec& task) {
    json j{{"task_id", task.task_id}, {"prompt", task.prompt}, {"tags", task.tags}};
    if (task.expected_answer) j["expected_answer"] = *task.expected_answer;
    return j;
}

TaskSpec task_from_json(const json& j) {
    TaskSpec t;
    t.task_id = j.at("task_id").get<std::string>();
    t.prompt = j.at("prompt").get<std::string>();
    if (auto it = j.find("expected_answer"); it != j.end() && !it->is_null()) {
        t.expected_answer = it->get<std::string>();
    }
    if (auto it = j.find("tags"); it != j.end()) t.tags = it->get<std::vector<std::string>>();
    if (t.task_id.empty()) fail(ErrorKind::input, "task_id must be non-empty");
    if (t.prompt.empty()) fail(ErrorKind::input, "prompt must be non-empty for task " + t.task_id);
    return t;
}

json to_json(const RawMcp& mcp) {
    return {{"code", mcp.code},
            {"description", mcp.description},
            {"use_case", mcp.use_case},
            {"origin_task", mcp.origin_task},
            {"origin_run", mcp.origin_run},
            {"content_hash", mcp.content_hash}};
}

RawMcp raw_mcp_from_json(const json& j) {
    auto mcp = make_raw_mcp(j.at("code").get<std::string>(), j.at("description").get<std::string>(),
                            j.at("use_case").get<std::string>(), j.value("origin_task", ""),
                            j.value("origin_run", 1));
    if (auto it = j.find("content_hash"); it != j.end() && it->get<std::string>() != mcp.content_hash) {
        fail(ErrorKind::input, "content_hash does not match MCP text");
    }
    return mcp;
}

json to_json(const TrajectoryStep& step) {
    json action = std::visit(
        [](const auto& a) -> json {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, ToolCallAction>) {
                return {{"kind", "tool_call"},
                        {"payload", {{"name", a.name}, {"arguments", a.arguments}}}};
            } else if constexpr (std::is_same_v<A, McpCreateAction>) {
                return {{"kind", "mcp_create"},
                        {"payload",
                         {{"code", a.mcp.code},
                          {"description", a.mcp.description},
                          {"use_case", a.mcp.use_case}}}};
            } else {
                return {{"kind", "final_answer"}, {"payload", a.text}};
            }
        },
        step.action);
    return {{"reasoning", step.reasoning}, {"action", action}, {"observation", step.observation}};
}

TrajectoryStep step_from_json(const json& j) {
    TrajectoryStep step;
    step.reasoning = j.value("reasoning", "");
    step.observation = j.value("observation", "");
    const auto& action = j.at("action");
    const auto kind = action.at("kind").get<std::string>();
    const auto& payload = action.at("payload");
    if (kind == "tool_call") {
        step.action = ToolCallAction{payload.at("name").get<std::string>(),
                                     payload.value("arguments", json::object())};
    } else if (kind == "mcp_create") {
        RawMcp m;
        m.code = payload.at("code").get<std::string>();
        m.description = payload.at("description").get<std::string>();
        m.use_case = payload.at("use_case").get<std::string>();
        step.action = McpCreateAction{std::move(m)};
    } else if (kind == "final_answer") {
        step.action = FinalAnswerAction{payload.get<std::string>()};
    } else {
        fail(ErrorKind::input, "unknown step action kind: " + kind);
    }
    return step;
}

json to_json(const ExecutionRun& run) {
    json steps = json::array();
    for (const auto& s : run.steps) steps.push_back(to_json(s));
    return {{"task_id", run.task_id},
            {"run_index", run.run_index},
            {"steps", std::move(steps)},
            {"final_answer", run.final_answer},
            {"success", run.success}};
}

ExecutionRun run_from_json(const json& j) {
    static const std::set<std::string> fields{"task_id", "run_index", "steps", "final_answer",
                                              "success"};
    for (const auto& [key, _] : j.items()) {
        if (!fields.contains(key)) fail(ErrorKind::input, "unexpected trajectory field: " + key);
    }
    std::vector<TrajectoryStep> steps;
    for (const auto& s : j.at("steps")) steps.push_back(step_from_json(s));
    TaskSpec owner;
    owner.task_id = j.at("task_id").get<std::string>();
    auto run = record_run(owner, std::move(steps), j.at("run_index").get<int>());
    if (run.final_answer != j.at("final_answer").get<std::string>()) {
        fail(ErrorKind::input, "final_answer does not match last step for task " + run.task_id);
    }
    run.success = j.value("success", false);
    return run;
}

namespace {

template <typename F>
void for_each_record(std::istream& in, F&& f) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(ErrorKind::input, "line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            f(j);
        } catch (const json::exception& e) {
            fail(ErrorKind::input, "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

}  // namespace

std::vector<TaskSpec> read_tasks(std::istream& in) {
    std::vector<TaskSpec> tasks;
    for_each_record(in, [&](const json& j) { tasks.push_back(task_from_json(j)); });
    check_task_collection(tasks);
    return tasks;
}

std::vector<ExecutionRun> read_runs(std::istream& in) {
    std::vector<ExecutionRun> runs;
    for_each_record(in, [&](const json& j) { runs.push_back(run_from_json(j)); });
    return runs;
}

std::vector<RawMcp> read_raw_pool(std::istream& in) {
    std::vector<RawMcp> pool;
    for_each_record(in, [&](const json& j) { pool.push_back(raw_mcp_from_json(j)); });
    return pool;
}

void write_runs(std::ostream& out, const std::vector<ExecutionRun>& runs) {
    for (const auto& r : runs) out << to_json(r).dump() << '\n';
}

void write_raw_pool(std::ostream& out, const std::vector<RawMcp>& pool) {
    for (const auto& m : pool) out << to_json(m).dump() << '\n';
}

void check_task_collection(const std::vector<TaskSpec>& tasks) {
    std::set<std::string> ids;
    for (const auto& t : tasks) {
        if (t.task_id.empty()) fail(ErrorKind::input, "task_id must be non-empty");
        if (t.prompt.empty()) fail(ErrorKind::input, "prompt must be non-empty for task " + t.task_id);
        if (!ids.insert(t.task_id).second) fail(ErrorKind::input, "duplicate task_id: " + t.task_id);
    }
}

}  // namespace mcpforge
