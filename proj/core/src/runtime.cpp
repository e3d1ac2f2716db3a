#include "mcpforge/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <istream>
#include <ostream>
#include <thread>

#include "mcpforge/error.hpp"
#include "mcpforge/llm.hpp"
#include "text.hpp"

namespace mcpforge {

const AbstractedMcp* InferenceContext::find_tool(const std::string& mcp_id) const {
    for (const auto& t : filtered_box) {
        if (t.mcp_id == mcp_id) return &t;
    }
    return nullptr;
}

const AbstractedMcp* InferenceContext::find_tool_by_name(const std::string& name) const {
    for (const auto& t : filtered_box) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// Scripted engine

namespace {

long char_proxy_tokens(std::size_t chars) { return static_cast<long>((chars + 3) / 4); }

}  // namespace

ScriptedEngine::ScriptedEngine(std::map<std::string, TaskScript> scripts) : scripts_(std::move(scripts)) {}

EngineStep ScriptedEngine::next_step(const InferenceContext& context) {
    EngineStep step;
    auto it = scripts_.find(context.task.task_id);
    if (it == scripts_.end()) {
        step.thought = "no script for task";
        step.decision = Answer{""};
        step.token_usage = char_proxy_tokens(step.thought.size());
        return step;
    }
    const TaskScript& script = it->second;

    std::vector<std::pair<const ScriptedCall*, const AbstractedMcp*>> runnable;
    for (const auto& call : script.calls) {
        if (const auto* tool = context.find_tool_by_name(call.tool)) runnable.emplace_back(&call, tool);
    }
    const auto done = context.transcript.size();
    if (done < runnable.size()) {
        const auto& [call, tool] = runnable[done];
        step.thought = "use " + call->tool;
        const auto args = call->arguments.dump();
        step.decision = CallTool{tool->mcp_id, call->arguments};
        step.token_usage = char_proxy_tokens(step.thought.size() + args.size());
        return step;
    }

    std::optional<std::string> from_tool;
    if (script.answer_from_tool) {
        for (const auto& entry : context.transcript) {
            if (entry.tool_result && entry.tool_result->ok()) from_tool = entry.tool_result->text;
        }
    }
    std::string answer;
    if (from_tool) {
        answer = *from_tool;
    } else if (auto a = script.attempt_answers.find(context.attempt); a != script.attempt_answers.end()) {
        answer = a->second;
    } else {
        answer = script.fallback_answer;
    }
    step.thought = from_tool ? "answer from tool output" : "answer without tools";
    step.token_usage = char_proxy_tokens(step.thought.size() + answer.size());
    step.decision = Answer{std::move(answer)};
    return step;
}

ScriptedEngine ScriptedEngine::from_json(const json& j) {
    std::map<std::string, TaskScript> scripts;
    for (const auto& [task_id, body] : j.items()) {
        TaskScript s;
        for (const auto& c : body.value("calls", json::array())) {
            s.calls.push_back({c.at("tool").get<std::string>(), c.value("arguments", json::object())});
        }
        s.answer_from_tool = body.value("answer_from_tool", true);
        s.fallback_answer = body.value("fallback_answer", "");
        const auto attempts = body.value("attempt_answers", json::object());
        for (const auto& [attempt, answer] : attempts.items()) {
            s.attempt_answers[std::stoi(attempt)] = answer.get<std::string>();
        }
        scripts.emplace(task_id, std::move(s));
    }
    return ScriptedEngine(std::move(scripts));
}

json scripts_to_json(const std::map<std::string, TaskScript>& scripts) {
    json out = json::object();
    for (const auto& [task_id, s] : scripts) {
        json calls = json::array();
        for (const auto& c : s.calls) calls.push_back({{"tool", c.tool}, {"arguments", c.arguments}});
        json attempts = json::object();
        for (const auto& [attempt, answer] : s.attempt_answers) attempts[std::to_string(attempt)] = answer;
        out[task_id] = {{"calls", calls},
                        {"answer_from_tool", s.answer_from_tool},
                        {"fallback_answer", s.fallback_answer},
                        {"attempt_answers", attempts}};
    }
    return out;
}

// ---------------------------------------------------------------------------
// LLM engine

LlmEngine::LlmEngine(std::shared_ptr<ChatClient> client) : client_(std::move(client)) {
    if (!client_) fail(ErrorKind::config, "LLM engine requires a chat client");
}

std::vector<ChatMessage> LlmEngine::render(const InferenceContext& context) {
    json tools = json::array();
    for (const auto& t : context.filtered_box) tools.push_back(tool_descriptor(t));
    std::string system =
        "You are a task-solving agent. Think step by step and use tools when they help.\n"
        "Available tools (JSON descriptors):\n" +
        tools.dump(2) +
        "\n\nReply with exactly one JSON object per turn, either\n"
        "{\"thought\": \"...\", \"action\": \"call_tool\", \"tool\": \"<tool name>\", \"arguments\": {...}}\n"
        "or\n"
        "{\"thought\": \"...\", \"action\": \"answer\", \"answer\": \"<final answer>\"}\n"
        "Only the tools listed above can be called.";
    std::vector<ChatMessage> messages{{"system", std::move(system)}, {"user", context.task.prompt}};
    for (const auto& e : context.transcript) {
        json action{{"thought", e.thought}, {"action", "call_tool"}, {"tool", e.tool_call.value_or("")},
                    {"arguments", e.arguments}};
        messages.push_back({"assistant", action.dump()});
        std::string observation = "Observation: ";
        if (e.error) {
            observation += "error: " + *e.error;
        } else if (e.tool_result) {
            observation += e.tool_result->ok() ? e.tool_result->text
                                               : std::string(to_string(e.tool_result->status)) + ": " +
                                                     e.tool_result->text + " " + e.tool_result->diagnostics;
        }
        messages.push_back({"user", std::move(observation)});
    }
    return messages;
}

EngineStep LlmEngine::parse(const std::string& reply, long tokens) {
    EngineStep step;
    step.token_usage = tokens;
    json j;
    try {
        j = extract_json_object(reply);
    } catch (const Error&) {
        // Free-form reply: take it as the final answer.
        step.thought = "unstructured reply";
        step.decision = Answer{std::string(text::trim(reply))};
        return step;
    }
    step.thought = j.value("thought", "");
    if (j.value("action", "") == "call_tool" && j.contains("tool")) {
        step.decision = CallTool{j["tool"].get<std::string>(), j.value("arguments", json::object())};
    } else {
        const auto answer = j.value("answer", json(""));
        step.decision = Answer{answer.is_string() ? answer.get<std::string>() : answer.dump()};
    }
    return step;
}

EngineStep LlmEngine::next_step(const InferenceContext& context) {
    const auto reply = client_->complete(render(context));
    return parse(reply.content, reply.total_tokens);
}

// ---------------------------------------------------------------------------
// Inference loop

RunMetrics run_inference(const TaskSpec& task, const McpBox* box, const RuntimeConfig& config, Embedder* embedder,
                         ReasoningEngine& engine, ToolExecutor& executor, int attempt,
                         const AnswerComparator& comparator) {
    if (config.step_budget <= 0) fail(ErrorKind::config, "step_budget must be positive");
    config.selection.check();

    InferenceContext context;
    context.task = task;
    context.step_budget = config.step_budget;
    context.attempt = attempt;

    RunMetrics metrics;
    metrics.task_id = task.task_id;
    metrics.attempt = attempt;
    metrics.tokens_estimated = engine.tokens_estimated();

    if (box && box->size() > 0) {
        if (!embedder) fail(ErrorKind::config, "retrieval requires an embedder");
        const auto retrieval = retrieve(task.prompt, *box, config.selection, *embedder);
        context.filtered_box = filtered_view(*box, retrieval);
        for (const auto& s : retrieval.selected) metrics.selected_mcp_ids.push_back(s.mcp_id);
    }

    bool answered = false;
    for (int step_no = 0; step_no < config.step_budget; ++step_no) {
        EngineStep step = engine.next_step(context);
        context.tokens_used += std::max(0L, step.token_usage);
        if (auto* answer = std::get_if<Answer>(&step.decision)) {
            metrics.answer = answer->text;
            answered = true;
            break;
        }
        auto& call = std::get<CallTool>(step.decision);
        TranscriptEntry entry;
        entry.thought = std::move(step.thought);
        entry.tool_call = call.mcp_id;
        entry.arguments = call.arguments;
        if (const auto* tool = context.find_tool(call.mcp_id)) {
            try {
                entry.tool_result = executor.execute(*tool, call.arguments);
            } catch (const ArgumentError& e) {
                entry.tool_result = ToolResult{ToolStatus::tool_error, std::string("invalid arguments: ") + e.what(), {}, false};
            } catch (const std::exception& e) {
                entry.tool_result = ToolResult{ToolStatus::crashed, "tool crashed", e.what(), false};
            }
        } else {
            entry.error = "tool not available in filtered set: " + call.mcp_id;
        }
        context.transcript.push_back(std::move(entry));
    }

    if (!answered) {
        metrics.complete = false;
        metrics.answer = context.transcript.empty() ? std::string{} : context.transcript.back().thought;
    }
    metrics.mcp_calls = static_cast<int>(std::count_if(context.transcript.begin(), context.transcript.end(),
                                                       [](const auto& e) { return e.tool_result.has_value(); }));
    metrics.tokens_used = context.tokens_used;
    if (task.expected_answer) {
        metrics.correct = metrics.complete && comparator(metrics.answer, *task.expected_answer);
    }
    metrics.transcript = std::move(context.transcript);
    return metrics;
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<MetricsRecord> to_records(const std::vector<RunMetrics>& runs) {
    std::vector<MetricsRecord> out;
    for (const auto& r : runs) {
        out.push_back({r.task_id, r.attempt, r.correct.value_or(false), r.mcp_calls, r.tokens_used});
    }
    return out;
}

void write_metrics(std::ostream& out, const std::vector<MetricsRecord>& records) {
    for (const auto& r : records) {
        out << json{{"task_id", r.task_id},
                    {"attempt", r.attempt},
                    {"correct", r.correct},
                    {"mcp_calls", r.mcp_calls},
                    {"tokens", r.tokens}}
                   .dump()
            << '\n';
    }
}

std::vector<MetricsRecord> read_metrics(std::istream& in) {
    std::vector<MetricsRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            const auto j = json::parse(line);
            out.push_back({j.at("task_id").get<std::string>(), j.at("attempt").get<int>(), j.at("correct").get<bool>(),
                           j.at("mcp_calls").get<int>(), j.at("tokens").get<long>()});
        } catch (const json::exception& e) {
            fail(ErrorKind::input, "metrics line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

EvalSummary summarize(const std::vector<std::string>& task_order, const std::vector<MetricsRecord>& records,
                      const std::vector<MetricsRecord>* baseline) {
    EvalSummary s;
    s.task_count = task_order.size();
    if (task_order.empty()) return s;

    std::map<std::string, std::vector<const MetricsRecord*>> by_task;
    for (const auto& r : records) by_task[r.task_id].push_back(&r);

    auto first_attempt = [](const std::vector<const MetricsRecord*>& rs) -> const MetricsRecord* {
        const MetricsRecord* best = nullptr;
        for (const auto* r : rs) {
            if (r->attempt == 1) best = r;
        }
        return best;
    };

    std::size_t p1 = 0, p3 = 0;
    double calls = 0.0;
    for (const auto& id : task_order) {
        const auto& rs = by_task[id];
        const auto* a1 = first_attempt(rs);
        if (a1 && a1->correct) ++p1;
        if (a1) calls += a1->mcp_calls;
        if (std::any_of(rs.begin(), rs.end(), [](const auto* r) { return r->attempt <= 3 && r->correct; })) ++p3;
    }
    const auto n = static_cast<double>(task_order.size());
    s.pass_at_1 = static_cast<double>(p1) / n;
    s.pass_at_3 = static_cast<double>(p3) / n;
    s.avg_calls_all = calls / n;

    double tokens = 0.0;
    std::size_t token_runs = 0;
    for (const auto& id : task_order) {
        for (const auto* r : by_task[id]) {
            tokens += static_cast<double>(r->tokens);
            ++token_runs;
        }
    }
    s.avg_tokens = token_runs ? tokens / static_cast<double>(token_runs) : 0.0;

    if (baseline) {
        std::map<std::string, const MetricsRecord*> base;
        for (const auto& r : *baseline) {
            if (r.attempt == 1) base[r.task_id] = &r;
        }
        int w2r = 0, r2w = 0;
        double improved_calls = 0.0;
        for (const auto& id : task_order) {
            const auto* now = first_attempt(by_task[id]);
            auto b = base.find(id);
            if (!now || b == base.end()) continue;
            if (!b->second->correct && now->correct) {
                ++w2r;
                improved_calls += now->mcp_calls;
            } else if (b->second->correct && !now->correct) {
                ++r2w;
            }
        }
        s.wrong_to_right = w2r;
        s.right_to_wrong = r2w;
        if (w2r > 0) s.avg_calls_improved = improved_calls / w2r;
    }
    return s;
}

EvalResult evaluate(const std::vector<TaskSpec>& tasks, const McpBox* box, const RuntimeConfig& config,
                    Embedder* embedder, ReasoningEngine& engine, ToolExecutor& executor, const EvalOptions& options,
                    const std::vector<MetricsRecord>* baseline) {
    if (options.attempts < 1) fail(ErrorKind::config, "attempts must be >= 1");
    check_task_collection(tasks);

    EvalResult result;
    std::vector<const TaskSpec*> labeled;
    for (const auto& t : tasks) {
        if (t.expected_answer) {
            labeled.push_back(&t);
        } else {
            result.summary.excluded.push_back(t.task_id);
        }
    }

    const auto attempts = static_cast<std::size_t>(options.attempts);
    const std::size_t jobs = labeled.size() * attempts;
    std::vector<RunMetrics> runs(jobs);
    std::vector<std::exception_ptr> errors(jobs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs; j = next++) {
            try {
                runs[j] = run_inference(*labeled[j / attempts], box, config, embedder, engine, executor,
                                        static_cast<int>(j % attempts) + 1, options.comparator);
            } catch (...) {
                errors[j] = std::current_exception();
            }
        }
    };
    const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, options.workers)), jobs);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::vector<std::string> order;
    for (const auto* t : labeled) order.push_back(t->task_id);
    auto summary = summarize(order, to_records(runs), baseline);
    summary.excluded = std::move(result.summary.excluded);
    result.summary = std::move(summary);
    result.runs = std::move(runs);
    return result;
}

json to_json(const EvalSummary& s) {
    json j{{"task_count", s.task_count},   {"pass_at_1", s.pass_at_1},         {"pass_at_3", s.pass_at_3},
           {"avg_tokens", s.avg_tokens},   {"avg_calls_all", s.avg_calls_all}, {"excluded", s.excluded}};
    j["wrong_to_right"] = s.wrong_to_right ? json(*s.wrong_to_right) : json(nullptr);
    j["right_to_wrong"] = s.right_to_wrong ? json(*s.right_to_wrong) : json(nullptr);
    j["avg_calls_improved"] = s.avg_calls_improved ? json(*s.avg_calls_improved) : json(nullptr);
    return j;
}

json to_json(const RunMetrics& m) {
    json transcript = json::array();
    for (const auto& e : m.transcript) {
        json entry{{"thought", e.thought}};
        if (e.tool_call) {
            entry["tool_call"] = *e.tool_call;
            entry["arguments"] = e.arguments;
        }
        if (e.tool_result) {
            entry["tool_result"] = {{"status", to_string(e.tool_result->status)},
                                    {"text", e.tool_result->text},
                                    {"diagnostics", e.tool_result->diagnostics}};
        }
        if (e.error) entry["error"] = *e.error;
        transcript.push_back(std::move(entry));
    }
    return {{"task_id", m.task_id},
            {"attempt", m.attempt},
            {"answer", m.answer},
            {"complete", m.complete},
            {"correct", m.correct ? json(*m.correct) : json(nullptr)},
            {"mcp_calls", m.mcp_calls},
            {"tokens_used", m.tokens_used},
            {"tokens_source", m.tokens_estimated ? "char_count_proxy" : "engine_reported"},
            {"selected_mcp_ids", m.selected_mcp_ids},
            {"transcript", transcript}};
}

}  // namespace mcpforge
