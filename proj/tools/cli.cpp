#include <httplib.h>

#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "mcpforge/abstraction.hpp"
#include "mcpforge/box.hpp"
#include "mcpforge/config.hpp"
#include "mcpforge/error.hpp"
#include "mcpforge/executor.hpp"
#include "mcpforge/log.hpp"
#include "mcpforge/retriever.hpp"
#include "mcpforge/runtime.hpp"
#include "mcpforge/server.hpp"
#include "mcpforge/synthetic.hpp"
#include "mcpforge/trajectory.hpp"

namespace mcpforge::cli {

namespace {

namespace fs = std::filesystem;

// Flag values that overlay the config file.
struct Overrides {
    std::string config_path;
    std::string log_level = "info";
    std::string mode;
    double tau = 0.0;
    int k = 0;
    std::string empty_fallback;
    std::string context_mode;
    std::string embedder;
    std::string embedder_table;
    std::size_t dims = 0;
    int parallelism = 0;
    int step_budget = 0;
    std::string engine;
    long tool_timeout_ms = 0;

    std::map<std::string, CLI::Option*> options;

    bool given(const std::string& name) const {
        auto it = options.find(name);
        return it != options.end() && it->second->count() > 0;
    }

    PipelineConfig resolve() const {
        PipelineConfig base = config_path.empty() ? PipelineConfig{} : load_config(config_path);
        json overlay = json::object();
        if (given("mode")) overlay["selection"]["mode"] = mode;
        if (given("tau")) overlay["selection"]["tau"] = tau;
        if (given("k")) overlay["selection"]["k"] = k;
        if (given("empty-fallback")) overlay["selection"]["empty_fallback"] = empty_fallback;
        if (given("context-mode")) overlay["context_mode"] = context_mode;
        if (given("embedder")) overlay["embedder"]["provider"] = embedder;
        if (given("embedder-table")) overlay["embedder"]["table"] = embedder_table;
        if (given("dims")) overlay["embedder"]["dims"] = dims;
        if (given("parallelism")) overlay["parallelism"] = parallelism;
        if (given("step-budget")) overlay["step_budget"] = step_budget;
        if (given("engine")) overlay["engine"]["provider"] = engine;
        if (given("tool-timeout-ms")) overlay["executor"]["timeout_ms"] = tool_timeout_ms;
        return apply_config(std::move(base), overlay);
    }
};

void add_overrides(CLI::App& app, Overrides& o) {
    auto& m = o.options;
    m["config"] = app.add_option("--config", o.config_path, "JSON config file (comments allowed)");
    m["log-level"] = app.add_option("--log-level", o.log_level, "debug|info|warn|error")
                         ->check(CLI::IsMember({"debug", "info", "warn", "error"}));
    m["mode"] = app.add_option("--mode", o.mode, "Selection mode: threshold|top_k")
                    ->check(CLI::IsMember({"threshold", "top_k"}));
    m["tau"] = app.add_option("--tau", o.tau, "Similarity threshold in (0, 1]");
    m["k"] = app.add_option("--k", o.k, "Number of tools kept in top_k mode");
    m["empty-fallback"] = app.add_option("--empty-fallback", o.empty_fallback, "allow_empty|fall_back_top_1")
                              ->check(CLI::IsMember({"allow_empty", "fall_back_top_1"}));
    m["context-mode"] = app.add_option("--context-mode", o.context_mode, "both|description_only|use_case_only")
                            ->check(CLI::IsMember({"both", "description_only", "use_case_only"}));
    m["embedder"] = app.add_option("--embedder", o.embedder, "Embedding provider: hashing|api|fixture")
                        ->check(CLI::IsMember({"hashing", "api", "fixture"}));
    m["embedder-table"] = app.add_option("--embedder-table", o.embedder_table, "Vector table for the fixture embedder");
    m["dims"] = app.add_option("--dims", o.dims, "Embedding dimensionality");
    m["parallelism"] = app.add_option("--parallelism", o.parallelism, "Worker count for fan-out stages");
    m["step-budget"] = app.add_option("--step-budget", o.step_budget, "Maximum engine steps per task");
    m["engine"] = app.add_option("--engine", o.engine, "Reasoning engine: scripted|api")
                      ->check(CLI::IsMember({"scripted", "api"}));
    m["tool-timeout-ms"] = app.add_option("--tool-timeout-ms", o.tool_timeout_ms, "Per-call tool timeout");
}

log::Level parse_level(const std::string& s) {
    if (s == "debug") return log::Level::debug;
    if (s == "warn") return log::Level::warn;
    if (s == "error") return log::Level::error;
    return log::Level::info;
}

// ---------------------------------------------------------------------------
// File helpers

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::input, "cannot read " + path);
    return in;
}

json read_json_file(const std::string& path) {
    auto in = open_in(path);
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
        fail(ErrorKind::input, path + ": " + e.what());
    }
}

// Writes to a file, or to `out` when the path is empty or "-".
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : path_(path) {
        if (path.empty() || path == "-") {
            stream_ = &fallback;
        } else {
            file_.open(path, std::ios::binary | std::ios::trunc);
            if (!file_) fail(ErrorKind::input, "cannot write " + path);
            stream_ = &file_;
        }
    }
    std::ostream& operator*() { return *stream_; }
    void close() {
        stream_->flush();
        if (file_.is_open()) {
            file_.close();
            if (!file_) fail(ErrorKind::input, "write failed: " + path_);
        }
    }

private:
    std::string path_;
    std::ofstream file_;
    std::ostream* stream_ = nullptr;
};

void emit(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

std::vector<AbstractedMcp> read_abstracted_files(const std::vector<std::string>& paths) {
    std::vector<AbstractedMcp> all;
    for (const auto& p : paths) {
        auto in = open_in(p);
        auto part = read_abstracted(in);
        all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return all;
}

// A task file holds one JSON object, a JSON array, or one task per line.
std::vector<TaskSpec> read_task_file(const std::string& path) {
    auto in = open_in(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    std::vector<TaskSpec> tasks;
    try {
        const json whole = json::parse(text);
        if (whole.is_object()) {
            tasks.push_back(task_from_json(whole));
        } else if (whole.is_array()) {
            for (const auto& t : whole) tasks.push_back(task_from_json(t));
        } else {
            fail(ErrorKind::input, path + ": expected a task object or array");
        }
    } catch (const json::parse_error&) {
        std::istringstream lines(text);
        tasks = read_tasks(lines);
    } catch (const json::exception& e) {
        fail(ErrorKind::input, path + ": " + e.what());
    }
    check_task_collection(tasks);
    return tasks;
}

AnswerComparator comparator_for(const std::string& name) {
    if (name == "numeric") return numeric_unit_comparator;
    return default_comparator;
}

std::unique_ptr<ReasoningEngine> make_engine(const PipelineConfig& config, const std::string& script_path) {
    if (config.engine.provider == "scripted") {
        if (script_path.empty()) fail(ErrorKind::config, "the scripted engine requires --script");
        try {
            return std::make_unique<ScriptedEngine>(ScriptedEngine::from_json(read_json_file(script_path)));
        } catch (const json::exception& e) {
            fail(ErrorKind::input, script_path + ": " + e.what());
        }
    }
    if (config.engine.provider == "api") return std::make_unique<LlmEngine>(make_chat_client(config.engine));
    fail(ErrorKind::config, "unknown engine provider: " + config.engine.provider);
}

ExecutionLimits limits_for(const PipelineConfig& config) {
    return {std::chrono::milliseconds(config.tool_timeout_ms), config.tool_output_cap};
}

std::string fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

json stats_row(int iteration, const BoxStats& s) {
    json row = to_json(s);
    row["iteration"] = iteration;
    return row;
}

void print_stats_table(std::ostream& out, const std::vector<std::pair<int, BoxStats>>& rows) {
    out << "Iter.  # MCPs  # Clusters  Coverage  Mean Sim.  Median Sim.\n";
    for (const auto& [iteration, s] : rows) {
        auto opt = [](const std::optional<double>& v) { return v ? fixed(*v, 2) : std::string("-"); };
        out << std::left << std::setw(7) << iteration << std::setw(8) << s.mcp_count << std::setw(12)
            << s.cluster_count << std::setw(10) << fixed(s.coverage_ratio, 2) << std::setw(11)
            << opt(s.mean_similarity) << opt(s.median_similarity) << '\n';
    }
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return exit_config;
        case ErrorKind::input:
        case ErrorKind::corrupt:
        case ErrorKind::version:
        case ErrorKind::protocol: return exit_input;
        case ErrorKind::provider: return exit_provider;
        case ErrorKind::internal: break;
    }
    return exit_failure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Harvest, abstract, store and serve reusable tools from agent trajectories", "mcpforge"};
    app.fallthrough();
    app.require_subcommand(1);
    Overrides o;
    add_overrides(app, o);

    // harvest
    struct {
        std::string tasks, runs, out, runs_out, comparator = "exact";
    } harvest;
    auto* harvest_cmd = app.add_subcommand("harvest", "Judge recorded runs and extract the raw tool pool");
    harvest_cmd->add_option("--tasks", harvest.tasks, "Task file (JSONL)")->required();
    harvest_cmd->add_option("--runs", harvest.runs, "Recorded runs (JSONL)")->required();
    harvest_cmd->add_option("--out", harvest.out, "Raw pool output (JSONL)")->required();
    harvest_cmd->add_option("--runs-out", harvest.runs_out, "Judged runs output (JSONL)");
    harvest_cmd->add_option("--comparator", harvest.comparator, "Answer comparator: exact|numeric")
        ->check(CLI::IsMember({"exact", "numeric"}));

    // abstract
    struct {
        std::string pool, out, rejected, rules;
    } abstract;
    auto* abstract_cmd = app.add_subcommand("abstract", "Rewrite raw tools into parameterized, documented tools");
    abstract_cmd->add_option("--pool", abstract.pool, "Raw pool (JSONL)")->required();
    abstract_cmd->add_option("--out", abstract.out, "Accepted tools output (JSONL)")->required();
    abstract_cmd->add_option("--rejected", abstract.rejected, "Rejection report output (JSONL)");
    abstract_cmd->add_option("--rules", abstract.rules, "Literal rewrite rules for the mock provider (JSON)");

    // box
    auto* box_cmd = app.add_subcommand("box", "Build, merge and inspect box files");
    box_cmd->require_subcommand(1);
    struct {
        std::vector<std::string> mcps;
        std::string out;
        int iteration = 1;
    } build;
    auto* build_cmd = box_cmd->add_subcommand("build", "Embed abstracted tools into a box file");
    build_cmd->add_option("--mcps", build.mcps, "Abstracted tools (JSONL); repeatable")->required();
    build_cmd->add_option("--out", build.out, "Box file")->required();
    build_cmd->add_option("--iteration-count", build.iteration, "Generation iterations the box represents");
    struct {
        std::vector<std::string> boxes;
        std::string out;
    } merge;
    auto* merge_cmd = box_cmd->add_subcommand("merge", "Union boxes from successive generation iterations");
    merge_cmd->add_option("--box", merge.boxes, "Input box; repeatable")->required();
    merge_cmd->add_option("--out", merge.out, "Merged box file")->required();
    struct {
        std::vector<std::string> boxes;
        std::string format = "json";
        bool cumulative = false;
    } stats;
    auto* stats_cmd = box_cmd->add_subcommand("stats", "Redundancy statistics at --tau");
    stats_cmd->add_option("--box", stats.boxes, "Box file; repeatable, one row each")->required();
    stats_cmd->add_option("--format", stats.format, "json|table")->check(CLI::IsMember({"json", "table"}));
    stats_cmd->add_flag("--cumulative", stats.cumulative, "Row i covers the merge of boxes 1..i");

    // retrieve
    struct {
        std::string box, query, out;
    } retrieve_opts;
    auto* retrieve_cmd = app.add_subcommand("retrieve", "Score a query against a box and select tools");
    retrieve_cmd->add_option("--box", retrieve_opts.box, "Box file")->required();
    retrieve_cmd->add_option("--query", retrieve_opts.query, "Query text")->required();
    retrieve_cmd->add_option("--out", retrieve_opts.out, "Output file (default stdout)");

    // serve
    struct {
        std::string box, transport = "stdio", host = "127.0.0.1", query;
        int port = 8080;
    } serve;
    auto* serve_cmd = app.add_subcommand("serve", "Serve a box as an MCP tool server");
    serve_cmd->add_option("--box", serve.box, "Box file")->required();
    serve_cmd->add_option("--transport", serve.transport, "stdio|http")->check(CLI::IsMember({"stdio", "http"}));
    serve_cmd->add_option("--host", serve.host, "HTTP bind address");
    serve_cmd->add_option("--port", serve.port, "HTTP port; 0 picks a free port");
    serve_cmd->add_option("--query", serve.query, "Session query for stdio clients that do not send one");

    // run
    struct {
        std::string box, task, script, out, comparator = "exact";
        int attempt = 1;
    } run_opts;
    auto* run_cmd = app.add_subcommand("run", "Run the agent on tasks and report per-run metrics");
    run_cmd->add_option("--box", run_opts.box, "Box file; omit for the no-tool baseline");
    run_cmd->add_option("--task", run_opts.task, "Task file (object, array or JSONL)")->required();
    run_cmd->add_option("--script", run_opts.script, "Scripts for the scripted engine (JSON)");
    run_cmd->add_option("--attempt", run_opts.attempt, "Attempt number passed to the engine");
    run_cmd->add_option("--out", run_opts.out, "Output file (default stdout)");
    run_cmd->add_option("--comparator", run_opts.comparator, "exact|numeric")
        ->check(CLI::IsMember({"exact", "numeric"}));

    // eval
    struct {
        std::string box, tasks, script, baseline, metrics_out, out, comparator = "exact";
        int attempts = 1;
    } eval;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate pass@1, pass@3, tokens and flips over a task set");
    eval_cmd->add_option("--tasks", eval.tasks, "Task file (object, array or JSONL)")->required();
    eval_cmd->add_option("--box", eval.box, "Box file; omit for the no-tool baseline");
    eval_cmd->add_option("--script", eval.script, "Scripts for the scripted engine (JSON)");
    eval_cmd->add_option("--attempts", eval.attempts, "Attempts per task")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--baseline", eval.baseline, "Baseline metrics file for flip counts");
    eval_cmd->add_option("--metrics-out", eval.metrics_out, "Per-attempt metrics output (JSONL)");
    eval_cmd->add_option("--out", eval.out, "Summary output (default stdout)");
    eval_cmd->add_option("--comparator", eval.comparator, "exact|numeric")->check(CLI::IsMember({"exact", "numeric"}));

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Write the built-in synthetic corpora");
    synth_cmd->require_subcommand(1);
    struct {
        std::string out_dir;
        std::uint64_t seed = synthetic::RedundancyCorpusSpec{}.seed;
    } synth;
    auto* redundancy_cmd = synth_cmd->add_subcommand("redundancy", "Five iterations with injected near-duplicates");
    redundancy_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();
    redundancy_cmd->add_option("--seed", synth.seed, "Generator seed");
    auto* suite_cmd = synth_cmd->add_subcommand("suite", "Ten-task scripted evaluation suite");
    suite_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();

    auto* config_cmd = app.add_subcommand("config", "Print the effective configuration");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return exit_usage;
    }

    log::set_sink([&err](log::Level level, const std::string& message) {
        static const char* names[] = {"debug", "info", "warn", "error"};
        err << "[" << names[static_cast<int>(level)] << "] " << message << '\n';
    });
    log::set_level(parse_level(o.log_level));
    struct ResetSink {
        ~ResetSink() { log::set_sink(nullptr); }
    } reset_sink;

    try {
        const PipelineConfig config = o.resolve();

        if (config_cmd->parsed()) {
            emit(out, to_json(config));
            return exit_ok;
        }

        if (harvest_cmd->parsed()) {
            auto tasks_in = open_in(harvest.tasks);
            const auto tasks = read_tasks(tasks_in);
            check_task_collection(tasks);
            std::map<std::string, const TaskSpec*> by_id;
            for (const auto& t : tasks) by_id[t.task_id] = &t;
            auto runs_in = open_in(harvest.runs);
            const auto runs = read_runs(runs_in);
            const auto cmp = comparator_for(harvest.comparator);
            std::vector<ExecutionRun> judged;
            for (const auto& r : runs) {
                auto it = by_id.find(r.task_id);
                if (it == by_id.end()) fail(ErrorKind::input, "run references unknown task: " + r.task_id);
                auto rec = record_run(*it->second, r.steps, r.run_index);
                if (it->second->expected_answer) {
                    rec = judge_success(std::move(rec), *it->second, cmp);
                } else {
                    rec.success = r.success;
                }
                judged.push_back(std::move(rec));
            }
            const auto pool = extract_raw_pool(judged);
            Sink pool_out(harvest.out, out);
            write_raw_pool(*pool_out, pool);
            pool_out.close();
            if (!harvest.runs_out.empty()) {
                Sink runs_out(harvest.runs_out, out);
                write_runs(*runs_out, judged);
                runs_out.close();
            }
            std::size_t successful = 0;
            for (const auto& r : judged) successful += r.success ? 1 : 0;
            log::info("harvest: " + std::to_string(judged.size()) + " runs, " + std::to_string(successful) +
                      " successful, " + std::to_string(pool.size()) + " raw tools");
            if (harvest.out != "-") {
                emit(out, {{"runs", judged.size()}, {"successful", successful}, {"pool_size", pool.size()}});
            }
            return exit_ok;
        }

        if (abstract_cmd->parsed()) {
            auto pool_in = open_in(abstract.pool);
            const auto pool = read_raw_pool(pool_in);
            std::unique_ptr<AbstractionProvider> provider;
            if (config.abstraction.provider == "mock") {
                std::vector<LiteralRewrite> rules;
                if (!abstract.rules.empty()) {
                    try {
                        for (const auto& r : read_json_file(abstract.rules)) {
                            rules.push_back({r.at("literal").get<std::string>(), parameter_from_json(r.at("parameter"))});
                        }
                    } catch (const json::exception& e) {
                        fail(ErrorKind::input, abstract.rules + ": " + e.what());
                    }
                }
                provider = std::make_unique<RuleBasedAbstractionProvider>(std::move(rules), config.validator);
            } else if (config.abstraction.provider == "api") {
                provider = std::make_unique<LlmAbstractionProvider>(make_chat_client(config.abstraction),
                                                                    config.abstraction_prompt);
            } else {
                fail(ErrorKind::config, "unknown abstraction provider: " + config.abstraction.provider);
            }
            const auto result =
                abstract_pool(pool, *provider, config.max_retries, config.parallelism, config.validator);
            Sink accepted_out(abstract.out, out);
            write_abstracted(*accepted_out, result.accepted);
            accepted_out.close();
            if (!abstract.rejected.empty()) {
                Sink rejected_out(abstract.rejected, out);
                for (const auto& r : result.rejected) {
                    json violations = json::array();
                    for (const auto& v : r.report.violations) {
                        violations.push_back({{"check", v.check_name}, {"detail", v.detail}});
                    }
                    *rejected_out << json{{"content_hash", r.content_hash},
                                          {"reason", r.reason},
                                          {"attempts", r.report.attempts},
                                          {"violations", violations}}
                                         .dump()
                                  << '\n';
                }
                rejected_out.close();
            }
            if (abstract.out != "-") {
                emit(out, {{"provider", provider->id()},
                           {"accepted", result.accepted.size()},
                           {"rejected", result.rejected.size()}});
            }
            return exit_ok;
        }

        if (build_cmd->parsed()) {
            const auto mcps = read_abstracted_files(build.mcps);
            auto embedder = make_embedder(config.embedder);
            auto box = build_box(mcps, *embedder, config.context_mode);
            if (build.iteration < 1) fail(ErrorKind::config, "--iteration-count must be >= 1");
            box.iteration_count = build.iteration;
            save_box(box, build.out);
            emit(out, {{"mcp_count", box.size()},
                       {"embedder_id", box.embedder_id},
                       {"dims", box.dims},
                       {"iteration_count", box.iteration_count}});
            return exit_ok;
        }

        if (merge_cmd->parsed()) {
            std::vector<McpBox> boxes;
            for (const auto& p : merge.boxes) boxes.push_back(load_box(p));
            const auto merged = merge_boxes(boxes);
            save_box(merged, merge.out);
            emit(out, {{"mcp_count", merged.size()},
                       {"embedder_id", merged.embedder_id},
                       {"iteration_count", merged.iteration_count}});
            return exit_ok;
        }

        if (stats_cmd->parsed()) {
            std::vector<McpBox> boxes;
            for (const auto& p : stats.boxes) boxes.push_back(load_box(p));
            std::vector<std::pair<int, BoxStats>> rows;
            for (std::size_t i = 0; i < boxes.size(); ++i) {
                if (stats.cumulative) {
                    const std::vector<McpBox> prefix(boxes.begin(), boxes.begin() + static_cast<long>(i) + 1);
                    const auto merged = merge_boxes(prefix);
                    rows.emplace_back(merged.iteration_count, compute_stats(merged, config.selection.tau));
                } else {
                    rows.emplace_back(boxes[i].iteration_count, compute_stats(boxes[i], config.selection.tau));
                }
            }
            if (stats.format == "table") {
                print_stats_table(out, rows);
            } else if (rows.size() == 1) {
                emit(out, stats_row(rows[0].first, rows[0].second));
            } else {
                json all = json::array();
                for (const auto& [iteration, s] : rows) all.push_back(stats_row(iteration, s));
                emit(out, all);
            }
            return exit_ok;
        }

        if (retrieve_cmd->parsed()) {
            const auto box = load_box(retrieve_opts.box);
            auto embedder = make_embedder(config.embedder);
            const auto result = retrieve(retrieve_opts.query, box, config.selection, *embedder);
            json j = to_json(result);
            j["selection"] = {{"mode", to_string(config.selection.mode)},
                              {"tau", config.selection.tau},
                              {"k", config.selection.k},
                              {"empty_fallback", to_string(config.selection.empty_fallback)}};
            Sink sink(retrieve_opts.out, out);
            emit(*sink, j);
            sink.close();
            return exit_ok;
        }

        if (serve_cmd->parsed()) {
            auto box = std::make_shared<const McpBox>(load_box(serve.box));
            std::shared_ptr<Embedder> embedder = make_embedder(config.embedder);
            auto executor = std::make_shared<McpExecutor>(BuiltinRegistry::with_standard_tools(), limits_for(config));
            ToolServer server(box, embedder, executor, ServerConfig{config.selection});
            if (serve.transport == "stdio") {
                log::info("serving " + std::to_string(box->size()) + " tools on stdio");
                server.serve_stdio(in, out, serve.query.empty() ? std::nullopt : std::optional(serve.query));
                return exit_ok;
            }
            httplib::Server http;
            server.mount_http(http);
            int port = serve.port;
            if (port == 0) {
                port = http.bind_to_any_port(serve.host);
            } else if (!http.bind_to_port(serve.host, port)) {
                port = -1;
            }
            if (port < 0) fail(ErrorKind::config, "cannot bind " + serve.host + ":" + std::to_string(serve.port));
            log::info("serving " + std::to_string(box->size()) + " tools on http://" + serve.host + ":" +
                      std::to_string(port));
            http.listen_after_bind();
            return exit_ok;
        }

        if (run_cmd->parsed()) {
            const auto tasks = read_task_file(run_opts.task);
            std::optional<McpBox> box;
            std::shared_ptr<Embedder> embedder;
            if (!run_opts.box.empty()) {
                box = load_box(run_opts.box);
                embedder = make_embedder(config.embedder);
            }
            auto engine = make_engine(config, run_opts.script);
            McpExecutor executor(BuiltinRegistry::with_standard_tools(), limits_for(config));
            const RuntimeConfig rc{config.selection, config.step_budget};
            const auto cmp = comparator_for(run_opts.comparator);
            Sink sink(run_opts.out, out);
            for (const auto& task : tasks) {
                const auto metrics = run_inference(task, box ? &*box : nullptr, rc, embedder.get(), *engine,
                                                   executor, run_opts.attempt, cmp);
                *sink << to_json(metrics).dump() << '\n';
            }
            sink.close();
            return exit_ok;
        }

        if (eval_cmd->parsed()) {
            const auto tasks = read_task_file(eval.tasks);
            std::optional<McpBox> box;
            std::shared_ptr<Embedder> embedder;
            if (!eval.box.empty()) {
                box = load_box(eval.box);
                embedder = make_embedder(config.embedder);
            }
            std::optional<std::vector<MetricsRecord>> baseline;
            if (!eval.baseline.empty()) {
                auto b = open_in(eval.baseline);
                baseline = read_metrics(b);
            }
            auto engine = make_engine(config, eval.script);
            McpExecutor executor(BuiltinRegistry::with_standard_tools(), limits_for(config));
            const RuntimeConfig rc{config.selection, config.step_budget};
            EvalOptions options{eval.attempts, config.parallelism, comparator_for(eval.comparator)};
            const auto result = evaluate(tasks, box ? &*box : nullptr, rc, embedder.get(), *engine, executor,
                                         options, baseline ? &*baseline : nullptr);
            if (!eval.metrics_out.empty()) {
                Sink metrics(eval.metrics_out, out);
                write_metrics(*metrics, to_records(result.runs));
                metrics.close();
            }
            Sink sink(eval.out, out);
            emit(*sink, to_json(result.summary));
            sink.close();
            return exit_ok;
        }

        if (redundancy_cmd->parsed()) {
            synthetic::RedundancyCorpusSpec spec;
            spec.seed = synth.seed;
            const auto corpus = synthetic::make_redundancy_corpus(spec);
            fs::create_directories(synth.out_dir);
            for (std::size_t i = 0; i < corpus.iterations.size(); ++i) {
                Sink s((fs::path(synth.out_dir) / ("iteration_" + std::to_string(i + 1) + ".jsonl")).string(), out);
                write_abstracted(*s, corpus.iterations[i]);
                s.close();
            }
            Sink table((fs::path(synth.out_dir) / "embedder.json").string(), out);
            *table << to_json(*corpus.embedder()).dump() << '\n';
            table.close();
            Sink whole((fs::path(synth.out_dir) / "corpus.json").string(), out);
            *whole << to_json(corpus).dump() << '\n';
            whole.close();
            emit(out, {{"iterations", corpus.iterations.size()}, {"embedder_id", corpus.embedder_id()}});
            return exit_ok;
        }

        if (suite_cmd->parsed()) {
            const auto suite = synthetic::make_scripted_suite();
            fs::create_directories(synth.out_dir);
            const fs::path dir(synth.out_dir);
            Sink tasks((dir / "tasks.jsonl").string(), out);
            for (const auto& t : suite.tasks) *tasks << to_json(t).dump() << '\n';
            tasks.close();
            Sink tools((dir / "tools.jsonl").string(), out);
            write_abstracted(*tools, suite.tools);
            tools.close();
            Sink script((dir / "script.json").string(), out);
            *script << scripts_to_json(suite.scripts).dump(2) << '\n';
            script.close();
            Sink table((dir / "embedder.json").string(), out);
            *table << to_json(*suite.embedder).dump() << '\n';
            table.close();
            emit(out, {{"tasks", suite.tasks.size()}, {"tools", suite.tools.size()}});
            return exit_ok;
        }
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
    err << app.help();
    return exit_usage;
}

}  // namespace mcpforge::cli
