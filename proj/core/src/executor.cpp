#include "mcpforge/executor.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <chrono>
#include <csignal>
#include <cstring>
#include <mutex>
#include <regex>
#include <set>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "mcpforge/error.hpp"
#include "mcpforge/protocol.hpp"
#include "text.hpp"

namespace mcpforge {

const char* to_string(ToolStatus status) {
    switch (status) {
        case ToolStatus::ok: return "ok";
        case ToolStatus::tool_error: return "tool error";
        case ToolStatus::timeout: return "tool timeout";
        case ToolStatus::crashed: return "tool crashed";
    }
    return "tool error";
}

namespace {

bool matches_type(const json& v, TypeTag tag) {
    switch (tag) {
        case TypeTag::string: return v.is_string();
        case TypeTag::integer: return v.is_number_integer();
        case TypeTag::number: return v.is_number();
        case TypeTag::boolean: return v.is_boolean();
        case TypeTag::array: return v.is_array();
        case TypeTag::object: return v.is_object();
    }
    return false;
}

void cap_output(ToolResult& r, std::size_t cap) {
    if (r.text.size() > cap) {
        r.text.resize(cap);
        r.truncated = true;
    }
}

}  // namespace

void validate_arguments(const AbstractedMcp& mcp, const json& arguments) {
    if (!arguments.is_object()) throw ArgumentError("arguments for " + mcp.mcp_id + " must be an object");
    std::set<std::string> known;
    for (const auto& p : mcp.parameters) {
        known.insert(p.name);
        auto it = arguments.find(p.name);
        if (it == arguments.end()) {
            if (p.required) throw ArgumentError("missing required argument: " + p.name);
            continue;
        }
        if (!matches_type(*it, p.type_tag)) {
            throw ArgumentError("argument " + p.name + " must be of type " + to_string(p.type_tag));
        }
    }
    for (const auto& [key, _] : arguments.items()) {
        if (!known.contains(key)) throw ArgumentError("unknown argument: " + key);
    }
}

json with_defaults(const AbstractedMcp& mcp, const json& arguments) {
    json out = arguments;
    for (const auto& p : mcp.parameters) {
        if (!out.contains(p.name) && p.default_value) out[p.name] = *p.default_value;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Builtins

void BuiltinRegistry::add(std::string key, BuiltinTool tool) { tools_[std::move(key)] = std::move(tool); }

const BuiltinTool* BuiltinRegistry::find(const std::string& key) const {
    auto it = tools_.find(key);
    return it == tools_.end() ? nullptr : &it->second;
}

std::vector<std::string> BuiltinRegistry::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : tools_) out.push_back(k);
    return out;
}

namespace {

std::string format_number(double v) {
    if (v == static_cast<double>(static_cast<long long>(v)) && std::abs(v) < 1e15) {
        return std::to_string(static_cast<long long>(v));
    }
    json j = v;
    return j.dump();
}

}  // namespace

BuiltinRegistry BuiltinRegistry::with_standard_tools() {
    BuiltinRegistry r;
    r.add("echo", [](const json& a) { return a.at("text").get<std::string>(); });
    r.add("concat", [](const json& a) {
        const auto sep = a.value("separator", std::string{});
        std::string out;
        bool first = true;
        for (const auto& part : a.at("parts")) {
            if (!first) out += sep;
            out += part.is_string() ? part.get<std::string>() : part.dump();
            first = false;
        }
        return out;
    });
    r.add("add", [](const json& a) {
        return format_number(a.at("a").get<double>() + a.at("b").get<double>());
    });
    r.add("word_count", [](const json& a) {
        return std::to_string(text::split_ws(a.at("text").get<std::string>()).size());
    });
    r.add("extract_measurement", [](const json& a) {
        const auto text = a.at("text").get<std::string>();
        const auto pattern = a.value("measurement_pattern", std::string(R"(([0-9]+(?:\.[0-9]+)?)\s*(mL|L|g|kg|mg|cm|mm|m|s|K))"));
        std::smatch m;
        std::regex re;
        try {
            re = std::regex(pattern);
        } catch (const std::regex_error&) {
            throw std::runtime_error("invalid measurement_pattern");
        }
        if (!std::regex_search(text, m, re)) return std::string("no measurement found");
        if (m.size() >= 3 && m[2].matched) return m[1].str() + " " + m[2].str();
        return m.size() >= 2 && m[1].matched ? m[1].str() : m[0].str();
    });
    return r;
}

// ---------------------------------------------------------------------------
// Subprocess

namespace {

using Clock = std::chrono::steady_clock;

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

void make_pipe(Fd& read_end, Fd& write_end) {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) fail(ErrorKind::internal, std::string("pipe: ") + std::strerror(errno));
    read_end.fd = fds[0];
    write_end.fd = fds[1];
}

struct ChildExit {
    bool exited = false;
    int code = 0;
    int signal = 0;
};

ChildExit decode_status(int status) {
    ChildExit e;
    e.exited = true;
    if (WIFEXITED(status)) e.code = WEXITSTATUS(status);
    if (WIFSIGNALED(status)) e.signal = WTERMSIG(status);
    return e;
}

ChildExit kill_and_reap(pid_t pid) {
    ::kill(pid, SIGKILL);
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    return decode_status(status);
}

bool try_reap(pid_t pid, ChildExit& out) {
    int status = 0;
    const auto r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) {
        out = decode_status(status);
        return true;
    }
    return false;
}

ToolResult decode_reply(const std::string& frame) {
    ToolResult r;
    json reply;
    try {
        reply = json::parse(frame);
    } catch (const json::exception&) {
        r.status = ToolStatus::crashed;
        r.diagnostics = "tool replied with malformed JSON";
        return r;
    }
    if (auto err = reply.find("error"); err != reply.end()) {
        r.status = ToolStatus::tool_error;
        r.text = err->value("message", std::string("tool error"));
        return r;
    }
    const auto result = reply.value("result", json::object());
    for (const auto& item : result.value("content", json::array())) {
        if (item.value("type", "") == "text") r.text += item.value("text", "");
    }
    if (result.value("isError", false)) r.status = ToolStatus::tool_error;
    return r;
}

}  // namespace

ToolResult run_subprocess_tool(const std::vector<std::string>& argv, const std::string& tool_name,
                               const json& arguments, const ExecutionLimits& limits) {
    if (argv.empty()) fail(ErrorKind::config, "subprocess tool has an empty command");
    ignore_sigpipe();

    Fd in_r, in_w, out_r, out_w, err_r, err_w;
    make_pipe(in_r, in_w);
    make_pipe(out_r, out_w);
    make_pipe(err_r, err_w);

    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) fail(ErrorKind::internal, std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        ::dup2(in_r.fd, STDIN_FILENO);
        ::dup2(out_w.fd, STDOUT_FILENO);
        ::dup2(err_w.fd, STDERR_FILENO);
        ::execvp(cargv[0], cargv.data());
        const char msg[] = "exec failed\n";
        [[maybe_unused]] auto n = ::write(STDERR_FILENO, msg, sizeof msg - 1);
        ::_exit(127);
    }
    in_r.reset();
    out_w.reset();
    err_w.reset();

    const auto request = protocol::make_request(1, "tools/call", {{"name", tool_name}, {"arguments", arguments}});
    std::string pending = "Content-Length: " + std::to_string(request.dump().size()) + "\r\n\r\n" + request.dump();
    ::fcntl(in_w.fd, F_SETFL, O_NONBLOCK);

    auto deadline = Clock::now() + limits.timeout;
    // Once a reply is in, a tool that keeps running gets a short grace period.
    const auto grace = std::chrono::milliseconds(250);
    const std::size_t stream_cap = limits.output_cap * 4 + (1u << 20);
    protocol::FrameDecoder decoder;
    std::optional<std::string> reply;
    std::string diagnostics;
    std::size_t stdout_bytes = 0;
    ChildExit exit_info;
    bool overflow = false;

    while (true) {
        if (!exit_info.exited) try_reap(pid, exit_info);
        const bool streams_open = out_r.fd >= 0 || err_r.fd >= 0;
        if (exit_info.exited && !streams_open) break;
        if (reply && exit_info.exited) break;

        const auto now = Clock::now();
        if (now >= deadline) break;
        const auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();

        pollfd fds[3];
        int n = 0;
        int in_idx = -1, out_idx = -1, err_idx = -1;
        if (in_w.fd >= 0) {
            fds[n] = {in_w.fd, POLLOUT, 0};
            in_idx = n++;
        }
        if (out_r.fd >= 0) {
            fds[n] = {out_r.fd, POLLIN, 0};
            out_idx = n++;
        }
        if (err_r.fd >= 0) {
            fds[n] = {err_r.fd, POLLIN, 0};
            err_idx = n++;
        }
        // With every stream closed we only wait for the exit status.
        const int timeout_ms = n == 0 ? static_cast<int>(std::min<long long>(wait_ms, 5))
                                      : static_cast<int>(std::min<long long>(wait_ms, 50));
        const int rc = n == 0 ? (::usleep(static_cast<useconds_t>(timeout_ms) * 1000), 0) : ::poll(fds, n, timeout_ms);
        if (rc < 0 && errno != EINTR) break;
        if (rc <= 0) continue;

        if (in_idx >= 0 && (fds[in_idx].revents & (POLLOUT | POLLERR | POLLHUP))) {
            const auto w = ::write(in_w.fd, pending.data(), pending.size());
            if (w > 0) pending.erase(0, static_cast<std::size_t>(w));
            if (w < 0 && errno != EAGAIN) pending.clear();
            if (pending.empty()) in_w.reset();
        }
        char buf[8192];
        if (out_idx >= 0 && (fds[out_idx].revents & (POLLIN | POLLHUP | POLLERR))) {
            const auto r = ::read(out_r.fd, buf, sizeof buf);
            if (r <= 0) {
                out_r.reset();
            } else {
                stdout_bytes += static_cast<std::size_t>(r);
                decoder.feed({buf, static_cast<std::size_t>(r)});
                try {
                    if (!reply) {
                        reply = decoder.next();
                        if (reply) deadline = std::min(deadline, Clock::now() + grace);
                    }
                } catch (const Error& e) {
                    diagnostics += std::string("bad frame: ") + e.what() + "\n";
                    out_r.reset();
                }
                if (stdout_bytes > stream_cap) {
                    overflow = true;
                    break;
                }
            }
        }
        if (err_idx >= 0 && (fds[err_idx].revents & (POLLIN | POLLHUP | POLLERR))) {
            const auto r = ::read(err_r.fd, buf, sizeof buf);
            if (r <= 0) {
                err_r.reset();
            } else if (diagnostics.size() < limits.output_cap) {
                diagnostics.append(buf, static_cast<std::size_t>(r));
            }
        }
    }

    ToolResult result;
    if (!exit_info.exited) {
        exit_info = kill_and_reap(pid);
        if (overflow) {
            result.status = ToolStatus::crashed;
            result.text = "tool crashed";
            result.diagnostics = "tool output exceeded limit";
            return result;
        }
        if (!reply) {
            result.status = ToolStatus::timeout;
            result.text = "tool timeout";
            result.diagnostics = "no reply within " + std::to_string(limits.timeout.count()) + " ms";
            return result;
        }
        // Replied but did not exit on stdin EOF: keep the reply.
        exit_info = {true, 0, 0};
    }
    if (diagnostics.size() > limits.output_cap) diagnostics.resize(limits.output_cap);

    if (exit_info.code != 0 || exit_info.signal != 0) {
        result.status = ToolStatus::crashed;
        result.text = "tool crashed";
        result.diagnostics = (exit_info.signal ? "killed by signal " + std::to_string(exit_info.signal)
                                               : "exit code " + std::to_string(exit_info.code));
        if (!diagnostics.empty()) result.diagnostics += ": " + diagnostics;
        return result;
    }
    if (!reply) {
        result.status = ToolStatus::crashed;
        result.text = "tool crashed";
        result.diagnostics = "tool exited without replying" + (diagnostics.empty() ? "" : ": " + diagnostics);
        return result;
    }
    result = decode_reply(*reply);
    if (result.diagnostics.empty()) result.diagnostics = diagnostics;
    cap_output(result, limits.output_cap);
    return result;
}

ToolResult execute_mcp(const AbstractedMcp& mcp, const json& arguments, const ExecutionLimits& limits,
                       const BuiltinRegistry& registry) {
    validate_arguments(mcp, arguments);
    const auto args = with_defaults(mcp, arguments);

    if (const auto* builtin = std::get_if<BuiltinRuntime>(&mcp.runtime)) {
        const auto* tool = registry.find(builtin->registry_key);
        ToolResult r;
        if (!tool) {
            r.status = ToolStatus::tool_error;
            r.text = "no builtin registered for " + builtin->registry_key;
            return r;
        }
        try {
            r.text = (*tool)(args);
        } catch (const std::exception& e) {
            r.status = ToolStatus::crashed;
            r.text = "tool crashed";
            r.diagnostics = e.what();
            return r;
        }
        cap_output(r, limits.output_cap);
        return r;
    }

    const auto& sub = std::get<SubprocessRuntime>(mcp.runtime);
    auto argv = text::split_ws(sub.command_template);
    for (auto& a : argv) text::replace_all(a, "{tool}", mcp.name);
    return run_subprocess_tool(argv, mcp.name, args, limits);
}

McpExecutor::McpExecutor(BuiltinRegistry registry, ExecutionLimits limits)
    : registry_(std::move(registry)), limits_(limits) {}

ToolResult McpExecutor::execute(const AbstractedMcp& mcp, const json& arguments) {
    return execute_mcp(mcp, arguments, limits_, registry_);
}

ToolResult RecordingExecutor::execute(const AbstractedMcp& mcp, const json& arguments) {
    {
        std::lock_guard lock(mutex_);
        calls_.push_back(mcp.mcp_id);
    }
    return inner_.execute(mcp, arguments);
}

std::vector<std::string> RecordingExecutor::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

}  // namespace mcpforge
