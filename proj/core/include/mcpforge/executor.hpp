#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "mcpforge/abstraction.hpp"

namespace mcpforge {

struct ExecutionLimits {
    std::chrono::milliseconds timeout{10000};
    std::size_t output_cap = 64 * 1024;
};

enum class ToolStatus { ok, tool_error, timeout, crashed };

const char* to_string(ToolStatus status);

struct ToolResult {
    ToolStatus status = ToolStatus::ok;
    std::string text;
    std::string diagnostics;
    bool truncated = false;

    bool ok() const noexcept { return status == ToolStatus::ok; }
    bool operator==(const ToolResult&) const = default;
};

// Raised before execution when arguments do not match the ParameterSpecs.
class ArgumentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Checks required presence, type tags and unknown keys. Throws ArgumentError.
void validate_arguments(const AbstractedMcp& mcp, const json& arguments);

// Fills defaults for missing optional arguments.
json with_defaults(const AbstractedMcp& mcp, const json& arguments);

using BuiltinTool = std::function<std::string(const json& arguments)>;

// Native tools addressable via BuiltinRuntime::registry_key.
class BuiltinRegistry {
public:
    void add(std::string key, BuiltinTool tool);
    const BuiltinTool* find(const std::string& key) const;
    std::vector<std::string> keys() const;

    // echo, concat, add, word_count, extract_measurement.
    static BuiltinRegistry with_standard_tools();

private:
    std::map<std::string, BuiltinTool> tools_;
};

// Runs `argv`, writes one tools/call frame on its stdin and reads the reply
// frame from its stdout.
ToolResult run_subprocess_tool(const std::vector<std::string>& argv, const std::string& tool_name,
                               const json& arguments, const ExecutionLimits& limits);

ToolResult execute_mcp(const AbstractedMcp& mcp, const json& arguments,
                       const ExecutionLimits& limits, const BuiltinRegistry& registry);

// Seam for the inference loop and the server.
class ToolExecutor {
public:
    virtual ~ToolExecutor() = default;
    virtual ToolResult execute(const AbstractedMcp& mcp, const json& arguments) = 0;
};

class McpExecutor : public ToolExecutor {
public:
    explicit McpExecutor(BuiltinRegistry registry = BuiltinRegistry::with_standard_tools(),
                         ExecutionLimits limits = {});
    ToolResult execute(const AbstractedMcp& mcp, const json& arguments) override;
    const ExecutionLimits& limits() const noexcept { return limits_; }

private:
    BuiltinRegistry registry_;
    ExecutionLimits limits_;
};

// Records every executed mcp_id before delegating.
class RecordingExecutor : public ToolExecutor {
public:
    explicit RecordingExecutor(ToolExecutor& inner) : inner_(inner) {}
    ToolResult execute(const AbstractedMcp& mcp, const json& arguments) override;
    std::vector<std::string> calls() const;

private:
    ToolExecutor& inner_;
    mutable std::mutex mutex_;
    std::vector<std::string> calls_;
};

}  // namespace mcpforge
