#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcpforge/trajectory.hpp"

namespace mcpforge {

class ChatClient;

enum class TypeTag { string, integer, number, boolean, array, object };

const char* to_string(TypeTag tag);
std::optional<TypeTag> parse_type_tag(std::string_view text);

struct ParameterSpec {
    std::string name;
    TypeTag type_tag = TypeTag::string;
    std::string description;
    bool required = true;
    std::optional<json> default_value;

    bool operator==(const ParameterSpec&) const = default;
};

struct SubprocessRuntime {
    // Whitespace-separated argv; "{tool}" expands to the tool name.
    std::string command_template;
    bool operator==(const SubprocessRuntime&) const = default;
};

struct BuiltinRuntime {
    std::string registry_key;
    bool operator==(const BuiltinRuntime&) const = default;
};

using ToolRuntime = std::variant<SubprocessRuntime, BuiltinRuntime>;

struct AbstractedMcp {
    std::string mcp_id;
    std::string name;
    std::vector<ParameterSpec> parameters;
    std::string code;
    std::string description;
    std::string use_case;
    std::string docstring;
    std::string provenance;
    ToolRuntime runtime = BuiltinRuntime{};

    bool operator==(const AbstractedMcp&) const = default;
};

json to_json(const ParameterSpec& p);
json to_json(const AbstractedMcp& mcp);
ParameterSpec parameter_from_json(const json& j);
AbstractedMcp abstracted_from_json(const json& j);
std::vector<AbstractedMcp> read_abstracted(std::istream& in);
void write_abstracted(std::ostream& out, const std::vector<AbstractedMcp>& mcps);

// Protocol tool descriptor: {name, title, description, inputSchema}.
json tool_descriptor(const AbstractedMcp& mcp);

// Stable id derived from name and provenance.
std::string make_mcp_id(const std::string& name, const std::string& provenance);

bool is_identifier(std::string_view text);

struct Violation {
    std::string check_name;
    std::string detail;
    bool operator==(const Violation&) const = default;
};

namespace checks {
inline constexpr const char* parameterization = "parameterization";
inline constexpr const char* descriptor_completeness = "descriptor_completeness";
inline constexpr const char* metadata_preservation = "metadata_preservation";
inline constexpr const char* identifier_validity = "identifier_validity";
}  // namespace checks

struct AbstractionReport {
    bool accepted = false;
    std::vector<Violation> violations;
    int attempts = 0;
};

struct ValidatorConfig {
    // Minimum length of a quoted literal shared by use_case and code that
    // counts as leaked task context.
    std::size_t min_literal_length = 12;
};

AbstractionReport validate_abstraction(const AbstractedMcp& mcp, const RawMcp& raw,
                                       const ValidatorConfig& config = {});

// Quoted string literals ('...' or "...") found in text, unescaped.
std::vector<std::string> quoted_literals(std::string_view text);

struct AbstractionRequest {
    const RawMcp& raw;
    int attempt = 1;
    // Violations from the previous attempt; empty on attempt 1.
    std::vector<Violation> feedback;
};

// Turns one raw MCP into a candidate abstraction. Implementations must be
// safe for concurrent calls. Transport failures throw Error(provider).
class AbstractionProvider {
public:
    virtual ~AbstractionProvider() = default;
    virtual AbstractedMcp abstract(const AbstractionRequest& request) = 0;
    virtual std::string id() const = 0;
};

struct LiteralRewrite {
    std::string literal;  // quoted literal content to lift out of the code
    ParameterSpec parameter;
};

// Deterministic stand-in for the LLM rewrite: lifts configured literals
// (or, without rules, every long quoted literal) into parameters, names the
// tool after the first function definition, and synthesizes a docstring.
class RuleBasedAbstractionProvider : public AbstractionProvider {
public:
    explicit RuleBasedAbstractionProvider(std::vector<LiteralRewrite> rules = {},
                                          ValidatorConfig validator = {});
    AbstractedMcp abstract(const AbstractionRequest& request) override;
    std::string id() const override { return "rule-based"; }

private:
    std::vector<LiteralRewrite> rules_;
    ValidatorConfig validator_;
};

// Chat-completion backed provider. The prompt template may reference
// {code}, {description}, {use_case} and {feedback}; the model must answer
// with a JSON object {name, parameters, code, docstring}.
class LlmAbstractionProvider : public AbstractionProvider {
public:
    LlmAbstractionProvider(std::shared_ptr<ChatClient> client, std::string prompt_template);
    AbstractedMcp abstract(const AbstractionRequest& request) override;
    std::string id() const override;

    static const std::string& default_prompt_template();

private:
    std::shared_ptr<ChatClient> client_;
    std::string template_;
};

struct AbstractionOutcome {
    AbstractedMcp mcp;
    AbstractionReport report;
};

// Throws AbstractionRejected once max_retries extra attempts are used up.
AbstractionOutcome abstract_mcp(const RawMcp& raw, AbstractionProvider& provider,
                                int max_retries = 2, const ValidatorConfig& config = {});

class AbstractionRejected : public std::runtime_error {
public:
    AbstractionRejected(std::string content_hash, AbstractionReport report);
    const AbstractionReport& report() const noexcept { return report_; }
    const std::string& content_hash() const noexcept { return content_hash_; }

private:
    std::string content_hash_;
    AbstractionReport report_;
};

struct Rejection {
    std::string content_hash;
    std::string reason;
    AbstractionReport report;
};

struct PoolAbstraction {
    std::vector<AbstractedMcp> accepted;  // sorted by provenance
    std::vector<Rejection> rejected;      // sorted by content_hash
};

PoolAbstraction abstract_pool(const std::vector<RawMcp>& pool, AbstractionProvider& provider,
                              int max_retries = 2, int parallelism = 1,
                              const ValidatorConfig& config = {});

}  // namespace mcpforge
