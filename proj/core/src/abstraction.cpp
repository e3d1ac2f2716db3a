#include "mcpforge/abstraction.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <istream>
#include <mutex>
#include <ostream>
#include <regex>
#include <set>
#include <thread>

#include "mcpforge/digest.hpp"
#include "mcpforge/error.hpp"
#include "mcpforge/llm.hpp"
#include "mcpforge/log.hpp"
#include "text.hpp"

namespace mcpforge {

const char* to_string(TypeTag tag) {
    switch (tag) {
        case TypeTag::string: return "string";
        case TypeTag::integer: return "integer";
        case TypeTag::number: return "number";
        case TypeTag::boolean: return "boolean";
        case TypeTag::array: return "array";
        case TypeTag::object: return "object";
    }
    return "string";
}

std::optional<TypeTag> parse_type_tag(std::string_view text) {
    static constexpr std::pair<std::string_view, TypeTag> table[] = {
        {"string", TypeTag::string},   {"integer", TypeTag::integer}, {"number", TypeTag::number},
        {"boolean", TypeTag::boolean}, {"array", TypeTag::array},     {"object", TypeTag::object},
    };
    for (const auto& [name, tag] : table) {
        if (name == text) return tag;
    }
    return std::nullopt;
}

bool is_identifier(std::string_view text) {
    if (text.empty()) return false;
    if (std::isdigit(static_cast<unsigned char>(text.front()))) return false;
    return std::all_of(text.begin(), text.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_';
    });
}

std::string make_mcp_id(const std::string& name, const std::string& provenance) {
    return name + "_" + provenance.substr(0, std::min<std::size_t>(10, provenance.size()));
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const ParameterSpec& p) {
    json j{{"name", p.name},
           {"type", to_string(p.type_tag)},
           {"description", p.description},
           {"required", p.required}};
    if (p.default_value) j["default"] = *p.default_value;
    return j;
}

ParameterSpec parameter_from_json(const json& j) {
    ParameterSpec p;
    p.name = j.at("name").get<std::string>();
    auto type = j.value("type", std::string("string"));
    auto tag = parse_type_tag(type);
    if (!tag) fail(ErrorKind::input, "unknown parameter type '" + type + "' for " + p.name);
    p.type_tag = *tag;
    p.description = j.value("description", "");
    p.required = j.value("required", true);
    if (auto it = j.find("default"); it != j.end()) p.default_value = *it;
    return p;
}

json to_json(const AbstractedMcp& mcp) {
    json params = json::array();
    for (const auto& p : mcp.parameters) params.push_back(to_json(p));
    json runtime = std::visit(
        [](const auto& r) -> json {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, SubprocessRuntime>) {
                return {{"kind", "subprocess"}, {"command_template", r.command_template}};
            } else {
                return {{"kind", "builtin"}, {"registry_key", r.registry_key}};
            }
        },
        mcp.runtime);
    return {{"mcp_id", mcp.mcp_id},       {"name", mcp.name},
            {"parameters", params},       {"code", mcp.code},
            {"description", mcp.description}, {"use_case", mcp.use_case},
            {"docstring", mcp.docstring}, {"provenance", mcp.provenance},
            {"runtime", runtime}};
}

AbstractedMcp abstracted_from_json(const json& j) {
    AbstractedMcp m;
    m.mcp_id = j.at("mcp_id").get<std::string>();
    m.name = j.at("name").get<std::string>();
    for (const auto& p : j.at("parameters")) m.parameters.push_back(parameter_from_json(p));
    m.code = j.at("code").get<std::string>();
    m.description = j.at("description").get<std::string>();
    m.use_case = j.at("use_case").get<std::string>();
    m.docstring = j.at("docstring").get<std::string>();
    m.provenance = j.at("provenance").get<std::string>();
    const auto& rt = j.at("runtime");
    const auto kind = rt.at("kind").get<std::string>();
    if (kind == "subprocess") {
        m.runtime = SubprocessRuntime{rt.at("command_template").get<std::string>()};
    } else if (kind == "builtin") {
        m.runtime = BuiltinRuntime{rt.at("registry_key").get<std::string>()};
    } else {
        fail(ErrorKind::input, "unknown runtime kind: " + kind);
    }
    return m;
}

std::vector<AbstractedMcp> read_abstracted(std::istream& in) {
    std::vector<AbstractedMcp> out;
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(abstracted_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            fail(ErrorKind::input, std::string("abstracted MCP record: ") + e.what());
        }
    }
    return out;
}

void write_abstracted(std::ostream& out, const std::vector<AbstractedMcp>& mcps) {
    for (const auto& m : mcps) out << to_json(m).dump() << '\n';
}

json tool_descriptor(const AbstractedMcp& mcp) {
    json properties = json::object();
    json required = json::array();
    for (const auto& p : mcp.parameters) {
        json prop{{"type", to_string(p.type_tag)}, {"description", p.description}};
        if (p.default_value) prop["default"] = *p.default_value;
        properties[p.name] = std::move(prop);
        if (p.required) required.push_back(p.name);
    }
    return {{"name", mcp.mcp_id},
            {"title", mcp.name},
            {"description", mcp.docstring.empty() ? mcp.description : mcp.docstring},
            {"inputSchema", {{"type", "object"}, {"properties", properties}, {"required", required}}}};
}

// ---------------------------------------------------------------------------
// Validation

namespace {

struct QuotedSpan {
    std::size_t begin;  // includes any string prefix letters
    std::size_t end;    // one past the closing quote
    std::string content;
};

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::vector<QuotedSpan> quoted_spans(std::string_view s) {
    std::vector<QuotedSpan> spans;
    std::size_t i = 0;
    while (i < s.size()) {
        const char q = s[i];
        if (q != '"' && q != '\'') {
            ++i;
            continue;
        }
        // String prefixes such as r"..." or rb'...' belong to the literal.
        auto is_prefix = [&](std::size_t at) {
            return std::string_view("rbfuRBFU").find(s[at]) != std::string_view::npos;
        };
        std::size_t prefix = i;
        if (i >= 1 && is_prefix(i - 1)) {
            if (i == 1 || !is_word_char(s[i - 2])) {
                prefix = i - 1;
            } else if (i >= 2 && is_prefix(i - 2) && (i == 2 || !is_word_char(s[i - 3]))) {
                prefix = i - 2;
            }
        }
        // Apostrophes inside words are prose, not quotes.
        if (q == '\'' && i > 0 && is_word_char(s[i - 1]) && prefix == i) {
            ++i;
            continue;
        }
        // Raw strings keep their backslashes.
        const bool raw = s.substr(prefix, i - prefix).find_first_of("rR") != std::string_view::npos;
        std::string content;
        std::size_t j = i + 1;
        bool closed = false;
        while (j < s.size() && s[j] != '\n') {
            if (s[j] == '\\' && j + 1 < s.size()) {
                if (raw) content.push_back('\\');
                content.push_back(s[j + 1]);
                j += 2;
                continue;
            }
            if (s[j] == q) {
                closed = true;
                break;
            }
            content.push_back(s[j]);
            ++j;
        }
        if (!closed) {
            i = j;
            continue;
        }
        spans.push_back({prefix, j + 1, std::move(content)});
        i = j + 1;
    }
    return spans;
}

bool contains_word(std::string_view haystack, std::string_view word) {
    std::size_t pos = 0;
    while ((pos = haystack.find(word, pos)) != std::string_view::npos) {
        const bool left = pos == 0 || !is_word_char(haystack[pos - 1]);
        const std::size_t after = pos + word.size();
        const bool right = after >= haystack.size() || !is_word_char(haystack[after]);
        if (left && right) return true;
        pos = after;
    }
    return false;
}

}  // namespace

std::vector<std::string> quoted_literals(std::string_view text) {
    std::vector<std::string> out;
    for (auto& span : quoted_spans(text)) out.push_back(std::move(span.content));
    return out;
}

AbstractionReport validate_abstraction(const AbstractedMcp& mcp, const RawMcp& raw,
                                       const ValidatorConfig& config) {
    AbstractionReport report;
    auto add = [&](const char* check, std::string detail) {
        report.violations.push_back({check, std::move(detail)});
    };

    // (a) parameterization
    std::set<std::string> leaked;
    for (const auto& lit : quoted_literals(mcp.code)) {
        if (lit.size() >= config.min_literal_length && raw.use_case.find(lit) != std::string::npos) {
            leaked.insert(lit);
        }
    }
    for (const auto& lit : quoted_literals(raw.use_case)) {
        if (lit.size() >= config.min_literal_length && mcp.code.find(lit) != std::string::npos) {
            leaked.insert(lit);
        }
    }
    for (const auto& lit : leaked) add(checks::parameterization, "task-specific literal retained in code: \"" + lit + "\"");
    for (const auto& p : mcp.parameters) {
        if (!p.name.empty() && !contains_word(mcp.code, p.name)) {
            add(checks::parameterization, "parameter not referenced in code: " + p.name);
        }
    }

    // (b) descriptor completeness
    if (mcp.name.empty()) add(checks::descriptor_completeness, "missing tool name");
    if (text::trim(mcp.docstring).empty()) add(checks::descriptor_completeness, "missing docstring");
    if (text::trim(mcp.code).empty()) add(checks::descriptor_completeness, "missing code");
    for (const auto& p : mcp.parameters) {
        if (text::trim(p.description).empty()) {
            add(checks::descriptor_completeness, "parameter missing description: " + p.name);
        }
    }

    // (c) metadata preservation
    if (mcp.description.empty() || mcp.description != raw.description) {
        add(checks::metadata_preservation, "description differs from source MCP");
    }
    if (mcp.use_case.empty() || mcp.use_case != raw.use_case) {
        add(checks::metadata_preservation, "use_case differs from source MCP");
    }
    if (mcp.provenance != raw.content_hash) {
        add(checks::metadata_preservation, "provenance does not match source content hash");
    }

    // (d) identifier validity
    if (!mcp.name.empty() && !is_identifier(mcp.name)) {
        add(checks::identifier_validity, "tool name is not an identifier: " + mcp.name);
    }
    if (mcp.mcp_id.empty()) add(checks::identifier_validity, "missing mcp_id");
    std::set<std::string> names;
    for (const auto& p : mcp.parameters) {
        if (!is_identifier(p.name)) add(checks::identifier_validity, "parameter name is not an identifier: " + p.name);
        if (!names.insert(p.name).second) add(checks::identifier_validity, "duplicate parameter: " + p.name);
    }

    report.accepted = report.violations.empty();
    return report;
}

// ---------------------------------------------------------------------------
// Rule-based provider

namespace {

std::string slug(std::string_view description) {
    std::string out;
    int words = 0;
    bool in_word = false;
    for (char c : description) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            if (!in_word && !out.empty()) {
                if (words == 5) break;
                out.push_back('_');
            }
            if (!in_word) ++words;
            in_word = true;
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            in_word = false;
        }
    }
    if (out.empty() || std::isdigit(static_cast<unsigned char>(out.front()))) out = "tool_" + out;
    return out;
}

std::string tool_name_for(const RawMcp& raw) {
    static const std::regex def_re(R"((?:def|function|fn)\s+([A-Za-z_][A-Za-z0-9_]*)\s*\()");
    std::smatch m;
    if (std::regex_search(raw.code, m, def_re)) return m[1].str();
    return slug(raw.description);
}

std::string guess_parameter_name(const std::string& literal, const std::set<std::string>& taken) {
    std::string base = "value";
    const auto lower = text::lower(literal);
    if (lower.starts_with("http://") || lower.starts_with("https://")) {
        base = "url";
    } else if (literal.find('/') != std::string::npos ||
               std::regex_search(literal, std::regex(R"(\.[A-Za-z0-9]{2,4}$)"))) {
        base = "file_path";
    } else if (literal.find_first_of("()[]+*\\") != std::string::npos) {
        base = "pattern";
    } else {
        base = "text";
    }
    std::string name = base;
    for (int n = 2; taken.contains(name); ++n) name = base + "_" + std::to_string(n);
    return name;
}

// Inserts parameter names into the first `def name(...)` signature.
void extend_signature(std::string& code, const std::string& name, const std::vector<std::string>& params) {
    if (params.empty()) return;
    const auto head = "def " + name + "(";
    auto pos = code.find(head);
    if (pos == std::string::npos) return;
    const auto open = pos + head.size() - 1;
    const auto close = code.find(')', open);
    if (close == std::string::npos) return;
    std::string existing = code.substr(open + 1, close - open - 1);
    std::string joined;
    for (const auto& p : params) {
        if (contains_word(existing, p)) continue;
        if (!joined.empty()) joined += ", ";
        joined += p;
    }
    if (joined.empty()) return;
    if (!text::trim(existing).empty()) joined += ", ";
    code.insert(open + 1, joined);
}

std::string render_docstring(const RawMcp& raw, const std::vector<ParameterSpec>& params) {
    std::string doc = raw.description;
    if (!params.empty()) {
        doc += "\n\nArgs:";
        for (const auto& p : params) {
            doc += "\n    " + p.name + " (" + to_string(p.type_tag) + "): " + p.description;
        }
    }
    doc += "\n\nReturns:\n    string: textual result of the tool.";
    return doc;
}

}  // namespace

RuleBasedAbstractionProvider::RuleBasedAbstractionProvider(std::vector<LiteralRewrite> rules,
                                                           ValidatorConfig validator)
    : rules_(std::move(rules)), validator_(validator) {}

AbstractedMcp RuleBasedAbstractionProvider::abstract(const AbstractionRequest& request) {
    const RawMcp& raw = request.raw;
    AbstractedMcp out;
    out.name = tool_name_for(raw);
    out.description = raw.description;
    out.use_case = raw.use_case;
    out.provenance = raw.content_hash;
    out.mcp_id = make_mcp_id(out.name, raw.content_hash);
    out.runtime = BuiltinRuntime{out.name};

    std::vector<LiteralRewrite> rules = rules_;
    if (rules.empty()) {
        // Lift every long literal that also names something in the task context.
        std::set<std::string> taken;
        for (const auto& lit : quoted_literals(raw.code)) {
            if (lit.size() < validator_.min_literal_length) continue;
            if (raw.use_case.find(lit) == std::string::npos) continue;
            if (std::any_of(rules.begin(), rules.end(), [&](const auto& r) { return r.literal == lit; })) continue;
            ParameterSpec p;
            p.name = guess_parameter_name(lit, taken);
            taken.insert(p.name);
            p.description = "Input " + p.name + " for the operation.";
            rules.push_back({lit, std::move(p)});
        }
    }

    std::string code = raw.code;
    std::vector<std::string> added;
    for (const auto& rule : rules) {
        auto spans = quoted_spans(code);
        bool replaced = false;
        for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
            if (it->content != rule.literal) continue;
            code.replace(it->begin, it->end - it->begin, rule.parameter.name);
            replaced = true;
        }
        if (!replaced) continue;
        out.parameters.push_back(rule.parameter);
        added.push_back(rule.parameter.name);
    }
    extend_signature(code, out.name, added);
    out.code = std::move(code);
    out.docstring = render_docstring(raw, out.parameters);
    return out;
}

// ---------------------------------------------------------------------------
// LLM provider

const std::string& LlmAbstractionProvider::default_prompt_template() {
    static const std::string prompt =
        "You are rewriting a task-specific tool into a reusable, parameterized MCP tool.\n"
        "Apply these transformations:\n"
        "1. Replace hard-coded values with configurable parameters.\n"
        "2. Remove task-specific references while preserving core functionality.\n"
        "3. Expose a standard tool interface: a valid identifier name and typed parameters.\n"
        "4. Write a complete docstring with argument types.\n\n"
        "Description:\n{description}\n\nUse case:\n{use_case}\n\nCode:\n{code}\n\n"
        "{feedback}"
        "Answer with only a JSON object: {\"name\": str, \"parameters\": [{\"name\": str, "
        "\"type\": \"string|integer|number|boolean|array|object\", \"description\": str, "
        "\"required\": bool}], \"code\": str, \"docstring\": str}\n";
    return prompt;
}

LlmAbstractionProvider::LlmAbstractionProvider(std::shared_ptr<ChatClient> client, std::string prompt_template)
    : client_(std::move(client)), template_(std::move(prompt_template)) {
    if (!client_) fail(ErrorKind::config, "abstraction provider requires a chat client");
    if (template_.empty()) template_ = default_prompt_template();
}

std::string LlmAbstractionProvider::id() const { return "llm:" + client_->model(); }

AbstractedMcp LlmAbstractionProvider::abstract(const AbstractionRequest& request) {
    const RawMcp& raw = request.raw;
    std::string feedback;
    if (!request.feedback.empty()) {
        feedback = "Your previous attempt was rejected for these reasons; fix all of them:\n";
        for (const auto& v : request.feedback) feedback += "- " + v.check_name + ": " + v.detail + "\n";
        feedback += "\n";
    }
    std::string prompt = template_;
    text::replace_all(prompt, "{feedback}", feedback);
    text::replace_all(prompt, "{description}", raw.description);
    text::replace_all(prompt, "{use_case}", raw.use_case);
    text::replace_all(prompt, "{code}", raw.code);

    const auto reply = client_->complete({{"user", prompt}});
    json j;
    try {
        j = extract_json_object(reply.content);
    } catch (const Error&) {
        fail(ErrorKind::input, "abstraction output is not a JSON object");
    }
    AbstractedMcp out;
    try {
        out.name = j.at("name").get<std::string>();
        for (const auto& p : j.value("parameters", json::array())) out.parameters.push_back(parameter_from_json(p));
        out.code = j.at("code").get<std::string>();
        out.docstring = j.value("docstring", "");
    } catch (const json::exception& e) {
        fail(ErrorKind::input, std::string("abstraction output missing fields: ") + e.what());
    }
    out.description = raw.description;
    out.use_case = raw.use_case;
    out.provenance = raw.content_hash;
    out.mcp_id = make_mcp_id(out.name, raw.content_hash);
    if (auto it = j.find("command"); it != j.end() && it->is_string()) {
        out.runtime = SubprocessRuntime{it->get<std::string>()};
    } else {
        out.runtime = BuiltinRuntime{out.name};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Driver

AbstractionRejected::AbstractionRejected(std::string content_hash, AbstractionReport report)
    : std::runtime_error("abstraction rejected after " + std::to_string(report.attempts) + " attempts"),
      content_hash_(std::move(content_hash)),
      report_(std::move(report)) {}

AbstractionOutcome abstract_mcp(const RawMcp& raw, AbstractionProvider& provider, int max_retries,
                                const ValidatorConfig& config) {
    if (raw.code.empty() || raw.description.empty() || raw.use_case.empty()) {
        fail(ErrorKind::input, "raw MCP has empty fields");
    }
    if (max_retries < 0) fail(ErrorKind::config, "max_retries must be >= 0");

    std::vector<Violation> feedback;
    AbstractionReport last;
    for (int attempt = 1; attempt <= max_retries + 1; ++attempt) {
        AbstractedMcp candidate;
        AbstractionReport report;
        try {
            candidate = provider.abstract({raw, attempt, feedback});
            if (candidate.mcp_id.empty() && !candidate.name.empty()) {
                candidate.mcp_id = make_mcp_id(candidate.name, raw.content_hash);
            }
            report = validate_abstraction(candidate, raw, config);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::input) {
                throw Error(ErrorKind::provider, std::string("provider unavailable: ") + e.what());
            }
            report.violations.push_back({checks::descriptor_completeness, e.what()});
        }
        report.attempts = attempt;
        if (report.accepted) return {std::move(candidate), std::move(report)};
        feedback = report.violations;
        last = std::move(report);
    }
    throw AbstractionRejected(raw.content_hash, std::move(last));
}

PoolAbstraction abstract_pool(const std::vector<RawMcp>& pool, AbstractionProvider& provider,
                              int max_retries, int parallelism, const ValidatorConfig& config) {
    std::vector<const RawMcp*> ordered;
    for (const auto& r : pool) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(),
              [](const auto* a, const auto* b) { return a->content_hash < b->content_hash; });

    std::vector<std::optional<AbstractedMcp>> accepted(ordered.size());
    std::vector<std::optional<Rejection>> rejected(ordered.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < ordered.size(); i = next++) {
            const RawMcp& raw = *ordered[i];
            try {
                accepted[i] = abstract_mcp(raw, provider, max_retries, config).mcp;
            } catch (const AbstractionRejected& e) {
                rejected[i] = Rejection{raw.content_hash, "validation failed", e.report()};
            } catch (const Error& e) {
                rejected[i] = Rejection{raw.content_hash, e.what(), {}};
            }
        }
    };

    const auto threads = static_cast<std::size_t>(std::max(1, parallelism));
    if (threads == 1 || ordered.size() < 2) {
        worker();
    } else {
        std::vector<std::jthread> pool_threads;
        for (std::size_t t = 0; t < std::min(threads, ordered.size()); ++t) pool_threads.emplace_back(worker);
    }

    PoolAbstraction out;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        if (accepted[i]) out.accepted.push_back(std::move(*accepted[i]));
        if (rejected[i]) {
            std::string detail = rejected[i]->reason;
            for (const auto& v : rejected[i]->report.violations) detail += "; " + v.check_name + ": " + v.detail;
            log::warn("abstraction rejected " + rejected[i]->content_hash.substr(0, 12) + ": " + detail);
            out.rejected.push_back(std::move(*rejected[i]));
        }
    }
    return out;
}

}  // namespace mcpforge
