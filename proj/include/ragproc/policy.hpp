#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ragproc/agent.hpp"

namespace ragproc {

enum class TemplateName { Reasoning, Grounding, ProcessEvaluation };

const char* to_string(TemplateName t);
TemplateName template_name_from_string(const std::string& s);

/// A system prompt. The Reasoning template carries the single substitution
/// slot "{answer_format}"; the other two have no slots.
struct PromptTemplate {
    TemplateName name;
    std::string system_text;
    std::optional<std::string> answer_format_slot;
};

/// The built-in template for `name`. system_text is byte-identical to the
/// corresponding file under resources/prompts/ (enforced by a golden test).
const PromptTemplate& builtin_template(TemplateName name);

/// Renders a template's system text, substituting {answer_format} where the
/// template has the slot.
std::string render_system(const PromptTemplate& tmpl, const std::string& answer_format);

struct PolicyRequest {
    TemplateName template_name = TemplateName::Reasoning;
    std::string system;
    std::string user;
    double temperature = 0.0;
    int max_output_tokens = 1024;
    std::optional<long> seed;
};

/// Correctness value assigned by the judge, normalized into [0,1].
struct JudgeScore {
    double value = 0.0;
    std::string raw_reply;
};

/// Anything that maps a stage-conditioned prompt to a text response: a real
/// chat-completion endpoint or a deterministic script. Implementations must be
/// safe to share across concurrent tasks.
class PolicyBackend {
public:
    virtual ~PolicyBackend() = default;
    virtual std::string complete(const PolicyRequest& request) = 0;
};

struct PolicyOptions {
    double temperature = 0.7;
    int max_output_tokens = 1024;
    std::optional<long> seed;
    /// Retry budget for malformed actions: up to 1 + retries backend calls.
    int retries = 2;
    /// Value substituted into the Reasoning template's {answer_format} slot.
    std::string answer_format = "answer";
};

/// User content of a policy call: exactly render_context(state).
std::string build_policy_user(const AgentState& state);

/// User content of a judge call: the rendered trajectory followed by a
/// "Golden Answers:" line.
std::string build_judge_user(const AgentState& state, const std::vector<std::string>& golds);

/// Scripted-backend request fingerprint: template name + FNV-1a hash of the
/// user content, e.g. "reasoning:1a2b...".
std::string fingerprint(TemplateName tmpl, std::string_view user_text);

/// Samples the next action: picks the stage's template (Reasoning vs
/// Grounding), invokes the backend, parses the reply. Malformed replies are
/// retried up to opts.retries times before the last MalformedAction is
/// rethrown. Transport errors propagate as-is.
ActionStep generate_action(const AgentState& state, PolicyBackend& backend,
                           const PolicyOptions& opts = {});

/// Maps a raw judge number onto [0,1]: values in [0,1] are kept, anything
/// above 1 is divided by 100, and the result is clamped. Idempotent on [0,1].
double normalize_judge_value(double n);

/// Scores the state's trajectory against the golden answers with the
/// ProcessEvaluation template at temperature 0. The reply's final
/// "So the score is S" clause is parsed and normalized.
///
/// Throws UnparsableScore when no score clause is present.
JudgeScore judge_evaluate(const AgentState& state, const std::vector<std::string>& golds,
                          PolicyBackend& backend, const PolicyOptions& opts = {});

} // namespace ragproc
