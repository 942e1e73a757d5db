#include "ragproc/policy.hpp"

#include <regex>

#include "ragproc/text.hpp"

namespace ragproc {

const char* to_string(TemplateName t) {
    switch (t) {
        case TemplateName::Reasoning: return "reasoning";
        case TemplateName::Grounding: return "grounding";
        case TemplateName::ProcessEvaluation: return "process_evaluation";
    }
    return "?";
}

TemplateName template_name_from_string(const std::string& s) {
    if (s == "reasoning") return TemplateName::Reasoning;
    if (s == "grounding") return TemplateName::Grounding;
    if (s == "process_evaluation") return TemplateName::ProcessEvaluation;
    throw Error("unknown template name: " + s);
}

namespace {

// Keep these byte-identical to resources/prompts/*.txt (golden-file tested).
constexpr const char* kReasoningSystem =
    "You are a question-answering assistant with access to a retrieval tool. Your goal is to "
    "provide a concise and accurate reasoning process.\n"
    "\n"
    "Instructions:\n"
    "\n"
    "* Error Reflection: If errors exist in previous thoughts, identify and correct them. Skip "
    "this step if no errors are present.\n"
    "\n"
    "* Information Sufficiency: Evaluate whether the current information is sufficient to fully "
    "and accurately answer the question. If additional retrieval is needed, deconstruct the "
    "question and generate the next query. Avoid repeating previous queries. If no meaningful "
    "new query can be generated, explain why and provide an answer based on the current "
    "information.\n"
    "\n"
    "* Conciseness: Ensure both queries and answers are concise, using nouns or short phrases "
    "whenever possible.\n"
    "\n"
    "* Conclusion:\n"
    "\n"
    "If generating an answer:\n"
    "\"So the answer is <answer>{answer_format}</answer>\".\n"
    "If more retrieval is needed:\n"
    "\"So the next query is <query>query</query>\".\n";

constexpr const char* kGroundingSystem =
    "You are an information retrieval assistant. Your task is to extract relevant evidence from "
    "the provided Wikipedia documents based on the latest query.\n"
    "\n"
    "Instructions:\n"
    "\n"
    "* Identify key terms or concepts in the query.\n"
    "* Search the documents for evidence that supports the query.\n"
    "* Response format:\n"
    "If relevant evidence is found, output:\n"
    "Based on the query, the relevant evidence is <evidence>evidence</evidence>.\n"
    "If no relevant evidence is found, output:\n"
    "<evidence>None</evidence>.\n";

constexpr const char* kProcessEvaluationSystem =
    "An agent is tasked with answering a question using a retrieval tool. Critically assess its "
    "intermediate reasoning process to determine if it leads to the correct answer. Identify all "
    "flaws, inconsistencies, and mistakes in the thought process. Every imperfection, no matter "
    "how small, must be acknowledged. Evaluate how effectively the reasoning supports the final "
    "answer and the overall accuracy of the response. Ensure the evaluation is extremely harsh, "
    "leaving no leniency. Even if the answer seems close to correct, do not award full marks to "
    "maintain strict grading standards. Assign a score between [0, 1] based on the severity of "
    "flaws and the reasoning's accuracy in leading to the golden answer.\n"
    "Respond briefly and conclude with: So the score is [Score].\n";

} // namespace

const PromptTemplate& builtin_template(TemplateName name) {
    static const PromptTemplate reasoning{TemplateName::Reasoning, kReasoningSystem,
                                          std::string("{answer_format}")};
    static const PromptTemplate grounding{TemplateName::Grounding, kGroundingSystem,
                                          std::nullopt};
    static const PromptTemplate eval{TemplateName::ProcessEvaluation, kProcessEvaluationSystem,
                                     std::nullopt};
    switch (name) {
        case TemplateName::Reasoning: return reasoning;
        case TemplateName::Grounding: return grounding;
        case TemplateName::ProcessEvaluation: return eval;
    }
    return eval;
}

std::string render_system(const PromptTemplate& tmpl, const std::string& answer_format) {
    std::string out = tmpl.system_text;
    if (tmpl.answer_format_slot) {
        const std::string& slot = *tmpl.answer_format_slot;
        size_t at;
        while ((at = out.find(slot)) != std::string::npos) {
            out.replace(at, slot.size(), answer_format);
        }
    }
    return out;
}

std::string build_policy_user(const AgentState& state) { return render_context(state); }

std::string build_judge_user(const AgentState& state, const std::vector<std::string>& golds) {
    return render_context(state) + "Golden Answers: " + join(golds, "; ") + "\n";
}

std::string fingerprint(TemplateName tmpl, std::string_view user_text) {
    return std::string(to_string(tmpl)) + ":" + fnv1a64_hex(user_text);
}

ActionStep generate_action(const AgentState& state, PolicyBackend& backend,
                           const PolicyOptions& opts) {
    if (state.stage == Stage::Terminal) {
        throw IllegalTransition("cannot generate an action from a Terminal state");
    }
    TemplateName tmpl =
        state.stage == Stage::Reasoning ? TemplateName::Reasoning : TemplateName::Grounding;

    PolicyRequest req;
    req.template_name = tmpl;
    req.system = render_system(builtin_template(tmpl), opts.answer_format);
    req.user = build_policy_user(state);
    req.temperature = opts.temperature;
    req.max_output_tokens = opts.max_output_tokens;
    req.seed = opts.seed;

    const int attempts = 1 + (opts.retries < 0 ? 0 : opts.retries);
    for (int attempt = 0;; ++attempt) {
        std::string reply = backend.complete(req);
        try {
            return parse_action(reply, state.stage);
        } catch (const MalformedAction&) {
            if (attempt + 1 >= attempts) throw;
        }
    }
}

double normalize_judge_value(double n) {
    if (n > 1.0) n /= 100.0;
    if (n < 0.0) n = 0.0;
    if (n > 1.0) n = 1.0;
    return n;
}

JudgeScore judge_evaluate(const AgentState& state, const std::vector<std::string>& golds,
                          PolicyBackend& backend, const PolicyOptions& opts) {
    if (state.steps.empty()) {
        throw Error("judge_evaluate requires a state with at least one step");
    }
    PolicyRequest req;
    req.template_name = TemplateName::ProcessEvaluation;
    req.system = builtin_template(TemplateName::ProcessEvaluation).system_text;
    req.user = build_judge_user(state, golds);
    req.temperature = 0.0; // judging must be deterministic
    req.max_output_tokens = opts.max_output_tokens;
    req.seed = opts.seed;

    std::string reply = backend.complete(req);

    static const std::regex score_re(
        R"(So the score is\s*\[?\s*([0-9]+(?:\.[0-9]+)?)\s*\]?)");
    std::smatch last;
    bool found = false;
    auto begin = std::sregex_iterator(reply.begin(), reply.end(), score_re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        last = *it;
        found = true;
    }
    if (!found) {
        throw UnparsableScore("judge reply has no trailing score clause", reply);
    }
    double raw = std::stod(last[1].str());
    return JudgeScore{normalize_judge_value(raw), reply};
}

} // namespace ragproc
