#include "ragproc/agent.hpp"

#include <array>

#include "ragproc/text.hpp"

namespace ragproc {

const char* to_string(Stage s) {
    switch (s) {
        case Stage::Reasoning: return "reasoning";
        case Stage::Grounding: return "grounding";
        case Stage::Terminal: return "terminal";
    }
    return "?";
}

const char* to_string(ActionKind k) {
    switch (k) {
        case ActionKind::QueryGeneration: return "query_generation";
        case ActionKind::EvidenceExtraction: return "evidence_extraction";
        case ActionKind::AnswerGeneration: return "answer_generation";
    }
    return "?";
}

Stage stage_from_string(const std::string& s) {
    if (s == "reasoning") return Stage::Reasoning;
    if (s == "grounding") return Stage::Grounding;
    if (s == "terminal") return Stage::Terminal;
    throw Error("unknown stage: " + s);
}

ActionKind action_kind_from_string(const std::string& s) {
    if (s == "query_generation") return ActionKind::QueryGeneration;
    if (s == "evidence_extraction") return ActionKind::EvidenceExtraction;
    if (s == "answer_generation") return ActionKind::AnswerGeneration;
    throw Error("unknown action kind: " + s);
}

char action_kind_letter(ActionKind k) {
    switch (k) {
        case ActionKind::QueryGeneration: return 'Q';
        case ActionKind::EvidenceExtraction: return 'E';
        case ActionKind::AnswerGeneration: return 'A';
    }
    return '?';
}

bool kind_legal_in(Stage stage, ActionKind kind) {
    switch (stage) {
        case Stage::Reasoning:
            return kind == ActionKind::QueryGeneration || kind == ActionKind::AnswerGeneration;
        case Stage::Grounding:
            return kind == ActionKind::EvidenceExtraction;
        case Stage::Terminal:
            return false;
    }
    return false;
}

Stage stage_after(ActionKind kind) {
    switch (kind) {
        case ActionKind::QueryGeneration: return Stage::Grounding;
        case ActionKind::EvidenceExtraction: return Stage::Reasoning;
        case ActionKind::AnswerGeneration: return Stage::Terminal;
    }
    return Stage::Terminal;
}

namespace {

struct TagSpec {
    ActionKind kind;
    const char* open;
    const char* close;
};

constexpr std::array<TagSpec, 3> kTags = {{
    {ActionKind::QueryGeneration, "<query>", "</query>"},
    {ActionKind::EvidenceExtraction, "<evidence>", "</evidence>"},
    {ActionKind::AnswerGeneration, "<answer>", "</answer>"},
}};

bool contains_tag_token(std::string_view inner) {
    for (const auto& t : kTags) {
        if (inner.find(t.open) != std::string_view::npos) return true;
        if (inner.find(t.close) != std::string_view::npos) return true;
    }
    return false;
}

} // namespace

ActionStep parse_action(const std::string& raw, Stage expected_stage) {
    size_t pos = 0;
    while (pos < raw.size()) {
        // Earliest legal opening tag at or after pos.
        const TagSpec* best = nullptr;
        size_t best_at = std::string::npos;
        for (const auto& t : kTags) {
            if (!kind_legal_in(expected_stage, t.kind)) continue;
            size_t at = raw.find(t.open, pos);
            if (at != std::string::npos && at < best_at) {
                best_at = at;
                best = &t;
            }
        }
        if (!best) break;

        size_t inner_begin = best_at + std::string_view(best->open).size();
        size_t close_at = raw.find(best->close, inner_begin);
        if (close_at == std::string::npos) {
            pos = inner_begin;
            continue;
        }
        std::string_view inner(raw.data() + inner_begin, close_at - inner_begin);
        if (contains_tag_token(inner)) {
            pos = inner_begin;
            continue;
        }
        std::string payload = trim(inner);
        if (payload.empty()) {
            pos = close_at + std::string_view(best->close).size();
            continue;
        }
        ActionStep step;
        step.kind = best->kind;
        step.raw_text = raw;
        step.payload = std::move(payload);
        step.index = 0;
        return step;
    }
    throw MalformedAction(
        std::string("no well-formed placeholder legal for stage ") + to_string(expected_stage),
        raw);
}

AgentState transition(const AgentState& state, ActionStep step) {
    if (!kind_legal_in(state.stage, step.kind)) {
        throw IllegalTransition(std::string("action ") + to_string(step.kind) +
                                " is illegal from stage " + to_string(state.stage));
    }
    AgentState next = state;
    step.index = static_cast<int>(next.steps.size());
    next.steps.push_back(std::move(step));
    next.pending_docs.clear();
    next.stage = stage_after(next.steps.back().kind);
    return next;
}

AgentState attach_docs(const AgentState& state, std::vector<Document> docs) {
    if (state.stage != Stage::Grounding) {
        throw IllegalTransition("documents can only be attached to a Grounding state");
    }
    AgentState next = state;
    next.pending_docs = std::move(docs);
    return next;
}

std::string render_context(const AgentState& state) {
    std::string out = "Question: " + state.question + "\n";
    for (const auto& step : state.steps) {
        out += step.raw_text;
        out += '\n';
    }
    if (state.stage == Stage::Grounding) {
        for (size_t i = 0; i < state.pending_docs.size(); ++i) {
            const auto& d = state.pending_docs[i];
            out += "Doc " + std::to_string(i + 1) + ": " + d.title + "\n" + d.contents + "\n";
        }
    }
    return out;
}

} // namespace ragproc
