#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ragproc/document.hpp"
#include "ragproc/errors.hpp"

namespace ragproc {

/// The agent's three decision modes. Reasoning chooses between querying and
/// answering, Grounding extracts evidence from retrieved documents, Terminal
/// absorbs once an answer has been produced.
enum class Stage { Reasoning, Grounding, Terminal };

enum class ActionKind { QueryGeneration, EvidenceExtraction, AnswerGeneration };

const char* to_string(Stage s);
const char* to_string(ActionKind k);
Stage stage_from_string(const std::string& s);
ActionKind action_kind_from_string(const std::string& s);

/// Single-letter abbreviation (Q/E/A), used in pair-type histogram keys.
char action_kind_letter(ActionKind k);

/// Whether `kind` may be taken from `stage`: queries and answers only from
/// Reasoning, evidence only from Grounding, nothing from Terminal.
bool kind_legal_in(Stage stage, ActionKind kind);

/// Stage the machine enters after taking an action of `kind`.
Stage stage_after(ActionKind kind);

/// The literal payload an evidence step carries when no evidence was found.
inline constexpr const char* kNoEvidenceMarker = "None";

/// One parsed LLM output: the full response text plus the payload extracted
/// from its placeholder pair.
struct ActionStep {
    ActionKind kind = ActionKind::QueryGeneration;
    std::string raw_text;
    std::string payload;
    int index = 0;

    friend bool operator==(const ActionStep& a, const ActionStep& b) {
        return a.kind == b.kind && a.raw_text == b.raw_text && a.payload == b.payload &&
               a.index == b.index;
    }
};

/// The state the policy is conditioned on: question, prior step outputs, the
/// current stage, and (while Grounding) the documents awaiting evidence
/// extraction.
struct AgentState {
    std::string question;
    std::vector<ActionStep> steps;
    Stage stage = Stage::Reasoning;
    std::vector<Document> pending_docs;

    friend bool operator==(const AgentState& a, const AgentState& b) {
        return a.question == b.question && a.steps == b.steps && a.stage == b.stage &&
               a.pending_docs == b.pending_docs;
    }
};

struct RetrievalEvent {
    std::string query;
    std::vector<Document> docs;
};

/// Record of one full inference run.
struct Transcript {
    std::string question;
    std::vector<ActionStep> steps;
    std::vector<RetrievalEvent> retrievals;
    std::optional<std::string> final_answer;
    int rounds_used = 0;
};

/// Extracts the first well-formed placeholder legal for `expected_stage` from
/// a complete LLM response. Tags are the exact, case-sensitive strings
/// <query>...</query>, <evidence>...</evidence>, <answer>...</answer>;
/// Reasoning admits query and answer, Grounding admits evidence. A candidate
/// whose inner text contains another tag token, lacks a closing tag, or trims
/// to empty is skipped; later well-formed placeholders in the same response
/// are ignored once one is accepted.
///
/// Throws MalformedAction (carrying `raw`) when nothing acceptable is found.
ActionStep parse_action(const std::string& raw, Stage expected_stage);

/// Appends `step` and advances the stage machine. Pure: the input state is
/// untouched; the step's index is set to its position. pending_docs are
/// cleared; after a query they stay empty until attach_docs supplies the
/// retrieval result.
///
/// Throws IllegalTransition when step.kind is not legal for state.stage.
AgentState transition(const AgentState& state, ActionStep step);

/// Attaches retrieved documents to a Grounding state (throws IllegalTransition
/// otherwise). Pure.
AgentState attach_docs(const AgentState& state, std::vector<Document> docs);

/// Serializes a state into prompt user-content. Deterministic: equal states
/// yield byte-identical strings. Format:
///
///   Question: <question>\n
///   <step raw_text>\n            (each step, in order)
///   Doc k: <title>\n<contents>\n (only while Grounding, in retrieval order)
std::string render_context(const AgentState& state);

} // namespace ragproc
