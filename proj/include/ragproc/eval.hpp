#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ragproc/inference.hpp"
#include "ragproc/text.hpp"

namespace ragproc {

/// Metric normalization (see normalize_tokens in text.hpp): lowercase, strip
/// punctuation, drop articles, split on whitespace.
inline std::vector<std::string> normalize(const std::string& text) {
    return normalize_tokens(text);
}

/// 1 iff the normalized prediction equals some normalized reference.
int exact_match(const std::string& pred, const std::vector<std::string>& golds);

/// Token-level F1, max over references. Overlap is multiset overlap and the
/// score is computed as 2*overlap/(|pred|+|gold|), which equals 2PR/(P+R).
/// Both sides empty after normalization scores 1; one side empty scores 0.
double f1_score(const std::string& pred, const std::vector<std::string>& golds);

struct EvalRecord {
    std::string question_id;
    std::string prediction; // empty when the transcript has no answer
    std::vector<std::string> golden_answers;
    int em = 0;
    double f1 = 0.0;
    int rounds_used = 0;
    int retrieval_count = 0;
};

/// One line of a gold/questions file: {id, question, golden_answers, source?}.
struct GoldEntry {
    std::string id;
    std::string question;
    std::vector<std::string> golden_answers;
    std::string source;
};

std::vector<GoldEntry> load_gold_file(const std::string& path);

struct Aggregate {
    double em_pct = 0.0; // mean * 100
    double f1_pct = 0.0;
    size_t n = 0;
};

/// Scores each transcript against gold_by_question (keyed by question text).
/// Throws MissingGold for an unknown question and EmptyEvaluation when there
/// is nothing to score.
std::pair<std::vector<EvalRecord>, Aggregate> evaluate_run(
    const std::vector<Transcript>& transcripts,
    const std::map<std::string, GoldEntry>& gold_by_question);

enum class SweepAxis { RoundsCap, TopK };

const char* to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& s);

struct SweepRow {
    int value = 0;
    double em_pct = 0.0;
    double f1_pct = 0.0;
    size_t n = 0;
};

/// Re-runs inference per axis value (RoundsCap sets the policy-call budget,
/// TopK the documents per retrieval) and aggregates EM/F1 over `questions`.
std::vector<SweepRow> sweep(SweepAxis axis, const std::vector<int>& values,
                            const std::vector<GoldEntry>& questions, PolicyBackend& backend,
                            Retriever& retriever, const InferenceConfig& base_cfg,
                            int parallelism);

/// CSV table with header "value,em,f1,n"; EM/F1 printed to one decimal.
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Plot-ready series: {"axis": ..., "series":[{value,em,f1,n}...]}.
nlohmann::json sweep_to_json(SweepAxis axis, const std::vector<SweepRow>& rows);

} // namespace ragproc
