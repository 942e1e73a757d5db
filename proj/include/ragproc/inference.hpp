#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ragproc/agent.hpp"
#include "ragproc/policy.hpp"
#include "ragproc/retrieval.hpp"

namespace ragproc {

struct InferenceConfig {
    int max_rounds = 10;         // policy-call budget N
    int top_k = 3;               // documents per retrieval
    std::string answer_format = "answer";
    bool record_transcript = true; // false: keep only answer + round count
    double temperature = 0.7;
    int max_output_tokens = 1024;
    std::optional<long> seed;
    int retries = 2; // malformed-action retry budget per step

    PolicyOptions policy_options() const {
        return PolicyOptions{temperature, max_output_tokens, seed, retries, answer_format};
    }
};

/// Policy error mid-run; the transcript up to the failing step is attached.
class PolicyFailure : public Error {
public:
    PolicyFailure(const std::string& msg, Transcript partial)
        : Error(msg), partial_(std::move(partial)) {}
    const Transcript& partial() const { return partial_; }

private:
    Transcript partial_;
};

class RetrievalFailure : public Error {
public:
    RetrievalFailure(const std::string& msg, Transcript partial)
        : Error(msg), partial_(std::move(partial)) {}
    const Transcript& partial() const { return partial_; }

private:
    Transcript partial_;
};

/// Runs the iterative Reasoning/Grounding/Terminal loop: sample a step with
/// the stage's prompt; a query moves to Grounding and triggers retrieval, an
/// answer terminates, evidence returns to Reasoning. Stops after max_rounds
/// policy calls; an exhausted budget yields a transcript without final_answer
/// and rounds_used == max_rounds.
Transcript run(const std::string& question, PolicyBackend& backend, Retriever& retriever,
               const InferenceConfig& cfg);

struct RunOutcome {
    Transcript transcript;              // partial when error is set
    std::optional<std::string> error;
};

/// Runs questions concurrently (at most `parallelism` at once). Output order
/// matches input order; per-question failures are recorded, not thrown.
std::vector<RunOutcome> run_batch(const std::vector<std::string>& questions,
                                  PolicyBackend& backend, Retriever& retriever,
                                  const InferenceConfig& cfg, int parallelism);

/// Transcript export schema: {question, steps:[{kind,raw_text,payload}],
/// retrievals:[{query,doc_ids}], final_answer?, rounds_used}.
nlohmann::json transcript_to_json(const Transcript& t);
Transcript transcript_from_json(const nlohmann::json& j);

void write_transcripts_jsonl(std::ostream& out, const std::vector<RunOutcome>& outcomes);
std::vector<Transcript> read_transcripts_jsonl(const std::string& path);

} // namespace ragproc
