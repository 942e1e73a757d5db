#include "ragproc/inference.hpp"

#include <atomic>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ragproc/text.hpp"

namespace ragproc {

using nlohmann::json;

Transcript run(const std::string& question, PolicyBackend& backend, Retriever& retriever,
               const InferenceConfig& cfg) {
    if (question.empty()) throw Error("run requires a non-empty question");
    if (cfg.max_rounds < 1) throw Error("max_rounds must be >= 1");

    AgentState state{question, {}, Stage::Reasoning, {}};
    Transcript transcript;
    transcript.question = question;
    const PolicyOptions opts = cfg.policy_options();

    for (int round = 0; round < cfg.max_rounds; ++round) {
        ActionStep step;
        try {
            step = generate_action(state, backend, opts);
        } catch (const Error& e) {
            transcript.rounds_used = round;
            throw PolicyFailure(std::string("policy failed at round ") +
                                    std::to_string(round) + ": " + e.what(),
                                transcript);
        }

        state = transition(state, step);
        if (cfg.record_transcript) transcript.steps.push_back(state.steps.back());
        transcript.rounds_used = round + 1;

        switch (step.kind) {
            case ActionKind::QueryGeneration: {
                std::vector<Document> docs;
                try {
                    docs = retriever.retrieve(step.payload, cfg.top_k);
                } catch (const Error& e) {
                    throw RetrievalFailure(std::string("retrieval failed for query \"") +
                                               step.payload + "\": " + e.what(),
                                           transcript);
                }
                if (cfg.record_transcript) {
                    transcript.retrievals.push_back(RetrievalEvent{step.payload, docs});
                }
                state = attach_docs(state, std::move(docs));
                break;
            }
            case ActionKind::AnswerGeneration:
                transcript.final_answer = step.payload;
                return transcript;
            case ActionKind::EvidenceExtraction:
                break;
        }
    }
    // Budget exhausted without an answer.
    return transcript;
}

std::vector<RunOutcome> run_batch(const std::vector<std::string>& questions,
                                  PolicyBackend& backend, Retriever& retriever,
                                  const InferenceConfig& cfg, int parallelism) {
    if (parallelism < 1) throw Error("parallelism must be >= 1");

    std::vector<RunOutcome> outcomes(questions.size());
    std::atomic<size_t> next{0};

    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= questions.size()) return;
            try {
                outcomes[i].transcript = run(questions[i], backend, retriever, cfg);
            } catch (const PolicyFailure& e) {
                outcomes[i].transcript = e.partial();
                outcomes[i].error = e.what();
            } catch (const RetrievalFailure& e) {
                outcomes[i].transcript = e.partial();
                outcomes[i].error = e.what();
            } catch (const std::exception& e) {
                outcomes[i].transcript.question = questions[i];
                outcomes[i].error = e.what();
            }
        }
    };

    size_t n_workers = std::min<size_t>(static_cast<size_t>(parallelism), questions.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_workers);
        for (size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    return outcomes;
}

json transcript_to_json(const Transcript& t) {
    json steps = json::array();
    for (const auto& s : t.steps) {
        steps.push_back(json{{"kind", to_string(s.kind)},
                             {"raw_text", s.raw_text},
                             {"payload", s.payload}});
    }
    json retrievals = json::array();
    for (const auto& r : t.retrievals) {
        json ids = json::array();
        for (const auto& d : r.docs) ids.push_back(d.id);
        retrievals.push_back(json{{"query", r.query}, {"doc_ids", std::move(ids)}});
    }
    json out{{"question", t.question},
             {"steps", std::move(steps)},
             {"retrievals", std::move(retrievals)},
             {"rounds_used", t.rounds_used}};
    if (t.final_answer) out["final_answer"] = *t.final_answer;
    return out;
}

Transcript transcript_from_json(const json& j) {
    Transcript t;
    t.question = j.at("question").get<std::string>();
    int idx = 0;
    for (const auto& s : j.at("steps")) {
        ActionStep step;
        step.kind = action_kind_from_string(s.at("kind").get<std::string>());
        step.raw_text = s.at("raw_text").get<std::string>();
        step.payload = s.at("payload").get<std::string>();
        step.index = idx++;
        t.steps.push_back(std::move(step));
    }
    for (const auto& r : j.value("retrievals", json::array())) {
        RetrievalEvent ev;
        ev.query = r.at("query").get<std::string>();
        for (const auto& id : r.value("doc_ids", json::array())) {
            Document d;
            d.id = id.get<std::string>(); // export carries ids only
            ev.docs.push_back(std::move(d));
        }
        t.retrievals.push_back(std::move(ev));
    }
    if (j.contains("final_answer")) t.final_answer = j["final_answer"].get<std::string>();
    t.rounds_used = j.at("rounds_used").get<int>();
    return t;
}

void write_transcripts_jsonl(std::ostream& out, const std::vector<RunOutcome>& outcomes) {
    for (const auto& o : outcomes) {
        json line = transcript_to_json(o.transcript);
        if (o.error) line["error"] = *o.error;
        out << line.dump() << "\n";
    }
}

std::vector<Transcript> read_transcripts_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open transcripts file: " + path);
    std::vector<Transcript> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            out.push_back(transcript_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw IoError("transcripts file " + path + " line " + std::to_string(line_no) +
                          ": " + e.what());
        }
    }
    return out;
}

} // namespace ragproc
