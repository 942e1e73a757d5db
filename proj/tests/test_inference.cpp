#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "ragproc/backends.hpp"
#include "ragproc/inference.hpp"
#include "support.hpp"
#include "support_films.hpp"

using namespace ragproc;
using namespace ragproc::testing;
using nlohmann::json;

namespace {

struct FilmsSetup {
    LocalRetriever retriever;
    ScriptedBackend backend;
    InferenceConfig cfg;

    FilmsSetup() : retriever(ingest_corpus(fixture_path("films_corpus.jsonl"))) {
        for (const auto& line : films_script(retriever.index())) {
            backend.add_exact(line.tmpl, line.user, {line.reply});
        }
        cfg.max_rounds = 4;
        cfg.top_k = 3;
    }
};

std::vector<std::string> golden_lines() {
    std::istringstream in(read_file(fixture_path("golden_transcripts.jsonl")));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

} // namespace

TEST_SUITE("inference") {

TEST_CASE("scripted trajectories reproduce the golden transcripts byte-for-byte") {
    FilmsSetup s;
    auto golden = golden_lines();
    REQUIRE(golden.size() == 3);

    auto ta = run(kFilmsQuestionA, s.backend, s.retriever, s.cfg);
    CHECK(ta.rounds_used == 1);
    CHECK(ta.retrievals.empty());
    CHECK(ta.final_answer == std::string("William S. Hart"));
    CHECK(transcript_to_json(ta).dump() == golden[0]);

    auto tb = run(kFilmsQuestionB, s.backend, s.retriever, s.cfg);
    CHECK(tb.rounds_used == 3);
    CHECK(tb.retrievals.size() == 1);
    CHECK(tb.final_answer == std::string("Il Coraggio"));
    CHECK(transcript_to_json(tb).dump() == golden[1]);

    auto tc = run(kFilmsQuestionC, s.backend, s.retriever, s.cfg);
    CHECK(tc.rounds_used == 4);
    CHECK_FALSE(tc.final_answer.has_value());
    CHECK(tc.retrievals.size() == 2);
    CHECK(transcript_to_json(tc).dump() == golden[2]);
}

TEST_CASE("every run terminates within max_rounds policy calls") {
    FilmsSetup s;
    size_t before = s.backend.call_count();
    run(kFilmsQuestionC, s.backend, s.retriever, s.cfg);
    CHECK(s.backend.call_count() - before <= 4);
}

TEST_CASE("final answer equals the last step payload and stages alternate") {
    FilmsSetup s;
    auto t = run(kFilmsQuestionB, s.backend, s.retriever, s.cfg);
    REQUIRE(t.final_answer.has_value());
    CHECK(*t.final_answer == t.steps.back().payload);

    size_t queries = 0;
    for (size_t i = 0; i < t.steps.size(); ++i) {
        if (t.steps[i].kind == ActionKind::QueryGeneration) {
            ++queries;
            if (i + 1 < t.steps.size()) {
                CHECK(t.steps[i + 1].kind == ActionKind::EvidenceExtraction);
            }
        }
    }
    CHECK(t.retrievals.size() == queries);
    for (const auto& r : t.retrievals) CHECK(r.docs.size() <= 3);
}

TEST_CASE("policy failures carry the partial transcript") {
    FilmsSetup s;
    ScriptedBackend::Options opts;
    opts.strict = false;
    opts.default_reply = "never a placeholder";
    ScriptedBackend broken(opts);
    try {
        run(kFilmsQuestionA, broken, s.retriever, s.cfg);
        FAIL("expected PolicyFailure");
    } catch (const PolicyFailure& e) {
        CHECK(e.partial().question == kFilmsQuestionA);
        CHECK(e.partial().steps.empty());
    }
}

TEST_CASE("record_transcript = false keeps only the answer and round count") {
    FilmsSetup s;
    InferenceConfig lean = s.cfg;
    lean.record_transcript = false;
    auto t = run(kFilmsQuestionB, s.backend, s.retriever, lean);
    CHECK(t.final_answer == std::string("Il Coraggio"));
    CHECK(t.rounds_used == 3);
    CHECK(t.steps.empty());
    CHECK(t.retrievals.empty());
}

TEST_CASE("run rejects empty questions and bad budgets") {
    FilmsSetup s;
    CHECK_THROWS_AS(run("", s.backend, s.retriever, s.cfg), Error);
    InferenceConfig bad = s.cfg;
    bad.max_rounds = 0;
    CHECK_THROWS_AS(run(kFilmsQuestionA, s.backend, s.retriever, bad), Error);
}

TEST_CASE("run_batch keeps input order and embeds per-question failures") {
    FilmsSetup s;
    std::vector<std::string> questions = {kFilmsQuestionA, "unscripted question",
                                          kFilmsQuestionB};
    auto outcomes = run_batch(questions, s.backend, s.retriever, s.cfg, 2);
    REQUIRE(outcomes.size() == 3);
    CHECK(outcomes[0].transcript.question == kFilmsQuestionA);
    CHECK_FALSE(outcomes[0].error.has_value());
    CHECK(outcomes[1].error.has_value()); // strict scripted backend rejects it
    CHECK(outcomes[2].transcript.final_answer == std::string("Il Coraggio"));
}

TEST_CASE("run_batch output is independent of parallelism under scripting") {
    std::vector<std::string> questions = {kFilmsQuestionA, kFilmsQuestionB, kFilmsQuestionC,
                                          kFilmsQuestionA, kFilmsQuestionB};
    auto render = [&](int parallelism) {
        FilmsSetup s; // fresh backend per run so reply sequences reset
        auto outcomes = run_batch(questions, s.backend, s.retriever, s.cfg, parallelism);
        std::ostringstream out;
        write_transcripts_jsonl(out, outcomes);
        return out.str();
    };
    auto serial = render(1);
    CHECK(render(5) == serial);
    // and the jsonl matches input order (question A first, then B, ...)
    std::istringstream in(serial);
    std::string first;
    std::getline(in, first);
    CHECK(json::parse(first)["question"] == kFilmsQuestionA);
}

TEST_CASE("transcript jsonl round-trips") {
    FilmsSetup s;
    auto t = run(kFilmsQuestionB, s.backend, s.retriever, s.cfg);
    auto parsed = transcript_from_json(transcript_to_json(t));
    CHECK(parsed.question == t.question);
    CHECK(parsed.final_answer == t.final_answer);
    CHECK(parsed.rounds_used == t.rounds_used);
    REQUIRE(parsed.steps.size() == t.steps.size());
    for (size_t i = 0; i < t.steps.size(); ++i) {
        CHECK(parsed.steps[i].kind == t.steps[i].kind);
        CHECK(parsed.steps[i].raw_text == t.steps[i].raw_text);
    }
    REQUIRE(parsed.retrievals.size() == t.retrievals.size());
    for (size_t i = 0; i < t.retrievals.size(); ++i) {
        CHECK(parsed.retrievals[i].query == t.retrievals[i].query);
        REQUIRE(parsed.retrievals[i].docs.size() == t.retrievals[i].docs.size());
        for (size_t j = 0; j < t.retrievals[i].docs.size(); ++j) {
            CHECK(parsed.retrievals[i].docs[j].id == t.retrievals[i].docs[j].id);
        }
    }
}

} // TEST_SUITE
