#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "ragproc/retrieval.hpp"
#include "ragproc/text.hpp"
#include "support.hpp"

using namespace ragproc;
using namespace ragproc::testing;

namespace {

CorpusIndex index_from_lines(const std::string& jsonl) {
    std::istringstream in(jsonl);
    return ingest_corpus(in);
}

/// Index-free BM25 reference: rescans every document per query. Kept
/// deliberately independent of the inverted-index code path.
std::vector<std::pair<std::string, double>> bm25_brute(
    const std::vector<std::pair<std::string, std::string>>& docs, // (id, text)
    const std::string& query, double k1, double b) {
    std::vector<std::vector<std::string>> toks;
    double total_len = 0;
    for (const auto& [id, text] : docs) {
        toks.push_back(normalize_tokens(text));
        total_len += static_cast<double>(toks.back().size());
    }
    const double avg = docs.empty() ? 0.0 : total_len / static_cast<double>(docs.size());

    std::set<std::string> terms;
    for (const auto& t : normalize_tokens(query)) terms.insert(t);

    std::vector<std::pair<std::string, double>> scored;
    for (size_t d = 0; d < docs.size(); ++d) {
        double score = 0;
        bool any = false;
        for (const auto& term : terms) {
            long tf = std::count(toks[d].begin(), toks[d].end(), term);
            if (tf == 0) continue;
            long df = 0;
            for (const auto& dt : toks) {
                if (std::count(dt.begin(), dt.end(), term) > 0) ++df;
            }
            double n = static_cast<double>(docs.size());
            double idf = std::log(1.0 + (n - static_cast<double>(df) + 0.5) /
                                            (static_cast<double>(df) + 0.5));
            double dl = static_cast<double>(toks[d].size());
            double norm = avg > 0 ? dl / avg : 1.0;
            score += idf * (static_cast<double>(tf) * (k1 + 1.0)) /
                     (static_cast<double>(tf) + k1 * (1.0 - b + b * norm));
            any = true;
        }
        if (any) scored.emplace_back(docs[d].first, score);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b2) {
        if (a.second != b2.second) return a.second > b2.second;
        return a.first < b2.first;
    });
    return scored;
}

const char* kZebraCorpus =
    R"({"id":"z1","contents":"zebra walks alone today"}
{"id":"z2","contents":"zebra sleeps under trees"}
{"id":"z3","contents":"zebra zebra zebra runs"}
{"id":"z4","contents":"zebra eats green grass"}
{"id":"z5","contents":"zebra drinks cool water"}
)";

} // namespace

TEST_SUITE("retrieval") {

TEST_CASE("ingest counts documents and builds consistent lengths") {
    auto index = index_from_lines(
        R"({"id":"a","title":"T","contents":"one two three"}
{"id":"b","contents":"four five"}
{"id":"c","contents":"six"}
)");
    CHECK(index.doc_count() == 3);
    // avg length invariant
    double sum = 0;
    for (auto len : index.doc_lengths) sum += len;
    CHECK(std::abs(sum / index.doc_count() - index.avg_doc_length) < 1e-9);
}

TEST_CASE("ingest rejects duplicates, empty contents, and bad JSON with line numbers") {
    CHECK_THROWS_AS(index_from_lines("{\"id\":\"a\",\"contents\":\"x\"}\n"
                                     "{\"id\":\"a\",\"contents\":\"y\"}\n"),
                    DuplicateDocId);
    try {
        index_from_lines("{\"id\":\"a\",\"contents\":\"x\"}\n{\"id\":\"b\",\"contents\":\"\"}\n");
        FAIL("expected CorpusFormatError");
    } catch (const CorpusFormatError& e) {
        CHECK(e.line() == 2);
    }
    try {
        index_from_lines("{\"id\":\"a\",\"contents\":\"x\"}\nnot json\n");
        FAIL("expected CorpusFormatError");
    } catch (const CorpusFormatError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(index_from_lines("{\"contents\":\"x\"}\n"), CorpusFormatError);
}

TEST_CASE("repeated term lifts a document to the top") {
    // Hand evaluation with k1=1.2, b=0.75: every doc has 4 tokens so the
    // length norm is 1; idf = ln(12/11) for the shared term; tf=3 scores
    // 3*2.2/(3+1.2) = 11/7 times the tf=1 score of 2.2/2.2 = 1.
    auto index = index_from_lines(kZebraCorpus);
    auto docs = retrieve(index, "zebra", 5);
    REQUIRE(docs.size() == 5);
    CHECK(docs[0].id == "z3");
    const double idf = std::log(12.0 / 11.0);
    CHECK(docs[0].score == doctest::Approx(idf * 11.0 / 7.0).epsilon(1e-12));
    CHECK(docs[1].score == doctest::Approx(idf).epsilon(1e-12));
    // equal-score tail tie-breaks by ascending id
    CHECK(docs[1].id == "z1");
    CHECK(docs[2].id == "z2");
    CHECK(docs[3].id == "z4");
    CHECK(docs[4].id == "z5");
}

TEST_CASE("single match and no match") {
    auto index = index_from_lines(kZebraCorpus);
    auto docs = retrieve(index, "grass", 3);
    REQUIRE(docs.size() == 1);
    CHECK(docs[0].id == "z4");
    CHECK(retrieve(index, "nothing matches this", 3).empty());
    CHECK_THROWS_AS(retrieve(index, "zebra", 0), Error);
}

TEST_CASE("scores are set on results and zero-score docs are excluded") {
    auto index = index_from_lines(kZebraCorpus);
    for (const auto& d : retrieve(index, "zebra runs", 5)) CHECK(d.score > 0.0);
}

TEST_CASE("property: retrieve agrees with the index-free reference") {
    std::mt19937 rng(19);
    const std::vector<std::string> vocab = {"ant",  "bear", "crow", "deer", "elk",
                                            "fox",  "gnu",  "hare", "ibis", "jay"};
    for (int trial = 0; trial < 100; ++trial) {
        size_t n_docs = 2 + rng() % 8;
        std::vector<std::pair<std::string, std::string>> docs;
        std::string jsonl;
        for (size_t d = 0; d < n_docs; ++d) {
            size_t len = 1 + rng() % 12;
            std::string text;
            for (size_t t = 0; t < len; ++t) {
                if (t) text += ' ';
                text += vocab[rng() % vocab.size()];
            }
            std::string id = "doc" + std::to_string(d);
            docs.emplace_back(id, text);
            jsonl += "{\"id\":\"" + id + "\",\"contents\":\"" + text + "\"}\n";
        }
        auto index = index_from_lines(jsonl);
        std::string query = vocab[rng() % vocab.size()];
        if (rng() % 2) query += " " + vocab[rng() % vocab.size()];

        auto expected = bm25_brute(docs, query, 1.2, 0.75);
        auto got = retrieve(index, query, static_cast<int>(n_docs));
        REQUIRE(got.size() == expected.size());
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].id == expected[i].first);
            CHECK(got[i].score == doctest::Approx(expected[i].second).epsilon(1e-12));
        }
        // non-increasing scores
        for (size_t i = 1; i < got.size(); ++i) CHECK(got[i - 1].score >= got[i].score);
        // monotone prefix
        auto got1 = retrieve(index, query, 1);
        if (!got.empty()) {
            REQUIRE(got1.size() == 1);
            CHECK(got1[0].id == got[0].id);
        }
        auto got2 = retrieve(index, query, 2);
        for (size_t i = 0; i < got2.size(); ++i) CHECK(got2[i].id == got[i].id);
    }
}

TEST_CASE("determinism: same corpus bytes, same results") {
    auto a = index_from_lines(kZebraCorpus);
    auto b = index_from_lines(kZebraCorpus);
    auto ra = retrieve(a, "zebra runs water", 5);
    auto rb = retrieve(b, "zebra runs water", 5);
    REQUIRE(ra.size() == rb.size());
    for (size_t i = 0; i < ra.size(); ++i) {
        CHECK(ra[i].id == rb[i].id);
        CHECK(ra[i].score == rb[i].score);
    }
}

TEST_CASE("index cache round-trip preserves retrieval results and bytes") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "ragproc_index_test";
    fs::create_directories(dir);
    auto cache = (dir / "films.idx.json").string();

    auto index = index_from_lines(kZebraCorpus);
    save_index(index, cache);
    auto reloaded = load_index(cache);

    std::mt19937 rng(5);
    const std::vector<std::string> vocab = {"zebra", "runs", "water", "grass", "trees", "alone"};
    for (int i = 0; i < 50; ++i) {
        std::string query = vocab[rng() % vocab.size()];
        query += " " + vocab[rng() % vocab.size()];
        auto a = retrieve(index, query, 3);
        auto b = retrieve(reloaded, query, 3);
        REQUIRE(a.size() == b.size());
        for (size_t j = 0; j < a.size(); ++j) {
            CHECK(a[j].id == b[j].id);
            CHECK(a[j].score == b[j].score);
        }
    }

    auto cache2 = (dir / "films2.idx.json").string();
    save_index(reloaded, cache2);
    CHECK(read_file(cache) == read_file(cache2));

    std::ofstream bad(cache2);
    bad << "{\"format\":\"something-else\"}\n";
    bad.close();
    CHECK_THROWS_AS(load_index(cache2), CorpusFormatError);
}

} // TEST_SUITE
