#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ragproc/document.hpp"
#include "ragproc/errors.hpp"

namespace ragproc {

inline constexpr const char* kIndexFormatTag = "ragproc-index-v1";

/// Okapi BM25 with the non-negative IDF variant ln(1 + (N-df+0.5)/(df+0.5)).
struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Inverted index over a corpus, immutable after ingestion and safe for
/// concurrent readers. Tokenization is the shared QA normalization
/// (normalize_tokens), so queries and documents agree on terms.
struct CorpusIndex {
    struct Posting {
        std::int32_t doc = 0; // index into docs
        std::int32_t tf = 0;
    };

    std::vector<Document> docs;
    std::unordered_map<std::string, std::vector<Posting>> postings;
    std::vector<std::int32_t> doc_lengths;
    double avg_doc_length = 0.0;

    int doc_count() const { return static_cast<int>(docs.size()); }
};

/// Ingests a JSONL corpus: one object {id, title?, contents} per line, blank
/// lines ignored. Deterministic for identical input bytes.
///
/// Throws CorpusFormatError (with line number) or DuplicateDocId.
CorpusIndex ingest_corpus(const std::string& path);
CorpusIndex ingest_corpus(std::istream& in);

/// Top-k BM25 retrieval: documents containing at least one query term, scored
/// and sorted by descending score, ties broken by ascending doc id. Duplicate
/// query terms collapse. Returns at most k documents (possibly none).
std::vector<Document> retrieve(const CorpusIndex& index, const std::string& query, int k,
                               const Bm25Params& params = {});

/// Versioned JSON index cache; identical indexes serialize to identical bytes.
void save_index(const CorpusIndex& index, const std::string& path);
CorpusIndex load_index(const std::string& path);

/// Retrieval interface consumed by inference and annotation.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<Document> retrieve(const std::string& query, int k) = 0;
};

class LocalRetriever : public Retriever {
public:
    explicit LocalRetriever(CorpusIndex index, Bm25Params params = {})
        : index_(std::move(index)), params_(params) {}

    std::vector<Document> retrieve(const std::string& query, int k) override {
        return ragproc::retrieve(index_, query, k, params_);
    }

    const CorpusIndex& index() const { return index_; }

private:
    CorpusIndex index_;
    Bm25Params params_;
};

struct RemoteRetrieverConfig {
    std::string base_url;
    std::string path = "/retrieve";
    int timeout_ms = 10000;
};

/// Adapter for external retrievers: POSTs {"query", "top_k"} and expects
/// {"docs": [{id, title?, contents, score?}]}. Replies violating the Document
/// invariants raise MalformedRetrievalReply.
class RemoteRetriever : public Retriever {
public:
    explicit RemoteRetriever(RemoteRetrieverConfig config);
    ~RemoteRetriever() override;

    std::vector<Document> retrieve(const std::string& query, int k) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace ragproc
