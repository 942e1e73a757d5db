#include "ragproc/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ragproc/text.hpp"

namespace ragproc {

using nlohmann::json;

CorpusIndex ingest_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);
    return ingest_corpus(in);
}

CorpusIndex ingest_corpus(std::istream& in) {
    CorpusIndex index;
    std::unordered_map<std::string, size_t> seen_ids;
    std::string line;
    size_t line_no = 0;
    std::int64_t total_len = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;

        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw CorpusFormatError(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) throw CorpusFormatError(line_no, "line is not a JSON object");
        if (!obj.contains("id") || !obj["id"].is_string()) {
            throw CorpusFormatError(line_no, "missing string field \"id\"");
        }
        if (!obj.contains("contents") || !obj["contents"].is_string()) {
            throw CorpusFormatError(line_no, "missing string field \"contents\"");
        }

        Document doc;
        doc.id = obj["id"].get<std::string>();
        doc.title = obj.value("title", "");
        doc.contents = obj["contents"].get<std::string>();
        if (doc.contents.empty()) throw CorpusFormatError(line_no, "empty contents");
        if (!seen_ids.emplace(doc.id, line_no).second) {
            throw DuplicateDocId("duplicate doc id \"" + doc.id + "\" at line " +
                                 std::to_string(line_no));
        }

        auto doc_idx = static_cast<std::int32_t>(index.docs.size());
        std::map<std::string, std::int32_t> tf;
        for (auto& tok : normalize_tokens(doc.title + " " + doc.contents)) ++tf[tok];
        std::int32_t len = 0;
        for (auto& [term, count] : tf) {
            index.postings[term].push_back(CorpusIndex::Posting{doc_idx, count});
            len += count;
        }
        index.doc_lengths.push_back(len);
        total_len += len;
        index.docs.push_back(std::move(doc));
    }

    index.avg_doc_length =
        index.docs.empty() ? 0.0 : static_cast<double>(total_len) / index.docs.size();
    return index;
}

std::vector<Document> retrieve(const CorpusIndex& index, const std::string& query, int k,
                               const Bm25Params& params) {
    if (k < 1) throw Error("retrieve requires k >= 1");
    if (index.docs.empty()) return {};

    // Unique query terms in sorted order so score accumulation is fully
    // deterministic.
    std::set<std::string> terms;
    for (auto& tok : normalize_tokens(query)) terms.insert(tok);

    const double n_docs = index.doc_count();
    std::unordered_map<std::int32_t, double> scores;
    for (const auto& term : terms) {
        auto it = index.postings.find(term);
        if (it == index.postings.end()) continue;
        const auto& plist = it->second;
        const double df = static_cast<double>(plist.size());
        const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        for (const auto& post : plist) {
            const double tf = post.tf;
            const double dl = index.doc_lengths[static_cast<size_t>(post.doc)];
            const double norm =
                index.avg_doc_length > 0 ? dl / index.avg_doc_length : 1.0;
            scores[post.doc] +=
                idf * (tf * (params.k1 + 1.0)) / (tf + params.k1 * (1.0 - params.b + params.b * norm));
        }
    }

    std::vector<std::pair<std::int32_t, double>> ranked(scores.begin(), scores.end());
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return index.docs[static_cast<size_t>(a.first)].id <
               index.docs[static_cast<size_t>(b.first)].id;
    });

    std::vector<Document> out;
    for (size_t i = 0; i < ranked.size() && i < static_cast<size_t>(k); ++i) {
        Document d = index.docs[static_cast<size_t>(ranked[i].first)];
        d.score = ranked[i].second;
        out.push_back(std::move(d));
    }
    return out;
}

void save_index(const CorpusIndex& index, const std::string& path) {
    json postings = json::object();
    for (const auto& [term, plist] : index.postings) {
        json arr = json::array();
        for (const auto& p : plist) arr.push_back(json::array({p.doc, p.tf}));
        postings[term] = std::move(arr);
    }
    json docs = json::array();
    for (const auto& d : index.docs) {
        docs.push_back(json{{"id", d.id}, {"title", d.title}, {"contents", d.contents}});
    }
    json doc{{"format", kIndexFormatTag},
             {"avg_doc_length", index.avg_doc_length},
             {"doc_lengths", index.doc_lengths},
             {"docs", std::move(docs)},
             {"postings", std::move(postings)}};

    std::ofstream out(path);
    if (!out) throw IoError("cannot write index cache: " + path);
    out << doc.dump() << "\n";
}

CorpusIndex load_index(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open index cache: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw CorpusFormatError(0, std::string("index cache is not valid JSON: ") + e.what());
    }
    if (doc.value("format", "") != kIndexFormatTag) {
        throw CorpusFormatError(0, "index cache has unknown format tag \"" +
                                       doc.value("format", "") + "\"");
    }

    CorpusIndex index;
    try {
        index.avg_doc_length = doc.at("avg_doc_length").get<double>();
        index.doc_lengths = doc.at("doc_lengths").get<std::vector<std::int32_t>>();
        for (const auto& d : doc.at("docs")) {
            Document out;
            out.id = d.at("id").get<std::string>();
            out.title = d.value("title", "");
            out.contents = d.at("contents").get<std::string>();
            index.docs.push_back(std::move(out));
        }
        for (const auto& [term, plist] : doc.at("postings").items()) {
            auto& vec = index.postings[term];
            for (const auto& p : plist) {
                vec.push_back(CorpusIndex::Posting{p.at(0).get<std::int32_t>(),
                                                   p.at(1).get<std::int32_t>()});
            }
        }
    } catch (const json::exception& e) {
        throw CorpusFormatError(0, std::string("index cache is malformed: ") + e.what());
    }
    return index;
}

// --- RemoteRetriever ---

struct RemoteRetriever::Impl {
    RemoteRetrieverConfig cfg;
    httplib::Client client;

    explicit Impl(RemoteRetrieverConfig c) : cfg(std::move(c)), client(cfg.base_url) {
        client.set_connection_timeout(0, cfg.timeout_ms * 1000LL);
        client.set_read_timeout(0, cfg.timeout_ms * 1000LL);
        client.set_write_timeout(0, cfg.timeout_ms * 1000LL);
    }
};

RemoteRetriever::RemoteRetriever(RemoteRetrieverConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

RemoteRetriever::~RemoteRetriever() = default;

std::vector<Document> RemoteRetriever::retrieve(const std::string& query, int k) {
    json body{{"query", query}, {"top_k", k}};
    auto res = impl_->client.Post(impl_->cfg.path, body.dump(), "application/json");
    if (!res) {
        throw BackendUnavailable("remote retriever unreachable: " +
                                 httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw BackendUnavailable("remote retriever returned HTTP " +
                                 std::to_string(res->status));
    }

    json doc;
    try {
        doc = json::parse(res->body);
    } catch (const json::exception& e) {
        throw MalformedRetrievalReply(std::string("reply is not valid JSON: ") + e.what());
    }
    if (!doc.contains("docs") || !doc["docs"].is_array()) {
        throw MalformedRetrievalReply("reply has no \"docs\" array");
    }

    std::vector<Document> out;
    std::set<std::string> ids;
    for (const auto& d : doc["docs"]) {
        Document parsed;
        if (!d.contains("id") || !d["id"].is_string() || !d.contains("contents") ||
            !d["contents"].is_string()) {
            throw MalformedRetrievalReply("doc is missing id or contents");
        }
        parsed.id = d["id"].get<std::string>();
        parsed.title = d.value("title", "");
        parsed.contents = d["contents"].get<std::string>();
        parsed.score = d.value("score", 0.0);
        if (parsed.contents.empty()) throw MalformedRetrievalReply("doc has empty contents");
        if (!ids.insert(parsed.id).second) {
            throw MalformedRetrievalReply("duplicate doc id \"" + parsed.id + "\" in reply");
        }
        out.push_back(std::move(parsed));
    }
    return out;
}

} // namespace ragproc
