#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ragproc/policy.hpp"

namespace ragproc {

/// Deterministic test double. Requests are matched by fingerprint (template
/// name + user-content hash) first, then by substring rules in insertion
/// order, then the default reply. An entry may hold several replies: repeats
/// of the *same request* consume them in order and stick on the last, which
/// lets tree search branch at a repeated state; distinct requests that match
/// the same entry each start at the first reply. Replies therefore depend
/// only on the request and its own repeat count, never on call interleaving,
/// so scripted runs stay bit-reproducible under concurrency. Every request
/// is recorded for assertions. Thread-safe.
class ScriptedBackend : public PolicyBackend {
public:
    struct Options {
        bool strict = true;
        std::optional<std::string> default_reply;
    };

    struct CallRecord {
        TemplateName template_name;
        std::string system;
        std::string user;
        double temperature = 0.0;
        std::optional<long> seed;
        std::string reply;
    };

    ScriptedBackend() : ScriptedBackend(Options()) {}
    explicit ScriptedBackend(Options options);

    /// Registers replies for the exact user content (hashed internally).
    void add_exact(TemplateName tmpl, std::string_view user_text,
                   std::vector<std::string> replies);
    /// Registers replies for a precomputed fingerprint (see fingerprint()).
    void add_fingerprint(std::string fp, std::vector<std::string> replies);
    /// Registers replies for any request whose user content contains `needle`.
    void add_contains(TemplateName tmpl, std::string needle, std::vector<std::string> replies);

    std::string complete(const PolicyRequest& request) override;

    std::vector<CallRecord> call_log() const;
    size_t call_count() const;

    /// Loads a script from the CLI's JSON script format:
    ///   {"strict": bool, "default_reply": str|null,
    ///    "entries": [{"template": "reasoning|grounding|process_evaluation",
    ///                 "match": "exact"|"contains",
    ///                 "user": "...full user text..."      (exact)
    ///                 | "user_hash": "hex"                (exact, prehashed)
    ///                 | "needle": "...substring...",      (contains)
    ///                 "replies": ["...", ...]}]}
    static std::unique_ptr<ScriptedBackend> from_json_file(const std::string& path);

private:
    struct Entry {
        std::vector<std::string> replies;
    };
    struct ContainsRule {
        TemplateName tmpl;
        std::string needle;
        size_t entry;
    };

    std::string take_reply(size_t entry_idx, const std::string& request_fp);

    Options options_;
    mutable std::mutex mu_;
    std::vector<Entry> entries_;
    std::unordered_map<std::string, size_t> exact_;
    std::vector<ContainsRule> contains_;
    // repeat count per (entry, request fingerprint)
    std::unordered_map<std::string, size_t> sequence_position_;
    std::vector<CallRecord> log_;
};

/// Adapts a plain function into a backend; handy for programmatic fixtures.
class FunctionBackend : public PolicyBackend {
public:
    using Fn = std::function<std::string(const PolicyRequest&)>;
    explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
    std::string complete(const PolicyRequest& request) override { return fn_(request); }

private:
    Fn fn_;
};

struct HttpBackendConfig {
    std::string base_url;                      // e.g. "http://localhost:8080"
    std::string path = "/v1/chat/completions"; // chat-completion endpoint
    std::string model;
    std::string api_token; // sent as "Authorization: Bearer <token>" when set
    int timeout_ms = 30000;
    int max_retries = 3;     // transport/5xx retries beyond the first attempt
    int backoff_base_ms = 200;
    int max_in_flight = 4;   // global concurrent-request cap
};

/// Chat-completion client: POSTs {model, messages:[{role:"system"},{role:
/// "user"}], temperature, max_tokens, seed?} and reads
/// choices[0].message.content. Transient failures (transport errors, 5xx,
/// 429) are retried with exponential backoff; 401/403 raise AuthFailure
/// immediately. Shareable across threads; enforces max_in_flight.
class HttpBackend : public PolicyBackend {
public:
    struct Stats {
        std::uint64_t requests = 0; // logical complete() calls
        std::uint64_t retries = 0;  // extra attempts beyond the first
    };

    explicit HttpBackend(HttpBackendConfig config);
    ~HttpBackend() override;

    std::string complete(const PolicyRequest& request) override;

    Stats stats() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace ragproc
