#pragma once

#include <memory>
#include <optional>
#include <string>

#include "ragproc/backends.hpp"
#include "ragproc/dataset.hpp"
#include "ragproc/inference.hpp"
#include "ragproc/mcts.hpp"
#include "ragproc/retrieval.hpp"

namespace ragproc {

/// Run configuration, loaded from a TOML-style key/value file with [section]
/// headers. Flag overrides are applied on top by the CLI. The backend auth
/// token comes only from the RAGPROC_API_TOKEN environment variable.
struct RunConfig {
    struct Backend {
        std::string kind = "scripted"; // scripted | http
        std::string script;            // scripted: JSON script file
        std::string endpoint;          // http: base URL
        std::string path = "/v1/chat/completions";
        std::string model;
        double temperature = 0.7;
        std::optional<long> seed;
        int retries = 2;
        int timeout_ms = 30000;
        int max_in_flight = 4;
        int max_output_tokens = 1024;
    } backend;

    struct RetrieverCfg {
        std::string kind = "local"; // local | remote
        std::string corpus;         // local: JSONL corpus
        std::string index_cache;    // local: optional cache file
        std::string endpoint;       // remote: base URL
        std::string path = "/retrieve";
        int k = 3;
        int timeout_ms = 10000;
    } retriever;

    struct Mcts {
        double alpha = 0.9;
        double c_uct = 1.4142135623730951;
        int max_children = 3;
        int iterations = 24;
        int max_depth = 12;
        double judge_fallback_v = 0.0;
    } mcts;

    struct Inference {
        int max_rounds = 10;
        std::string answer_format = "answer";
        bool record_transcript = true;
    } inference;

    struct Dataset {
        double theta = kDefaultRewardGapTheta;
        std::string mode = "best_worst";
        double dpo_beta = 0.1;
    } dataset;

    struct Eval {
        std::string gold;
    } eval;

    int parallelism = 1;

    InferenceConfig inference_config() const;
    MctsConfig mcts_config() const;
};

/// Parses the config file. Grammar: "[section]" headers, "key = value" pairs,
/// "#" comments; values are quoted strings, numbers, or true/false. Unknown
/// sections or keys are errors, as are referenced files that do not exist.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text, const std::string& source_name = "<config>");

/// Builds the configured policy backend (reads RAGPROC_API_TOKEN for http).
std::unique_ptr<PolicyBackend> make_backend(const RunConfig& cfg);

/// Builds the configured retriever. Local corpora are loaded from the index
/// cache when it exists and is newer than the corpus; otherwise the corpus is
/// ingested (and the cache rewritten when a path is configured).
std::unique_ptr<Retriever> make_retriever(const RunConfig& cfg);

} // namespace ragproc
