#include "ragproc/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ragproc/text.hpp"

namespace ragproc {

namespace fs = std::filesystem;

InferenceConfig RunConfig::inference_config() const {
    InferenceConfig cfg;
    cfg.max_rounds = inference.max_rounds;
    cfg.top_k = retriever.k;
    cfg.answer_format = inference.answer_format;
    cfg.record_transcript = inference.record_transcript;
    cfg.temperature = backend.temperature;
    cfg.max_output_tokens = backend.max_output_tokens;
    cfg.seed = backend.seed;
    cfg.retries = backend.retries;
    return cfg;
}

MctsConfig RunConfig::mcts_config() const {
    MctsConfig cfg;
    cfg.alpha = mcts.alpha;
    cfg.c_uct = mcts.c_uct;
    cfg.max_children = mcts.max_children;
    cfg.iterations = mcts.iterations;
    cfg.max_depth = mcts.max_depth;
    cfg.judge_fallback_v = mcts.judge_fallback_v;
    cfg.top_k = retriever.k;
    cfg.policy = PolicyOptions{backend.temperature, backend.max_output_tokens, backend.seed,
                               backend.retries, inference.answer_format};
    return cfg;
}

namespace {

struct KeyValue {
    std::string section;
    std::string key;
    std::string value; // raw, unquoted-if-quoted
    size_t line;
};

std::string unquote(const std::string& raw, const std::string& where) {
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
        std::string out;
        for (size_t i = 1; i + 1 < raw.size(); ++i) {
            char c = raw[i];
            if (c == '\\' && i + 2 < raw.size()) {
                char n = raw[++i];
                switch (n) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: throw ConfigError(where + ": unknown escape \\" + n);
                }
            } else {
                out += c;
            }
        }
        return out;
    }
    return raw;
}

long parse_int(const KeyValue& kv) {
    try {
        size_t idx = 0;
        long v = std::stol(kv.value, &idx);
        if (idx != kv.value.size()) throw std::invalid_argument("trailing chars");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(kv.line) + ": " + kv.key +
                          " expects an integer, got \"" + kv.value + "\"");
    }
}

double parse_double(const KeyValue& kv) {
    try {
        size_t idx = 0;
        double v = std::stod(kv.value, &idx);
        if (idx != kv.value.size()) throw std::invalid_argument("trailing chars");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(kv.line) + ": " + kv.key +
                          " expects a number, got \"" + kv.value + "\"");
    }
}

bool parse_bool(const KeyValue& kv) {
    if (kv.value == "true") return true;
    if (kv.value == "false") return false;
    throw ConfigError("line " + std::to_string(kv.line) + ": " + kv.key +
                      " expects true/false, got \"" + kv.value + "\"");
}

} // namespace

RunConfig parse_config(const std::string& text, const std::string& source_name) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    size_t line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;

        if (stripped.front() == '[') {
            if (stripped.back() != ']') {
                throw ConfigError(source_name + " line " + std::to_string(line_no) +
                                  ": malformed section header");
            }
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section != "backend" && section != "retriever" && section != "mcts" &&
                section != "inference" && section != "dataset" && section != "eval" &&
                section != "run") {
                throw ConfigError(source_name + " line " + std::to_string(line_no) +
                                  ": unknown section [" + section + "]");
            }
            continue;
        }

        size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source_name + " line " + std::to_string(line_no) +
                              ": expected key = value");
        }
        KeyValue kv;
        kv.section = section;
        kv.key = trim(stripped.substr(0, eq));
        std::string raw = trim(stripped.substr(eq + 1));
        // Strip a trailing comment outside quotes.
        if (!raw.empty() && raw[0] != '"') {
            size_t hash = raw.find('#');
            if (hash != std::string::npos) raw = trim(raw.substr(0, hash));
        }
        kv.value = unquote(raw, source_name + " line " + std::to_string(line_no));
        kv.line = line_no;

        auto unknown = [&]() -> ConfigError {
            return ConfigError(source_name + " line " + std::to_string(line_no) +
                               ": unknown key \"" + kv.key + "\" in section [" + section + "]");
        };

        if (section == "backend") {
            if (kv.key == "kind") cfg.backend.kind = kv.value;
            else if (kv.key == "script") cfg.backend.script = kv.value;
            else if (kv.key == "endpoint") cfg.backend.endpoint = kv.value;
            else if (kv.key == "path") cfg.backend.path = kv.value;
            else if (kv.key == "model") cfg.backend.model = kv.value;
            else if (kv.key == "temperature") cfg.backend.temperature = parse_double(kv);
            else if (kv.key == "seed") cfg.backend.seed = parse_int(kv);
            else if (kv.key == "retries") cfg.backend.retries = static_cast<int>(parse_int(kv));
            else if (kv.key == "timeout_ms") cfg.backend.timeout_ms = static_cast<int>(parse_int(kv));
            else if (kv.key == "max_in_flight") cfg.backend.max_in_flight = static_cast<int>(parse_int(kv));
            else if (kv.key == "max_output_tokens") cfg.backend.max_output_tokens = static_cast<int>(parse_int(kv));
            else throw unknown();
        } else if (section == "retriever") {
            if (kv.key == "kind") cfg.retriever.kind = kv.value;
            else if (kv.key == "corpus") cfg.retriever.corpus = kv.value;
            else if (kv.key == "index_cache") cfg.retriever.index_cache = kv.value;
            else if (kv.key == "endpoint") cfg.retriever.endpoint = kv.value;
            else if (kv.key == "path") cfg.retriever.path = kv.value;
            else if (kv.key == "k") cfg.retriever.k = static_cast<int>(parse_int(kv));
            else if (kv.key == "timeout_ms") cfg.retriever.timeout_ms = static_cast<int>(parse_int(kv));
            else throw unknown();
        } else if (section == "mcts") {
            if (kv.key == "alpha") cfg.mcts.alpha = parse_double(kv);
            else if (kv.key == "c_uct") cfg.mcts.c_uct = parse_double(kv);
            else if (kv.key == "max_children") cfg.mcts.max_children = static_cast<int>(parse_int(kv));
            else if (kv.key == "iterations") cfg.mcts.iterations = static_cast<int>(parse_int(kv));
            else if (kv.key == "max_depth") cfg.mcts.max_depth = static_cast<int>(parse_int(kv));
            else if (kv.key == "judge_fallback_v") cfg.mcts.judge_fallback_v = parse_double(kv);
            else throw unknown();
        } else if (section == "inference") {
            if (kv.key == "max_rounds") cfg.inference.max_rounds = static_cast<int>(parse_int(kv));
            else if (kv.key == "answer_format") cfg.inference.answer_format = kv.value;
            else if (kv.key == "record_transcript") cfg.inference.record_transcript = parse_bool(kv);
            else throw unknown();
        } else if (section == "dataset") {
            if (kv.key == "theta") cfg.dataset.theta = parse_double(kv);
            else if (kv.key == "mode") cfg.dataset.mode = kv.value;
            else if (kv.key == "dpo_beta") cfg.dataset.dpo_beta = parse_double(kv);
            else throw unknown();
        } else if (section == "eval") {
            if (kv.key == "gold") cfg.eval.gold = kv.value;
            else throw unknown();
        } else if (section == "run") {
            if (kv.key == "parallelism") cfg.parallelism = static_cast<int>(parse_int(kv));
            else throw unknown();
        } else {
            throw ConfigError(source_name + " line " + std::to_string(line_no) +
                              ": key \"" + kv.key + "\" outside any section");
        }
    }

    // Bounds owned by the target types.
    if (cfg.mcts.alpha <= 0.0 || cfg.mcts.alpha > 1.0) {
        throw ConfigError("mcts.alpha must be in (0,1]");
    }
    if (cfg.mcts.c_uct <= 0.0) throw ConfigError("mcts.c_uct must be > 0");
    if (cfg.mcts.max_children < 1) throw ConfigError("mcts.max_children must be >= 1");
    if (cfg.mcts.iterations < 1) throw ConfigError("mcts.iterations must be >= 1");
    if (cfg.mcts.max_depth < 1) throw ConfigError("mcts.max_depth must be >= 1");
    if (cfg.mcts.judge_fallback_v < 0.0 || cfg.mcts.judge_fallback_v > 1.0) {
        throw ConfigError("mcts.judge_fallback_v must be in [0,1]");
    }
    if (cfg.inference.max_rounds < 1) throw ConfigError("inference.max_rounds must be >= 1");
    if (cfg.retriever.k < 1) throw ConfigError("retriever.k must be >= 1");
    if (cfg.dataset.theta <= 0.0) throw ConfigError("dataset.theta must be > 0");
    if (cfg.parallelism < 1) throw ConfigError("run.parallelism must be >= 1");
    if (cfg.backend.kind != "scripted" && cfg.backend.kind != "http") {
        throw ConfigError("backend.kind must be scripted|http");
    }
    if (cfg.retriever.kind != "local" && cfg.retriever.kind != "remote") {
        throw ConfigError("retriever.kind must be local|remote");
    }
    pair_mode_from_string(cfg.dataset.mode);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    RunConfig cfg = parse_config(buf.str(), path);

    // Relative paths in the file resolve against the config's directory, so
    // a config works no matter where the process is started from.
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && fs::path(p).is_relative()) p = (base / p).string();
    };
    resolve(cfg.backend.script);
    resolve(cfg.retriever.corpus);
    resolve(cfg.retriever.index_cache);
    resolve(cfg.eval.gold);

    auto must_exist = [&](const std::string& p, const std::string& what) {
        if (!p.empty() && !fs::exists(p)) {
            throw ConfigError(what + " does not exist: " + p);
        }
    };
    if (cfg.backend.kind == "scripted") must_exist(cfg.backend.script, "backend.script");
    if (cfg.retriever.kind == "local") must_exist(cfg.retriever.corpus, "retriever.corpus");
    must_exist(cfg.eval.gold, "eval.gold");
    return cfg;
}

std::unique_ptr<PolicyBackend> make_backend(const RunConfig& cfg) {
    if (cfg.backend.kind == "scripted") {
        if (cfg.backend.script.empty()) {
            throw ConfigError("backend.kind = scripted requires backend.script");
        }
        return ScriptedBackend::from_json_file(cfg.backend.script);
    }
    HttpBackendConfig http;
    http.base_url = cfg.backend.endpoint;
    http.path = cfg.backend.path;
    http.model = cfg.backend.model;
    if (const char* token = std::getenv("RAGPROC_API_TOKEN")) http.api_token = token;
    http.timeout_ms = cfg.backend.timeout_ms;
    http.max_retries = cfg.backend.retries;
    http.max_in_flight = cfg.backend.max_in_flight;
    if (http.base_url.empty()) throw ConfigError("backend.kind = http requires backend.endpoint");
    return std::make_unique<HttpBackend>(std::move(http));
}

std::unique_ptr<Retriever> make_retriever(const RunConfig& cfg) {
    if (cfg.retriever.kind == "remote") {
        if (cfg.retriever.endpoint.empty()) {
            throw ConfigError("retriever.kind = remote requires retriever.endpoint");
        }
        RemoteRetrieverConfig rc;
        rc.base_url = cfg.retriever.endpoint;
        rc.path = cfg.retriever.path;
        rc.timeout_ms = cfg.retriever.timeout_ms;
        return std::make_unique<RemoteRetriever>(std::move(rc));
    }

    if (cfg.retriever.corpus.empty()) {
        throw ConfigError("retriever.kind = local requires retriever.corpus");
    }
    const std::string& cache = cfg.retriever.index_cache;
    if (!cache.empty() && fs::exists(cache) &&
        fs::last_write_time(cache) >= fs::last_write_time(cfg.retriever.corpus)) {
        return std::make_unique<LocalRetriever>(load_index(cache));
    }
    CorpusIndex index = ingest_corpus(cfg.retriever.corpus);
    if (!cache.empty()) save_index(index, cache);
    return std::make_unique<LocalRetriever>(std::move(index));
}

} // namespace ragproc
