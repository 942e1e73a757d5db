// ragproc: agentic RAG pipeline driver. Corpus indexing, MCTS reward
// annotation, preference-pair export, inference, evaluation, sweeps, stats.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ragproc/config.hpp"
#include "ragproc/dataset.hpp"
#include "ragproc/eval.hpp"
#include "ragproc/inference.hpp"
#include "ragproc/mcts.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ragproc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartialFailure = 1;
constexpr int kExitInputError = 2;

struct Overrides {
    std::optional<int> k;
    std::optional<int> max_rounds;
    std::optional<double> alpha;
    std::optional<double> c_uct;
    std::optional<double> theta;
    std::optional<int> iterations;
    std::optional<int> parallelism;
    std::optional<long> seed;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--k", ov.k, "Documents per retrieval (overrides config)");
    cmd->add_option("--max-rounds", ov.max_rounds, "Policy-call budget (overrides config)");
    cmd->add_option("--alpha", ov.alpha, "Reward decay factor (overrides config)");
    cmd->add_option("--c-uct", ov.c_uct, "UCT exploration constant (overrides config)");
    cmd->add_option("--theta", ov.theta, "Reward-gap threshold (overrides config)");
    cmd->add_option("--iterations", ov.iterations, "Search iterations (overrides config)");
    cmd->add_option("--parallelism", ov.parallelism, "Concurrent questions (overrides config)");
    cmd->add_option("--seed", ov.seed, "Backend sampling seed (overrides config)");
}

RunConfig load_with_overrides(const std::string& config_path, const Overrides& ov) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (ov.k) cfg.retriever.k = *ov.k;
    if (ov.max_rounds) cfg.inference.max_rounds = *ov.max_rounds;
    if (ov.alpha) cfg.mcts.alpha = *ov.alpha;
    if (ov.c_uct) cfg.mcts.c_uct = *ov.c_uct;
    if (ov.theta) cfg.dataset.theta = *ov.theta;
    if (ov.iterations) cfg.mcts.iterations = *ov.iterations;
    if (ov.parallelism) cfg.parallelism = *ov.parallelism;
    if (ov.seed) cfg.backend.seed = *ov.seed;
    return cfg;
}

std::string sanitize_id(const std::string& id) {
    std::string out;
    for (char c : id) {
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    }
    return out.empty() ? "q" : out;
}

int cmd_index(const std::string& corpus, const std::string& out_path) {
    CorpusIndex index = ingest_corpus(corpus);
    save_index(index, out_path);
    std::cout << "indexed " << index.doc_count() << " documents\n";
    return kExitOk;
}

int cmd_infer(const RunConfig& cfg, const std::string& questions_path,
              const std::string& out_path) {
    auto backend = make_backend(cfg);
    auto retriever = make_retriever(cfg);
    auto questions = load_gold_file(questions_path);

    std::vector<std::string> texts;
    for (const auto& q : questions) texts.push_back(q.question);
    auto outcomes =
        run_batch(texts, *backend, *retriever, cfg.inference_config(), cfg.parallelism);

    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write transcripts file: " + out_path);
    write_transcripts_jsonl(out, outcomes);

    size_t failed = 0;
    for (const auto& o : outcomes) {
        if (o.error) ++failed;
    }
    std::cout << "ran " << outcomes.size() << " questions, " << (outcomes.size() - failed)
              << " completed, " << failed << " failed\n";
    return failed == outcomes.size() && !outcomes.empty() ? kExitPartialFailure : kExitOk;
}

int cmd_eval(const std::string& transcripts_path, const std::string& gold_path,
             const std::string& records_out) {
    auto transcripts = read_transcripts_jsonl(transcripts_path);
    auto golds = load_gold_file(gold_path);
    std::map<std::string, GoldEntry> by_question;
    for (const auto& g : golds) by_question[g.question] = g;

    auto [records, agg] = evaluate_run(transcripts, by_question);
    if (!records_out.empty()) {
        std::ofstream out(records_out);
        if (!out) throw IoError("cannot write records file: " + records_out);
        for (const auto& r : records) {
            out << json{{"id", r.question_id},
                        {"prediction", r.prediction},
                        {"em", r.em},
                        {"f1", r.f1},
                        {"rounds_used", r.rounds_used},
                        {"retrieval_count", r.retrieval_count}}
                       .dump()
                << "\n";
        }
    }
    std::printf("EM %.1f F1 %.1f\n", agg.em_pct, agg.f1_pct);
    return kExitOk;
}

int cmd_annotate(const RunConfig& cfg, const std::string& questions_path,
                 const std::string& out_dir) {
    auto backend = make_backend(cfg);
    auto retriever = make_retriever(cfg);
    auto questions = load_gold_file(questions_path);
    if (questions.empty()) throw IoError("questions file is empty: " + questions_path);

    fs::create_directories(fs::path(out_dir) / "trees");
    const MctsConfig mcts_cfg = cfg.mcts_config();
    const PairMode mode = pair_mode_from_string(cfg.dataset.mode);

    struct PerQuestion {
        std::unique_ptr<TreeNode> tree;   // full annotated tree
        std::unique_ptr<TreeNode> pruned; // terminal branches only
        std::vector<PreferencePair> pairs;
        std::optional<std::string> error;
    };
    std::vector<PerQuestion> results(questions.size());

    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= questions.size()) return;
            const auto& q = questions[i];
            auto& r = results[i];
            try {
                r.tree = annotate_question(q.question, q.golden_answers, *backend, *retriever,
                                           mcts_cfg);
                r.pruned = prune_tree(*r.tree);
                r.pairs = extract_pairs(*r.pruned, cfg.dataset.theta, mode, q.source);
            } catch (const std::exception& e) {
                r.error = e.what();
            }
        }
    };
    size_t n_workers =
        std::min<size_t>(static_cast<size_t>(cfg.parallelism), questions.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    std::vector<PreferencePair> all_pairs;
    std::vector<const TreeNode*> pruned_trees;
    size_t succeeded = 0;
    for (size_t i = 0; i < questions.size(); ++i) {
        const auto& q = questions[i];
        auto& r = results[i];
        if (r.error) {
            std::cerr << "warning: question " << q.id << " skipped: " << *r.error << "\n";
            continue;
        }
        ++succeeded;
        std::ofstream tree_out(fs::path(out_dir) / "trees" / (sanitize_id(q.id) + ".json"));
        tree_out << tree_to_json(*r.tree, q.source, q.golden_answers).dump(2) << "\n";
        all_pairs.insert(all_pairs.end(), r.pairs.begin(), r.pairs.end());
        pruned_trees.push_back(r.pruned.get());
    }

    ExportMetadata meta;
    meta.alpha = cfg.mcts.alpha;
    meta.c_uct = cfg.mcts.c_uct;
    meta.theta = cfg.dataset.theta;
    meta.iterations = cfg.mcts.iterations;
    meta.dpo_beta = cfg.dataset.dpo_beta;
    const std::string pairs_path = (fs::path(out_dir) / "pairs.jsonl").string();
    export_dataset(all_pairs, pairs_path, cfg.dataset.theta, meta);

    DatasetStats stats = compute_stats(all_pairs, pruned_trees);
    std::ofstream stats_out(fs::path(out_dir) / "stats.json");
    stats_out << stats_to_json(stats).dump(2) << "\n";

    std::cout << "annotated " << succeeded << "/" << questions.size() << " questions, "
              << all_pairs.size() << " preference pairs -> " << out_dir << "\n";
    return succeeded > 0 ? kExitOk : kExitPartialFailure;
}

int cmd_sweep(const RunConfig& cfg, const std::string& questions_path, const std::string& axis,
              const std::vector<int>& values, const std::string& out_csv,
              const std::string& out_json) {
    auto backend = make_backend(cfg);
    auto retriever = make_retriever(cfg);
    auto questions = load_gold_file(questions_path);

    SweepAxis sweep_axis = sweep_axis_from_string(axis);
    auto rows = sweep(sweep_axis, values, questions, *backend, *retriever,
                      cfg.inference_config(), cfg.parallelism);

    std::string csv = sweep_csv(rows);
    if (out_csv.empty()) {
        std::cout << csv;
    } else {
        std::ofstream out(out_csv);
        if (!out) throw IoError("cannot write sweep CSV: " + out_csv);
        out << csv;
    }
    if (!out_json.empty()) {
        std::ofstream out(out_json);
        out << sweep_to_json(sweep_axis, rows).dump(2) << "\n";
    }
    return kExitOk;
}

int cmd_stats(const std::string& pairs_path, const std::string& json_out) {
    auto pairs = load_pairs(pairs_path);
    DatasetStats stats = compute_stats(pairs);
    std::cout << stats_table(stats);
    if (!json_out.empty()) {
        std::ofstream out(json_out);
        if (!out) throw IoError("cannot write stats JSON: " + json_out);
        out << stats_to_json(stats).dump(2) << "\n";
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"agentic RAG pipeline: index, annotate, infer, eval, sweep, stats"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides ov;

    // index
    auto* index = app.add_subcommand("index", "Build and cache a corpus index");
    std::string index_corpus, index_out;
    index->add_option("--corpus", index_corpus, "Corpus JSONL file")->required();
    index->add_option("--out", index_out, "Index cache output path")->required();

    // annotate
    auto* annotate = app.add_subcommand("annotate", "Search-annotate questions, export pairs");
    std::string annotate_questions, annotate_out;
    annotate->add_option("--config", config_path, "Config file");
    annotate->add_option("--questions", annotate_questions, "Questions JSONL")->required();
    annotate->add_option("--out-dir", annotate_out, "Output directory")->required();
    add_override_flags(annotate, ov);

    // infer
    auto* infer = app.add_subcommand("infer", "Run the inference loop over questions");
    std::string infer_questions, infer_out;
    infer->add_option("--config", config_path, "Config file");
    infer->add_option("--questions", infer_questions, "Questions JSONL")->required();
    infer->add_option("--out", infer_out, "Transcripts output JSONL")->required();
    add_override_flags(infer, ov);

    // eval
    auto* eval = app.add_subcommand("eval", "Score transcripts against golden answers");
    std::string eval_transcripts, eval_gold, eval_records;
    eval->add_option("--transcripts", eval_transcripts, "Transcripts JSONL")->required();
    eval->add_option("--gold", eval_gold, "Gold JSONL")->required();
    eval->add_option("--records-out", eval_records, "Per-question records JSONL");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Re-run inference across an axis");
    std::string sweep_questions, sweep_axis, sweep_out, sweep_json;
    std::vector<int> sweep_values;
    sweep_cmd->add_option("--config", config_path, "Config file");
    sweep_cmd->add_option("--questions", sweep_questions, "Questions JSONL")->required();
    sweep_cmd->add_option("--axis", sweep_axis, "rounds | topk")->required();
    sweep_cmd->add_option("--values", sweep_values, "Axis values")->required()->delimiter(',');
    sweep_cmd->add_option("--out", sweep_out, "CSV output path (stdout when omitted)");
    sweep_cmd->add_option("--json-out", sweep_json, "Plot-ready JSON output path");
    add_override_flags(sweep_cmd, ov);

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "Report dataset statistics");
    std::string stats_pairs, stats_json;
    stats_cmd->add_option("pairs", stats_pairs, "Pairs JSONL file")->required();
    stats_cmd->add_option("--json-out", stats_json, "Stats JSON output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*index) return cmd_index(index_corpus, index_out);
        if (*annotate) {
            return cmd_annotate(load_with_overrides(config_path, ov), annotate_questions,
                                annotate_out);
        }
        if (*infer) {
            return cmd_infer(load_with_overrides(config_path, ov), infer_questions, infer_out);
        }
        if (*eval) return cmd_eval(eval_transcripts, eval_gold, eval_records);
        if (*sweep_cmd) {
            return cmd_sweep(load_with_overrides(config_path, ov), sweep_questions, sweep_axis,
                             sweep_values, sweep_out, sweep_json);
        }
        if (*stats_cmd) return cmd_stats(stats_pairs, stats_json);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const CorpusFormatError& e) {
        std::cerr << "corpus error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const DuplicateDocId& e) {
        std::cerr << "corpus error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const MissingGold& e) {
        std::cerr << "eval error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const EmptyEvaluation& e) {
        std::cerr << "eval error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPartialFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPartialFailure;
    }
    return kExitOk;
}
