#include "ragproc/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "ragproc/text.hpp"

namespace ragproc {

using nlohmann::json;

const char* to_string(PairMode m) {
    return m == PairMode::BestWorst ? "best_worst" : "all_ordered";
}

PairMode pair_mode_from_string(const std::string& s) {
    if (s == "best_worst") return PairMode::BestWorst;
    if (s == "all_ordered") return PairMode::AllOrdered;
    throw ConfigError("unknown pair mode: " + s + " (expected best_worst|all_ordered)");
}

namespace {

bool has_terminal(const TreeNode& node) {
    if (node.stage() == Stage::Terminal) return true;
    for (const auto& c : node.children) {
        if (has_terminal(*c)) return true;
    }
    return false;
}

std::unique_ptr<TreeNode> clone_surviving(const TreeNode& node, TreeNode* parent) {
    auto copy = std::make_unique<TreeNode>();
    copy->state = node.state;
    copy->visit_count = node.visit_count;
    copy->q_value = node.q_value;
    copy->samples = node.samples;
    copy->terminal_f1 = node.terminal_f1;
    copy->creation_v = node.creation_v;
    copy->expansion_failed = node.expansion_failed;
    copy->parent = parent;
    for (const auto& c : node.children) {
        if (has_terminal(*c)) copy->children.push_back(clone_surviving(*c, copy.get()));
    }
    return copy;
}

} // namespace

std::unique_ptr<TreeNode> prune_tree(const TreeNode& root) {
    if (!has_terminal(root)) throw EmptyTree("tree has no Terminal leaf");
    return clone_surviving(root, nullptr);
}

namespace {

void pairs_at_node(const TreeNode& node, double theta, PairMode mode, const std::string& source,
                   std::vector<PreferencePair>& out) {
    if (node.children.size() >= 2) {
        auto emit = [&](const TreeNode& chosen, const TreeNode& rejected) {
            const ActionStep& cs = *chosen.action();
            const ActionStep& rs = *rejected.action();
            if (cs.raw_text == rs.raw_text) return;                       // identical responses
            if (chosen.q_value - rejected.q_value < theta) return;        // uninformative gap
            PreferencePair pair;
            pair.question = node.state.question;
            pair.prefix = node.state.steps;
            pair.chosen = cs;
            pair.rejected = rs;
            pair.chosen_reward = chosen.q_value;
            pair.rejected_reward = rejected.q_value;
            pair.pair_type = {cs.kind, rs.kind};
            pair.source = source;
            out.push_back(std::move(pair));
        };

        if (mode == PairMode::BestWorst) {
            size_t best = 0;
            size_t worst = 0;
            for (size_t i = 1; i < node.children.size(); ++i) {
                if (node.children[i]->q_value > node.children[best]->q_value) best = i;
                if (node.children[i]->q_value < node.children[worst]->q_value) worst = i;
            }
            if (best != worst) emit(*node.children[best], *node.children[worst]);
        } else {
            for (size_t i = 0; i < node.children.size(); ++i) {
                for (size_t j = 0; j < node.children.size(); ++j) {
                    if (i != j) emit(*node.children[i], *node.children[j]);
                }
            }
        }
    }
    for (const auto& c : node.children) pairs_at_node(*c, theta, mode, source, out);
}

} // namespace

std::vector<PreferencePair> extract_pairs(const TreeNode& root, double theta, PairMode mode,
                                          const std::string& source) {
    if (theta <= 0) throw Error("theta must be > 0");
    std::vector<PreferencePair> out;
    pairs_at_node(root, theta, mode, source, out);
    return out;
}

void validate_pair(const PreferencePair& pair, double theta) {
    if (pair.chosen_reward - pair.rejected_reward < theta) {
        throw ValidationError("pair reward gap " +
                              std::to_string(pair.chosen_reward - pair.rejected_reward) +
                              " is below theta");
    }
    if (pair.chosen.raw_text == pair.rejected.raw_text) {
        throw ValidationError("pair has identical chosen/rejected raw_text");
    }
    if (pair.question.empty()) throw ValidationError("pair has empty question");
    if (pair.pair_type.first != pair.chosen.kind || pair.pair_type.second != pair.rejected.kind) {
        throw ValidationError("pair_type disagrees with step kinds");
    }
}

json pair_to_json(const PreferencePair& pair) {
    json prefix = json::array();
    for (const auto& s : pair.prefix) prefix.push_back(s.raw_text);
    return json{{"question", pair.question},
                {"prefix", std::move(prefix)},
                {"chosen", json{{"raw_text", pair.chosen.raw_text},
                                {"kind", to_string(pair.chosen.kind)},
                                {"reward", pair.chosen_reward}}},
                {"rejected", json{{"raw_text", pair.rejected.raw_text},
                                  {"kind", to_string(pair.rejected.kind)},
                                  {"reward", pair.rejected_reward}}},
                {"pair_type", json::array({to_string(pair.pair_type.first),
                                           to_string(pair.pair_type.second)})},
                {"source", pair.source}};
}

namespace {

/// Prefix steps are exported as raw_text only; recover each kind from the
/// placeholder the text carries (any stage's tag is accepted here).
ActionKind kind_from_raw_text(const std::string& raw) {
    size_t best_at = std::string::npos;
    ActionKind kind = ActionKind::QueryGeneration;
    for (auto [tag, k] : {std::pair{"<query>", ActionKind::QueryGeneration},
                          std::pair{"<evidence>", ActionKind::EvidenceExtraction},
                          std::pair{"<answer>", ActionKind::AnswerGeneration}}) {
        size_t at = raw.find(tag);
        if (at != std::string::npos && at < best_at) {
            best_at = at;
            kind = k;
        }
    }
    return kind;
}

} // namespace

PreferencePair pair_from_json(const json& j) {
    PreferencePair pair;
    pair.question = j.at("question").get<std::string>();
    int idx = 0;
    for (const auto& raw : j.value("prefix", json::array())) {
        ActionStep step;
        step.raw_text = raw.get<std::string>();
        step.kind = kind_from_raw_text(step.raw_text);
        step.index = idx++;
        pair.prefix.push_back(std::move(step));
    }
    const auto& chosen = j.at("chosen");
    pair.chosen.raw_text = chosen.at("raw_text").get<std::string>();
    pair.chosen.kind = action_kind_from_string(chosen.at("kind").get<std::string>());
    pair.chosen.index = idx;
    pair.chosen_reward = chosen.at("reward").get<double>();
    const auto& rejected = j.at("rejected");
    pair.rejected.raw_text = rejected.at("raw_text").get<std::string>();
    pair.rejected.kind = action_kind_from_string(rejected.at("kind").get<std::string>());
    pair.rejected.index = idx;
    pair.rejected_reward = rejected.at("reward").get<double>();
    const auto& type = j.at("pair_type");
    pair.pair_type = {action_kind_from_string(type.at(0).get<std::string>()),
                      action_kind_from_string(type.at(1).get<std::string>())};
    pair.source = j.value("source", "");
    return pair;
}

void export_dataset(const std::vector<PreferencePair>& pairs, const std::string& path,
                    double theta, const ExportMetadata& meta) {
    for (const auto& p : pairs) validate_pair(p, theta);

    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset file: " + path);
    for (const auto& p : pairs) out << pair_to_json(p).dump() << "\n";
    out.close();
    if (!out) throw IoError("failed writing dataset file: " + path);

    json sidecar{{"format", "ragproc-pairs-v1"}, {"pair_count", pairs.size()},
                 {"alpha", meta.alpha},          {"c_uct", meta.c_uct},
                 {"theta", meta.theta},          {"iterations", meta.iterations},
                 {"dpo_beta", meta.dpo_beta}};
    std::ofstream side(path + ".meta.json");
    if (!side) throw IoError("cannot write metadata sidecar: " + path + ".meta.json");
    side << sidecar.dump(2) << "\n";
}

std::vector<PreferencePair> load_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open pairs file: " + path);
    std::vector<PreferencePair> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            out.push_back(pair_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw IoError("pairs file " + path + " line " + std::to_string(line_no) + ": " +
                          e.what());
        }
    }
    return out;
}

namespace {

SummaryStats summarize(std::vector<int> values) {
    SummaryStats s;
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    long long sum = 0;
    for (int v : values) sum += v;
    s.avg = static_cast<double>(sum) / static_cast<double>(values.size());
    s.min = values.front();
    s.med = values[(values.size() - 1) / 2];
    s.max = values.back();
    return s;
}

int whitespace_tokens(const std::string& text) {
    int count = 0;
    bool in_tok = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_tok = false;
        } else if (!in_tok) {
            in_tok = true;
            ++count;
        }
    }
    return count;
}

void terminal_iteration_counts(const TreeNode& node, std::vector<int>& out) {
    if (node.stage() == Stage::Terminal) {
        int queries = 0;
        for (const auto& s : node.state.steps) {
            if (s.kind == ActionKind::QueryGeneration) ++queries;
        }
        out.push_back(queries);
    }
    for (const auto& c : node.children) terminal_iteration_counts(*c, out);
}

} // namespace

DatasetStats compute_stats(const std::vector<PreferencePair>& pairs,
                           const std::vector<const TreeNode*>& trees) {
    DatasetStats stats;
    stats.pair_count = pairs.size();
    stats.reward_gap_histogram.assign(10, 0);

    std::set<std::string> questions;
    std::map<std::string, std::set<std::string>> questions_by_source;
    std::vector<int> iteration_counts;
    std::vector<int> token_lengths;

    for (const auto& p : pairs) {
        questions.insert(p.question);
        questions_by_source[p.source.empty() ? "unspecified" : p.source].insert(p.question);

        auto kind_slot = [](ActionKind k) { return static_cast<size_t>(k); };
        ++stats.chosen_action_histogram[kind_slot(p.chosen.kind)];
        ++stats.all_action_histogram[kind_slot(p.chosen.kind)];
        ++stats.all_action_histogram[kind_slot(p.rejected.kind)];

        std::string type_key{action_kind_letter(p.pair_type.first),
                             action_kind_letter(p.pair_type.second)};
        ++stats.pair_type_histogram[type_key];

        double gap = p.chosen_reward - p.rejected_reward;
        int bin = std::clamp(static_cast<int>(gap * 10.0), 0, 9);
        ++stats.reward_gap_histogram[static_cast<size_t>(bin)];

        token_lengths.push_back(whitespace_tokens(p.chosen.raw_text));
        token_lengths.push_back(whitespace_tokens(p.rejected.raw_text));

        if (trees.empty()) {
            int queries = p.chosen.kind == ActionKind::QueryGeneration ? 1 : 0;
            for (const auto& s : p.prefix) {
                if (s.kind == ActionKind::QueryGeneration) ++queries;
            }
            iteration_counts.push_back(queries);
        }
    }

    for (const TreeNode* tree : trees) {
        if (tree) terminal_iteration_counts(*tree, iteration_counts);
    }

    stats.question_count = questions.size();
    for (const auto& [source, qs] : questions_by_source) {
        stats.source_histogram[source] = qs.size();
    }
    stats.iteration_stats = summarize(std::move(iteration_counts));
    stats.token_length_stats = summarize(std::move(token_lengths));
    return stats;
}

json stats_to_json(const DatasetStats& stats) {
    auto summary = [](const SummaryStats& s) {
        return json{{"avg", s.avg}, {"min", s.min}, {"med", s.med}, {"max", s.max}};
    };
    json actions{{"query_generation", stats.chosen_action_histogram[0]},
                 {"evidence_extraction", stats.chosen_action_histogram[1]},
                 {"answer_generation", stats.chosen_action_histogram[2]}};
    json actions_all{{"query_generation", stats.all_action_histogram[0]},
                     {"evidence_extraction", stats.all_action_histogram[1]},
                     {"answer_generation", stats.all_action_histogram[2]}};
    return json{{"question_count", stats.question_count},
                {"pair_count", stats.pair_count},
                {"sources", stats.source_histogram},
                {"chosen_actions", std::move(actions)},
                {"all_actions", std::move(actions_all)},
                {"pair_types", stats.pair_type_histogram},
                {"iteration", summary(stats.iteration_stats)},
                {"token_length", summary(stats.token_length_stats)},
                {"reward_gap_histogram", stats.reward_gap_histogram}};
}

std::string stats_table(const DatasetStats& stats) {
    std::string out;
    char buf[160];
    auto row = [&](const std::string& label, const std::string& value) {
        std::snprintf(buf, sizeof(buf), "%-34s %s\n", label.c_str(), value.c_str());
        out += buf;
    };
    auto count_row = [&](const std::string& label, size_t count, size_t total) {
        double pct = total > 0 ? 100.0 * static_cast<double>(count) / static_cast<double>(total)
                               : 0.0;
        std::snprintf(buf, sizeof(buf), "%-34s %zu (%.1f%%)\n", label.c_str(), count, pct);
        out += buf;
    };

    row("Statistics", "Number");
    row("Questions", std::to_string(stats.question_count));
    for (const auto& [source, count] : stats.source_histogram) {
        count_row("- " + source, count, stats.question_count);
    }
    row("Pairs", std::to_string(stats.pair_count));
    const char* kind_labels[3] = {"query_generation", "evidence_extraction",
                                  "answer_generation"};
    for (size_t i = 0; i < 3; ++i) {
        count_row(std::string("- ") + kind_labels[i], stats.chosen_action_histogram[i],
                  stats.pair_count);
    }
    std::snprintf(buf, sizeof(buf), "%.1f/%d/%d/%d", stats.iteration_stats.avg,
                  stats.iteration_stats.min, stats.iteration_stats.med,
                  stats.iteration_stats.max);
    row("Avg./Min./Med./Max. Iteration", buf);
    std::snprintf(buf, sizeof(buf), "%.1f/%d/%d/%d", stats.token_length_stats.avg,
                  stats.token_length_stats.min, stats.token_length_stats.med,
                  stats.token_length_stats.max);
    row("Avg./Min./Med./Max. Tokens", buf);
    return out;
}

} // namespace ragproc
