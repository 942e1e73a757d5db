#include "ragproc/mcts.hpp"

#include <cmath>
#include <iostream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "ragproc/eval.hpp"

namespace ragproc {

using nlohmann::json;

namespace {

// std::pow is correctly rounded here, which keeps hand-checked Q values exact
// at double precision (iterated multiplication drifts by an ulp).
double recompute_q(const std::vector<RewardSample>& samples, double alpha) {
    if (samples.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : samples) sum += s.v * std::pow(alpha, s.steps);
    return sum / static_cast<double>(samples.size());
}

} // namespace

double uct_score(double q, int n, int sibling_visit_sum, double c_uct) {
    return q + c_uct * std::sqrt(static_cast<double>(sibling_visit_sum)) /
                   (1.0 + static_cast<double>(n));
}

TreeNode& select_child(TreeNode& node, double c_uct) {
    if (node.children.empty()) throw NoChildren("select_child on a node with no children");

    int visit_sum = 0;
    for (const auto& c : node.children) visit_sum += c->visit_count;

    size_t best = 0;
    double best_score = uct_score(node.children[0]->q_value, node.children[0]->visit_count,
                                  visit_sum, c_uct);
    for (size_t i = 1; i < node.children.size(); ++i) {
        double s = uct_score(node.children[i]->q_value, node.children[i]->visit_count,
                             visit_sum, c_uct);
        if (s > best_score) {
            best_score = s;
            best = i;
        }
    }
    return *node.children[best];
}

bool expandable(const TreeNode& node, const MctsConfig& cfg) {
    return node.stage() != Stage::Terminal && !node.expansion_failed &&
           static_cast<int>(node.children.size()) < cfg.max_children &&
           node.depth() < cfg.max_depth;
}

TreeNode& expand(TreeNode& node, PolicyBackend& backend, Retriever& retriever,
                 const std::vector<std::string>& golden_answers, const MctsConfig& cfg) {
    if (node.stage() == Stage::Terminal) throw ExpansionFailed("cannot expand a Terminal node");
    if (static_cast<int>(node.children.size()) >= cfg.max_children) {
        throw ExpansionFailed("node already has max_children children");
    }
    if (node.depth() >= cfg.max_depth) throw ExpansionFailed("node is at max_depth");

    ActionStep step;
    try {
        step = generate_action(node.state, backend, cfg.policy);
    } catch (const Error& e) {
        throw ExpansionFailed(std::string("policy failed during expansion: ") + e.what());
    }

    AgentState child_state = transition(node.state, step);
    if (child_state.stage == Stage::Grounding) {
        auto docs = retriever.retrieve(child_state.steps.back().payload, cfg.top_k);
        child_state = attach_docs(child_state, std::move(docs));
    }

    auto child = std::make_unique<TreeNode>();
    child->state = std::move(child_state);
    child->parent = &node;

    if (child->stage() == Stage::Terminal) {
        child->terminal_f1 = f1_score(child->state.steps.back().payload, golden_answers);
        child->creation_v = *child->terminal_f1;
    } else {
        try {
            child->creation_v =
                judge_evaluate(child->state, golden_answers, backend, cfg.policy).value;
        } catch (const UnparsableScore&) {
            std::cerr << "warning: unparsable judge reply; falling back to v="
                      << cfg.judge_fallback_v << "\n";
            child->creation_v = cfg.judge_fallback_v;
        }
    }

    node.children.push_back(std::move(child));
    return *node.children.back();
}

void backpropagate(const std::vector<TreeNode*>& path, double v, int leaf_total_steps,
                   double alpha) {
    for (TreeNode* node : path) {
        node->samples.push_back(RewardSample{v, leaf_total_steps});
        node->visit_count += 1;
        node->q_value = recompute_q(node->samples, alpha);
    }
}

std::unique_ptr<TreeNode> annotate_question(const std::string& question,
                                            const std::vector<std::string>& golden_answers,
                                            PolicyBackend& backend, Retriever& retriever,
                                            const MctsConfig& cfg) {
    if (cfg.iterations < 1) throw Error("iterations must be >= 1");
    if (cfg.alpha <= 0.0 || cfg.alpha > 1.0) throw Error("alpha must be in (0,1]");
    if (cfg.c_uct <= 0.0) throw Error("c_uct must be > 0");
    if (cfg.max_children < 1) throw Error("max_children must be >= 1");
    if (cfg.max_depth < 1) throw Error("max_depth must be >= 1");
    if (cfg.judge_fallback_v < 0.0 || cfg.judge_fallback_v > 1.0) {
        throw Error("judge_fallback_v must be in [0,1]");
    }

    auto root = std::make_unique<TreeNode>();
    root->state = AgentState{question, {}, Stage::Reasoning, {}};
    if (!expandable(*root, cfg)) {
        throw AnnotationFailed("root is not expandable under the given config");
    }

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        TreeNode* node = root.get();
        std::vector<TreeNode*> path{node};

        // Descend until something expandable, a terminal, or a dead leaf.
        while (!expandable(*node, cfg)) {
            if (node->stage() == Stage::Terminal || node->children.empty()) break;
            node = &select_child(*node, cfg.c_uct);
            path.push_back(node);
        }

        if (node->stage() == Stage::Terminal || !expandable(*node, cfg)) {
            // Re-backpropagate the node's own score; still counts as a visit.
            backpropagate(path, node->creation_v, std::max(node->depth(), 1), cfg.alpha);
            continue;
        }

        try {
            TreeNode& child = expand(*node, backend, retriever, golden_answers, cfg);
            path.push_back(&child);
            backpropagate(path, child.creation_v, child.depth(), cfg.alpha);
        } catch (const ExpansionFailed& e) {
            if (node == root.get() && root->children.empty()) {
                throw AnnotationFailed(std::string("root cannot expand: ") + e.what());
            }
            node->expansion_failed = true;
            backpropagate(path, cfg.judge_fallback_v, node->depth() + 1, cfg.alpha);
        }
    }
    return root;
}

namespace {

void dump_node(const TreeNode& node, int parent_id, int& next_id, json& nodes) {
    int id = next_id++;
    json entry{{"id", id},
               {"parent_id", parent_id < 0 ? json(nullptr) : json(parent_id)},
               {"N", node.visit_count},
               {"Q", node.q_value},
               {"stage", to_string(node.stage())},
               {"creation_v", node.creation_v}};
    if (const ActionStep* a = node.action()) {
        entry["action"] = json{{"kind", to_string(a->kind)},
                               {"payload", a->payload},
                               {"raw_text", a->raw_text}};
    } else {
        entry["action"] = nullptr;
    }
    if (node.terminal_f1) entry["terminal_f1"] = *node.terminal_f1;
    if (node.expansion_failed) entry["expansion_failed"] = true;
    json samples = json::array();
    for (const auto& s : node.samples) samples.push_back(json{{"v", s.v}, {"steps", s.steps}});
    entry["samples"] = std::move(samples);
    nodes.push_back(std::move(entry));

    for (const auto& child : node.children) dump_node(*child, id, next_id, nodes);
}

} // namespace

json tree_to_json(const TreeNode& root, const std::string& source,
                  const std::vector<std::string>& golden_answers) {
    json nodes = json::array();
    int next_id = 0;
    dump_node(root, -1, next_id, nodes);
    return json{{"format", "ragproc-tree-v1"},
                {"question", root.state.question},
                {"source", source},
                {"golden_answers", golden_answers},
                {"nodes", std::move(nodes)}};
}

std::unique_ptr<TreeNode> tree_from_json(const json& j) {
    if (j.value("format", "") != "ragproc-tree-v1") {
        throw Error("tree JSON has unknown format tag \"" + j.value("format", "") + "\"");
    }
    const std::string question = j.at("question").get<std::string>();

    std::unordered_map<size_t, TreeNode*> by_id;
    std::vector<TreeNode*> in_order;
    std::unique_ptr<TreeNode> root;
    for (const auto& entry : j.at("nodes")) {
        const size_t id = entry.at("id").get<size_t>();
        auto node = std::make_unique<TreeNode>();
        node->visit_count = entry.at("N").get<int>();
        node->q_value = entry.at("Q").get<double>();
        node->creation_v = entry.value("creation_v", 0.0);
        node->expansion_failed = entry.value("expansion_failed", false);
        if (entry.contains("terminal_f1")) node->terminal_f1 = entry["terminal_f1"].get<double>();
        for (const auto& s : entry.value("samples", json::array())) {
            node->samples.push_back(
                RewardSample{s.at("v").get<double>(), s.at("steps").get<int>()});
        }

        const auto& parent_id = entry.at("parent_id");
        if (parent_id.is_null()) {
            node->state = AgentState{question, {}, Stage::Reasoning, {}};
            if (root) throw Error("tree JSON has more than one root");
            by_id[id] = node.get();
            in_order.push_back(node.get());
            root = std::move(node);
        } else {
            auto parent_it = by_id.find(parent_id.get<size_t>());
            if (parent_it == by_id.end()) {
                throw Error("tree JSON references an unknown parent id");
            }
            TreeNode* parent = parent_it->second;
            const auto& action = entry.at("action");
            ActionStep step;
            step.kind = action_kind_from_string(action.at("kind").get<std::string>());
            step.payload = action.at("payload").get<std::string>();
            step.raw_text = action.value("raw_text", "");
            node->state = transition(parent->state, std::move(step));
            node->parent = parent;
            by_id[id] = node.get();
            in_order.push_back(node.get());
            parent->children.push_back(std::move(node));
        }
    }
    if (!root) throw Error("tree JSON has no root node");

    // Stages come back from the replayed transitions; cross-check the dump.
    size_t idx = 0;
    for (const auto& entry : j.at("nodes")) {
        if (stage_from_string(entry.at("stage").get<std::string>()) !=
            in_order[idx]->stage()) {
            throw Error("tree JSON stage disagrees with replayed transition at node " +
                        std::to_string(idx));
        }
        ++idx;
    }
    return root;
}

} // namespace ragproc
