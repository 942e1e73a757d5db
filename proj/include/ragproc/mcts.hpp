#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ragproc/agent.hpp"
#include "ragproc/policy.hpp"
#include "ragproc/retrieval.hpp"

namespace ragproc {

/// One backpropagated observation: a correctness value and the total
/// action-step count of the trajectory it came from.
struct RewardSample {
    double v = 0.0;
    int steps = 0;
};

/// Search-tree node. q_value is always the mean over samples of
/// v * alpha^steps (the length-penalized Monte-Carlo estimate) and
/// visit_count equals the number of samples.
struct TreeNode {
    AgentState state;
    int visit_count = 0;
    double q_value = 0.0;
    std::vector<std::unique_ptr<TreeNode>> children;
    std::vector<RewardSample> samples;
    std::optional<double> terminal_f1; // present iff stage() == Terminal
    double creation_v = 0.0;           // score assigned when the node was expanded
    bool expansion_failed = false;
    TreeNode* parent = nullptr;

    Stage stage() const { return state.stage; }
    int depth() const { return static_cast<int>(state.steps.size()); }
    /// The action that created this node; nullptr at the root.
    const ActionStep* action() const {
        return state.steps.empty() ? nullptr : &state.steps.back();
    }
};

struct MctsConfig {
    double c_uct = 1.4142135623730951; // sqrt(2)
    double alpha = 0.9;                // step-decay factor in (0,1]
    int max_children = 3;
    int iterations = 24;
    int max_depth = 12;
    double judge_fallback_v = 0.0; // used when the judge reply is unparsable

    int top_k = 3;
    PolicyOptions policy;
};

/// UCT selection: argmax over children of
///   Q(child) + c_uct * sqrt(sum of sibling visit counts) / (1 + N(child)),
/// ties broken by lowest child index. Throws NoChildren.
TreeNode& select_child(TreeNode& node, double c_uct);

/// Read-only scoring helper exposed for oracle-style checks.
double uct_score(double q, int n, int sibling_visit_sum, double c_uct);

/// Expands `node` by one policy step: samples an action, builds the child
/// state (retrieving documents when the action is a query), and scores it:
/// token-F1 against the golden answers for terminal children (stored as
/// terminal_f1), the LLM judge otherwise. An unparsable judge reply scores
/// judge_fallback_v with a warning. The caller backpropagates.
///
/// Throws ExpansionFailed when the policy fails after its retry budget.
TreeNode& expand(TreeNode& node, PolicyBackend& backend, Retriever& retriever,
                 const std::vector<std::string>& golden_answers, const MctsConfig& cfg);

/// Appends (v, leaf_total_steps) to every node on the root-to-leaf path,
/// increments their visit counts, and recomputes each q_value as the mean of
/// v_i * alpha^steps_i over its sample log.
void backpropagate(const std::vector<TreeNode*>& path, double v, int leaf_total_steps,
                   double alpha);

/// Whether `node` may be expanded under `cfg` (non-terminal, spare child
/// slot, below the depth cap, not marked failed).
bool expandable(const TreeNode& node, const MctsConfig& cfg);

/// Runs `cfg.iterations` rounds of select/expand/backpropagate from a fresh
/// root for `question`. Descent follows UCT through fully-expanded nodes;
/// reaching a Terminal or depth-capped node re-backpropagates its existing
/// score (counting a visit) instead of expanding.
///
/// Throws AnnotationFailed when the root itself cannot expand.
std::unique_ptr<TreeNode> annotate_question(const std::string& question,
                                            const std::vector<std::string>& golden_answers,
                                            PolicyBackend& backend, Retriever& retriever,
                                            const MctsConfig& cfg);

/// Tree dump: {"format","question","source","golden_answers","nodes":[{id,
/// parent_id, action:{kind,payload,raw_text}|null, N, Q, stage, terminal_f1?,
/// samples:[{v,steps}]}]}, ids in preorder. Grounding nodes' pending
/// documents are not serialized; states are rebuilt from the step sequence on
/// load.
nlohmann::json tree_to_json(const TreeNode& root, const std::string& source = "",
                            const std::vector<std::string>& golden_answers = {});
std::unique_ptr<TreeNode> tree_from_json(const nlohmann::json& j);

} // namespace ragproc
