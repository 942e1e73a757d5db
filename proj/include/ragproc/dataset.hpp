#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ragproc/mcts.hpp"

namespace ragproc {

inline constexpr double kDefaultRewardGapTheta = 0.01;

/// A preference unit: two sibling steps off the same prefix, ordered by
/// reward. Invariants (enforced at export): chosen_reward - rejected_reward
/// >= theta, chosen.raw_text != rejected.raw_text, shared prefix.
struct PreferencePair {
    std::string question;
    std::vector<ActionStep> prefix;
    ActionStep chosen;
    ActionStep rejected;
    double chosen_reward = 0.0;
    double rejected_reward = 0.0;
    std::pair<ActionKind, ActionKind> pair_type{ActionKind::QueryGeneration,
                                                ActionKind::QueryGeneration};
    std::string source;
};

enum class PairMode { BestWorst, AllOrdered };

const char* to_string(PairMode m);
PairMode pair_mode_from_string(const std::string& s);

/// Copies the tree keeping only branches that reach a Terminal leaf; node
/// statistics are untouched. Idempotent. Throws EmptyTree when no Terminal
/// leaf exists.
std::unique_ptr<TreeNode> prune_tree(const TreeNode& root);

/// Forms sibling pairs at every internal node with >= 2 children. BestWorst
/// pairs the max-Q child against the min-Q child (first index on ties);
/// AllOrdered emits every ordered child pair. Pairs with identical raw_text
/// or a reward gap below theta are then dropped. Rewards are the children's
/// Q values at extraction time.
std::vector<PreferencePair> extract_pairs(const TreeNode& root, double theta = kDefaultRewardGapTheta,
                                          PairMode mode = PairMode::BestWorst,
                                          const std::string& source = "");

/// Throws ValidationError when `pair` violates a PreferencePair invariant.
void validate_pair(const PreferencePair& pair, double theta);

/// Annotation settings recorded next to an exported dataset. Training itself
/// is out of scope; dpo_beta is carried as metadata only.
struct ExportMetadata {
    double alpha = 0.9;
    double c_uct = 1.4142135623730951;
    double theta = kDefaultRewardGapTheta;
    int iterations = 24;
    double dpo_beta = 0.1;
};

/// Writes pairs as JSONL: {question, prefix:[raw_text...], chosen:{raw_text,
/// kind, reward}, rejected:{...}, pair_type:[kind,kind], source}, plus a
/// "<path>.meta.json" sidecar with the metadata. Every pair is validated
/// first.
void export_dataset(const std::vector<PreferencePair>& pairs, const std::string& path,
                    double theta, const ExportMetadata& meta);

std::vector<PreferencePair> load_pairs(const std::string& path);

nlohmann::json pair_to_json(const PreferencePair& pair);
PreferencePair pair_from_json(const nlohmann::json& j);

struct SummaryStats {
    double avg = 0.0;
    int min = 0;
    int med = 0; // lower median
    int max = 0;
};

struct DatasetStats {
    size_t question_count = 0;
    size_t pair_count = 0;
    std::map<std::string, size_t> source_histogram;
    /// Histogram over each pair's chosen action (totals == pair_count).
    std::array<size_t, 3> chosen_action_histogram{}; // [Query, Evidence, Answer]
    /// Second reading: chosen and rejected actions both counted.
    std::array<size_t, 3> all_action_histogram{};
    std::map<std::string, size_t> pair_type_histogram; // e.g. "AQ" -> count
    SummaryStats iteration_stats;   // query steps per accepted trajectory
    SummaryStats token_length_stats; // whitespace tokens per compared raw_text
    std::vector<size_t> reward_gap_histogram; // 10 bins over [0,1]
};

/// Stats behind the dataset report. Iteration counts come from the pruned
/// trees' terminal trajectories when `trees` is non-empty, otherwise from
/// each pair's prefix+chosen path.
DatasetStats compute_stats(const std::vector<PreferencePair>& pairs,
                           const std::vector<const TreeNode*>& trees = {});

nlohmann::json stats_to_json(const DatasetStats& stats);

/// Plain-text report: questions and pairs with per-source / per-action
/// breakdowns, then the iteration/token summary rows.
std::string stats_table(const DatasetStats& stats);

} // namespace ragproc
