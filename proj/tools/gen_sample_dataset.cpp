// Deterministic generator for the reference preference dataset bundled with
// the acceptance suite: 4,603 questions (704 popqa / 2,843 hotpotqa / 1,056
// 2wikimultihopqa) and 13,289 pairs whose chosen actions split 3,295 /
// 4,305 / 5,689 across query/evidence/answer. Same output bytes every run.

#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "ragproc/dataset.hpp"

using namespace ragproc;

namespace {

// mt19937_64's raw sequence is pinned by the standard; std::*_distribution is
// not, so draw from the engine directly to keep output bytes portable.
struct DetRng {
    std::mt19937_64 gen;
    explicit DetRng(std::uint64_t seed) : gen(seed) {}

    std::uint64_t next_u64() { return gen(); }
    int next_int(int lo, int hi) { // inclusive bounds
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
};

const char* kFillers[] = {"archive", "record",  "chronicle", "register", "catalog",
                          "survey",  "gazette", "ledger",    "digest",   "compendium"};

std::string filler_words(DetRng& rng, int count) {
    std::string out;
    for (int i = 0; i < count; ++i) {
        out += ' ';
        out += kFillers[rng.next_int(0, 9)];
    }
    return out;
}

ActionStep make_step(ActionKind kind, const std::string& payload, int index) {
    ActionStep step;
    step.kind = kind;
    step.payload = payload;
    step.index = index;
    switch (kind) {
        case ActionKind::QueryGeneration:
            step.raw_text = "So the next query is <query>" + payload + "</query>.";
            break;
        case ActionKind::EvidenceExtraction:
            step.raw_text =
                "Based on the query, the relevant evidence is <evidence>" + payload +
                "</evidence>.";
            break;
        case ActionKind::AnswerGeneration:
            step.raw_text = "So the answer is <answer>" + payload + "</answer>.";
            break;
    }
    return step;
}

/// Reasoning rounds for one trajectory: 1..5 with median 3 and mean 2.7.
int draw_rounds(DetRng& rng) {
    double u = rng.next_unit();
    if (u < 0.18) return 1;
    if (u < 0.40) return 2;
    if (u < 0.76) return 3;
    if (u < 0.96) return 4;
    return 5;
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s <output-pairs.jsonl>\n", argv[0]);
        return 2;
    }
    const std::string out_path = argv[1];

    constexpr size_t kQuestions = 4603;
    constexpr size_t kPopqa = 704;
    constexpr size_t kHotpotqa = 2843;
    constexpr size_t kPairs = 13289;
    constexpr size_t kChosenQuery = 3295;
    constexpr size_t kChosenEvidence = 4305;
    // remaining 5689 chosen actions are answers

    DetRng rng(20240101);

    // Chosen-action plan: exact counts, deterministically shuffled.
    std::vector<ActionKind> chosen_plan;
    chosen_plan.reserve(kPairs);
    for (size_t i = 0; i < kPairs; ++i) {
        chosen_plan.push_back(i < kChosenQuery ? ActionKind::QueryGeneration
                              : i < kChosenQuery + kChosenEvidence
                                  ? ActionKind::EvidenceExtraction
                                  : ActionKind::AnswerGeneration);
    }
    for (size_t i = chosen_plan.size() - 1; i > 0; --i) {
        size_t j = rng.next_u64() % (i + 1);
        std::swap(chosen_plan[i], chosen_plan[j]);
    }

    // Pairs per question: 3 for the first 4083 questions, 2 for the rest
    // (4083*3 + 520*2 = 13289).
    std::vector<PreferencePair> pairs;
    pairs.reserve(kPairs);
    size_t plan_at = 0;

    for (size_t q = 0; q < kQuestions; ++q) {
        const std::string source = q < kPopqa                ? "popqa"
                                   : q < kPopqa + kHotpotqa  ? "hotpotqa"
                                                             : "2wikimultihopqa";
        const std::string qid = "s" + std::to_string(q);
        const std::string question =
            "Which entity does reference item " + std::to_string(q) + " describe?";
        const size_t n_pairs = q < 4083 ? 3 : 2;

        for (size_t p = 0; p < n_pairs; ++p) {
            ActionKind chosen_kind = chosen_plan[plan_at];
            const std::string tag = qid + "_" + std::to_string(p);
            const int rounds = draw_rounds(rng);

            PreferencePair pair;
            pair.question = question;
            pair.source = source;

            // Prefix: alternating query/evidence so the chosen step is legal.
            int idx = 0;
            auto push_round = [&](int r, bool with_evidence) {
                pair.prefix.push_back(make_step(
                    ActionKind::QueryGeneration,
                    "facet " + std::to_string(r) + " of item " + std::to_string(q), idx++));
                if (with_evidence) {
                    pair.prefix.push_back(make_step(
                        ActionKind::EvidenceExtraction,
                        "item " + std::to_string(q) + " facet " + std::to_string(r) +
                            " notes" + filler_words(rng, rng.next_int(0, 12)),
                        idx++));
                }
            };

            ActionKind rejected_kind;
            std::string chosen_payload;
            std::string rejected_payload;
            switch (chosen_kind) {
                case ActionKind::QueryGeneration:
                    for (int r = 1; r < rounds; ++r) push_round(r, true);
                    rejected_kind = rng.next_unit() < 0.5 ? ActionKind::QueryGeneration
                                                          : ActionKind::AnswerGeneration;
                    chosen_payload = "facet " + std::to_string(rounds) + " of item " +
                                     std::to_string(q) + " (" + tag + ")";
                    rejected_payload = rejected_kind == ActionKind::QueryGeneration
                                           ? "unrelated facet (" + tag + ")"
                                           : "premature guess (" + tag + ")";
                    break;
                case ActionKind::EvidenceExtraction:
                    for (int r = 1; r < rounds; ++r) push_round(r, true);
                    push_round(rounds, false);
                    rejected_kind = ActionKind::EvidenceExtraction;
                    chosen_payload = "item " + std::to_string(q) + " decisive detail (" + tag +
                                     ")" + filler_words(rng, rng.next_int(0, 12));
                    rejected_payload = "None";
                    break;
                case ActionKind::AnswerGeneration:
                default:
                    for (int r = 1; r <= rounds; ++r) push_round(r, true);
                    rejected_kind = rng.next_unit() < 0.5 ? ActionKind::AnswerGeneration
                                                          : ActionKind::QueryGeneration;
                    chosen_payload = "entity " + std::to_string(q);
                    rejected_payload = rejected_kind == ActionKind::AnswerGeneration
                                           ? "entity " + std::to_string((q + 7) % kQuestions)
                                           : "redundant facet (" + tag + ")";
                    break;
            }

            pair.chosen = make_step(chosen_kind, chosen_payload, idx);
            pair.rejected = make_step(rejected_kind, rejected_payload, idx);
            pair.pair_type = {chosen_kind, rejected_kind};

            double gap = 0.01 + rng.next_unit() * 0.5;
            pair.chosen_reward = 0.55 + rng.next_unit() * 0.4;
            pair.rejected_reward = pair.chosen_reward - gap;

            pairs.push_back(std::move(pair));
            ++plan_at;
        }
    }

    ExportMetadata meta;
    meta.alpha = 0.9;
    meta.theta = kDefaultRewardGapTheta;
    meta.iterations = 24;
    try {
        export_dataset(pairs, out_path, kDefaultRewardGapTheta, meta);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    std::printf("wrote %zu pairs over %zu questions to %s\n", pairs.size(),
                static_cast<size_t>(kQuestions), out_path.c_str());
    return 0;
}
