#include "ragproc/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace ragproc {

using nlohmann::json;

int exact_match(const std::string& pred, const std::vector<std::string>& golds) {
    const auto p = normalize(pred);
    for (const auto& g : golds) {
        if (p == normalize(g)) return 1;
    }
    return 0;
}

namespace {

double f1_single(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() && gold.empty()) return 1.0;
    if (pred.empty() || gold.empty()) return 0.0;

    std::unordered_map<std::string, int> counts;
    for (const auto& t : gold) ++counts[t];
    int overlap = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    return 2.0 * overlap / static_cast<double>(pred.size() + gold.size());
}

} // namespace

double f1_score(const std::string& pred, const std::vector<std::string>& golds) {
    const auto p = normalize(pred);
    double best = 0.0;
    for (const auto& g : golds) best = std::max(best, f1_single(p, normalize(g)));
    return best;
}

std::vector<GoldEntry> load_gold_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open gold file: " + path);

    std::vector<GoldEntry> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        GoldEntry entry;
        try {
            json obj = json::parse(line);
            entry.id = obj.value("id", "q" + std::to_string(line_no));
            entry.question = obj.at("question").get<std::string>();
            for (const auto& g : obj.value("golden_answers", json::array())) {
                entry.golden_answers.push_back(g.get<std::string>());
            }
            entry.source = obj.value("source", "");
        } catch (const json::exception& e) {
            throw IoError("gold file " + path + " line " + std::to_string(line_no) + ": " +
                          e.what());
        }
        out.push_back(std::move(entry));
    }
    return out;
}

std::pair<std::vector<EvalRecord>, Aggregate> evaluate_run(
    const std::vector<Transcript>& transcripts,
    const std::map<std::string, GoldEntry>& gold_by_question) {
    if (transcripts.empty()) throw EmptyEvaluation("no transcripts to evaluate");

    std::vector<EvalRecord> records;
    double em_sum = 0.0;
    double f1_sum = 0.0;
    for (const auto& t : transcripts) {
        auto it = gold_by_question.find(t.question);
        if (it == gold_by_question.end()) {
            throw MissingGold("no golden answers for question: " + t.question);
        }
        EvalRecord rec;
        rec.question_id = it->second.id;
        rec.prediction = t.final_answer.value_or("");
        rec.golden_answers = it->second.golden_answers;
        rec.em = exact_match(rec.prediction, rec.golden_answers);
        rec.f1 = f1_score(rec.prediction, rec.golden_answers);
        rec.rounds_used = t.rounds_used;
        rec.retrieval_count = static_cast<int>(t.retrievals.size());
        em_sum += rec.em;
        f1_sum += rec.f1;
        records.push_back(std::move(rec));
    }

    Aggregate agg;
    agg.n = records.size();
    agg.em_pct = 100.0 * em_sum / static_cast<double>(records.size());
    agg.f1_pct = 100.0 * f1_sum / static_cast<double>(records.size());
    return {std::move(records), agg};
}

const char* to_string(SweepAxis axis) {
    return axis == SweepAxis::RoundsCap ? "rounds" : "topk";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "rounds" || s == "rounds_cap") return SweepAxis::RoundsCap;
    if (s == "topk" || s == "top_k") return SweepAxis::TopK;
    throw ConfigError("unknown sweep axis: " + s + " (expected rounds|topk)");
}

std::vector<SweepRow> sweep(SweepAxis axis, const std::vector<int>& values,
                            const std::vector<GoldEntry>& questions, PolicyBackend& backend,
                            Retriever& retriever, const InferenceConfig& base_cfg,
                            int parallelism) {
    if (values.empty()) throw Error("sweep requires at least one axis value");

    std::map<std::string, GoldEntry> gold_by_question;
    std::vector<std::string> question_texts;
    for (const auto& q : questions) {
        gold_by_question[q.question] = q;
        question_texts.push_back(q.question);
    }

    std::vector<SweepRow> rows;
    for (int value : values) {
        InferenceConfig cfg = base_cfg;
        if (axis == SweepAxis::RoundsCap) {
            cfg.max_rounds = value;
        } else {
            cfg.top_k = value;
        }
        auto outcomes = run_batch(question_texts, backend, retriever, cfg, parallelism);
        std::vector<Transcript> transcripts;
        transcripts.reserve(outcomes.size());
        for (auto& o : outcomes) transcripts.push_back(std::move(o.transcript));
        auto [records, agg] = evaluate_run(transcripts, gold_by_question);
        rows.push_back(SweepRow{value, agg.em_pct, agg.f1_pct, agg.n});
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "value,em,f1,n\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.1f,%.1f,%zu\n", r.value, r.em_pct, r.f1_pct, r.n);
        out += buf;
    }
    return out;
}

json sweep_to_json(SweepAxis axis, const std::vector<SweepRow>& rows) {
    json series = json::array();
    for (const auto& r : rows) {
        series.push_back(json{{"value", r.value}, {"em", r.em_pct}, {"f1", r.f1_pct}, {"n", r.n}});
    }
    return json{{"axis", to_string(axis)}, {"series", std::move(series)}};
}

} // namespace ragproc
