#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "ragproc/agent.hpp"

namespace ragproc::testing {

inline std::string fixture_path(const std::string& name) {
#ifdef RAGPROC_FIXTURE_DIR
    return std::string(RAGPROC_FIXTURE_DIR) + "/" + name;
#else
    return "tests/fixtures/" + name;
#endif
}

inline std::string prompt_path(const std::string& name) {
#ifdef RAGPROC_PROMPT_DIR
    return std::string(RAGPROC_PROMPT_DIR) + "/" + name;
#else
    return "resources/prompts/" + name;
#endif
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "cannot open " << path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline ActionStep query_step(const std::string& payload, int index = 0) {
    ActionStep s;
    s.kind = ActionKind::QueryGeneration;
    s.payload = payload;
    s.raw_text = "So the next query is <query>" + payload + "</query>";
    s.index = index;
    return s;
}

inline ActionStep evidence_step(const std::string& payload, int index = 0) {
    ActionStep s;
    s.kind = ActionKind::EvidenceExtraction;
    s.payload = payload;
    s.raw_text = "Based on the query, the relevant evidence is <evidence>" + payload +
                 "</evidence>.";
    s.index = index;
    return s;
}

inline ActionStep answer_step(const std::string& payload, int index = 0) {
    ActionStep s;
    s.kind = ActionKind::AnswerGeneration;
    s.payload = payload;
    s.raw_text = "So the answer is <answer>" + payload + "</answer>";
    s.index = index;
    return s;
}

} // namespace ragproc::testing
