#pragma once

#include <string>

namespace ragproc {

/// A retrievable passage. `score` is populated by retrieval, 0 otherwise.
struct Document {
    std::string id;
    std::string title;
    std::string contents;
    double score = 0.0;

    friend bool operator==(const Document& a, const Document& b) {
        return a.id == b.id && a.title == b.title && a.contents == b.contents &&
               a.score == b.score;
    }
};

} // namespace ragproc
