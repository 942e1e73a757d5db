#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ragproc {

/// QA answer normalization, shared by the evaluation metrics and the lexical
/// index tokenizer: ASCII-lowercase, strip punctuation, drop the articles
/// a/an/the, collapse whitespace, split on whitespace. Punctuation becomes a
/// token boundary ("jean-pierre" splits into two tokens); bytes outside ASCII
/// are kept verbatim. These rules are frozen: metric fixtures depend on them.
std::vector<std::string> normalize_tokens(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string trim(std::string_view s);

/// FNV-1a 64-bit. Used for scripted-backend request fingerprints; implemented
/// here so fingerprints are stable across platforms and standard libraries.
std::uint64_t fnv1a64(std::string_view data);

std::string fnv1a64_hex(std::string_view data);

} // namespace ragproc
