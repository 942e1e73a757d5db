#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ragproc {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- agent-core ---

/// No legal well-formed placeholder found in an LLM response.
/// Carries the offending raw text so callers can retry or log it.
class MalformedAction : public Error {
public:
    MalformedAction(const std::string& msg, std::string raw)
        : Error(msg), raw_(std::move(raw)) {}
    const std::string& raw_text() const { return raw_; }

private:
    std::string raw_;
};

class IllegalTransition : public Error {
public:
    using Error::Error;
};

// --- policy-backends ---

class BackendUnavailable : public Error {
public:
    using Error::Error;
};

class AuthFailure : public Error {
public:
    using Error::Error;
};

class Timeout : public Error {
public:
    using Error::Error;
};

class UnscriptedRequest : public Error {
public:
    using Error::Error;
};

/// Judge reply had no trailing "So the score is ..." clause.
class UnparsableScore : public Error {
public:
    UnparsableScore(const std::string& msg, std::string reply)
        : Error(msg), reply_(std::move(reply)) {}
    const std::string& reply() const { return reply_; }

private:
    std::string reply_;
};

// --- retrieval ---

class CorpusFormatError : public Error {
public:
    CorpusFormatError(size_t line, const std::string& reason)
        : Error("corpus format error at line " + std::to_string(line) + ": " + reason),
          line_(line) {}
    size_t line() const { return line_; }

private:
    size_t line_;
};

class DuplicateDocId : public Error {
public:
    using Error::Error;
};

class MalformedRetrievalReply : public Error {
public:
    using Error::Error;
};

// --- inference (PolicyFailure/RetrievalFailure live in inference.hpp: they
//     carry a partial Transcript) ---

// --- mcts-annotator ---

class NoChildren : public Error {
public:
    using Error::Error;
};

class ExpansionFailed : public Error {
public:
    using Error::Error;
};

class AnnotationFailed : public Error {
public:
    using Error::Error;
};

// --- dataset-builder ---

class EmptyTree : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// --- eval-harness ---

class MissingGold : public Error {
public:
    using Error::Error;
};

class EmptyEvaluation : public Error {
public:
    using Error::Error;
};

// --- cli / config ---

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace ragproc
