#include "ragproc/backends.hpp"

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ragproc/text.hpp"

namespace ragproc {

using nlohmann::json;

ScriptedBackend::ScriptedBackend(Options options) : options_(std::move(options)) {}

void ScriptedBackend::add_exact(TemplateName tmpl, std::string_view user_text,
                                std::vector<std::string> replies) {
    add_fingerprint(fingerprint(tmpl, user_text), std::move(replies));
}

void ScriptedBackend::add_fingerprint(std::string fp, std::vector<std::string> replies) {
    std::lock_guard lock(mu_);
    entries_.push_back(Entry{std::move(replies)});
    exact_[std::move(fp)] = entries_.size() - 1;
}

void ScriptedBackend::add_contains(TemplateName tmpl, std::string needle,
                                   std::vector<std::string> replies) {
    std::lock_guard lock(mu_);
    entries_.push_back(Entry{std::move(replies)});
    contains_.push_back(ContainsRule{tmpl, std::move(needle), entries_.size() - 1});
}

std::string ScriptedBackend::take_reply(size_t entry_idx, const std::string& request_fp) {
    const Entry& e = entries_[entry_idx];
    if (e.replies.empty()) throw UnscriptedRequest("script entry has no replies");
    size_t& position = sequence_position_[std::to_string(entry_idx) + "\x1f" + request_fp];
    size_t i = position < e.replies.size() ? position : e.replies.size() - 1;
    if (position < e.replies.size()) ++position;
    return e.replies[i];
}

std::string ScriptedBackend::complete(const PolicyRequest& request) {
    std::lock_guard lock(mu_);
    const std::string request_fp = fingerprint(request.template_name, request.user);
    std::string reply;
    bool matched = false;

    auto it = exact_.find(request_fp);
    if (it != exact_.end()) {
        reply = take_reply(it->second, request_fp);
        matched = true;
    }
    if (!matched) {
        for (const auto& rule : contains_) {
            if (rule.tmpl == request.template_name &&
                request.user.find(rule.needle) != std::string::npos) {
                reply = take_reply(rule.entry, request_fp);
                matched = true;
                break;
            }
        }
    }
    if (!matched) {
        if (options_.default_reply) {
            reply = *options_.default_reply;
        } else if (options_.strict) {
            throw UnscriptedRequest(
                "no script entry for " +
                fingerprint(request.template_name, request.user) + " (user: " +
                request.user.substr(0, 120) + (request.user.size() > 120 ? "..." : "") + ")");
        } else {
            reply = "";
        }
    }

    log_.push_back(CallRecord{request.template_name, request.system, request.user,
                              request.temperature, request.seed, reply});
    return reply;
}

std::vector<ScriptedBackend::CallRecord> ScriptedBackend::call_log() const {
    std::lock_guard lock(mu_);
    return log_;
}

size_t ScriptedBackend::call_count() const {
    std::lock_guard lock(mu_);
    return log_.size();
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open script file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("script file " + path + " is not valid JSON: " + e.what());
    }

    Options opts;
    opts.strict = doc.value("strict", true);
    if (doc.contains("default_reply") && !doc["default_reply"].is_null()) {
        opts.default_reply = doc["default_reply"].get<std::string>();
    }
    auto backend = std::make_unique<ScriptedBackend>(opts);

    try {
        for (const auto& entry : doc.value("entries", json::array())) {
            TemplateName tmpl =
                template_name_from_string(entry.at("template").get<std::string>());
            std::vector<std::string> replies;
            for (const auto& r : entry.at("replies")) replies.push_back(r.get<std::string>());
            std::string match = entry.value("match", "exact");
            if (match == "exact") {
                if (entry.contains("user_hash")) {
                    backend->add_fingerprint(std::string(to_string(tmpl)) + ":" +
                                                 entry["user_hash"].get<std::string>(),
                                             std::move(replies));
                } else {
                    backend->add_exact(tmpl, entry.at("user").get<std::string>(),
                                       std::move(replies));
                }
            } else if (match == "contains") {
                backend->add_contains(tmpl, entry.at("needle").get<std::string>(),
                                      std::move(replies));
            } else {
                throw ConfigError("script entry match must be \"exact\" or \"contains\", got " +
                                  match);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError("script file " + path + " has a malformed entry: " + e.what());
    }
    return backend;
}

// --- HttpBackend ---

struct HttpBackend::Impl {
    HttpBackendConfig cfg;
    httplib::Client client;

    std::mutex mu;
    std::condition_variable cv;
    int in_flight = 0;
    Stats stats;

    explicit Impl(HttpBackendConfig c) : cfg(std::move(c)), client(cfg.base_url) {
        client.set_connection_timeout(0, cfg.timeout_ms * 1000LL);
        client.set_read_timeout(0, cfg.timeout_ms * 1000LL);
        client.set_write_timeout(0, cfg.timeout_ms * 1000LL);
        if (!cfg.api_token.empty()) client.set_bearer_token_auth(cfg.api_token);
    }

    struct FlightSlot {
        Impl& impl;
        explicit FlightSlot(Impl& i) : impl(i) {
            std::unique_lock lock(impl.mu);
            impl.cv.wait(lock, [&] { return impl.in_flight < impl.cfg.max_in_flight; });
            ++impl.in_flight;
        }
        ~FlightSlot() {
            {
                std::lock_guard lock(impl.mu);
                --impl.in_flight;
            }
            impl.cv.notify_one();
        }
    };
};

HttpBackend::HttpBackend(HttpBackendConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::complete(const PolicyRequest& request) {
    Impl::FlightSlot slot(*impl_);
    {
        std::lock_guard lock(impl_->mu);
        ++impl_->stats.requests;
    }

    json body{{"model", impl_->cfg.model},
              {"messages",
               json::array({json{{"role", "system"}, {"content", request.system}},
                            json{{"role", "user"}, {"content", request.user}}})},
              {"temperature", request.temperature},
              {"max_tokens", request.max_output_tokens}};
    if (request.seed) body["seed"] = *request.seed;
    const std::string payload = body.dump();

    std::string last_error;
    bool last_was_timeout = false;
    const int attempts = 1 + (impl_->cfg.max_retries < 0 ? 0 : impl_->cfg.max_retries);

    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            {
                std::lock_guard lock(impl_->mu);
                ++impl_->stats.retries;
            }
            auto delay = std::chrono::milliseconds(impl_->cfg.backoff_base_ms) * (1 << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }

        auto res = impl_->client.Post(impl_->cfg.path, payload, "application/json");
        if (!res) {
            auto err = res.error();
            last_was_timeout = err == httplib::Error::ConnectionTimeout ||
                               err == httplib::Error::Read || err == httplib::Error::Write;
            last_error = httplib::to_string(err);
            continue;
        }
        if (res->status == 401 || res->status == 403) {
            throw AuthFailure("endpoint rejected credentials (HTTP " +
                              std::to_string(res->status) + ")");
        }
        if (res->status >= 500 || res->status == 429) {
            last_was_timeout = false;
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw BackendUnavailable("endpoint returned HTTP " + std::to_string(res->status) +
                                     ": " + res->body.substr(0, 200));
        }
        try {
            json reply = json::parse(res->body);
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw BackendUnavailable(std::string("malformed chat-completion reply: ") + e.what());
        }
    }

    if (last_was_timeout) {
        throw Timeout("request timed out after " + std::to_string(attempts) +
                      " attempts: " + last_error);
    }
    throw BackendUnavailable("request failed after " + std::to_string(attempts) +
                             " attempts: " + last_error);
}

HttpBackend::Stats HttpBackend::stats() const {
    std::lock_guard lock(impl_->mu);
    return impl_->stats;
}

} // namespace ragproc
