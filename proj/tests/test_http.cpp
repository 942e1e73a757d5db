#include <doctest.h>

#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ragproc/backends.hpp"
#include "ragproc/inference.hpp"
#include "ragproc/retrieval.hpp"

using namespace ragproc;
using nlohmann::json;

namespace {

/// Local stub server bound to an ephemeral port.
struct StubServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    explicit StubServer(std::function<void(httplib::Server&)> setup) {
        setup(server);
        port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~StubServer() {
        server.stop();
        thread.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

json completion_reply(const std::string& content) {
    return json{{"choices", json::array({json{{"message", json{{"content", content}}}}})}};
}

PolicyRequest sample_request() {
    PolicyRequest req;
    req.template_name = TemplateName::Reasoning;
    req.system = "system text";
    req.user = "user text";
    req.temperature = 0.2;
    req.max_output_tokens = 64;
    req.seed = 7;
    return req;
}

} // namespace

TEST_SUITE("http") {

TEST_CASE("http backend round-trips the chat-completion wire format") {
    json seen;
    std::string auth_header;
    StubServer stub([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            seen = json::parse(req.body);
            auth_header = req.get_header_value("Authorization");
            res.set_content(completion_reply("echoed completion").dump(), "application/json");
        });
    });

    HttpBackendConfig cfg;
    cfg.base_url = stub.url();
    cfg.model = "test-model";
    cfg.api_token = "secret";
    HttpBackend backend(cfg);

    CHECK(backend.complete(sample_request()) == "echoed completion");
    CHECK(seen["model"] == "test-model");
    CHECK(seen["messages"][0]["role"] == "system");
    CHECK(seen["messages"][0]["content"] == "system text");
    CHECK(seen["messages"][1]["role"] == "user");
    CHECK(seen["messages"][1]["content"] == "user text");
    CHECK(seen["temperature"] == 0.2);
    CHECK(seen["max_tokens"] == 64);
    CHECK(seen["seed"] == 7);
    CHECK(auth_header == "Bearer secret");
    CHECK(backend.stats().requests == 1);
    CHECK(backend.stats().retries == 0);
}

TEST_CASE("http backend retries 5xx with backoff then succeeds") {
    std::atomic<int> hits{0};
    StubServer stub([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            int n = ++hits;
            if (n <= 2) {
                res.status = 500;
                return;
            }
            res.set_content(completion_reply("ok after retries").dump(), "application/json");
        });
    });

    HttpBackendConfig cfg;
    cfg.base_url = stub.url();
    cfg.model = "m";
    cfg.max_retries = 3;
    cfg.backoff_base_ms = 5;
    HttpBackend backend(cfg);

    CHECK(backend.complete(sample_request()) == "ok after retries");
    CHECK(hits.load() == 3);
    CHECK(backend.stats().retries == 2);
}

TEST_CASE("http backend gives up after the retry budget") {
    StubServer stub([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            res.status = 503;
        });
    });
    HttpBackendConfig cfg;
    cfg.base_url = stub.url();
    cfg.model = "m";
    cfg.max_retries = 1;
    cfg.backoff_base_ms = 1;
    HttpBackend backend(cfg);
    CHECK_THROWS_AS(backend.complete(sample_request()), BackendUnavailable);
}

TEST_CASE("http backend reports auth failures immediately") {
    std::atomic<int> hits{0};
    StubServer stub([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            ++hits;
            res.status = 401;
        });
    });
    HttpBackendConfig cfg;
    cfg.base_url = stub.url();
    cfg.model = "m";
    cfg.max_retries = 3;
    HttpBackend backend(cfg);
    CHECK_THROWS_AS(backend.complete(sample_request()), AuthFailure);
    CHECK(hits.load() == 1);
}

TEST_CASE("http backend surfaces timeouts as Timeout") {
    StubServer stub([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            std::this_thread::sleep_for(std::chrono::milliseconds(400));
            res.set_content(completion_reply("too late").dump(), "application/json");
        });
    });
    HttpBackendConfig cfg;
    cfg.base_url = stub.url();
    cfg.model = "m";
    cfg.timeout_ms = 50;
    cfg.max_retries = 1;
    cfg.backoff_base_ms = 1;
    HttpBackend backend(cfg);
    CHECK_THROWS_AS(backend.complete(sample_request()), Timeout);
}

TEST_CASE("remote retriever validates the reply document contract") {
    StubServer stub([&](httplib::Server& s) {
        s.Post("/retrieve", [](const httplib::Request& req, httplib::Response& res) {
            json body = json::parse(req.body);
            if (body["query"] == "two docs") {
                res.set_content(
                    json{{"docs",
                          json::array(
                              {json{{"id", "r1"}, {"title", "T1"}, {"contents", "body one"},
                                    {"score", 2.0}},
                               json{{"id", "r2"}, {"contents", "body two"}, {"score", 1.0}}})}}
                        .dump(),
                    "application/json");
            } else if (body["query"] == "empty contents") {
                res.set_content(
                    json{{"docs", json::array({json{{"id", "r1"}, {"contents", ""}}})}}.dump(),
                    "application/json");
            } else if (body["query"] == "duplicate ids") {
                res.set_content(
                    json{{"docs", json::array({json{{"id", "r1"}, {"contents", "a"}},
                                               json{{"id", "r1"}, {"contents", "b"}}})}}
                        .dump(),
                    "application/json");
            } else {
                res.set_content("not json at all", "application/json");
            }
        });
    });

    RemoteRetrieverConfig cfg;
    cfg.base_url = stub.url();
    RemoteRetriever retriever(cfg);

    auto docs = retriever.retrieve("two docs", 3);
    REQUIRE(docs.size() == 2);
    CHECK(docs[0].id == "r1");
    CHECK(docs[0].title == "T1");
    CHECK(docs[0].score == 2.0);
    CHECK(docs[1].title.empty());

    CHECK_THROWS_AS(retriever.retrieve("empty contents", 3), MalformedRetrievalReply);
    CHECK_THROWS_AS(retriever.retrieve("duplicate ids", 3), MalformedRetrievalReply);
    CHECK_THROWS_AS(retriever.retrieve("garbage", 3), MalformedRetrievalReply);
}

TEST_CASE("remote retriever reports unreachable endpoints") {
    RemoteRetrieverConfig cfg;
    cfg.base_url = "http://127.0.0.1:1"; // nothing listens there
    cfg.timeout_ms = 200;
    RemoteRetriever retriever(cfg);
    CHECK_THROWS_AS(retriever.retrieve("anything", 3), BackendUnavailable);
}

TEST_CASE("inference loop runs end-to-end over http backend and remote retriever") {
    // Chat stub: answers directly once evidence is present, otherwise asks
    // for a query; retriever stub serves one canned document.
    StubServer chat([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [](const httplib::Request& req, httplib::Response& res) {
            json body = json::parse(req.body);
            const std::string system = body["messages"][0]["content"];
            const std::string user = body["messages"][1]["content"];
            std::string reply;
            if (system.rfind("You are an information retrieval assistant", 0) == 0) {
                reply = "Based on the query, the relevant evidence is <evidence>The beacon "
                        "was lit in 1871.</evidence>.";
            } else if (user.find("The beacon was lit in 1871.") != std::string::npos) {
                reply = "So the answer is <answer>1871</answer>";
            } else {
                reply = "So the next query is <query>beacon first lit</query>";
            }
            res.set_content(completion_reply(reply).dump(), "application/json");
        });
    });
    StubServer search([&](httplib::Server& s) {
        s.Post("/retrieve", [](const httplib::Request& req, httplib::Response& res) {
            json body = json::parse(req.body);
            CHECK(body["top_k"] == 2);
            res.set_content(
                json{{"docs", json::array({json{{"id", "beacon"},
                                                {"title", "Harbor beacon"},
                                                {"contents", "The beacon was lit in 1871."},
                                                {"score", 3.0}}})}}
                    .dump(),
                "application/json");
        });
    });

    HttpBackendConfig chat_cfg;
    chat_cfg.base_url = chat.url();
    chat_cfg.model = "stub";
    HttpBackend backend(chat_cfg);

    RemoteRetrieverConfig search_cfg;
    search_cfg.base_url = search.url();
    RemoteRetriever retriever(search_cfg);

    InferenceConfig cfg;
    cfg.max_rounds = 6;
    cfg.top_k = 2;
    auto transcript = run("When was the beacon first lit?", backend, retriever, cfg);
    CHECK(transcript.final_answer == std::string("1871"));
    CHECK(transcript.rounds_used == 3);
    REQUIRE(transcript.retrievals.size() == 1);
    CHECK(transcript.retrievals[0].docs[0].id == "beacon");
    CHECK(backend.stats().requests == 3);
}

TEST_CASE("http backend caps concurrent requests") {
    std::atomic<int> in_flight{0};
    std::atomic<int> peak{0};
    StubServer stub([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            int now = ++in_flight;
            int prev = peak.load();
            while (now > prev && !peak.compare_exchange_weak(prev, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(30));
            --in_flight;
            res.set_content(completion_reply("ok").dump(), "application/json");
        });
    });

    HttpBackendConfig cfg;
    cfg.base_url = stub.url();
    cfg.model = "m";
    cfg.max_in_flight = 2;
    HttpBackend backend(cfg);

    std::vector<std::thread> callers;
    for (int i = 0; i < 6; ++i) {
        callers.emplace_back([&] { backend.complete(sample_request()); });
    }
    for (auto& t : callers) t.join();
    CHECK(peak.load() <= 2);
    CHECK(backend.stats().requests == 6);
}

} // TEST_SUITE
