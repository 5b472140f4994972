#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "usemention/errors.hpp"
#include "usemention/modelio.hpp"
#include "usemention/prompting.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <deque>
#include <filesystem>
#include <mutex>
#include <thread>

using namespace usemention;
namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

class FakeTransport : public Transport
{
public:
    std::deque<HttpResponse> script; // returned in order; the last one repeats
    int throw_first = 0;              // network failures before the script starts
    std::vector<HttpRequest> seen;
    std::chrono::milliseconds delay{0};
    std::mutex mu;

    HttpResponse post(const HttpRequest& request) override
    {
        if (delay.count() > 0)
            std::this_thread::sleep_for(delay);
        std::lock_guard lock(mu);
        seen.push_back(request);
        if (throw_first > 0) {
            --throw_first;
            throw TransportError("connection reset", 1);
        }
        HttpResponse r = script.front();
        if (script.size() > 1)
            script.pop_front();
        return r;
    }
};

fs::path temp_dir(const std::string& name)
{
    auto p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    return p;
}

std::string chat_reply(const std::string& content)
{
    nlohmann::json j;
    j["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}});
    return j.dump();
}

BackendConfig test_chat(const std::string& url = "http://127.0.0.1:1/v1")
{
    auto cfg = chat_backend("chat", url, "test-model");
    cfg.auth_token_env = "USEMENTION_TEST_TOKEN";
    return cfg;
}

struct Recorder
{
    std::vector<std::chrono::milliseconds> sleeps;
    RetryPolicy policy()
    {
        RetryPolicy p;
        p.sleep = [this](std::chrono::milliseconds d) { sleeps.push_back(d); };
        return p;
    }
};

} // namespace

TEST_CASE("backend config validation")
{
    auto chat = chat_backend("gpt", "https://api.example.com/v1", "gpt-4");
    CHECK(chat.temperature == 1.0);
    CHECK(chat.max_output_tokens == 1);
    CHECK_NOTHROW(chat.validate());
    CHECK(regression_profile(chat).temperature == 0.0);

    auto bad = chat;
    bad.score_threshold = 0.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    BackendConfig score;
    score.name = "perspective";
    score.kind = BackendKind::score_endpoint;
    score.base_url = "https://scores.example.com/analyze";
    score.score_attribute = "TOXICITY";
    CHECK_THROWS_AS(score.validate(), ConfigError);
    score.score_threshold = 0.5;
    CHECK_NOTHROW(score.validate());
    score.temperature = 1.0;
    CHECK_THROWS_AS(score.validate(), ConfigError);

    BackendConfig stub;
    stub.name = "stub";
    CHECK_NOTHROW(stub.validate());
    stub.max_concurrency = 0;
    CHECK_THROWS_AS(stub.validate(), ConfigError);
}

TEST_CASE("redacted config never carries the credential value")
{
    ::setenv("USEMENTION_TEST_TOKEN", "sk-very-secret", 1);
    auto cfg = test_chat();
    CHECK(cfg.redacted_json().find("USEMENTION_TEST_TOKEN") != std::string::npos);
    CHECK(cfg.redacted_json().find("sk-very-secret") == std::string::npos);
}

TEST_CASE("score threshold mapping")
{
    CHECK(score_to_label(0.5, 0.5) == Label::positive);
    CHECK(score_to_label(0.49, 0.5) == Label::negative);
    CHECK(score_to_label(0.0, 0.0) == Label::positive);
    CHECK_THROWS_AS(score_to_label(1.2, 0.5), DataError);
    CHECK_THROWS_AS(score_to_label(0.3, -0.1), DataError);
}

TEST_CASE("missing credential fails at construction")
{
    ::unsetenv("USEMENTION_MISSING_TOKEN");
    auto cfg = test_chat();
    cfg.auth_token_env = "USEMENTION_MISSING_TOKEN";
    CHECK_THROWS_AS(ModelClient{cfg}, ConfigError);
}

TEST_CASE("stub answers in the vocabulary of the prompt")
{
    StubRule rule{{"are greedy"}, true, {"the claim that"}};
    auto um = make_spec(Task::use_mention, Subtask::hate, PromptMode::zero_shot);
    auto ds = make_spec(Task::downstream, Subtask::hate, PromptMode::zero_shot);
    auto mit = make_spec(Task::downstream, Subtask::hate, PromptMode::mitigation);
    auto cot = make_spec(Task::downstream, Subtask::misinformation, PromptMode::cot_mitigation);

    CHECK(stub_respond(rule, render(um, "Jews are greedy")) == "A");
    CHECK(stub_respond(rule, render(um, "Kind words")) == "B");
    CHECK(stub_respond(rule, render(ds, "Jews ARE greedy!")) == "hateful");
    CHECK(stub_respond(rule, render(ds, "The claim that Jews are greedy is false")) == "hateful");
    CHECK(stub_respond(rule, render(mit, "The claim that Jews are greedy is false")) == "not hateful");
    CHECK(stub_respond(rule, render(mit, "Jews are greedy")) == "hateful");

    auto reply = stub_respond(rule, render(cot, "they are greedy"));
    CHECK(parse_label(reply, cot).label == Label::positive);
    CHECK(parse_label(stub_respond(rule, render(cot, "fine text")), cot).label == Label::negative);

    StubRule inverted{{"are greedy"}, false, {}};
    CHECK(stub_respond(inverted, "Jews are greedy") == "negative");
    CHECK(stub_respond(inverted, "nothing") == "positive");
}

TEST_CASE("classified text is the final Text block")
{
    auto spec = make_spec(Task::downstream, Subtask::hate, PromptMode::few_shot);
    CHECK(extract_classified_text(render(spec, "my text\nsecond line")) == "my text\nsecond line");
    CHECK(extract_classified_text("bare text") == "bare text");
}

TEST_CASE("stub client caches and reports hits")
{
    auto dir = temp_dir("usemention_cache_stub");
    BackendConfig cfg;
    cfg.name = "stub";
    cfg.stub.markers = {"bad"};
    {
        ModelClient client(cfg, dir);
        auto first = client.complete("Text: bad\nCategory:");
        CHECK_FALSE(first.cached);
        CHECK(first.attempt_count == 1);
        auto second = client.complete("Text: bad\nCategory:");
        CHECK(second.cached);
        CHECK(second.attempt_count == 0);
        CHECK(second.text == first.text);
        CHECK(second.request_hash == first.request_hash);
        CHECK(client.complete("Text: bad\nCategory:", 1).request_hash != first.request_hash);
        CHECK(client.stats().backend_calls == 2);
        CHECK(client.stats().cache_hits == 1);
    }
    ModelClient fresh(cfg, dir);
    CHECK(fresh.complete("Text: bad\nCategory:").cached);
    CHECK(fresh.stats().backend_calls == 0);

    // A different rule is a different backend identity.
    cfg.stub.markers = {"worse"};
    ModelClient other(cfg, dir);
    CHECK_FALSE(other.complete("Text: bad\nCategory:").cached);
    fs::remove_all(dir);
}

TEST_CASE("cache keeps the first writer")
{
    auto dir = temp_dir("usemention_cache_race");
    ResponseCache cache(dir);
    std::vector<std::jthread> threads;
    for (int t = 0; t < 8; ++t)
        threads.emplace_back([&cache, t] { cache.put("abcdef", "value-" + std::to_string(t)); });
    threads.clear();
    auto v = cache.get("abcdef");
    REQUIRE(v);
    CHECK(v->starts_with("value-"));
    cache.put("abcdef", "later");
    CHECK(cache.get("abcdef") == v);
    CHECK_FALSE(cache.get("missing"));
    fs::remove_all(dir);
}

TEST_CASE("chat request shape")
{
    ::setenv("USEMENTION_TEST_TOKEN", "tok", 1);
    auto fake = std::make_shared<FakeTransport>();
    fake->script = {{200, chat_reply("hateful")}};
    ModelClient client(test_chat("http://127.0.0.1:1/v1/"), std::nullopt, fake);
    auto out = client.complete("Classify this");
    CHECK(out.text == "hateful");
    REQUIRE(fake->seen.size() == 1);
    const auto& req = fake->seen[0];
    CHECK(req.url == "http://127.0.0.1:1/v1/chat/completions");
    auto body = nlohmann::json::parse(req.body);
    CHECK(body["model"] == "test-model");
    CHECK(body["messages"][0]["role"] == "user");
    CHECK(body["messages"][0]["content"] == "Classify this");
    CHECK(body["temperature"] == 1.0);
    CHECK(body["max_tokens"] == 1);
    bool auth = false;
    for (const auto& [k, v] : req.headers)
        auth = auth || (k == "Authorization" && v == "Bearer tok");
    CHECK(auth);
}

TEST_CASE("transient failures are retried with growing backoff")
{
    ::setenv("USEMENTION_TEST_TOKEN", "tok", 1);
    auto fake = std::make_shared<FakeTransport>();
    fake->throw_first = 1;
    fake->script = {{429, "slow down"}, {503, "busy"}, {200, chat_reply("not hateful")}};
    Recorder rec;
    ModelClient client(test_chat(), std::nullopt, fake, rec.policy());
    auto out = client.complete("x");
    CHECK(out.text == "not hateful");
    CHECK(out.attempt_count == 4);
    CHECK(rec.sleeps == std::vector<std::chrono::milliseconds>{500ms, 1000ms, 2000ms});
}

TEST_CASE("retries are bounded")
{
    ::setenv("USEMENTION_TEST_TOKEN", "tok", 1);
    auto fake = std::make_shared<FakeTransport>();
    fake->script = {{500, "boom"}};
    Recorder rec;
    auto cfg = test_chat();
    cfg.max_retries = 2;
    ModelClient client(cfg, std::nullopt, fake, rec.policy());
    try {
        client.complete("x");
        FAIL("expected ProtocolError");
    } catch (const ProtocolError& e) {
        CHECK(e.status == 500);
        CHECK(e.body_excerpt == "boom");
    }
    CHECK(fake->seen.size() == 3);

    auto net = std::make_shared<FakeTransport>();
    net->throw_first = 100;
    ModelClient unreachable(cfg, std::nullopt, net, rec.policy());
    try {
        unreachable.complete("x");
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK(e.attempt_count == 3);
    }
}

TEST_CASE("client errors are not retried")
{
    ::setenv("USEMENTION_TEST_TOKEN", "tok", 1);
    auto fake = std::make_shared<FakeTransport>();
    fake->script = {{401, "{\"error\":\"bad key\"}"}};
    Recorder rec;
    ModelClient client(test_chat(), std::nullopt, fake, rec.policy());
    CHECK_THROWS_AS(client.complete("x"), ProtocolError);
    CHECK(fake->seen.size() == 1);
    CHECK(rec.sleeps.empty());

    auto malformed = std::make_shared<FakeTransport>();
    malformed->script = {{200, "{\"choices\":[]}"}};
    ModelClient client2(test_chat(), std::nullopt, malformed, rec.policy());
    CHECK_THROWS_AS(client2.complete("x"), ProtocolError);
}

TEST_CASE("backoff schedule is non-decreasing and capped")
{
    RetryPolicy p;
    auto s = backoff_schedule(p, 8);
    REQUIRE(s.size() == 8);
    for (std::size_t i = 1; i < s.size(); ++i)
        CHECK(s[i] >= s[i - 1]);
    CHECK(s.back() == 16000ms);
}

TEST_CASE("in-flight requests never exceed max_concurrency")
{
    ::setenv("USEMENTION_TEST_TOKEN", "tok", 1);
    auto fake = std::make_shared<FakeTransport>();
    fake->script = {{200, chat_reply("hateful")}};
    fake->delay = 20ms;
    auto cfg = test_chat();
    cfg.max_concurrency = 2;
    ModelClient client(cfg, std::nullopt, fake);
    {
        std::vector<std::jthread> threads;
        for (int t = 0; t < 8; ++t)
            threads.emplace_back([&client, t] { client.complete("prompt " + std::to_string(t)); });
    }
    CHECK(client.stats().backend_calls == 8);
    CHECK(client.stats().peak_in_flight <= 2);
    CHECK(client.stats().peak_in_flight >= 1);
}

TEST_CASE("real HTTP round trip against a local server")
{
    ::setenv("USEMENTION_TEST_TOKEN", "local-token", 1);
    httplib::Server server;
    std::string seen_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        res.set_content(chat_reply("hateful"), "application/json");
    });
    server.Post("/score", [](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        const std::string text = body["text"];
        double v = text.find("bad") != std::string::npos ? 0.91 : 0.12;
        res.set_content(nlohmann::json{{"scores", {{"TOXICITY", v}}}}.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const std::string origin = "http://127.0.0.1:" + std::to_string(port);
    ModelClient chat(test_chat(origin + "/v1"));
    CHECK(chat.complete("anything").text == "hateful");
    CHECK(seen_auth == "Bearer local-token");

    BackendConfig score;
    score.name = "scores";
    score.kind = BackendKind::score_endpoint;
    score.base_url = origin + "/score";
    score.score_attribute = "TOXICITY";
    score.score_threshold = 0.5;
    score.auth_token_env = "USEMENTION_TEST_TOKEN";
    ModelClient scorer(score);
    CHECK(std::stod(scorer.complete("bad words").text) == doctest::Approx(0.91));
    CHECK(std::stod(scorer.complete("kind words").text) == doctest::Approx(0.12));

    server.stop();
    listener.join();

    // Nothing listens there any more.
    auto cfg = test_chat(origin + "/v1");
    cfg.max_retries = 0;
    cfg.timeout_seconds = 2;
    ModelClient dead(cfg);
    CHECK_THROWS_AS(dead.complete("x"), TransportError);
}
