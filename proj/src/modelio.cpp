#include "usemention/modelio.hpp"

#include "usemention/digest.hpp"
#include "usemention/errors.hpp"
#include "usemention/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

namespace usemention {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Label l)
{
    switch (l) {
    case Label::positive: return "positive";
    case Label::negative: return "negative";
    case Label::unparseable: return "unparseable";
    }
    return "unparseable";
}

Label parse_label_name(std::string_view s)
{
    if (s == "positive")
        return Label::positive;
    if (s == "negative")
        return Label::negative;
    if (s == "unparseable")
        return Label::unparseable;
    throw DataError("unknown label '" + std::string(s) + "'");
}

std::string_view to_string(BackendKind k)
{
    switch (k) {
    case BackendKind::chat_completion: return "chat_completion";
    case BackendKind::score_endpoint: return "score_endpoint";
    case BackendKind::stub: return "stub";
    }
    return "stub";
}

BackendKind parse_backend_kind(std::string_view s)
{
    if (s == "chat_completion")
        return BackendKind::chat_completion;
    if (s == "score_endpoint")
        return BackendKind::score_endpoint;
    if (s == "stub")
        return BackendKind::stub;
    throw ConfigError("unknown backend kind '" + std::string(s) + "'");
}

void BackendConfig::validate() const
{
    const std::string who = "backend '" + name + "': ";
    const bool chat = kind == BackendKind::chat_completion;
    const bool score = kind == BackendKind::score_endpoint;
    if (score_threshold.has_value() != score)
        throw ConfigError(who + "score_threshold is required for, and only for, score_endpoint");
    if (score && (*score_threshold < 0.0 || *score_threshold > 1.0))
        throw ConfigError(who + "score_threshold must lie in [0,1]");
    if (score && (!score_attribute || score_attribute->empty()))
        throw ConfigError(who + "score_endpoint needs score_attribute");
    if (temperature.has_value() != chat || max_output_tokens.has_value() != chat)
        throw ConfigError(who + "temperature and max_output_tokens apply to chat_completion only");
    if (chat && (*temperature < 0.0 || *max_output_tokens <= 0))
        throw ConfigError(who + "temperature must be >= 0 and max_output_tokens positive");
    if (kind != BackendKind::stub && base_url.empty())
        throw ConfigError(who + "base_url is required");
    if (kind == BackendKind::stub && !base_url.empty())
        throw ConfigError(who + "stub backends take no base_url");
    if (timeout_seconds <= 0 || max_concurrency <= 0 || max_retries < 0)
        throw ConfigError(who + "timeout and max_concurrency must be positive, max_retries >= 0");
}

namespace {

ojson identity_json(const BackendConfig& cfg)
{
    ojson j;
    j["kind"] = to_string(cfg.kind);
    j["base_url"] = cfg.base_url;
    j["model_name"] = cfg.model_name;
    if (cfg.score_attribute)
        j["score_attribute"] = *cfg.score_attribute;
    if (cfg.kind == BackendKind::stub) {
        j["markers"] = cfg.stub.markers;
        j["positive_when_marked"] = cfg.stub.positive_when_marked;
        j["mention_cues"] = cfg.stub.mention_cues;
    }
    return j;
}

} // namespace

std::string BackendConfig::identity() const
{
    return identity_json(*this).dump();
}

std::string BackendConfig::redacted_json() const
{
    ojson j = identity_json(*this);
    j["name"] = name;
    if (temperature)
        j["temperature"] = *temperature;
    if (max_output_tokens)
        j["max_output_tokens"] = *max_output_tokens;
    if (score_threshold)
        j["score_threshold"] = *score_threshold;
    j["timeout_seconds"] = timeout_seconds;
    j["max_retries"] = max_retries;
    j["max_concurrency"] = max_concurrency;
    j["auth_token_env"] = auth_token_env;
    return j.dump();
}

BackendConfig chat_backend(std::string name, std::string base_url, std::string model)
{
    BackendConfig cfg;
    cfg.name = std::move(name);
    cfg.kind = BackendKind::chat_completion;
    cfg.base_url = std::move(base_url);
    cfg.model_name = std::move(model);
    cfg.temperature = 1.0;
    cfg.max_output_tokens = 1;
    cfg.auth_token_env = "OPENAI_API_KEY";
    return cfg;
}

BackendConfig regression_profile(BackendConfig cfg)
{
    if (cfg.kind == BackendKind::chat_completion)
        cfg.temperature = 0.0;
    return cfg;
}

Label score_to_label(double score, double threshold)
{
    auto in_range = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_range(score) || !in_range(threshold))
        throw DataError("score and threshold must lie in [0,1]");
    return score >= threshold ? Label::positive : Label::negative;
}

// ---------------------------------------------------------------------------
// Cache

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir))
{
    std::filesystem::create_directories(dir_);
}

std::filesystem::path ResponseCache::file_for(const std::string& hash) const
{
    return dir_ / hash.substr(0, 2) / (hash + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& hash) const
{
    std::ifstream in(file_for(hash), std::ios::binary);
    if (!in)
        return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    auto j = nlohmann::json::parse(ss.str(), nullptr, false);
    if (j.is_discarded() || !j.contains("text") || !j["text"].is_string())
        return std::nullopt;
    return j["text"].get<std::string>();
}

void ResponseCache::put(const std::string& hash, const std::string& text)
{
    const auto target = file_for(hash);
    std::lock_guard lock(stripes_[std::hash<std::string>{}(hash) % stripes_.size()]);
    if (std::filesystem::exists(target))
        return;
    std::filesystem::create_directories(target.parent_path());
    ojson j;
    j["request_hash"] = hash;
    j["text"] = text;
    std::ostringstream tid;
    tid << std::this_thread::get_id();
    auto tmp = target;
    tmp += ".tmp." + tid.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot write cache entry " + tmp.string());
        out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    }
    std::filesystem::rename(tmp, target);
}

// ---------------------------------------------------------------------------
// Stub backend

std::string_view extract_classified_text(std::string_view prompt)
{
    std::string_view body = prompt;
    while (!body.empty() && (body.back() == ' ' || body.back() == '\n' || body.back() == '\r'))
        body.remove_suffix(1);
    bool framed = false;
    for (std::string_view suffix : {"\nCategory:", "\nAnswer: Let's think step by step."}) {
        if (body.ends_with(suffix)) {
            body.remove_suffix(suffix.size());
            framed = true;
            break;
        }
    }
    if (!framed)
        return prompt;
    constexpr std::string_view marker = "Text: ";
    auto pos = body.rfind("\n" + std::string(marker));
    if (pos != std::string_view::npos)
        return body.substr(pos + 1 + marker.size());
    if (body.starts_with(marker))
        return body.substr(marker.size());
    return prompt;
}

namespace {

bool contains_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase)
{
    if (phrase.empty() || phrase.size() > tokens.size())
        return false;
    return std::search(tokens.begin(), tokens.end(), phrase.begin(), phrase.end()) != tokens.end();
}

bool contains_any(const std::vector<std::string>& tokens, const std::vector<std::string>& phrases)
{
    return std::any_of(phrases.begin(), phrases.end(),
                       [&](const std::string& p) { return contains_phrase(tokens, tokenize(p)); });
}

} // namespace

std::string stub_respond(const StubRule& rule, std::string_view prompt)
{
    const std::string_view text = extract_classified_text(prompt);
    const auto tokens = tokenize(text);
    const bool marked = contains_any(tokens, rule.markers);
    bool positive = rule.positive_when_marked ? marked : !marked;

    std::string instructions;
    if (text.size() < prompt.size()) {
        const auto offset = static_cast<std::size_t>(text.data() - prompt.data());
        instructions = to_lower_ascii(prompt.substr(0, offset));
    }
    const bool instructed = instructions.find("mention") != std::string::npos;
    if (positive && instructed && contains_any(tokens, rule.mention_cues))
        positive = false;

    std::string pos_word = "positive", neg_word = "negative";
    if (prompt.find("\nA: use") != std::string_view::npos) {
        pos_word = "A";
        neg_word = "B";
    } else if (prompt.find("[hateful, not hateful]") != std::string_view::npos) {
        pos_word = "hateful";
        neg_word = "not hateful";
    } else if (prompt.find("[misinformation, not misinformation]") != std::string_view::npos) {
        pos_word = "misinformation";
        neg_word = "not misinformation";
    }
    std::string answer = positive ? pos_word : neg_word;

    std::string_view tail = trim(prompt);
    if (tail.ends_with("Let's think step by step."))
        return std::string(marked ? "A marker phrase is present." : "No marker phrase is present.") +
               " So the answer is: " + answer;
    return answer;
}

// ---------------------------------------------------------------------------
// Client

std::vector<std::chrono::milliseconds> backoff_schedule(const RetryPolicy& policy, int retries)
{
    std::vector<std::chrono::milliseconds> out;
    double current = static_cast<double>(policy.initial_backoff.count());
    const double cap = static_cast<double>(policy.max_backoff.count());
    for (int k = 0; k < retries; ++k) {
        out.emplace_back(static_cast<std::int64_t>(std::min(current, cap)));
        current *= std::max(1.0, policy.multiplier);
    }
    return out;
}

ModelClient::ModelClient(BackendConfig cfg, std::optional<std::filesystem::path> cache_dir,
                         std::shared_ptr<Transport> transport, RetryPolicy retry)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      retry_(std::move(retry)),
      slots_(std::max(1, cfg_.max_concurrency))
{
    cfg_.validate();
    if (cfg_.kind != BackendKind::stub) {
        if (cfg_.auth_token_env.empty())
            throw ConfigError("backend '" + cfg_.name + "': auth_token_env is not set");
        const char* token = std::getenv(cfg_.auth_token_env.c_str());
        if (token == nullptr || *token == '\0')
            throw ConfigError("backend '" + cfg_.name + "': environment variable " +
                              cfg_.auth_token_env + " is empty or unset");
        credential_ = token;
        if (!transport_)
            transport_ = make_http_transport();
    }
    if (!retry_.sleep)
        retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (cache_dir)
        cache_.emplace(*cache_dir);
}

std::string ModelClient::request_body(std::string_view prompt) const
{
    ojson j;
    switch (cfg_.kind) {
    case BackendKind::chat_completion:
        j["model"] = cfg_.model_name;
        j["messages"] = ojson::array({ojson{{"role", "user"}, {"content", std::string(prompt)}}});
        j["temperature"] = *cfg_.temperature;
        j["max_tokens"] = *cfg_.max_output_tokens;
        break;
    case BackendKind::score_endpoint:
        j["text"] = std::string(prompt);
        j["attributes"] = ojson::array({*cfg_.score_attribute});
        break;
    case BackendKind::stub:
        j["prompt"] = std::string(prompt);
        break;
    }
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string ModelClient::request_hash(std::string_view prompt, int sample_index) const
{
    ojson j;
    j["backend"] = ojson::parse(cfg_.identity());
    j["body"] = request_body(prompt);
    j["sample_index"] = sample_index;
    return sha256_hex(j.dump());
}

ClientStats ModelClient::stats() const
{
    return {backend_calls_.load(), cache_hits_.load(), peak_in_flight_.load()};
}

RawCompletion ModelClient::complete(std::string_view prompt, int sample_index)
{
    if (trim(prompt).empty())
        throw ConfigError("empty prompt");
    const auto start = std::chrono::steady_clock::now();
    RawCompletion out;
    out.request_hash = request_hash(prompt, sample_index);
    auto elapsed = [&] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - start)
            .count();
    };

    if (cache_) {
        if (auto hit = cache_->get(out.request_hash)) {
            ++cache_hits_;
            out.text = std::move(*hit);
            out.cached = true;
            out.latency_ms = elapsed();
            return out;
        }
    }

    int attempts = 0;
    out.text = call_backend(prompt, request_body(prompt), attempts);
    out.attempt_count = attempts;
    out.latency_ms = elapsed();
    if (cache_)
        cache_->put(out.request_hash, out.text);
    return out;
}

namespace {

struct SlotGuard
{
    SlotGuard(std::counting_semaphore<>& s, std::atomic<int>& in_flight, std::atomic<int>& peak)
        : sem(s), count(in_flight)
    {
        sem.acquire();
        int now = ++count;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
    }
    ~SlotGuard()
    {
        --count;
        sem.release();
    }
    std::counting_semaphore<>& sem;
    std::atomic<int>& count;
};

std::string excerpt(const std::string& body)
{
    return body.size() <= 200 ? body : body.substr(0, 200) + "...";
}

std::string join_url(const std::string& base, std::string_view path)
{
    std::string url = base;
    while (!url.empty() && url.back() == '/')
        url.pop_back();
    return url + std::string(path);
}

std::string format_score(double v)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

} // namespace

std::string ModelClient::call_backend(std::string_view prompt, const std::string& body, int& attempts)
{
    SlotGuard slot(slots_, in_flight_, peak_in_flight_);
    ++backend_calls_;
    if (cfg_.kind == BackendKind::stub) {
        attempts = 1;
        return stub_respond(cfg_.stub, prompt);
    }

    HttpRequest req;
    req.body = body;
    req.timeout_seconds = cfg_.timeout_seconds;
    req.headers = {{"Authorization", "Bearer " + credential_}, {"Content-Type", "application/json"}};
    req.url = cfg_.kind == BackendKind::chat_completion ? join_url(cfg_.base_url, "/chat/completions")
                                                        : cfg_.base_url;
    const std::string response = post_with_retries(req, attempts);

    auto j = nlohmann::json::parse(response, nullptr, false);
    if (j.is_discarded())
        throw ProtocolError("backend returned non-JSON body", 200, excerpt(response));
    if (cfg_.kind == BackendKind::chat_completion) {
        const auto& content = j["choices"][0]["message"]["content"];
        if (!content.is_string())
            throw ProtocolError("missing choices[0].message.content", 200, excerpt(response));
        return content.get<std::string>();
    }
    const auto& scores = j["scores"];
    if (!scores.is_object() || !scores.contains(*cfg_.score_attribute) ||
        !scores[*cfg_.score_attribute].is_number())
        throw ProtocolError("missing scores[" + *cfg_.score_attribute + "]", 200, excerpt(response));
    const double score = scores[*cfg_.score_attribute].get<double>();
    if (!(score >= 0.0 && score <= 1.0))
        throw ProtocolError("score outside [0,1]", 200, excerpt(response));
    return format_score(score);
}

std::string ModelClient::post_with_retries(const HttpRequest& request, int& attempts)
{
    const auto schedule = backoff_schedule(retry_, cfg_.max_retries);
    for (attempts = 1;; ++attempts) {
        const bool can_retry = attempts <= cfg_.max_retries;
        try {
            HttpResponse resp = transport_->post(request);
            if (resp.status >= 200 && resp.status < 300)
                return std::move(resp.body);
            const bool transient = resp.status == 429 || resp.status >= 500;
            if (!transient || !can_retry)
                throw ProtocolError("backend '" + cfg_.name + "' returned HTTP " +
                                        std::to_string(resp.status),
                                    resp.status, excerpt(resp.body));
        } catch (const TransportError& e) {
            if (!can_retry)
                throw TransportError(e.what(), attempts);
        }
        retry_.sleep(schedule[static_cast<std::size_t>(attempts - 1)]);
    }
}

} // namespace usemention
