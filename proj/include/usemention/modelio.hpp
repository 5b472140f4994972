#pragma once

#include "usemention/labels.hpp"

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace usemention {

enum class BackendKind { chat_completion, score_endpoint, stub };

std::string_view to_string(BackendKind k);
BackendKind parse_backend_kind(std::string_view s);

/// Keyword classifier used as the offline backend. A text is marked when any
/// marker phrase occurs in it as a contiguous run of normalized tokens.
struct StubRule
{
    std::vector<std::string> markers;
    bool positive_when_marked = true;
    /// When the prompt's instructions talk about mentioning, texts containing
    /// any of these phrases are answered negative regardless of markers.
    std::vector<std::string> mention_cues;
};

struct BackendConfig
{
    std::string name;
    BackendKind kind = BackendKind::stub;
    std::string base_url;
    std::string model_name;
    std::optional<double> temperature;
    std::optional<int> max_output_tokens;
    std::optional<std::string> score_attribute;
    std::optional<double> score_threshold;
    int timeout_seconds = 60;
    int max_retries = 3;
    int max_concurrency = 4;
    std::string auth_token_env;
    StubRule stub;

    /// Throws ConfigError when the kind-specific field invariants are violated.
    void validate() const;
    /// Canonical JSON of the fields that affect model output; part of request hashes.
    std::string identity() const;
    /// Same config with credentials replaced by the variable name only.
    std::string redacted_json() const;
};

/// Chat defaults mirroring the original study: temperature 1.
BackendConfig chat_backend(std::string name, std::string base_url, std::string model);
/// Same backend pinned to temperature 0 for reproducible regression runs.
BackendConfig regression_profile(BackendConfig cfg);

struct RawCompletion
{
    std::string text;
    std::string request_hash;
    bool cached = false;
    std::int64_t latency_ms = 0;
    int attempt_count = 0;
};

Label score_to_label(double score, double threshold);

struct HttpRequest
{
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
    int timeout_seconds = 60;
};

struct HttpResponse
{
    int status = 0;
    std::string body;
};

/// One POST. Network-level failures throw TransportError.
class Transport
{
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const HttpRequest& request) = 0;
};

std::shared_ptr<Transport> make_http_transport();

/// Content-addressed response store: <dir>/<hash[0:2]>/<hash>.json.
class ResponseCache
{
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<std::string> get(const std::string& hash) const;
    /// First writer wins; later puts for the same key are no-ops.
    void put(const std::string& hash, const std::string& text);

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path file_for(const std::string& hash) const;

    std::filesystem::path dir_;
    mutable std::array<std::mutex, 64> stripes_;
};

struct RetryPolicy
{
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{16000};
    std::function<void(std::chrono::milliseconds)> sleep;
};

/// Backoff before retry k (1-based); non-decreasing in k.
std::vector<std::chrono::milliseconds> backoff_schedule(const RetryPolicy& policy, int retries);

struct ClientStats
{
    std::uint64_t backend_calls = 0;
    std::uint64_t cache_hits = 0;
    int peak_in_flight = 0;
};

/// Thread-safe client for one backend. Validates configuration and resolves
/// credentials on construction so misconfiguration fails before any request.
class ModelClient
{
public:
    ModelClient(BackendConfig cfg, std::optional<std::filesystem::path> cache_dir = std::nullopt,
                std::shared_ptr<Transport> transport = nullptr, RetryPolicy retry = {});

    /// For score endpoints `prompt` is the raw text to score.
    RawCompletion complete(std::string_view prompt, int sample_index = 0);

    std::string request_body(std::string_view prompt) const;
    std::string request_hash(std::string_view prompt, int sample_index) const;

    const BackendConfig& config() const { return cfg_; }
    ClientStats stats() const;

private:
    std::string call_backend(std::string_view prompt, const std::string& body, int& attempts);
    std::string post_with_retries(const HttpRequest& request, int& attempts);

    BackendConfig cfg_;
    std::optional<ResponseCache> cache_;
    std::shared_ptr<Transport> transport_;
    RetryPolicy retry_;
    std::string credential_;
    std::counting_semaphore<> slots_;
    std::atomic<std::uint64_t> backend_calls_{0};
    std::atomic<std::uint64_t> cache_hits_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_in_flight_{0};
};

/// Output of the stub rule for a rendered prompt (or bare text).
std::string stub_respond(const StubRule& rule, std::string_view prompt);

/// The text under classification inside a rendered prompt: the final
/// "Text: ..." block. Returns the whole input when no block is found.
std::string_view extract_classified_text(std::string_view prompt);

} // namespace usemention
