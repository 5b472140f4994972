#pragma once

#include "usemention/corpus.hpp"
#include "usemention/modelio.hpp"
#include "usemention/prompting.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace usemention {

enum class Side { use, mention };

std::string_view to_string(Side s);

/// One model judgment on one side of one pair.
struct Verdict
{
    std::string pair_id;
    Side side = Side::use;
    Task task = Task::use_mention;
    Subtask subtask = Subtask::hate;
    PromptMode mode = PromptMode::zero_shot;
    std::string template_id;
    int sample_index = 0;
    ParsedLabel parsed;
    std::string raw_ref;              ///< request hash of the backend call
    std::optional<std::string> error; ///< set when the backend call failed

    bool parseable() const { return parsed.label != Label::unparseable; }
};

struct RunOptions
{
    std::uint64_t seed = 0;
    int sample_index = 0;
    int workers = 0; ///< 0: the backend's max_concurrency
    const TemplateRegistry* registry = nullptr;
};

struct RunSummary
{
    std::size_t total = 0;
    std::size_t parseable = 0;
    std::size_t unparseable = 0; ///< includes failed verdicts
    std::size_t failed = 0;
    std::uint64_t backend_calls = 0;
    std::uint64_t cache_hits = 0;
};

struct RunResult
{
    std::vector<Verdict> verdicts; ///< sorted by (pair_id, side)
    RunSummary summary;
};

/// Backend config with the output-token budget the prompt mode needs.
BackendConfig config_for_prompt(BackendConfig cfg, const PromptSpec& spec);

/// Classifies both sides of every pair. Work is visited in a seed-determined
/// order across up to `workers` threads; backend failures are recorded per
/// verdict and never abort the run.
RunResult run_task(const std::vector<StatementPair>& pairs, const PromptSpec& spec,
                   ModelClient& client, const RunOptions& options = {});

struct ConfusionCounts
{
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0, unparseable = 0;

    std::size_t total() const { return tp + fp + tn + fn + unparseable; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Use sides are the positive class, mention sides the negative class.
ConfusionCounts confusion_counts(const std::vector<Verdict>& verdicts);

struct Interval
{
    double low = 0.0;
    double high = 0.0;
    bool operator==(const Interval&) const = default;
};

struct RateReport
{
    std::optional<double> fpr, fnr, avg_error, tpr;
    std::optional<Interval> fpr_ci, fnr_ci, avg_error_ci, tpr_ci;
    std::size_t n_use = 0;
    std::size_t n_mention = 0;
    bool unstable = false; ///< intervals computed from fewer than 5 pairs
};

/// Rates with an empty denominator are left absent; throws EmptyReportError
/// when both are empty.
RateReport rates(const ConfusionCounts& counts);

struct BootstrapOptions
{
    int resamples = 2000;
    double level = 0.95;
    std::uint64_t seed = 0;
};

/// Percentile bootstrap resampling whole pairs with replacement.
RateReport bootstrap_ci(const std::vector<Verdict>& verdicts, const BootstrapOptions& options);

enum class DeltaMetric { fpr_mention, tpr_use };

struct MitigationDelta
{
    DeltaMetric metric = DeltaMetric::fpr_mention;
    double baseline_rate = 0.0;
    double treated_rate = 0.0;
    double delta = 0.0;
};

/// Relative change (treated - baseline) / baseline.
MitigationDelta mitigation_delta(const RateReport& baseline, const RateReport& treated,
                                 DeltaMetric metric);
MitigationDelta mitigation_delta(double baseline_rate, double treated_rate, DeltaMetric metric);

std::string serialize_verdict(const Verdict& v);
std::string serialize_verdicts(const std::vector<Verdict>& verdicts);
std::vector<Verdict> parse_verdicts(std::string_view jsonl);
std::vector<Verdict> read_verdict_log(const std::filesystem::path& path);

std::string corpus_digest(const std::vector<StatementPair>& pairs);

struct RunManifest
{
    std::string run_id;
    std::string corpus_digest;
    PromptSpec spec;
    std::string template_digest;
    Provenance provenance = Provenance::paper;
    std::string backend_json; ///< BackendConfig::redacted_json()
    std::uint64_t seed = 0;
    int sample_index = 0;
    RunSummary summary;
    ConfusionCounts counts;
    BootstrapOptions bootstrap;
};

/// Manifest JSON. Cache-dependent call counters are excluded unless
/// `include_call_counters` is set, so reruns produce identical bytes.
std::string manifest_json(const RunManifest& m, bool include_call_counters = false);
/// Reads the fields needed to compare runs (run_id, corpus_digest, spec, seed).
RunManifest read_manifest(const std::filesystem::path& path);

} // namespace usemention
