#include "usemention/evaluation.hpp"

#include "usemention/digest.hpp"
#include "usemention/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

namespace usemention {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Side s)
{
    return s == Side::use ? "use" : "mention";
}

BackendConfig config_for_prompt(BackendConfig cfg, const PromptSpec& spec)
{
    if (cfg.kind == BackendKind::chat_completion)
        cfg.max_output_tokens = output_budget(spec);
    return cfg;
}

namespace {

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n)
{
    // Rejection sampling keeps the draw unbiased and identical across standard libraries.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

ParsedLabel parse_score(const std::string& raw, double threshold)
{
    ParsedLabel out;
    out.raw = raw;
    out.extraction_rule = "score>=threshold";
    double score = 0.0;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), score);
    if (ec == std::errc() && ptr == raw.data() + raw.size() && score >= 0.0 && score <= 1.0)
        out.label = score_to_label(score, threshold);
    return out;
}

struct WorkItem
{
    std::size_t pair_index;
    Side side;
};

} // namespace

RunResult run_task(const std::vector<StatementPair>& pairs, const PromptSpec& spec,
                   ModelClient& client, const RunOptions& options)
{
    const auto& cfg = client.config();
    const TemplateRegistry& registry = options.registry ? *options.registry : TemplateRegistry::builtin();
    if (cfg.kind == BackendKind::score_endpoint && spec.task != Task::downstream)
        throw ConfigError("score endpoints only support the downstream task");
    if (cfg.kind != BackendKind::score_endpoint && !registry.contains(spec.template_id))
        throw TemplateError("unknown template_id '" + spec.template_id + "'");
    for (const auto& p : pairs)
        if (p.subtask != spec.subtask)
            throw ConfigError("pair " + p.pair_id + " is not a " + std::string(to_string(spec.subtask)) +
                              " pair");

    std::vector<WorkItem> work;
    work.reserve(pairs.size() * 2);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        work.push_back({i, Side::use});
        work.push_back({i, Side::mention});
    }
    std::mt19937_64 rng(options.seed);
    for (std::size_t i = work.size(); i > 1; --i)
        std::swap(work[i - 1], work[uniform_index(rng, i)]);

    const auto before = client.stats();
    std::vector<Verdict> verdicts(work.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < work.size(); k = next++) {
            const auto& item = work[k];
            const auto& pair = pairs[item.pair_index];
            const std::string& text = item.side == Side::use ? pair.use_text : pair.mention_text;
            Verdict v;
            v.pair_id = pair.pair_id;
            v.side = item.side;
            v.task = spec.task;
            v.subtask = spec.subtask;
            v.mode = spec.mode;
            v.template_id = spec.template_id;
            v.sample_index = options.sample_index;
            try {
                const bool scored = cfg.kind == BackendKind::score_endpoint;
                const std::string prompt = scored ? text : render(spec, text, registry);
                v.raw_ref = client.request_hash(prompt, options.sample_index);
                auto raw = client.complete(prompt, options.sample_index);
                v.parsed = scored ? parse_score(raw.text, *cfg.score_threshold)
                                  : parse_label(raw.text, spec);
            } catch (const Error& e) {
                v.error = e.what();
                v.parsed = ParsedLabel{Label::unparseable, std::nullopt, "failed", ""};
            }
            verdicts[k] = std::move(v);
        }
    };

    const int n_workers = std::max(1, options.workers > 0 ? options.workers : cfg.max_concurrency);
    {
        std::vector<std::jthread> threads;
        for (int t = 1; t < n_workers; ++t)
            threads.emplace_back(worker);
        worker();
    }

    std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) {
        return std::tie(a.pair_id, a.side) < std::tie(b.pair_id, b.side);
    });

    RunResult result;
    result.summary.total = verdicts.size();
    for (const auto& v : verdicts) {
        if (v.error)
            ++result.summary.failed;
        if (v.parseable())
            ++result.summary.parseable;
        else
            ++result.summary.unparseable;
    }
    const auto after = client.stats();
    result.summary.backend_calls = after.backend_calls - before.backend_calls;
    result.summary.cache_hits = after.cache_hits - before.cache_hits;
    result.verdicts = std::move(verdicts);
    return result;
}

ConfusionCounts confusion_counts(const std::vector<Verdict>& verdicts)
{
    ConfusionCounts c;
    for (const auto& v : verdicts) {
        if (!v.parseable()) {
            ++c.unparseable;
            continue;
        }
        const bool positive = v.parsed.label == Label::positive;
        if (v.side == Side::use)
            ++(positive ? c.tp : c.fn);
        else
            ++(positive ? c.fp : c.tn);
    }
    return c;
}

RateReport rates(const ConfusionCounts& counts)
{
    RateReport r;
    r.n_use = counts.tp + counts.fn;
    r.n_mention = counts.fp + counts.tn;
    if (r.n_use == 0 && r.n_mention == 0)
        throw EmptyReportError("no parseable verdicts on either side");
    if (r.n_mention > 0)
        r.fpr = static_cast<double>(counts.fp) / static_cast<double>(r.n_mention);
    if (r.n_use > 0) {
        r.fnr = static_cast<double>(counts.fn) / static_cast<double>(r.n_use);
        r.tpr = static_cast<double>(counts.tp) / static_cast<double>(r.n_use);
    }
    if (r.fpr && r.fnr)
        r.avg_error = (*r.fpr + *r.fnr) / 2.0;
    return r;
}

namespace {

double quantile(std::vector<double>& values, double q)
{
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

std::optional<Interval> percentile_interval(std::vector<double>& samples, double level,
                                            std::optional<double> point)
{
    if (samples.empty() || !point)
        return std::nullopt;
    const double alpha = (1.0 - level) / 2.0;
    Interval iv{quantile(samples, alpha), quantile(samples, 1.0 - alpha)};
    // Percentile intervals can exclude the point estimate on skewed samples.
    iv.low = std::min(iv.low, *point);
    iv.high = std::max(iv.high, *point);
    return iv;
}

} // namespace

RateReport bootstrap_ci(const std::vector<Verdict>& verdicts, const BootstrapOptions& options)
{
    if (options.resamples < 100)
        throw ConfigError("bootstrap needs at least 100 resamples");
    if (!(options.level > 0.0 && options.level < 1.0))
        throw ConfigError("confidence level must lie in (0,1)");

    RateReport report = rates(confusion_counts(verdicts));

    // Per-pair contributions, in pair_id order so resampling is reproducible.
    std::map<std::string, ConfusionCounts> by_pair;
    for (const auto& v : verdicts) {
        auto& c = by_pair[v.pair_id];
        auto single = confusion_counts({v});
        c.tp += single.tp;
        c.fp += single.fp;
        c.tn += single.tn;
        c.fn += single.fn;
        c.unparseable += single.unparseable;
    }
    std::vector<ConfusionCounts> units;
    units.reserve(by_pair.size());
    for (auto& [id, c] : by_pair)
        units.push_back(c);
    report.unstable = units.size() < 5;

    std::mt19937_64 rng(options.seed);
    std::vector<double> fprs, fnrs, avgs, tprs;
    for (int r = 0; r < options.resamples; ++r) {
        ConfusionCounts c;
        for (std::size_t k = 0; k < units.size(); ++k) {
            const auto& u = units[uniform_index(rng, units.size())];
            c.tp += u.tp;
            c.fp += u.fp;
            c.tn += u.tn;
            c.fn += u.fn;
        }
        const auto n_mention = c.fp + c.tn;
        const auto n_use = c.tp + c.fn;
        std::optional<double> fpr, fnr;
        if (n_mention > 0) {
            fpr = static_cast<double>(c.fp) / static_cast<double>(n_mention);
            fprs.push_back(*fpr);
        }
        if (n_use > 0) {
            fnr = static_cast<double>(c.fn) / static_cast<double>(n_use);
            fnrs.push_back(*fnr);
            tprs.push_back(static_cast<double>(c.tp) / static_cast<double>(n_use));
        }
        if (fpr && fnr)
            avgs.push_back((*fpr + *fnr) / 2.0);
    }
    report.fpr_ci = percentile_interval(fprs, options.level, report.fpr);
    report.fnr_ci = percentile_interval(fnrs, options.level, report.fnr);
    report.tpr_ci = percentile_interval(tprs, options.level, report.tpr);
    report.avg_error_ci = percentile_interval(avgs, options.level, report.avg_error);
    return report;
}

MitigationDelta mitigation_delta(double baseline_rate, double treated_rate, DeltaMetric metric)
{
    if (!(baseline_rate > 0.0))
        throw UndefinedDeltaError("relative change is undefined for a zero baseline rate");
    return {metric, baseline_rate, treated_rate, (treated_rate - baseline_rate) / baseline_rate};
}

MitigationDelta mitigation_delta(const RateReport& baseline, const RateReport& treated,
                                 DeltaMetric metric)
{
    const auto& b = metric == DeltaMetric::fpr_mention ? baseline.fpr : baseline.tpr;
    const auto& t = metric == DeltaMetric::fpr_mention ? treated.fpr : treated.tpr;
    if (!b || !t)
        throw UndefinedDeltaError("rate absent in baseline or treated report");
    return mitigation_delta(*b, *t, metric);
}

// ---------------------------------------------------------------------------
// Logs and manifests

std::string serialize_verdict(const Verdict& v)
{
    ojson j;
    j["pair_id"] = v.pair_id;
    j["side"] = to_string(v.side);
    j["task"] = to_string(v.task);
    j["subtask"] = to_string(v.subtask);
    j["mode"] = to_string(v.mode);
    j["template_id"] = v.template_id;
    j["sample_index"] = v.sample_index;
    j["label"] = to_string(v.parsed.label);
    j["raw"] = v.parsed.raw;
    j["extraction_rule"] = v.parsed.extraction_rule;
    if (v.parsed.rationale_text)
        j["rationale"] = *v.parsed.rationale_text;
    else
        j["rationale"] = nullptr;
    j["raw_ref"] = v.raw_ref;
    if (v.error)
        j["error"] = *v.error;
    else
        j["error"] = nullptr;
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string serialize_verdicts(const std::vector<Verdict>& verdicts)
{
    std::string out;
    for (const auto& v : verdicts) {
        out += serialize_verdict(v);
        out += '\n';
    }
    return out;
}

std::vector<Verdict> parse_verdicts(std::string_view jsonl)
{
    std::vector<Verdict> out;
    std::istringstream in{std::string(jsonl)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        try {
            auto j = nlohmann::json::parse(line);
            Verdict v;
            v.pair_id = j.at("pair_id").get<std::string>();
            const auto side = j.at("side").get<std::string>();
            if (side != "use" && side != "mention")
                throw DataError("bad side '" + side + "'");
            v.side = side == "use" ? Side::use : Side::mention;
            v.task = parse_task(j.at("task").get<std::string>());
            v.subtask = parse_subtask(j.at("subtask").get<std::string>());
            v.mode = parse_mode(j.at("mode").get<std::string>());
            v.template_id = j.at("template_id").get<std::string>();
            v.sample_index = j.value("sample_index", 0);
            v.parsed.label = parse_label_name(j.at("label").get<std::string>());
            v.parsed.raw = j.value("raw", std::string{});
            v.parsed.extraction_rule = j.value("extraction_rule", std::string{});
            if (j.contains("rationale") && j["rationale"].is_string())
                v.parsed.rationale_text = j["rationale"].get<std::string>();
            v.raw_ref = j.value("raw_ref", std::string{});
            if (j.contains("error") && j["error"].is_string())
                v.error = j["error"].get<std::string>();
            out.push_back(std::move(v));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("verdict log line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw DataError("verdict log line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<Verdict> read_verdict_log(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read verdict log " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_verdicts(ss.str());
}

std::string corpus_digest(const std::vector<StatementPair>& pairs)
{
    return sha256_hex(serialize_pairs(pairs));
}

std::string manifest_json(const RunManifest& m, bool include_call_counters)
{
    ojson j;
    j["run_id"] = m.run_id;
    j["corpus_digest"] = m.corpus_digest;
    j["task"] = to_string(m.spec.task);
    j["subtask"] = to_string(m.spec.subtask);
    j["mode"] = to_string(m.spec.mode);
    j["template_id"] = m.spec.template_id;
    j["template_digest"] = m.template_digest;
    j["template_provenance"] = to_string(m.provenance);
    j["backend"] = ojson::parse(m.backend_json);
    j["seed"] = m.seed;
    j["sample_index"] = m.sample_index;
    j["counts"] = {{"tp", m.counts.tp},
                   {"fp", m.counts.fp},
                   {"tn", m.counts.tn},
                   {"fn", m.counts.fn},
                   {"unparseable", m.counts.unparseable}};
    j["verdicts"] = {{"total", m.summary.total},
                     {"parseable", m.summary.parseable},
                     {"unparseable", m.summary.unparseable},
                     {"failed", m.summary.failed}};
    j["intervals"] = {{"method", "percentile bootstrap over pairs"},
                      {"resamples", m.bootstrap.resamples},
                      {"level", m.bootstrap.level},
                      {"seed", m.bootstrap.seed}};
    if (include_call_counters)
        j["calls"] = {{"backend_calls", m.summary.backend_calls},
                      {"cache_hits", m.summary.cache_hits}};
    return j.dump(2) + "\n";
}

RunManifest read_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot read manifest " + path.string());
    try {
        auto j = nlohmann::json::parse(in);
        RunManifest m;
        m.run_id = j.at("run_id").get<std::string>();
        m.corpus_digest = j.at("corpus_digest").get<std::string>();
        m.spec.task = parse_task(j.at("task").get<std::string>());
        m.spec.subtask = parse_subtask(j.at("subtask").get<std::string>());
        m.spec.mode = parse_mode(j.at("mode").get<std::string>());
        m.spec.template_id = j.at("template_id").get<std::string>();
        m.template_digest = j.value("template_digest", std::string{});
        m.backend_json = j.at("backend").dump();
        m.seed = j.value("seed", std::uint64_t{0});
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

} // namespace usemention
