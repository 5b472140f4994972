#include "usemention/cli.hpp"

#include "usemention/analysis.hpp"
#include "usemention/digest.hpp"
#include "usemention/errors.hpp"
#include "usemention/evaluation.hpp"
#include "usemention/prompting.hpp"
#include "usemention/report.hpp"

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace usemention {

namespace fs = std::filesystem;

std::string expand_env(const std::string& value)
{
    std::string out;
    std::size_t pos = 0;
    while (pos < value.size()) {
        auto start = value.find("${", pos);
        if (start == std::string::npos) {
            out.append(value, pos);
            break;
        }
        auto end = value.find('}', start + 2);
        if (end == std::string::npos)
            throw ConfigError("unterminated ${ in '" + value + "'");
        out.append(value, pos, start - pos);
        const std::string name = value.substr(start + 2, end - start - 2);
        const char* env = std::getenv(name.c_str());
        if (env == nullptr)
            throw ConfigError("environment variable " + name + " is not set");
        out += env;
        pos = end + 1;
    }
    return out;
}

namespace {

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) {
        auto t = trim(item);
        if (!t.empty())
            out.emplace_back(t);
    }
    return out;
}

bool parse_bool(const std::string& s)
{
    const auto v = to_lower_ascii(trim(s));
    if (v == "true" || v == "yes" || v == "1")
        return true;
    if (v == "false" || v == "no" || v == "0")
        return false;
    throw ConfigError("expected a boolean, got '" + s + "'");
}

BackendConfig parse_backend_section(const std::string& name, const boost::property_tree::ptree& sec)
{
    auto get = [&](const char* key) -> std::optional<std::string> {
        if (auto v = sec.get_optional<std::string>(boost::property_tree::ptree::path_type(key, '/')))
            return expand_env(std::string(trim(*v)));
        return std::nullopt;
    };
    auto number = [&](const char* key, const std::string& v) {
        try {
            std::size_t used = 0;
            double d = std::stod(v, &used);
            if (used != v.size())
                throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw ConfigError("backend '" + name + "': " + key + " is not a number");
        }
    };

    BackendConfig cfg;
    cfg.name = name;
    cfg.kind = parse_backend_kind(get("kind").value_or("stub"));
    if (cfg.kind == BackendKind::chat_completion) {
        cfg.temperature = 1.0;
        cfg.max_output_tokens = 1;
        cfg.auth_token_env = "OPENAI_API_KEY";
    }
    if (auto v = get("base_url"))
        cfg.base_url = *v;
    if (auto v = get("model_name"))
        cfg.model_name = *v;
    if (auto v = get("temperature"))
        cfg.temperature = number("temperature", *v);
    if (auto v = get("max_output_tokens"))
        cfg.max_output_tokens = static_cast<int>(number("max_output_tokens", *v));
    if (auto v = get("score_attribute"))
        cfg.score_attribute = *v;
    if (auto v = get("score_threshold"))
        cfg.score_threshold = number("score_threshold", *v);
    if (auto v = get("timeout"))
        cfg.timeout_seconds = static_cast<int>(number("timeout", *v));
    if (auto v = get("max_retries"))
        cfg.max_retries = static_cast<int>(number("max_retries", *v));
    if (auto v = get("max_concurrency"))
        cfg.max_concurrency = static_cast<int>(number("max_concurrency", *v));
    if (auto v = get("auth_token_env"))
        cfg.auth_token_env = *v;
    if (auto v = get("markers"))
        cfg.stub.markers = split_list(*v);
    if (auto v = get("positive_when_marked"))
        cfg.stub.positive_when_marked = parse_bool(*v);
    if (auto v = get("mention_cues"))
        cfg.stub.mention_cues = split_list(*v);
    if (auto v = get("profile")) {
        if (*v == "regression")
            cfg = regression_profile(std::move(cfg));
        else if (*v != "paper")
            throw ConfigError("backend '" + name + "': unknown profile '" + *v + "'");
    }
    cfg.validate();
    return cfg;
}

BackendConfig default_stub()
{
    BackendConfig cfg;
    cfg.name = "stub";
    cfg.kind = BackendKind::stub;
    return cfg;
}

} // namespace

RunConfig load_run_config(const fs::path& path)
{
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    RunConfig rc;
    for (const auto& [section, body] : tree) {
        if (section.rfind("backend.", 0) == 0) {
            const auto name = section.substr(8);
            rc.backends[name] = parse_backend_section(name, body);
        } else if (section == "run") {
            for (const auto& [key, node] : body) {
                const std::string value = expand_env(std::string(trim(node.data())));
                try {
                    if (key == "seed")
                        rc.seed = std::stoull(value);
                    else if (key == "out")
                        rc.out_dir = value;
                    else if (key == "cache")
                        rc.cache_dir = value;
                    else if (key == "resamples")
                        rc.resamples = std::stoi(value);
                    else if (key == "level")
                        rc.level = std::stod(value);
                    else if (key.rfind("corpus.", 0) == 0)
                        rc.corpora[parse_subtask(key.substr(7))] = value;
                    else
                        throw ConfigError("config: unknown [run] key '" + key + "'");
                } catch (const std::invalid_argument&) {
                    throw ConfigError("config: bad value for " + key);
                } catch (const std::out_of_range&) {
                    throw ConfigError("config: value out of range for " + key);
                }
            }
        } else {
            throw ConfigError("config: unknown section [" + section + "]");
        }
    }
    return rc;
}

namespace {

struct Flags
{
    std::string config, corpus, subtask, task = "both", backend = "stub", mode = "zero-shot";
    std::string out, cache, templates, profile;
    std::uint64_t seed = 0;
    int resamples = 2000;
    double level = 0.95;

    std::string format = "jsonl", use_col = "HATE_SPEECH", mention_col = "COUNTER_NARRATIVE",
                identity_col = "TARGET", id_col, source = "unknown";

    std::string analysis = "all", key = "quotes", run_dir, task1_log, task2_log, model;
    double prior_scale = 10.0;
    std::size_t top = 15;

    std::string baseline, name = "summary";
    std::vector<std::string> treated, runs;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* resamples_opt = nullptr;
    CLI::Option* level_opt = nullptr;
};

class Context
{
public:
    Context(const Flags& f, std::ostream& out, std::ostream& err) : f_(f), out_(out), err_(err)
    {
        if (!f.config.empty())
            rc_ = load_run_config(f.config);
    }

    std::ostream& out() { return out_; }
    std::ostream& err() { return err_; }
    const Flags& flags() const { return f_; }

    fs::path out_dir() const
    {
        if (!f_.out.empty())
            return f_.out;
        return rc_.out_dir.value_or("out");
    }

    fs::path cache_dir() const
    {
        if (!f_.cache.empty())
            return f_.cache;
        return rc_.cache_dir.value_or(out_dir() / "cache");
    }

    std::uint64_t seed() const
    {
        if (f_.seed_opt->count() > 0)
            return f_.seed;
        if (rc_.seed)
            return *rc_.seed;
        throw ConfigError("--seed is required for this command");
    }

    BootstrapOptions bootstrap() const
    {
        BootstrapOptions b;
        b.resamples = f_.resamples_opt->count() > 0 ? f_.resamples : rc_.resamples.value_or(2000);
        b.level = f_.level_opt->count() > 0 ? f_.level : rc_.level.value_or(0.95);
        b.seed = seed();
        return b;
    }

    fs::path corpus_path(std::optional<Subtask> subtask) const
    {
        if (!f_.corpus.empty())
            return f_.corpus;
        if (subtask) {
            auto it = rc_.corpora.find(*subtask);
            if (it != rc_.corpora.end())
                return it->second;
        }
        throw ConfigError("no corpus given (use --corpus or corpus.<subtask> in the config)");
    }

    BackendConfig backend() const
    {
        BackendConfig cfg;
        if (auto it = rc_.backends.find(f_.backend); it != rc_.backends.end())
            cfg = it->second;
        else if (f_.backend == "stub")
            cfg = default_stub();
        else
            throw ConfigError("unknown backend '" + f_.backend + "'");
        if (f_.profile == "regression")
            cfg = regression_profile(std::move(cfg));
        else if (!f_.profile.empty() && f_.profile != "paper")
            throw ConfigError("unknown profile '" + f_.profile + "'");
        return cfg;
    }

    const TemplateRegistry& registry()
    {
        if (f_.templates.empty())
            return TemplateRegistry::builtin();
        if (!custom_)
            custom_ = TemplateRegistry::load_dir(f_.templates);
        return *custom_;
    }

private:
    const Flags& f_;
    std::ostream& out_;
    std::ostream& err_;
    RunConfig rc_;
    std::optional<TemplateRegistry> custom_;
};

void write_file(const fs::path& path, const std::string& content)
{
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write " + path.string());
    out << content;
}

std::string fixed(double v, int decimals = 2)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string mode_flag(PromptMode m)
{
    std::string s(to_string(m));
    for (auto& c : s)
        if (c == '_')
            c = '-';
    return s;
}

std::string log_name(Task t)
{
    return std::string(to_string(t)) + ".verdicts.jsonl";
}

std::string manifest_name(Task t)
{
    return std::string(to_string(t)) + ".manifest.json";
}

void require_file(const fs::path& p, const std::string& what)
{
    if (!fs::exists(p))
        throw DataError("missing prerequisite: " + what + " (" + p.string() + ")");
}

std::string backend_name_of(const RunManifest& m)
{
    auto j = nlohmann::json::parse(m.backend_json);
    return j.value("name", std::string("model"));
}

void print_rates(std::ostream& os, const RateReport& r)
{
    auto show = [&](const char* name, const std::optional<double>& v) {
        os << "  " << name << ": " << (v ? format_percent(*v) + "%" : std::string("n/a")) << "\n";
    };
    show("false positive rate", r.fpr);
    show("false negative rate", r.fnr);
    show("average error rate", r.avg_error);
}

// ---------------------------------------------------------------------------

int cmd_ingest(Context& ctx)
{
    const auto& f = ctx.flags();
    if (f.subtask.empty())
        throw ConfigError("--subtask is required");
    const Subtask subtask = parse_subtask(f.subtask);
    const fs::path input = ctx.corpus_path(subtask);
    if (!fs::exists(input))
        throw DataError("cannot read input " + input.string());

    LoadResult loaded;
    if (f.format == "jsonl") {
        loaded = load_pairs(input, subtask);
    } else if (f.format == "csv") {
        CsvColumns cols{f.use_col, f.mention_col, f.identity_col, f.id_col};
        loaded = convert_csv(input, subtask, cols, f.source);
    } else {
        throw ConfigError("unknown --format '" + f.format + "'");
    }

    const fs::path out_dir = ctx.out_dir();
    const std::string sub(to_string(subtask));
    write_file(out_dir / ("corpus-" + sub + ".jsonl"), serialize_pairs(loaded.pairs));
    const fs::path rejection_file = out_dir / ("rejections-" + sub + ".jsonl");
    if (!loaded.rejections.empty()) {
        std::string rej;
        for (const auto& r : loaded.rejections)
            rej += serialize_rejection(r) + "\n";
        write_file(rejection_file, rej);
    } else if (fs::exists(rejection_file)) {
        fs::remove(rejection_file);
    }

    const auto stats = corpus_stats(loaded.pairs);
    auto& os = ctx.out();
    os << "pairs: " << stats.pair_count << "\n";
    os << "rejected: " << loaded.rejections.size() << "\n";
    if (loaded.unknown_identity_count > 0)
        os << "unknown identity labels mapped to Other: " << loaded.unknown_identity_count << "\n";
    os << "mean focal length (words): "
       << (stats.mean_focal_length ? fixed(*stats.mean_focal_length) : std::string("n/a")) << "\n";
    os << "mentions with quotation marks: "
       << (stats.quotation_rate_mentions ? format_percent(*stats.quotation_rate_mentions) + "%"
                                         : std::string("n/a"))
       << "\n";
    for (const auto& [id, n] : stats.per_identity)
        os << "  " << display_name(id) << ": " << n << "\n";
    for (const auto& r : loaded.rejections)
        ctx.err() << "line " << r.line << ": " << r.reason << "\n";
    return loaded.rejections.empty() ? 0 : 2;
}

int cmd_evaluate(Context& ctx)
{
    const auto& f = ctx.flags();
    if (f.subtask.empty())
        throw ConfigError("--subtask is required");
    const Subtask subtask = parse_subtask(f.subtask);
    const PromptMode mode = parse_mode(f.mode);
    std::vector<Task> tasks;
    if (f.task == "use-mention" || f.task == "both")
        tasks.push_back(Task::use_mention);
    if (f.task == "downstream" || f.task == "both")
        tasks.push_back(Task::downstream);
    if (tasks.empty())
        throw ConfigError("--task must be use-mention, downstream or both");

    const std::uint64_t seed = ctx.seed();
    const BootstrapOptions boot = ctx.bootstrap();
    const BackendConfig backend = ctx.backend();
    const TemplateRegistry& registry = ctx.registry();

    // Configuration errors surface here, before any pair is sent.
    std::vector<std::pair<PromptSpec, BackendConfig>> plans;
    for (Task t : tasks) {
        PromptSpec spec = make_spec(t, subtask, t == Task::use_mention ? PromptMode::zero_shot : mode);
        if (backend.kind != BackendKind::score_endpoint)
            registry.at(spec.template_id);
        plans.emplace_back(spec, config_for_prompt(backend, spec));
        plans.back().second.validate();
    }

    const fs::path corpus = ctx.corpus_path(subtask);
    auto loaded = load_pairs(corpus, subtask);
    for (const auto& r : loaded.rejections)
        ctx.err() << corpus.string() << " line " << r.line << ": " << r.reason << "\n";
    if (loaded.pairs.empty())
        throw DataError("corpus " + corpus.string() + " holds no valid pairs");

    const std::string run_id = std::string(to_string(subtask)) + "-" + backend.name + "-" +
                               mode_flag(mode) + "-seed" + std::to_string(seed);
    const fs::path run_dir = ctx.out_dir() / "runs" / run_id;
    const std::string digest = corpus_digest(loaded.pairs);

    struct PendingTable
    {
        std::string name, csv, markdown;
    };
    std::vector<PendingTable> tables;
    std::string manifest_refs;
    std::vector<TradeoffPoint> points;
    bool warnings = !loaded.rejections.empty();
    auto& os = ctx.out();
    os << "run: " << run_id << "\n";
    for (auto& [spec, cfg] : plans) {
        ModelClient client(cfg, ctx.cache_dir());
        RunOptions opts;
        opts.seed = seed;
        opts.registry = &registry;
        auto result = run_task(loaded.pairs, spec, client, opts);

        RunManifest m;
        m.run_id = run_id;
        m.corpus_digest = digest;
        m.spec = spec;
        if (registry.contains(spec.template_id)) {
            m.template_digest = registry.digest(spec.template_id);
            m.provenance = registry.at(spec.template_id).provenance;
        }
        m.backend_json = cfg.redacted_json();
        m.seed = seed;
        m.summary = result.summary;
        m.counts = confusion_counts(result.verdicts);
        m.bootstrap = boot;

        write_file(run_dir / log_name(spec.task), serialize_verdicts(result.verdicts));
        write_file(run_dir / manifest_name(spec.task), manifest_json(m, true));
        manifest_refs += manifest_json(m, false);

        os << to_string(spec.task) << ": " << result.summary.total << " verdicts, "
           << result.summary.unparseable << " unparseable, " << result.summary.failed
           << " failed, backend calls " << result.summary.backend_calls << ", cache hits "
           << result.summary.cache_hits << "\n";
        if (result.summary.unparseable > 0)
            warnings = true;

        RateReport report;
        try {
            report = bootstrap_ci(result.verdicts, boot);
        } catch (const EmptyReportError& e) {
            ctx.err() << to_string(spec.task) << ": " << e.what() << "\n";
            warnings = true;
            continue;
        }
        print_rates(os, report);
        std::vector<MetricsRow> rows{{backend.name, subtask, report}};
        tables.push_back({"metrics-" + std::string(to_string(spec.task)),
                          emit_metrics_table(rows, TableFormat::csv),
                          emit_metrics_table(rows, TableFormat::markdown)});
        if (spec.task == Task::downstream && report.tpr && report.fpr)
            points.push_back({mode_flag(mode), *report.tpr, *report.fpr});
    }

    ReportBundle bundle(run_id, sha256_hex(manifest_refs));
    for (auto& t : tables)
        bundle.add_table(t.name, std::move(t.csv), std::move(t.markdown));
    if (!points.empty())
        bundle.add_plot("tradeoff",
                        emit_tradeoff_plot(points, backend.name + " " + std::string(to_string(subtask))));
    const auto written = bundle.write(ctx.out_dir() / "reports");
    os << "verdicts: " << run_dir.string() << "\n";
    os << "report: " << written.string() << "\n";
    return warnings ? 2 : 0;
}

struct LoadedRun
{
    fs::path dir;
    RunManifest manifest;
    std::vector<Verdict> verdicts;
};

LoadedRun load_run(const fs::path& dir, Task task)
{
    const fs::path log = dir / log_name(task);
    const fs::path manifest = dir / manifest_name(task);
    require_file(log, std::string(to_string(task)) + " verdict log");
    require_file(manifest, std::string(to_string(task)) + " manifest");
    return {dir, read_manifest(manifest), read_verdict_log(log)};
}

int cmd_analyze(Context& ctx)
{
    const auto& f = ctx.flags();
    const std::string which = f.analysis;
    if (which != "all" && which != "propagation" && which != "stratify" && which != "fightin-words")
        throw ConfigError("--analysis must be propagation, stratify, fightin-words or all");
    const bool want_prop = which == "all" || which == "propagation";
    const bool want_strat = which == "all" || which == "stratify";
    const bool want_terms = which == "all" || which == "fightin-words";

    fs::path task1_log = f.task1_log;
    fs::path task2_log = f.task2_log;
    if (!f.run_dir.empty()) {
        if (task1_log.empty())
            task1_log = fs::path(f.run_dir) / log_name(Task::use_mention);
        if (task2_log.empty())
            task2_log = fs::path(f.run_dir) / log_name(Task::downstream);
    }
    if (task2_log.empty())
        throw ConfigError("give --run or --task2-log");
    require_file(task2_log, "downstream verdict log");
    const auto task2 = read_verdict_log(task2_log);
    if (task2.empty())
        throw DataError(task2_log.string() + " holds no verdicts");
    const Subtask subtask = task2.front().subtask;

    std::string model = f.model;
    std::string bundle_id = "analysis";
    if (!f.run_dir.empty()) {
        bundle_id = "analysis-" + fs::path(f.run_dir).lexically_normal().filename().string();
        const fs::path manifest = fs::path(f.run_dir) / manifest_name(Task::downstream);
        if (model.empty() && fs::exists(manifest))
            model = backend_name_of(read_manifest(manifest));
    }
    if (model.empty())
        model = "model";

    ReportBundle bundle(bundle_id, fs::exists(fs::path(f.run_dir) / manifest_name(Task::downstream))
                                       ? file_sha256_hex(fs::path(f.run_dir) / manifest_name(Task::downstream))
                                       : std::string{});
    auto& os = ctx.out();
    bool warnings = false;

    if (want_prop) {
        if (task1_log.empty())
            throw ConfigError("propagation needs --run or --task1-log");
        require_file(task1_log, "use-mention verdict log");
        const auto task1 = read_verdict_log(task1_log);
        auto report = propagation_analysis(task1, task2);
        std::vector<PropagationRow> rows{{model, report}};
        bundle.add_table("propagation", emit_propagation_table(rows, TableFormat::csv),
                         emit_propagation_table(rows, TableFormat::markdown));
        os << "propagation: FPR when use-mention wrong "
           << (report.fpr_task1_incorrect ? format_percent(*report.fpr_task1_incorrect) + "%" : "n/a")
           << ", when right "
           << (report.fpr_task1_correct ? format_percent(*report.fpr_task1_correct) + "%" : "n/a");
        if (report.test)
            os << ", chi2 " << fixed(report.test->statistic) << " p " << format_p_value(report.test->p_value);
        os << "\n";
        if (report.excluded > 0) {
            os << "  excluded mentions: " << report.excluded << "\n";
            warnings = true;
        }
    }

    if (want_strat || want_terms) {
        const fs::path corpus = ctx.corpus_path(subtask);
        auto loaded = load_pairs(corpus, subtask);
        if (!loaded.rejections.empty())
            warnings = true;

        if (want_strat) {
            std::vector<StratumKey> keys;
            if (f.key == "identity" || f.key == "both")
                keys.push_back(StratumKey::target_identity);
            if (f.key == "quotes" || f.key == "both")
                keys.push_back(StratumKey::mention_has_quotes);
            if (keys.empty())
                throw ConfigError("--key must be identity, quotes or both");
            for (StratumKey key : keys) {
                auto strat = stratify(task2, loaded.pairs, key);
                const std::string name =
                    key == StratumKey::target_identity ? "stratify-identity" : "stratify-quotes";
                bundle.add_table(name, emit_stratification_table(strat, TableFormat::csv),
                                 emit_stratification_table(strat, TableFormat::markdown));
                os << name << ":\n";
                for (const auto& g : strat.groups)
                    os << "  " << g.group << ": "
                       << (g.fpr ? format_percent(*g.fpr) + "%" : std::string("n/a")) << " of "
                       << g.n_mention << "\n";
                if (strat.test)
                    os << "  chi2 " << fixed(strat.test->statistic) << " p "
                       << format_p_value(strat.test->p_value) << "\n";
            }
        }

        if (want_terms) {
            auto part = partition_mentions(task2, loaded.pairs);
            auto terms = fightin_words(part.d_pos, part.d_neg, f.prior_scale);
            bundle.add_table("fightin-words", emit_term_table(terms, TableFormat::csv, f.top),
                             emit_term_table(terms, TableFormat::markdown, f.top));
            os << "fightin-words: " << part.d_pos.size() << " misclassified vs " << part.d_neg.size()
               << " correct mentions\n";
            for (std::size_t i = 0; i < terms.size() && i < f.top; ++i)
                os << "  " << terms[i].term << " " << fixed(terms[i].zscore) << "\n";
        }
    }

    const auto written = bundle.write(ctx.out_dir() / "reports");
    os << "report: " << written.string() << "\n";
    return warnings ? 2 : 0;
}

int cmd_mitigate(Context& ctx)
{
    const auto& f = ctx.flags();
    if (f.baseline.empty() || f.treated.empty())
        throw ConfigError("mitigate needs --baseline and at least one --treated run directory");
    const LoadedRun base = load_run(f.baseline, Task::downstream);
    std::vector<LoadedRun> treated;
    for (const auto& dir : f.treated)
        treated.push_back(load_run(dir, Task::downstream));

    const std::string base_backend = backend_name_of(base.manifest);
    for (const auto& t : treated) {
        if (t.manifest.corpus_digest != base.manifest.corpus_digest)
            throw DataError("corpus digest of " + t.dir.string() + " differs from the baseline");
        if (backend_name_of(t.manifest) != base_backend)
            throw DataError("backend of " + t.dir.string() + " differs from the baseline (" +
                            base_backend + ")");
    }

    BootstrapOptions boot;
    boot.resamples = f.resamples_opt->count() > 0 ? f.resamples : 2000;
    boot.level = f.level_opt->count() > 0 ? f.level : 0.95;
    boot.seed = f.seed_opt->count() > 0 ? f.seed : base.manifest.seed;

    auto& os = ctx.out();
    bool warnings = false;
    const RateReport base_report = bootstrap_ci(base.verdicts, boot);
    std::vector<MitigationRow> rows;
    rows.push_back({mode_flag(base.manifest.spec.mode), base_report, std::nullopt, std::nullopt});
    std::vector<TradeoffPoint> points;
    if (base_report.tpr && base_report.fpr)
        points.push_back({rows.back().mode, *base_report.tpr, *base_report.fpr});
    std::string refs = file_sha256_hex(base.dir / manifest_name(Task::downstream));

    for (const auto& t : treated) {
        MitigationRow row{mode_flag(t.manifest.spec.mode), bootstrap_ci(t.verdicts, boot), std::nullopt,
                          std::nullopt};
        for (DeltaMetric metric : {DeltaMetric::fpr_mention, DeltaMetric::tpr_use}) {
            try {
                auto d = mitigation_delta(base_report, row.report, metric);
                (metric == DeltaMetric::fpr_mention ? row.fpr_delta : row.tpr_delta) = d;
            } catch (const UndefinedDeltaError& e) {
                ctx.err() << row.mode << ": " << e.what() << "\n";
                warnings = true;
            }
        }
        os << row.mode << ": FPR change "
           << (row.fpr_delta ? format_signed_percent(row.fpr_delta->delta) : std::string("n/a"))
           << ", TPR change "
           << (row.tpr_delta ? format_signed_percent(row.tpr_delta->delta) : std::string("n/a"))
           << "\n";
        if (row.report.tpr && row.report.fpr)
            points.push_back({row.mode, *row.report.tpr, *row.report.fpr});
        refs += file_sha256_hex(t.dir / manifest_name(Task::downstream));
        rows.push_back(std::move(row));
    }

    const std::string id = "mitigation-" + base.dir.lexically_normal().filename().string();
    ReportBundle bundle(id, sha256_hex(refs));
    bundle.add_table("mitigation", emit_mitigation_table(rows, TableFormat::csv),
                     emit_mitigation_table(rows, TableFormat::markdown));
    if (!points.empty())
        bundle.add_plot("tradeoff", emit_tradeoff_plot(points, base_backend + " " +
                                                                   std::string(to_string(base.manifest.spec.subtask))));
    const auto written = bundle.write(ctx.out_dir() / "reports");
    os << "report: " << written.string() << "\n";
    return warnings ? 2 : 0;
}

int cmd_report(Context& ctx)
{
    const auto& f = ctx.flags();
    if (f.runs.empty())
        throw ConfigError("report needs at least one --run directory");
    std::map<Task, std::vector<MetricsRow>> rows;
    std::vector<TradeoffPoint> points;
    std::string refs;
    for (const auto& dir : f.runs) {
        bool any = false;
        for (Task task : {Task::use_mention, Task::downstream}) {
            if (!fs::exists(fs::path(dir) / log_name(task)))
                continue;
            any = true;
            auto run = load_run(dir, task);
            BootstrapOptions boot;
            boot.resamples = f.resamples_opt->count() > 0 ? f.resamples : 2000;
            boot.level = f.level_opt->count() > 0 ? f.level : 0.95;
            boot.seed = f.seed_opt->count() > 0 ? f.seed : run.manifest.seed;
            auto report = bootstrap_ci(run.verdicts, boot);
            std::string model = backend_name_of(run.manifest);
            if (task == Task::downstream) {
                model += " (" + mode_flag(run.manifest.spec.mode) + ")";
                if (report.tpr && report.fpr)
                    points.push_back({model, *report.tpr, *report.fpr});
            }
            rows[task].push_back({model, run.manifest.spec.subtask, report});
            refs += file_sha256_hex(fs::path(dir) / manifest_name(task));
        }
        if (!any)
            throw DataError("no verdict logs in " + dir);
    }
    ReportBundle bundle(f.name, sha256_hex(refs));
    for (auto& [task, r] : rows)
        bundle.add_table("metrics-" + std::string(to_string(task)), emit_metrics_table(r, TableFormat::csv),
                         emit_metrics_table(r, TableFormat::markdown));
    if (!points.empty())
        bundle.add_plot("tradeoff", emit_tradeoff_plot(points));
    const auto written = bundle.write(ctx.out_dir() / "reports");
    if (auto it = rows.find(Task::downstream); it != rows.end())
        ctx.out() << emit_metrics_table(it->second, TableFormat::markdown);
    else if (auto it1 = rows.find(Task::use_mention); it1 != rows.end())
        ctx.out() << emit_metrics_table(it1->second, TableFormat::markdown);
    ctx.out() << "report: " << written.string() << "\n";
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    Flags f;
    CLI::App app{"Use/mention robustness evaluation for counterspeech classifiers", "usemention"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "usemention 1.0.0");

    auto common = [&f](CLI::App* sub) {
        sub->add_option("--config", f.config, "INI run configuration")->check(CLI::ExistingFile);
        sub->add_option("--out", f.out, "Output directory (default: out)");
        sub->add_option("--seed", f.seed, "Seed for work order and bootstrap");
        sub->add_option("--resamples", f.resamples, "Bootstrap resamples");
        sub->add_option("--level", f.level, "Confidence level");
    };

    auto* ingest = app.add_subcommand("ingest", "Validate a corpus and report its statistics");
    common(ingest);
    ingest->add_option("--corpus", f.corpus, "Input corpus (JSONL or CSV)");
    ingest->add_option("--subtask", f.subtask, "hate or misinformation");
    ingest->add_option("--format", f.format, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));
    ingest->add_option("--use-col", f.use_col, "CSV column with the use statement");
    ingest->add_option("--mention-col", f.mention_col, "CSV column with the mention statement");
    ingest->add_option("--identity-col", f.identity_col, "CSV column with the target identity");
    ingest->add_option("--id-col", f.id_col, "CSV column with the pair id");
    ingest->add_option("--source", f.source, "Source dataset name for converted records");

    auto* evaluate = app.add_subcommand("evaluate", "Classify both sides of every pair");
    common(evaluate);
    evaluate->add_option("--corpus", f.corpus, "Unified JSONL corpus");
    evaluate->add_option("--subtask", f.subtask, "hate or misinformation");
    evaluate->add_option("--task", f.task, "use-mention, downstream or both")
        ->check(CLI::IsMember({"use-mention", "downstream", "both"}));
    evaluate->add_option("--backend", f.backend, "Backend name from the config (default: stub)");
    evaluate->add_option("--mode", f.mode, "zero-shot, few-shot, mitigation or cot-mitigation");
    evaluate->add_option("--cache", f.cache, "Response cache directory");
    evaluate->add_option("--templates", f.templates, "Template directory overriding the built-ins");
    evaluate->add_option("--profile", f.profile, "paper or regression")
        ->check(CLI::IsMember({"paper", "regression"}));

    auto* analyze = app.add_subcommand("analyze", "Error propagation, stratification and term analysis");
    common(analyze);
    analyze->add_option("--run", f.run_dir, "Run directory from evaluate");
    analyze->add_option("--task1-log", f.task1_log, "Use-mention verdict log");
    analyze->add_option("--task2-log", f.task2_log, "Downstream verdict log");
    analyze->add_option("--corpus", f.corpus, "Corpus the run was made on");
    analyze->add_option("--analysis", f.analysis, "propagation, stratify, fightin-words or all");
    analyze->add_option("--key", f.key, "Stratification key: identity, quotes or both");
    analyze->add_option("--model", f.model, "Model name shown in tables");
    analyze->add_option("--prior-scale", f.prior_scale, "Total prior mass for term log-odds")
        ->check(CLI::PositiveNumber);
    analyze->add_option("--top", f.top, "Terms to list");

    auto* mitigate = app.add_subcommand("mitigate", "Compare prompt modes against a baseline run");
    common(mitigate);
    mitigate->add_option("--baseline", f.baseline, "Baseline run directory")->required();
    mitigate->add_option("--treated", f.treated, "Treated run directory (repeatable)")->required();

    auto* report = app.add_subcommand("report", "Metrics table across runs");
    common(report);
    report->add_option("--run", f.runs, "Run directory (repeatable)")->required();
    report->add_option("--name", f.name, "Report name");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    for (CLI::App* sub : app.get_subcommands()) {
        f.seed_opt = sub->get_option("--seed");
        f.resamples_opt = sub->get_option("--resamples");
        f.level_opt = sub->get_option("--level");
    }

    try {
        Context ctx(f, out, err);
        if (ingest->parsed())
            return cmd_ingest(ctx);
        if (evaluate->parsed())
            return cmd_evaluate(ctx);
        if (analyze->parsed())
            return cmd_analyze(ctx);
        if (mitigate->parsed())
            return cmd_mitigate(ctx);
        return cmd_report(ctx);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace usemention
