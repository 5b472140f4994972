#include "usemention/errors.hpp"
#include "usemention/evaluation.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace usemention;
namespace fs = std::filesystem;

namespace {

Verdict verdict(const std::string& id, Side side, Label label)
{
    Verdict v;
    v.pair_id = id;
    v.side = side;
    v.task = Task::downstream;
    v.template_id = "downstream.hate.zero_shot";
    v.parsed.label = label;
    v.parsed.raw = label == Label::positive ? "hateful" : "not hateful";
    return v;
}

// Pairs whose use side is detected with probability 1 - fnr and whose mention
// side is flagged with probability fpr.
std::vector<Verdict> simulate(std::mt19937_64& rng, int pairs, double fpr, double fnr)
{
    std::bernoulli_distribution fp(fpr), fn(fnr);
    std::vector<Verdict> out;
    for (int i = 0; i < pairs; ++i) {
        const std::string id = "p" + std::to_string(1000 + i);
        out.push_back(verdict(id, Side::use, fn(rng) ? Label::negative : Label::positive));
        out.push_back(verdict(id, Side::mention, fp(rng) ? Label::positive : Label::negative));
    }
    return out;
}

StatementPair pair(const std::string& id, const std::string& use, const std::string& mention)
{
    return {id, use, mention, Subtask::hate, std::nullopt, "test"};
}

} // namespace

TEST_CASE("rates from a small confusion table")
{
    ConfusionCounts c{2, 1, 3, 2, 0};
    auto r = rates(c);
    CHECK(*r.fpr == doctest::Approx(0.25));
    CHECK(*r.fnr == doctest::Approx(0.5));
    CHECK(*r.avg_error == doctest::Approx(0.375));
    CHECK(*r.tpr == doctest::Approx(0.5));
    CHECK(r.n_use == 4);
    CHECK(r.n_mention == 4);
}

TEST_CASE("empty denominators leave rates absent")
{
    auto only_use = rates(ConfusionCounts{3, 0, 0, 1, 0});
    CHECK_FALSE(only_use.fpr);
    CHECK_FALSE(only_use.avg_error);
    CHECK(*only_use.fnr == doctest::Approx(0.25));
    CHECK_THROWS_AS(rates(ConfusionCounts{0, 0, 0, 0, 4}), EmptyReportError);
}

TEST_CASE("confusion counts treat use as positive and skip unparseable verdicts")
{
    std::vector<Verdict> v{
        verdict("a", Side::use, Label::positive),       verdict("a", Side::mention, Label::positive),
        verdict("b", Side::use, Label::negative),       verdict("b", Side::mention, Label::negative),
        verdict("c", Side::use, Label::unparseable),    verdict("c", Side::mention, Label::negative),
    };
    auto c = confusion_counts(v);
    CHECK(c == ConfusionCounts{1, 1, 2, 1, 1});
    auto r = rates(c);
    CHECK(r.n_use == 2);
    CHECK(r.n_mention == 3);
}

TEST_CASE("mitigation deltas")
{
    auto fpr = mitigation_delta(0.1021, 0.0418, DeltaMetric::fpr_mention);
    CHECK(fpr.delta * 100 == doctest::Approx(-59.06).epsilon(0.0001));
    auto tpr = mitigation_delta(0.9198, 0.8957, DeltaMetric::tpr_use);
    CHECK(tpr.delta * 100 == doctest::Approx(-2.62).epsilon(0.001));
    CHECK(mitigation_delta(0.3, 0.3, DeltaMetric::fpr_mention).delta == 0.0);
    CHECK_THROWS_AS(mitigation_delta(0.0, 0.1, DeltaMetric::fpr_mention), UndefinedDeltaError);

    RateReport none;
    none.tpr = 0.5;
    CHECK_THROWS_AS(mitigation_delta(none, none, DeltaMetric::fpr_mention), UndefinedDeltaError);
}

TEST_CASE("bootstrap is deterministic for a seed")
{
    std::mt19937_64 rng(3);
    auto v = simulate(rng, 60, 0.2, 0.1);
    BootstrapOptions opts{500, 0.95, 42};
    auto a = bootstrap_ci(v, opts);
    auto b = bootstrap_ci(v, opts);
    CHECK(a.fpr_ci == b.fpr_ci);
    CHECK(a.avg_error_ci == b.avg_error_ci);
    opts.seed = 43;
    auto c = bootstrap_ci(v, opts);
    CHECK(c.avg_error_ci != a.avg_error_ci);
    CHECK_FALSE(a.unstable);
    CHECK(a.fpr_ci->low <= *a.fpr);
    CHECK(*a.fpr <= a.fpr_ci->high);
}

TEST_CASE("bootstrap argument checks and degenerate inputs")
{
    std::vector<Verdict> v{verdict("a", Side::use, Label::positive), verdict("a", Side::mention, Label::negative)};
    CHECK_THROWS_AS(bootstrap_ci(v, {50, 0.95, 1}), ConfigError);
    CHECK_THROWS_AS(bootstrap_ci(v, {200, 1.0, 1}), ConfigError);
    auto r = bootstrap_ci(v, {200, 0.95, 1});
    CHECK(r.unstable);
    CHECK(r.fpr_ci == Interval{0.0, 0.0});
    CHECK(r.tpr_ci == Interval{1.0, 1.0});
}

TEST_CASE("bootstrap intervals cover a planted rate")
{
    // 100 meta-trials at 95%; the binomial lower tail below 90 is about 2.8%.
    int covered = 0;
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        auto v = simulate(rng, 200, 0.15, 0.3);
        auto r = bootstrap_ci(v, {400, 0.95, static_cast<std::uint64_t>(trial)});
        if (r.fpr_ci->low <= 0.15 && 0.15 <= r.fpr_ci->high)
            ++covered;
    }
    CHECK(covered >= 90);
}

TEST_CASE("run_task classifies both sides and uses the cache")
{
    auto dir = fs::temp_directory_path() / "usemention_eval_cache";
    fs::remove_all(dir);
    std::vector<StatementPair> pairs{
        pair("p3", "Jews are greedy", "Saying Jews are greedy is a lie"),
        pair("p1", "Women are weak", "Women are strong"),
        pair("p2", "Migrants are criminals", "The claim that migrants are criminals is false"),
    };
    BackendConfig cfg;
    cfg.name = "stub";
    cfg.stub.markers = {"are greedy", "are weak", "are criminals"};
    auto spec = make_spec(Task::downstream, Subtask::hate, PromptMode::zero_shot);

    ModelClient client(cfg, dir);
    RunOptions opts;
    opts.seed = 9;
    auto first = run_task(pairs, spec, client, opts);
    REQUIRE(first.verdicts.size() == 6);
    CHECK(first.verdicts[0].pair_id == "p1");
    CHECK(first.verdicts[0].side == Side::use);
    CHECK(first.verdicts[1].side == Side::mention);
    CHECK(first.summary.backend_calls == 6);
    CHECK(first.summary.unparseable == 0);
    auto c = confusion_counts(first.verdicts);
    CHECK(c == ConfusionCounts{3, 2, 1, 0, 0});

    opts.workers = 1;
    auto second = run_task(pairs, spec, client, opts);
    CHECK(second.summary.backend_calls == 0);
    CHECK(second.summary.cache_hits == 6);
    CHECK(serialize_verdicts(second.verdicts) == serialize_verdicts(first.verdicts));
    fs::remove_all(dir);
}

TEST_CASE("run_task refuses pairs from another subtask")
{
    BackendConfig cfg;
    cfg.name = "stub";
    ModelClient client(cfg);
    std::vector<StatementPair> pairs{pair("a", "u", "m")};
    auto spec = make_spec(Task::downstream, Subtask::misinformation, PromptMode::zero_shot);
    CHECK_THROWS_AS(run_task(pairs, spec, client), ConfigError);
}

TEST_CASE("verdict logs round-trip")
{
    auto v = verdict("x", Side::mention, Label::negative);
    v.mode = PromptMode::cot_mitigation;
    v.parsed.rationale_text = "because";
    v.parsed.extraction_rule = "cot";
    v.raw_ref = "abc";
    auto w = verdict("y", Side::use, Label::unparseable);
    w.error = "HTTP 500";
    auto back = parse_verdicts(serialize_verdicts({v, w}));
    REQUIRE(back.size() == 2);
    CHECK(serialize_verdicts(back) == serialize_verdicts({v, w}));
    CHECK(back[0].parsed.rationale_text == "because");
    CHECK(back[1].error == "HTTP 500");
}

TEST_CASE("manifest omits call counters unless asked")
{
    RunManifest m;
    m.run_id = "r";
    m.corpus_digest = corpus_digest({pair("a", "u", "m")});
    m.spec = make_spec(Task::downstream, Subtask::hate, PromptMode::zero_shot);
    BackendConfig cfg;
    cfg.name = "stub";
    m.backend_json = cfg.redacted_json();
    m.summary.backend_calls = 7;
    CHECK(manifest_json(m).find("backend_calls") == std::string::npos);
    CHECK(manifest_json(m, true).find("backend_calls") != std::string::npos);

    auto path = fs::temp_directory_path() / "usemention_manifest.json";
    { std::ofstream(path) << manifest_json(m); }
    auto back = read_manifest(path);
    CHECK(back.corpus_digest == m.corpus_digest);
    CHECK(back.spec == m.spec);
    fs::remove(path);

    CHECK(corpus_digest({pair("a", "u", "m")}) != corpus_digest({pair("a", "u", "m2")}));
}
