#include "usemention/analysis.hpp"

#include "usemention/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

namespace usemention {

std::uint64_t ContingencyTable::total() const
{
    return cells[0][0] + cells[0][1] + cells[1][0] + cells[1][1];
}

double chi2_sf_dof1(double x)
{
    if (!(x > 0.0))
        return 1.0;
    return std::erfc(std::sqrt(x / 2.0));
}

ChiSquareResult chi_squared(const ContingencyTable& table)
{
    const auto& c = table.cells;
    const double rows[2] = {static_cast<double>(c[0][0] + c[0][1]),
                            static_cast<double>(c[1][0] + c[1][1])};
    const double cols[2] = {static_cast<double>(c[0][0] + c[1][0]),
                            static_cast<double>(c[0][1] + c[1][1])};
    if (rows[0] == 0 || rows[1] == 0 || cols[0] == 0 || cols[1] == 0)
        throw DegenerateTableError("chi-squared needs non-zero row and column totals");
    const double n = rows[0] + rows[1];

    ChiSquareResult r;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double expected = rows[i] * cols[j] / n;
            const double diff = static_cast<double>(c[i][j]) - expected;
            r.statistic += diff * diff / expected;
        }
    }
    r.p_value = chi2_sf_dof1(r.statistic);
    r.rate_a = static_cast<double>(c[0][0]) / rows[0];
    r.rate_b = static_cast<double>(c[1][0]) / rows[1];
    return r;
}

namespace {

std::optional<ChiSquareResult> try_chi_squared(const ContingencyTable& t)
{
    try {
        return chi_squared(t);
    } catch (const DegenerateTableError&) {
        return std::nullopt;
    }
}

std::optional<double> ratio(std::size_t num, std::size_t den)
{
    if (den == 0)
        return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

std::map<std::string, const Verdict*> mention_index(const std::vector<Verdict>& verdicts,
                                                    Task expected, const char* which)
{
    std::map<std::string, const Verdict*> out;
    for (const auto& v : verdicts) {
        if (v.side != Side::mention)
            continue;
        if (v.task != expected)
            throw DataError(std::string(which) + " log holds " + std::string(to_string(v.task)) +
                            " verdicts");
        if (!out.emplace(v.pair_id, &v).second)
            throw DataError(std::string(which) + " log has duplicate mention verdicts for " + v.pair_id);
    }
    return out;
}

} // namespace

PropagationReport propagation_analysis(const std::vector<Verdict>& task1,
                                       const std::vector<Verdict>& task2)
{
    const auto t1 = mention_index(task1, Task::use_mention, "task 1");
    const auto t2 = mention_index(task2, Task::downstream, "task 2");

    std::vector<std::string> orphans;
    for (const auto& [id, v] : t1)
        if (!t2.count(id))
            orphans.push_back(id);
    for (const auto& [id, v] : t2)
        if (!t1.count(id))
            orphans.push_back(id);
    if (!orphans.empty()) {
        std::sort(orphans.begin(), orphans.end());
        std::string list;
        for (const auto& o : orphans)
            list += (list.empty() ? "" : ", ") + o;
        throw AlignmentError("task 1 and task 2 cover different mentions: " + list, orphans);
    }

    PropagationReport rep;
    rep.table.row_a = "use-mention incorrect";
    rep.table.row_b = "use-mention correct";
    for (const auto& [id, v1] : t1) {
        const Verdict* v2 = t2.at(id);
        if (!v1->parseable() || !v2->parseable()) {
            ++rep.excluded;
            continue;
        }
        const int row = v1->parsed.label == Label::negative ? 1 : 0;
        const int col = v2->parsed.label == Label::positive ? 0 : 1;
        ++rep.table.cells[row][col];
    }
    const auto& c = rep.table.cells;
    rep.fpr_task1_incorrect = ratio(c[0][0], c[0][0] + c[0][1]);
    rep.fpr_task1_correct = ratio(c[1][0], c[1][0] + c[1][1]);
    rep.test = try_chi_squared(rep.table);
    return rep;
}

Stratification stratify(const std::vector<Verdict>& verdicts,
                        const std::vector<StatementPair>& pairs, StratumKey key)
{
    std::unordered_map<std::string, const StatementPair*> by_id;
    for (const auto& p : pairs)
        by_id.emplace(p.pair_id, &p);

    Stratification out;
    out.key = key;
    std::vector<std::string> names;
    if (key == StratumKey::target_identity) {
        for (auto id : kAllIdentities)
            names.emplace_back(display_name(id));
    } else {
        names = {"quoted", "unquoted"};
    }
    std::map<std::string, GroupRates> groups;
    for (const auto& n : names)
        groups[n].group = n;

    std::vector<std::string> orphans;
    for (const auto& v : verdicts) {
        auto it = by_id.find(v.pair_id);
        if (it == by_id.end()) {
            orphans.push_back(v.pair_id);
            continue;
        }
        const StatementPair& p = *it->second;
        std::string group;
        if (key == StratumKey::target_identity) {
            if (p.subtask != Subtask::hate || !p.target_identity)
                throw DataError("pair " + p.pair_id + " has no target identity");
            group = display_name(*p.target_identity);
        } else {
            group = detect_quotation(p.mention_text) ? "quoted" : "unquoted";
        }
        if (!v.parseable())
            continue;
        auto& g = groups[group];
        const bool positive = v.parsed.label == Label::positive;
        if (v.side == Side::mention) {
            ++g.n_mention;
            g.false_positives += positive ? 1 : 0;
        } else {
            ++g.n_use;
            g.true_positives += positive ? 1 : 0;
        }
    }
    if (!orphans.empty())
        throw AlignmentError("verdicts reference unknown pairs", orphans);

    for (const auto& n : names) {
        auto g = groups[n];
        g.fpr = ratio(g.false_positives, g.n_mention);
        g.tpr = ratio(g.true_positives, g.n_use);
        out.groups.push_back(std::move(g));
    }
    std::stable_sort(out.groups.begin(), out.groups.end(), [](const GroupRates& a, const GroupRates& b) {
        if (a.fpr.has_value() != b.fpr.has_value())
            return a.fpr.has_value();
        return a.fpr && *a.fpr > *b.fpr;
    });

    if (key == StratumKey::mention_has_quotes) {
        ContingencyTable t;
        t.row_a = "quoted";
        t.row_b = "unquoted";
        const auto& q = groups["quoted"];
        const auto& u = groups["unquoted"];
        t.cells = {{{q.false_positives, q.n_mention - q.false_positives},
                    {u.false_positives, u.n_mention - u.false_positives}}};
        out.test = try_chi_squared(t);
    }
    return out;
}

std::vector<TermZScore> fightin_words(const std::vector<std::string>& corpus_a,
                                      const std::vector<std::string>& corpus_b,
                                      double prior_scale, const TokenNorm& norm)
{
    if (corpus_a.empty() || corpus_b.empty())
        throw ConfigError("fightin_words needs two non-empty corpora");
    if (!(prior_scale > 0.0) || !std::isfinite(prior_scale))
        throw ConfigError("prior_scale must be positive and finite");

    // term -> (count in a, count in b)
    std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> counts;
    std::uint64_t n_a = 0, n_b = 0;
    for (const auto& text : corpus_a)
        for (auto& t : tokenize(text, norm)) {
            ++counts[std::move(t)].first;
            ++n_a;
        }
    for (const auto& text : corpus_b)
        for (auto& t : tokenize(text, norm)) {
            ++counts[std::move(t)].second;
            ++n_b;
        }
    const double pooled_total = static_cast<double>(n_a + n_b);
    if (pooled_total == 0.0)
        throw ConfigError("fightin_words corpora contain no tokens");

    const double alpha0 = prior_scale;
    std::vector<TermZScore> out;
    out.reserve(counts.size());
    for (const auto& [term, c] : counts) {
        const double ya = static_cast<double>(c.first);
        const double yb = static_cast<double>(c.second);
        const double alpha = alpha0 * (ya + yb) / pooled_total;
        if (!(alpha > 0.0))
            throw ConfigError("zero prior mass for observed term '" + term + "'");
        const double la = std::log((ya + alpha) / (static_cast<double>(n_a) + alpha0 - ya - alpha));
        const double lb = std::log((yb + alpha) / (static_cast<double>(n_b) + alpha0 - yb - alpha));
        const double delta = la - lb;
        const double variance = 1.0 / (ya + alpha) + 1.0 / (yb + alpha);
        out.push_back({term, delta / std::sqrt(variance), delta, c.first, c.second});
    }
    std::sort(out.begin(), out.end(), [](const TermZScore& a, const TermZScore& b) {
        if (a.zscore != b.zscore)
            return a.zscore > b.zscore;
        return a.term < b.term;
    });
    return out;
}

MentionPartition partition_mentions(const std::vector<Verdict>& verdicts,
                                    const std::vector<StatementPair>& pairs)
{
    std::unordered_map<std::string, const StatementPair*> by_id;
    for (const auto& p : pairs)
        by_id.emplace(p.pair_id, &p);
    MentionPartition out;
    for (const auto& v : verdicts) {
        if (v.side != Side::mention || !v.parseable())
            continue;
        auto it = by_id.find(v.pair_id);
        if (it == by_id.end())
            throw AlignmentError("verdict for unknown pair " + v.pair_id, {v.pair_id});
        (v.parsed.label == Label::positive ? out.d_pos : out.d_neg).push_back(it->second->mention_text);
    }
    return out;
}

} // namespace usemention
