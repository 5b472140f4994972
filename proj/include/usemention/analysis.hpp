#pragma once

#include "usemention/corpus.hpp"
#include "usemention/evaluation.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace usemention {

/// 2x2 counts: rows are groups A and B, columns are (error, no error).
struct ContingencyTable
{
    std::array<std::array<std::uint64_t, 2>, 2> cells{};
    std::string row_a = "A";
    std::string row_b = "B";

    std::uint64_t total() const;
};

struct ChiSquareResult
{
    double statistic = 0.0;
    double p_value = 1.0;
    int dof = 1;
    double rate_a = 0.0; ///< error fraction in row A
    double rate_b = 0.0;
};

/// Survival function of the chi-squared distribution with one degree of
/// freedom: P(X > x) = erfc(sqrt(x / 2)).
double chi2_sf_dof1(double x);

/// Pearson statistic without continuity correction. Throws
/// DegenerateTableError when a row or column sums to zero.
ChiSquareResult chi_squared(const ContingencyTable& table);

struct PropagationReport
{
    ContingencyTable table; ///< A: Task 1 wrong on the mention, B: Task 1 right
    std::optional<double> fpr_task1_incorrect;
    std::optional<double> fpr_task1_correct;
    std::optional<ChiSquareResult> test;
    std::size_t excluded = 0; ///< mentions unparseable in either task
};

/// Task 2 false positives on mentions, stratified by Task 1 correctness on
/// the same mentions. Throws AlignmentError when the mention sets differ.
PropagationReport propagation_analysis(const std::vector<Verdict>& task1,
                                       const std::vector<Verdict>& task2);

enum class StratumKey { target_identity, mention_has_quotes };

struct GroupRates
{
    std::string group;
    std::size_t n_mention = 0;
    std::size_t false_positives = 0;
    std::size_t n_use = 0;
    std::size_t true_positives = 0;
    std::optional<double> fpr;
    std::optional<double> tpr;
};

struct Stratification
{
    StratumKey key = StratumKey::target_identity;
    std::vector<GroupRates> groups; ///< descending FPR; empty groups last
    /// Quoted vs unquoted mentions; absent for identity or degenerate tables.
    std::optional<ChiSquareResult> test;
};

Stratification stratify(const std::vector<Verdict>& verdicts,
                        const std::vector<StatementPair>& pairs, StratumKey key);

struct TermZScore
{
    std::string term;
    double zscore = 0.0;
    double delta = 0.0;
    std::uint64_t count_a = 0;
    std::uint64_t count_b = 0;
};

/// Log-odds ratio with an informative Dirichlet prior (Fightin' Words).
/// The prior is the pooled term distribution scaled to total mass
/// `prior_scale`. Sorted by descending z-score, then term.
std::vector<TermZScore> fightin_words(const std::vector<std::string>& corpus_a,
                                      const std::vector<std::string>& corpus_b,
                                      double prior_scale = 10.0, const TokenNorm& norm = {});

struct MentionPartition
{
    std::vector<std::string> d_pos; ///< mentions classified positive
    std::vector<std::string> d_neg;
};

/// Splits parseable mention-side verdicts by label; other verdicts are skipped.
MentionPartition partition_mentions(const std::vector<Verdict>& verdicts,
                                    const std::vector<StatementPair>& pairs);

} // namespace usemention
