#pragma once

#include "usemention/analysis.hpp"
#include "usemention/evaluation.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace usemention {

enum class TableFormat { csv, markdown };

double round_half_away(double value, int decimals);
/// Rate in [0,1] as a percentage with two decimals: 0.1222 -> "12.22".
std::string format_percent(double rate);
std::string format_signed_percent(double fraction);
std::string format_p_value(double p);

struct MetricsRow
{
    std::string model;
    Subtask subtask = Subtask::hate;
    RateReport report;
};

/// Rows sorted by subtask, then by descending average error rate.
std::string emit_metrics_table(std::vector<MetricsRow> rows, TableFormat format);

struct TradeoffPoint
{
    std::string label;
    double tpr_use = 0.0;
    double fpr_mention = 0.0;
};

/// Scatter of use TPR (x) against counterspeech FPR (y); both axes span [0,1].
std::string emit_tradeoff_plot(const std::vector<TradeoffPoint>& points,
                               const std::string& title = {});

struct PropagationRow
{
    std::string model;
    PropagationReport report;
};

std::string emit_propagation_table(const std::vector<PropagationRow>& rows, TableFormat format);
std::string emit_stratification_table(const Stratification& strat, TableFormat format);
std::string emit_term_table(const std::vector<TermZScore>& terms, TableFormat format,
                            std::size_t top = 0);

struct MitigationRow
{
    std::string mode;
    RateReport report;
    std::optional<MitigationDelta> fpr_delta; ///< absent for the baseline row
    std::optional<MitigationDelta> tpr_delta;
};

std::string emit_mitigation_table(const std::vector<MitigationRow>& rows, TableFormat format);

/// Named tables and plots for one run, written as
/// <root>/<run-id>/{tables/*.csv, tables/*.md, plots/*.svg, manifest.json}.
class ReportBundle
{
public:
    ReportBundle(std::string run_id, std::string manifest_ref);

    void add_table(const std::string& name, std::string csv, std::string markdown);
    void add_plot(const std::string& name, std::string svg);

    std::string manifest_json() const;
    /// Digest over every file in the bundle; a pure function of its contents.
    std::string digest() const;
    std::filesystem::path write(const std::filesystem::path& reports_root) const;

private:
    std::map<std::string, std::string> files() const;

    std::string run_id_;
    std::string manifest_ref_;
    std::map<std::string, std::pair<std::string, std::string>> tables_;
    std::map<std::string, std::string> plots_;
};

} // namespace usemention
