#include "usemention/report.hpp"

#include "usemention/digest.hpp"
#include "usemention/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace usemention {

double round_half_away(double value, int decimals)
{
    const double scale = std::pow(10.0, decimals);
    return std::round(value * scale) / scale;
}

namespace {

std::string printf_str(const char* fmt, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

std::string cell_or_na(const std::optional<double>& rate)
{
    return rate ? format_percent(*rate) : "n/a";
}

std::string percent_or_na(const std::optional<double>& rate)
{
    return rate ? format_percent(*rate) + "%" : "n/a";
}

std::string half_width(const std::optional<Interval>& ci)
{
    return ci ? format_percent((ci->high - ci->low) / 2.0) : "";
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n\r") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

std::string md_field(const std::string& s)
{
    std::string out;
    for (char c : s) {
        if (c == '|')
            out += '\\';
        out += c == '\n' ? ' ' : c;
    }
    return out;
}

class Table
{
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
    void row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }
    void note(std::string text) { notes_.push_back(std::move(text)); }

    std::string render(TableFormat format) const
    {
        std::string out;
        auto line = [&](const std::vector<std::string>& cells, bool md) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (md)
                    out += (i == 0 ? "| " : " | ") + md_field(cells[i]);
                else
                    out += (i == 0 ? "" : ",") + csv_field(cells[i]);
            }
            out += md ? " |\n" : "\n";
        };
        const bool md = format == TableFormat::markdown;
        line(header_, md);
        if (md) {
            out += "|";
            for (std::size_t i = 0; i < header_.size(); ++i)
                out += i < 1 ? "---|" : "---:|";
            out += "\n";
        }
        for (const auto& r : rows_)
            line(r, md);
        if (md)
            for (const auto& n : notes_)
                out += "\n" + n + "\n";
        return out;
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
    std::vector<std::string> notes_;
};

} // namespace

std::string format_percent(double rate)
{
    std::string s = printf_str("%.2f", round_half_away(rate * 100.0, 2));
    return s == "-0.00" ? "0.00" : s;
}

std::string format_signed_percent(double fraction)
{
    return format_percent(fraction) + "%";
}

std::string format_p_value(double p)
{
    if (p > 0.0 && p < 1e-3)
        return printf_str("%.2e", p);
    return printf_str("%.3g", p);
}

std::string emit_metrics_table(std::vector<MetricsRow> rows, TableFormat format)
{
    std::stable_sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
        if (a.subtask != b.subtask)
            return a.subtask < b.subtask;
        const double ea = a.report.avg_error.value_or(-1.0);
        const double eb = b.report.avg_error.value_or(-1.0);
        return ea > eb;
    });
    if (format == TableFormat::csv) {
        Table t({"subtask", "model", "fpr", "fpr_pm", "fnr", "fnr_pm", "avg_error", "avg_error_pm",
                 "n_use", "n_mention"});
        for (const auto& r : rows) {
            const auto& rep = r.report;
            t.row({std::string(to_string(r.subtask)), r.model, cell_or_na(rep.fpr),
                   half_width(rep.fpr_ci), cell_or_na(rep.fnr), half_width(rep.fnr_ci),
                   cell_or_na(rep.avg_error), half_width(rep.avg_error_ci),
                   std::to_string(rep.n_use), std::to_string(rep.n_mention)});
        }
        return t.render(format);
    }
    auto cell = [](const std::optional<double>& rate, const std::optional<Interval>& ci) {
        std::string s = cell_or_na(rate);
        if (rate && ci)
            s += " ± " + half_width(ci);
        return s;
    };
    Table t({"Sub-task", "Model", "False positive rate", "False negative rate", "Average error rate"});
    for (const auto& r : rows) {
        const auto& rep = r.report;
        t.row({std::string(to_string(r.subtask)), r.model, cell(rep.fpr, rep.fpr_ci),
               cell(rep.fnr, rep.fnr_ci), cell(rep.avg_error, rep.avg_error_ci)});
    }
    return t.render(format);
}

std::string emit_tradeoff_plot(const std::vector<TradeoffPoint>& points, const std::string& title)
{
    for (const auto& p : points) {
        auto ok = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!ok(p.tpr_use) || !ok(p.fpr_mention))
            throw DataError("tradeoff point '" + p.label + "' lies outside [0,1]");
    }
    constexpr double width = 520, height = 440;
    constexpr double left = 80, right = 490, top = 50, bottom = 370;
    auto px = [&](double tpr) { return left + tpr * (right - left); };
    auto py = [&](double fpr) { return bottom - fpr * (bottom - top); };
    auto num = [](double v) { return printf_str("%.2f", v); };
    auto esc = [](const std::string& s) {
        std::string out;
        for (char c : s) {
            switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
            }
        }
        return out;
    };
    static constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
        << "\" fill=\"white\"/>\n";
    if (!title.empty())
        svg << "<text x=\"" << num((left + right) / 2) << "\" y=\"28\" text-anchor=\"middle\" "
            << "font-size=\"15\">" << esc(title) << "</text>\n";
    for (int k = 0; k <= 5; ++k) {
        const double v = k / 5.0;
        svg << "<line class=\"grid\" x1=\"" << num(px(v)) << "\" y1=\"" << num(top) << "\" x2=\""
            << num(px(v)) << "\" y2=\"" << num(bottom) << "\" stroke=\"#e0e0e0\"/>\n";
        svg << "<line class=\"grid\" x1=\"" << num(left) << "\" y1=\"" << num(py(v)) << "\" x2=\""
            << num(right) << "\" y2=\"" << num(py(v)) << "\" stroke=\"#e0e0e0\"/>\n";
        svg << "<text x=\"" << num(px(v)) << "\" y=\"" << num(bottom + 18)
            << "\" text-anchor=\"middle\" font-size=\"11\">" << num(v) << "</text>\n";
        svg << "<text x=\"" << num(left - 8) << "\" y=\"" << num(py(v) + 4)
            << "\" text-anchor=\"end\" font-size=\"11\">" << num(v) << "</text>\n";
    }
    svg << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(right - left)
        << "\" height=\"" << num(bottom - top) << "\" fill=\"none\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << num((left + right) / 2) << "\" y=\"" << num(bottom + 42)
        << "\" text-anchor=\"middle\" font-size=\"13\">True positive rate on use "
        << "(higher is better &#8594;)</text>\n";
    svg << "<text transform=\"translate(22 " << num((top + bottom) / 2) << ") rotate(-90)\" "
        << "text-anchor=\"middle\" font-size=\"13\">False positive rate on counterspeech "
        << "(lower is better &#8595;)</text>\n";

    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        const char* color = palette[i % std::size(palette)];
        svg << "<circle class=\"marker\" data-label=\"" << esc(p.label) << "\" cx=\""
            << num(px(p.tpr_use)) << "\" cy=\"" << num(py(p.fpr_mention)) << "\" r=\"5\" fill=\""
            << color << "\"/>\n";
        const bool near_right = p.tpr_use > 0.8;
        svg << "<text x=\"" << num(px(p.tpr_use) + (near_right ? -8 : 8)) << "\" y=\""
            << num(py(p.fpr_mention) - 8) << "\" text-anchor=\"" << (near_right ? "end" : "start")
            << "\" font-size=\"11\" fill=\"" << color << "\">" << esc(p.label) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string emit_propagation_table(const std::vector<PropagationRow>& rows, TableFormat format)
{
    const bool md = format == TableFormat::markdown;
    Table t(md ? std::vector<std::string>{"Model", "Use-mention incorrect", "Use-mention correct",
                                          "χ²", "p"}
               : std::vector<std::string>{"model", "fpr_task1_incorrect", "n_task1_incorrect",
                                          "fpr_task1_correct", "n_task1_correct", "chi2", "p",
                                          "excluded"});
    for (const auto& r : rows) {
        const auto& rep = r.report;
        const auto& c = rep.table.cells;
        std::string chi = rep.test ? printf_str("%.2f", rep.test->statistic) : "n/a";
        std::string p = rep.test ? format_p_value(rep.test->p_value) : "n/a";
        if (md)
            t.row({r.model, percent_or_na(rep.fpr_task1_incorrect),
                   percent_or_na(rep.fpr_task1_correct), chi, p});
        else
            t.row({r.model, cell_or_na(rep.fpr_task1_incorrect), std::to_string(c[0][0] + c[0][1]),
                   cell_or_na(rep.fpr_task1_correct), std::to_string(c[1][0] + c[1][1]), chi, p,
                   std::to_string(rep.excluded)});
    }
    return t.render(format);
}

std::string emit_stratification_table(const Stratification& strat, TableFormat format)
{
    const bool identity = strat.key == StratumKey::target_identity;
    const bool md = format == TableFormat::markdown;
    std::string chi = strat.test ? printf_str("%.2f", strat.test->statistic) : "";
    std::string p = strat.test ? format_p_value(strat.test->p_value) : "";
    std::vector<std::string> header =
        md ? std::vector<std::string>{identity ? "Target identity" : "Mention quotations",
                                      "Mentions", "False positive rate", "Uses", "Recall"}
           : std::vector<std::string>{"group", "n_mention", "false_positives", "fpr", "n_use",
                                      "true_positives", "tpr"};
    if (!md && !identity) {
        header.push_back("chi2");
        header.push_back("p");
    }
    Table t(header);
    for (const auto& g : strat.groups) {
        if (md) {
            t.row({g.group, std::to_string(g.n_mention), g.fpr ? format_percent(*g.fpr) + "%" : "n/a",
                   std::to_string(g.n_use), g.tpr ? format_percent(*g.tpr) + "%" : "n/a"});
        } else {
            std::vector<std::string> cells{g.group, std::to_string(g.n_mention),
                                           std::to_string(g.false_positives), cell_or_na(g.fpr),
                                           std::to_string(g.n_use), std::to_string(g.true_positives),
                                           cell_or_na(g.tpr)};
            if (!identity) {
                cells.push_back(chi);
                cells.push_back(p);
            }
            t.row(std::move(cells));
        }
    }
    if (md && !identity)
        t.note(strat.test ? "χ² = " + chi + ", p = " + p : "χ² undefined (degenerate table)");
    return t.render(format);
}

std::string emit_term_table(const std::vector<TermZScore>& terms, TableFormat format, std::size_t top)
{
    Table t(format == TableFormat::markdown
                ? std::vector<std::string>{"Term", "z-score", "log-odds δ", "Count D✓", "Count D×"}
                : std::vector<std::string>{"term", "delta", "zscore", "count_a", "count_b"});
    const std::size_t n = top == 0 ? terms.size() : std::min(top, terms.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& w = terms[i];
        if (format == TableFormat::markdown)
            t.row({w.term, printf_str("%.2f", w.zscore), printf_str("%.4f", w.delta),
                   std::to_string(w.count_a), std::to_string(w.count_b)});
        else
            t.row({w.term, printf_str("%.10g", w.delta), printf_str("%.10g", w.zscore),
                   std::to_string(w.count_a), std::to_string(w.count_b)});
    }
    return t.render(format);
}

std::string emit_mitigation_table(const std::vector<MitigationRow>& rows, TableFormat format)
{
    const bool md = format == TableFormat::markdown;
    Table t(md ? std::vector<std::string>{"Mitigation", "False positive rate (counterspeech)",
                                          "False positive rate Δ", "True positive rate (true use)",
                                          "True positive rate Δ"}
               : std::vector<std::string>{"mode", "fpr", "fpr_delta", "tpr", "tpr_delta"});
    auto pct = [&](const std::optional<double>& r) {
        return r ? format_percent(*r) + (md ? "%" : "") : "n/a";
    };
    auto delta = [&](const std::optional<MitigationDelta>& d) {
        return d ? format_percent(d->delta) + (md ? "%" : "") : (md ? "---" : "");
    };
    for (const auto& r : rows)
        t.row({r.mode, pct(r.report.fpr), delta(r.fpr_delta), pct(r.report.tpr), delta(r.tpr_delta)});
    return t.render(format);
}

// ---------------------------------------------------------------------------

ReportBundle::ReportBundle(std::string run_id, std::string manifest_ref)
    : run_id_(std::move(run_id)), manifest_ref_(std::move(manifest_ref))
{
}

void ReportBundle::add_table(const std::string& name, std::string csv, std::string markdown)
{
    tables_[name] = {std::move(csv), std::move(markdown)};
}

void ReportBundle::add_plot(const std::string& name, std::string svg)
{
    plots_[name] = std::move(svg);
}

std::map<std::string, std::string> ReportBundle::files() const
{
    std::map<std::string, std::string> out;
    for (const auto& [name, t] : tables_) {
        out["tables/" + name + ".csv"] = t.first;
        out["tables/" + name + ".md"] = t.second;
    }
    for (const auto& [name, svg] : plots_)
        out["plots/" + name + ".svg"] = svg;
    return out;
}

std::string ReportBundle::manifest_json() const
{
    nlohmann::ordered_json j;
    j["run_id"] = run_id_;
    j["manifest_ref"] = manifest_ref_;
    nlohmann::ordered_json files = nlohmann::ordered_json::object();
    for (const auto& [path, content] : this->files())
        files[path] = sha256_hex(content);
    j["files"] = files;
    return j.dump(2) + "\n";
}

std::string ReportBundle::digest() const
{
    return sha256_hex(manifest_json());
}

std::filesystem::path ReportBundle::write(const std::filesystem::path& reports_root) const
{
    const auto dir = reports_root / run_id_;
    std::filesystem::create_directories(dir / "tables");
    std::filesystem::create_directories(dir / "plots");
    for (const auto& [path, content] : files()) {
        std::ofstream out(dir / path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot write " + (dir / path).string());
        out << content;
    }
    std::ofstream(dir / "manifest.json", std::ios::binary | std::ios::trunc) << manifest_json();
    return dir;
}

} // namespace usemention
