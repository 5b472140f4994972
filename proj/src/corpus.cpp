#include "usemention/corpus.hpp"

#include "usemention/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace usemention {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Subtask s)
{
    return s == Subtask::hate ? "hate" : "misinformation";
}

std::string_view to_string(Identity id)
{
    switch (id) {
    case Identity::Jewish: return "Jewish";
    case Identity::PeopleOfColor: return "PeopleOfColor";
    case Identity::Muslims: return "Muslims";
    case Identity::LGBT: return "LGBT+";
    case Identity::Disabled: return "Disabled";
    case Identity::Women: return "Women";
    case Identity::Migrants: return "Migrants";
    case Identity::Other: return "Other";
    }
    return "Other";
}

std::string_view display_name(Identity id)
{
    return id == Identity::PeopleOfColor ? "People of color" : to_string(id);
}

Subtask parse_subtask(std::string_view s)
{
    const auto lower = to_lower_ascii(trim(s));
    if (lower == "hate" || lower == "hate_speech" || lower == "hate-speech")
        return Subtask::hate;
    if (lower == "misinformation" || lower == "misinfo")
        return Subtask::misinformation;
    throw ConfigError("unknown subtask '" + std::string(s) + "'");
}

std::optional<Identity> parse_identity(std::string_view label)
{
    static const std::unordered_map<std::string, Identity> aliases = {
        {"jewish", Identity::Jewish},         {"jews", Identity::Jewish},
        {"jew", Identity::Jewish},            {"peopleofcolor", Identity::PeopleOfColor},
        {"people of color", Identity::PeopleOfColor},
        {"people_of_color", Identity::PeopleOfColor},
        {"poc", Identity::PeopleOfColor},     {"muslims", Identity::Muslims},
        {"muslim", Identity::Muslims},        {"lgbt+", Identity::LGBT},
        {"lgbt", Identity::LGBT},             {"lgbtq", Identity::LGBT},
        {"lgbtq+", Identity::LGBT},           {"disabled", Identity::Disabled},
        {"disability", Identity::Disabled},   {"women", Identity::Women},
        {"woman", Identity::Women},           {"migrants", Identity::Migrants},
        {"migrant", Identity::Migrants},      {"other", Identity::Other},
    };
    auto it = aliases.find(to_lower_ascii(trim(label)));
    if (it == aliases.end())
        return std::nullopt;
    return it->second;
}

namespace {

// Per-record validation shared by the JSONL loader and the CSV converter.
class PairValidator
{
public:
    explicit PairValidator(Subtask subtask) : subtask_(subtask) {}

    // Returns the rejection reason, or empty when the pair was accepted.
    std::string accept(StatementPair pair, LoadResult& out)
    {
        if (pair.subtask != subtask_)
            return "subtask mismatch";
        if (pair.pair_id.empty() || is_blank(pair.use_text) || is_blank(pair.mention_text))
            return "empty field";
        if (pair.subtask == Subtask::misinformation && pair.target_identity)
            return "target_identity on misinformation record";
        if (!seen_.insert(pair.pair_id).second)
            return "duplicate pair_id";
        out.pairs.push_back(std::move(pair));
        return {};
    }

private:
    Subtask subtask_;
    std::unordered_set<std::string> seen_;
};

std::optional<Identity> identity_field(const std::string& label, LoadResult& out)
{
    if (is_blank(label))
        return std::nullopt;
    if (auto id = parse_identity(label))
        return id;
    ++out.unknown_identity_count;
    return Identity::Other;
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open corpus file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

LoadResult parse_pairs(std::string_view jsonl, Subtask subtask)
{
    LoadResult out;
    PairValidator validator(subtask);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= jsonl.size()) {
        auto nl = jsonl.find('\n', pos);
        if (nl == std::string_view::npos)
            nl = jsonl.size();
        std::string_view line = jsonl.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (trim(line).empty())
            continue;

        auto reject = [&](std::string reason) {
            out.rejections.push_back({line_no, std::string(line), std::move(reason)});
        };

        ojson j = ojson::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            reject("invalid json");
            continue;
        }
        std::string missing;
        for (const char* key : {"pair_id", "use_text", "mention_text", "subtask", "source_dataset"}) {
            if (!j.contains(key) || !j[key].is_string()) {
                missing = key;
                break;
            }
        }
        if (!missing.empty()) {
            reject("missing field: " + missing);
            continue;
        }

        StatementPair pair;
        pair.pair_id = j["pair_id"].get<std::string>();
        pair.use_text = j["use_text"].get<std::string>();
        pair.mention_text = j["mention_text"].get<std::string>();
        pair.source_dataset = j["source_dataset"].get<std::string>();
        try {
            pair.subtask = parse_subtask(j["subtask"].get<std::string>());
        } catch (const ConfigError&) {
            reject("invalid subtask");
            continue;
        }
        if (j.contains("target_identity") && !j["target_identity"].is_null()) {
            if (!j["target_identity"].is_string()) {
                reject("invalid target_identity");
                continue;
            }
            pair.target_identity = identity_field(j["target_identity"].get<std::string>(), out);
        }
        if (auto reason = validator.accept(std::move(pair), out); !reason.empty())
            reject(std::move(reason));
    }
    return out;
}

LoadResult load_pairs(const std::filesystem::path& path, Subtask subtask)
{
    return parse_pairs(read_file(path), subtask);
}

std::string serialize_pair(const StatementPair& pair)
{
    ojson j;
    j["pair_id"] = pair.pair_id;
    j["use_text"] = pair.use_text;
    j["mention_text"] = pair.mention_text;
    j["subtask"] = to_string(pair.subtask);
    if (pair.target_identity)
        j["target_identity"] = to_string(*pair.target_identity);
    else
        j["target_identity"] = nullptr;
    j["source_dataset"] = pair.source_dataset;
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string serialize_pairs(const std::vector<StatementPair>& pairs)
{
    std::string out;
    for (const auto& p : pairs) {
        out += serialize_pair(p);
        out += '\n';
    }
    return out;
}

std::string serialize_rejection(const Rejection& r)
{
    ojson j = ojson::parse(r.record, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        j = ojson::object();
        j["line"] = r.line;
        j["raw"] = r.record;
    }
    j["reason"] = r.reason;
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::vector<std::vector<std::string>> parse_csv(std::string_view content)
{
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < content.size(); ++i) {
        char c = content[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            quoted = true;
            any = true;
            break;
        case ',':
            row.push_back(std::move(field));
            field.clear();
            any = true;
            break;
        case '\r':
            break;
        case '\n':
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            field.clear();
            row.clear();
            any = false;
            break;
        default:
            field += c;
            any = true;
        }
    }
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

LoadResult convert_csv(const std::filesystem::path& path, Subtask subtask,
                       const CsvColumns& columns, const std::string& source_dataset)
{
    auto rows = parse_csv(read_file(path));
    LoadResult out;
    if (rows.empty())
        return out;

    const auto& header = rows.front();
    auto column = [&](const std::string& name) -> std::optional<std::size_t> {
        if (name.empty())
            return std::nullopt;
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw DataError(path.string() + ": no column named '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto use_col = column(columns.use);
    const auto mention_col = column(columns.mention);
    const auto identity_col = subtask == Subtask::hate ? column(columns.identity) : std::nullopt;
    const auto id_col = column(columns.id);
    if (!use_col || !mention_col)
        throw ConfigError("CSV conversion needs use and mention columns");

    PairValidator validator(subtask);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        auto cell = [&](std::optional<std::size_t> c) -> std::string {
            return c && *c < row.size() ? row[*c] : std::string{};
        };
        StatementPair pair;
        pair.pair_id = id_col ? cell(id_col) : source_dataset + "-" + std::to_string(r);
        pair.use_text = cell(use_col);
        pair.mention_text = cell(mention_col);
        pair.subtask = subtask;
        pair.target_identity = identity_field(cell(identity_col), out);
        pair.source_dataset = source_dataset;

        const std::string record = serialize_pair(pair);
        if (auto reason = validator.accept(std::move(pair), out); !reason.empty())
            out.rejections.push_back({r + 1, record, std::move(reason)});
    }
    return out;
}

FocalSpan longest_common_run(const std::vector<std::string>& use,
                             const std::vector<std::string>& mention)
{
    FocalSpan best;
    const std::size_t m = mention.size();
    if (use.empty() || m == 0)
        return best;
    // run[j + 1] = length of the common run ending at use[i], mention[j].
    std::vector<std::size_t> prev(m + 1, 0), curr(m + 1, 0);
    std::size_t best_use_end = 0, best_mention_end = 0;
    for (std::size_t i = 0; i < use.size(); ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            curr[j + 1] = use[i] == mention[j] ? prev[j] + 1 : 0;
            if (curr[j + 1] > best.length_words) {
                best.length_words = curr[j + 1];
                best_use_end = i;
                best_mention_end = j;
            }
        }
        std::swap(prev, curr);
    }
    if (best.length_words > 0) {
        best.use_offset = best_use_end + 1 - best.length_words;
        best.mention_offset = best_mention_end + 1 - best.length_words;
        best.tokens.assign(use.begin() + static_cast<std::ptrdiff_t>(best.use_offset),
                           use.begin() + static_cast<std::ptrdiff_t>(best_use_end + 1));
    }
    return best;
}

FocalSpan focal_tokens(const StatementPair& pair, const TokenNorm& norm)
{
    return longest_common_run(tokenize(pair.use_text, norm), tokenize(pair.mention_text, norm));
}

bool detect_quotation(std::string_view text)
{
    static constexpr std::string_view markers[] = {"\"", "“", "”", "``", "''"};
    return std::any_of(std::begin(markers), std::end(markers),
                       [&](std::string_view m) { return text.find(m) != std::string_view::npos; });
}

CorpusStats corpus_stats(const std::vector<StatementPair>& pairs, const TokenNorm& norm)
{
    CorpusStats stats;
    stats.pair_count = pairs.size();
    if (pairs.empty())
        return stats;
    std::size_t focal_total = 0;
    std::size_t quoted = 0;
    for (const auto& p : pairs) {
        focal_total += focal_tokens(p, norm).length_words;
        if (detect_quotation(p.mention_text))
            ++quoted;
        if (p.target_identity)
            ++stats.per_identity[*p.target_identity];
    }
    const auto n = static_cast<double>(pairs.size());
    stats.mean_focal_length = static_cast<double>(focal_total) / n;
    stats.quotation_rate_mentions = static_cast<double>(quoted) / n;
    return stats;
}

} // namespace usemention
