#pragma once

#include "usemention/text.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace usemention {

enum class Subtask { hate, misinformation };

enum class Identity { Jewish, PeopleOfColor, Muslims, LGBT, Disabled, Women, Migrants, Other };

inline constexpr Identity kAllIdentities[] = {
    Identity::Jewish, Identity::PeopleOfColor, Identity::Muslims, Identity::LGBT,
    Identity::Disabled, Identity::Women, Identity::Migrants, Identity::Other};

std::string_view to_string(Subtask s);
std::string_view to_string(Identity id);
/// Human-readable group name used in report tables ("People of color").
std::string_view display_name(Identity id);

Subtask parse_subtask(std::string_view s);

/// Maps dataset identity labels (case-insensitive, common aliases) onto the
/// enum. Returns nullopt for labels outside the known vocabulary.
std::optional<Identity> parse_identity(std::string_view label);

/// One (use, mention) counterspeech pair.
struct StatementPair
{
    std::string pair_id;
    std::string use_text;
    std::string mention_text;
    Subtask subtask = Subtask::hate;
    std::optional<Identity> target_identity;
    std::string source_dataset;

    bool operator==(const StatementPair&) const = default;
};

struct Rejection
{
    std::size_t line = 0;
    std::string record; ///< original line (JSON object when parseable)
    std::string reason;
};

struct LoadResult
{
    std::vector<StatementPair> pairs;
    std::vector<Rejection> rejections;
    std::size_t unknown_identity_count = 0;
};

/// Reads the unified line-delimited corpus. Throws DataError when the file is
/// missing; per-record problems go to `rejections`.
LoadResult load_pairs(const std::filesystem::path& path, Subtask subtask);
LoadResult parse_pairs(std::string_view jsonl, Subtask subtask);

std::string serialize_pair(const StatementPair& pair);
std::string serialize_pairs(const std::vector<StatementPair>& pairs);
/// Rejection report line: the original object plus a "reason" key.
std::string serialize_rejection(const Rejection& r);

/// Column mapping for converting a CSV source dataset into the unified schema.
struct CsvColumns
{
    std::string use = "HATE_SPEECH";
    std::string mention = "COUNTER_NARRATIVE";
    std::string identity = "TARGET"; ///< empty: no identity column
    std::string id;                  ///< empty: ids are "<source>-<row>"
};

LoadResult convert_csv(const std::filesystem::path& path, Subtask subtask,
                       const CsvColumns& columns, const std::string& source_dataset);

/// RFC 4180 reader: quoted fields may contain separators, doubled quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view content);

struct FocalSpan
{
    std::vector<std::string> tokens;
    std::size_t length_words = 0;
    std::size_t use_offset = 0;
    std::size_t mention_offset = 0;
};

/// Longest common contiguous run of tokens. Ties resolve to the smallest
/// offset in `use`, then the smallest offset in `mention`.
FocalSpan longest_common_run(const std::vector<std::string>& use,
                             const std::vector<std::string>& mention);

FocalSpan focal_tokens(const StatementPair& pair, const TokenNorm& norm = {});

/// True when the text holds a double quotation mark: ASCII ", curly “ ”, or a
/// TeX-style `` / '' digraph. Single quotes and apostrophes never count.
bool detect_quotation(std::string_view text);

struct CorpusStats
{
    std::size_t pair_count = 0;
    std::optional<double> mean_focal_length;
    std::optional<double> quotation_rate_mentions;
    std::map<Identity, std::size_t> per_identity;
};

CorpusStats corpus_stats(const std::vector<StatementPair>& pairs, const TokenNorm& norm = {});

} // namespace usemention
