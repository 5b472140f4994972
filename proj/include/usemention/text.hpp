#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace usemention {

/// Word-level normalization pipeline shared by focal-token extraction and
/// term statistics: whitespace split, lowercase, NFC, strip punctuation at
/// both token ends, drop empty tokens. Each step can be disabled.
struct TokenNorm
{
    bool lowercase = true;
    bool nfc = true;
    bool strip_punctuation = true;
};

std::vector<std::string> tokenize(std::string_view text, const TokenNorm& norm = {});

/// Applies the per-token steps of `norm` to an existing token stream.
std::vector<std::string> normalize_tokens(const std::vector<std::string>& tokens,
                                          const TokenNorm& norm = {});

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
bool is_blank(std::string_view s);

} // namespace usemention
