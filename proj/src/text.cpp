#include "usemention/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cctype>

namespace usemention {

namespace {

icu::UnicodeString apply_norm(icu::UnicodeString token, const TokenNorm& norm)
{
    if (norm.lowercase)
        token.toLower(icu::Locale::getRoot());
    if (norm.nfc) {
        UErrorCode status = U_ZERO_ERROR;
        const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
        if (U_SUCCESS(status)) {
            icu::UnicodeString out = nfc->normalize(token, status);
            if (U_SUCCESS(status))
                token = std::move(out);
        }
    }
    if (norm.strip_punctuation) {
        // The grave accent is a symbol in Unicode but opens TeX-style ``quotes''.
        auto strippable = [](UChar32 c) { return u_ispunct(c) || c == U'`'; };
        int32_t begin = 0;
        int32_t end = token.length();
        while (begin < end) {
            UChar32 c = token.char32At(begin);
            if (!strippable(c))
                break;
            begin += U16_LENGTH(c);
        }
        while (end > begin) {
            int32_t prev = token.moveIndex32(end, -1);
            if (!strippable(token.char32At(prev)))
                break;
            end = prev;
        }
        token = icu::UnicodeString(token, begin, end - begin);
    }
    return token;
}

std::string to_utf8(const icu::UnicodeString& s)
{
    std::string out;
    s.toUTF8String(out);
    return out;
}

} // namespace

std::vector<std::string> tokenize(std::string_view text, const TokenNorm& norm)
{
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(
        icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    std::vector<std::string> tokens;
    int32_t i = 0;
    const int32_t n = u.length();
    while (i < n) {
        while (i < n && u_isUWhiteSpace(u.char32At(i)))
            i = u.moveIndex32(i, 1);
        int32_t start = i;
        while (i < n && !u_isUWhiteSpace(u.char32At(i)))
            i = u.moveIndex32(i, 1);
        if (i > start) {
            auto token = apply_norm(icu::UnicodeString(u, start, i - start), norm);
            if (!token.isEmpty())
                tokens.push_back(to_utf8(token));
        }
    }
    return tokens;
}

std::vector<std::string> normalize_tokens(const std::vector<std::string>& tokens,
                                          const TokenNorm& norm)
{
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        auto u = apply_norm(icu::UnicodeString::fromUTF8(t), norm);
        if (!u.isEmpty())
            out.push_back(to_utf8(u));
    }
    return out;
}

std::string_view trim(std::string_view s)
{
    constexpr std::string_view ws = " \t\n\r\f\v";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::string to_lower_ascii(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_blank(std::string_view s)
{
    // Unicode-aware: a field of only NBSP or ideographic spaces counts as blank.
    return tokenize(s, TokenNorm{false, false, false}).empty();
}

} // namespace usemention
