#include "usemention/text.hpp"

#include <doctest.h>

using namespace usemention;

TEST_CASE("tokenize splits on whitespace and lowercases")
{
    auto t = tokenize("  Jews ARE\tgreedy\n");
    CHECK(t == std::vector<std::string>{"jews", "are", "greedy"});
}

TEST_CASE("punctuation is stripped only at token ends")
{
    auto t = tokenize("\"Hello,\" she said: don't (stop)!");
    CHECK(t == std::vector<std::string>{"hello", "she", "said", "don't", "stop"});
}

TEST_CASE("tokens made only of punctuation disappear")
{
    CHECK(tokenize("-- ... !!").empty());
    CHECK(tokenize("").empty());
}

TEST_CASE("non-ascii text is lowercased and composed")
{
    // "É" written as E + combining acute accent.
    auto t = tokenize("E\xCC\x81T\xC3\x89 \xC2\xABMuslims\xC2\xBB");
    REQUIRE(t.size() == 2);
    CHECK(t[0] == "\xC3\xA9t\xC3\xA9");
    CHECK(t[1] == "muslims");
}

TEST_CASE("each normalization step can be disabled")
{
    TokenNorm raw{false, false, false};
    auto t = tokenize("Hi, There!", raw);
    CHECK(t == std::vector<std::string>{"Hi,", "There!"});
    TokenNorm keep_case{false, true, true};
    CHECK(tokenize("Hi, There!", keep_case) == std::vector<std::string>{"Hi", "There"});
}

TEST_CASE("normalization is idempotent")
{
    const std::string samples[] = {"\"The plot to alter DNA\"", "``Quoted''  text!!", "Ünïcödé, (nested) 'words'"};
    for (const auto& s : samples) {
        auto once = tokenize(s);
        CHECK(normalize_tokens(once) == once);
    }
}

TEST_CASE("trim and blank")
{
    CHECK(trim("  a b \n") == "a b");
    CHECK(trim("") == "");
    CHECK(is_blank(" \t\n"));
    CHECK_FALSE(is_blank(" x "));
    CHECK(to_lower_ascii("AbC-1") == "abc-1");
}
