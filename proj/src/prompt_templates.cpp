#include "usemention/prompting.hpp"

namespace usemention {

namespace {

constexpr const char* kUseMentionHate = R"(The following text contains language that might be considered hateful. Classify the text into one of the following two categories:
A: use
B: mention
Use means that the hateful language is actively used, and not referred to. Examples of used:
1. Using hateful language to express, incite, offend, or promote hate.
2. Using hateful language to imply hate towards an identity group.
Mention means that hateful language is stated to illustrate properties of the hateful language itself. Examples of mentioned:
1. Quoting, referring to, or paraphrasing hateful language to explain attitude towards it.
2. Addressing hateful language when providing a counternarrative.
Output only A or B.
Text: {{text}}
Category:)";

constexpr const char* kUseMentionMisinfo = R"(The following text contains language that might be considered misinformation. Classify the text into one of the following two categories:
A: use
B: mention
Use means that misinformation is actively used, and not referred to. Examples of used:
1. Using misinformation to deliberately deceive.
2. Using misinformative language to imply the truthfulness of misinformation.
Mention means that misinformation is stated to illustrate properties of the misinformative language itself. Examples of mentioned:
1. Quoting, referring to, or paraphrasing misinformation to express a lack of support for the misinformative language.
2. Addressing misinformation when providing a counternarrative.
Output only A or B.
Text: {{text}}
Category:)";

#define HATE_HEADER                                                                                \
    "Classify the following text into one of the following two categories: [hateful, not "        \
    "hateful]. Hateful content expresses, incites, or promotes hate based on race, gender, "       \
    "ethnicity, religion, nationality, sexual orientation, disability status, or caste.\n"

#define MISINFO_HEADER                                                                             \
    "Classify the following text into one of the following two categories: [misinformation, not " \
    "misinformation]. Misinformation means that the text is either inaccurate or contains an "     \
    "element of truth but ignores critical facts that would give a different impression.\n"

constexpr const char* kDownstreamHate = HATE_HEADER "Text: {{text}}\nCategory:";
constexpr const char* kDownstreamMisinfo = MISINFO_HEADER "Text: {{text}}\nCategory:";

constexpr const char* kFewShotHate = HATE_HEADER
    "Text: gay people are a burden to our society\n"
    "Category: hateful\n"
    "Text: I always feel unsafe when surrounded by Arabs\n"
    "Category: hateful\n"
    "Text: decent people are allowed here, so queers keep out\n"
    "Category: hateful\n"
    "Text: It is incredibly ignorant to claim that gay people are a burden to our society. This "
    "kind of discrimination has no place in our world.\n"
    "Category: not hateful\n"
    "Text: Feeling unsafe just because someone is Arab is a form of prejudice and "
    "discrimination. I completely disapprove of that kind of mindset.\n"
    "Category: not hateful\n"
    "Text: {{text}}\n"
    "Category:";

constexpr const char* kMitigationHate = HATE_HEADER
    "Hateful is when hateful language is actively used, and not referred to. When language or "
    "arguments related to hate are just mentioned, the text is not hateful when debunking.\n"
    "For example, text quoting, referring to, or paraphrasing hate speech to provide a "
    "counternarrative is not hateful.\n"
    "Text: {{text}}\n"
    "Category:";

#define HATE_USED_ANSWER                                                                           \
    "Answer: Let's think step by step.\n"                                                          \
    "Hateful language is actively used in order to express hate. So the answer is: hateful\n"
#define HATE_MENTIONED_ANSWER                                                                      \
    "Answer: Let's think step by step.\n"                                                          \
    "Hateful language is mentioned. Mentioning is to provide a counternarrative. So the answer "   \
    "is: not hateful\n"

constexpr const char* kCotHate = HATE_HEADER
    "Use means that the hateful language is actively used, and not referred to. Mention means "
    "that hateful language is stated to illustrate properties of the hateful language itself.\n"
    "Hateful is when hateful language is actively used, and not mentioned. When language or "
    "arguments related to hate are just mentioned, the text is not hateful when debunking.\n"
    "For example, text quoting, referring to, or paraphrasing hate speech to provide a "
    "counternarrative is not hateful.\n"
    "Text: gay people are a burden to our society\n" HATE_USED_ANSWER
    "Text: I always feel unsafe when surrounded by Arabs\n" HATE_USED_ANSWER
    "Text: decent people are allowed here, so queers keep out\n" HATE_USED_ANSWER
    "Text: It is incredibly ignorant to claim that gay people are a burden to our society. This "
    "kind of discrimination has no place in our world.\n" HATE_MENTIONED_ANSWER
    "Text: Feeling unsafe just because someone is Arab is a form of prejudice and "
    "discrimination. I completely disapprove of that kind of mindset.\n" HATE_MENTIONED_ANSWER
    "Text: {{text}}\n"
    "Answer: Let's think step by step.";

// Misinformation few-shot, mitigation and CoT prompts mirror the hate speech
// prompts structurally; their exemplars are constructed, not transcribed.
#define MISINFO_USE_1 "the COVID vaccine is an experimental gene therapy"
#define MISINFO_USE_2 "5G towers are spreading the coronavirus"
#define MISINFO_USE_3 "masks do nothing against the virus, so stop wearing them"
#define MISINFO_MENTION_1                                                                          \
    "It is incredibly misleading to claim that the COVID vaccine is an experimental gene "         \
    "therapy. The vaccine does not change anyone's genes."
#define MISINFO_MENTION_2                                                                          \
    "Believing that 5G towers are spreading the coronavirus is a form of misinformation. I "      \
    "completely disapprove of sharing that kind of claim."

constexpr const char* kFewShotMisinfo = MISINFO_HEADER
    "Text: " MISINFO_USE_1 "\n"
    "Category: misinformation\n"
    "Text: " MISINFO_USE_2 "\n"
    "Category: misinformation\n"
    "Text: " MISINFO_USE_3 "\n"
    "Category: misinformation\n"
    "Text: " MISINFO_MENTION_1 "\n"
    "Category: not misinformation\n"
    "Text: " MISINFO_MENTION_2 "\n"
    "Category: not misinformation\n"
    "Text: {{text}}\n"
    "Category:";

constexpr const char* kMitigationMisinfo = MISINFO_HEADER
    "Misinformation is when misinformative language is actively used, and not referred to. When "
    "language or arguments related to misinformation are just mentioned, the text is not "
    "misinformation when debunking.\n"
    "For example, text quoting, referring to, or paraphrasing misinformation to provide a "
    "counternarrative is not misinformation.\n"
    "Text: {{text}}\n"
    "Category:";

#define MISINFO_USED_ANSWER                                                                        \
    "Answer: Let's think step by step.\n"                                                          \
    "Misinformative language is actively used in order to deceive. So the answer is: "            \
    "misinformation\n"
#define MISINFO_MENTIONED_ANSWER                                                                   \
    "Answer: Let's think step by step.\n"                                                          \
    "Misinformative language is mentioned. Mentioning is to provide a counternarrative. So the "   \
    "answer is: not misinformation\n"

constexpr const char* kCotMisinfo = MISINFO_HEADER
    "Use means that misinformation is actively used, and not referred to. Mention means that "
    "misinformation is stated to illustrate properties of the misinformative language itself.\n"
    "Misinformation is when misinformative language is actively used, and not mentioned. When "
    "language or arguments related to misinformation are just mentioned, the text is not "
    "misinformation when debunking.\n"
    "For example, text quoting, referring to, or paraphrasing misinformation to provide a "
    "counternarrative is not misinformation.\n"
    "Text: " MISINFO_USE_1 "\n" MISINFO_USED_ANSWER
    "Text: " MISINFO_USE_2 "\n" MISINFO_USED_ANSWER
    "Text: " MISINFO_USE_3 "\n" MISINFO_USED_ANSWER
    "Text: " MISINFO_MENTION_1 "\n" MISINFO_MENTIONED_ANSWER
    "Text: " MISINFO_MENTION_2 "\n" MISINFO_MENTIONED_ANSWER
    "Text: {{text}}\n"
    "Answer: Let's think step by step.";

TemplateRegistry make_builtin()
{
    TemplateRegistry reg;
    auto add = [&](Task task, Subtask subtask, PromptMode mode, Provenance prov, const char* body) {
        reg.add({template_id_for(task, subtask, mode), task, subtask, mode, prov, body});
    };
    using enum PromptMode;
    add(Task::use_mention, Subtask::hate, zero_shot, Provenance::paper, kUseMentionHate);
    add(Task::use_mention, Subtask::misinformation, zero_shot, Provenance::paper, kUseMentionMisinfo);
    add(Task::downstream, Subtask::hate, zero_shot, Provenance::paper, kDownstreamHate);
    add(Task::downstream, Subtask::hate, few_shot, Provenance::paper, kFewShotHate);
    add(Task::downstream, Subtask::hate, mitigation, Provenance::paper, kMitigationHate);
    add(Task::downstream, Subtask::hate, cot_mitigation, Provenance::paper, kCotHate);
    add(Task::downstream, Subtask::misinformation, zero_shot, Provenance::paper, kDownstreamMisinfo);
    add(Task::downstream, Subtask::misinformation, few_shot, Provenance::constructed, kFewShotMisinfo);
    add(Task::downstream, Subtask::misinformation, mitigation, Provenance::constructed,
        kMitigationMisinfo);
    add(Task::downstream, Subtask::misinformation, cot_mitigation, Provenance::constructed,
        kCotMisinfo);
    return reg;
}

} // namespace

const TemplateRegistry& TemplateRegistry::builtin()
{
    static const TemplateRegistry reg = make_builtin();
    return reg;
}

} // namespace usemention
