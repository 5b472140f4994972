#include "usemention/errors.hpp"
#include "usemention/prompting.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace usemention;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string without_placeholder(const std::string& body)
{
    auto pos = body.find(kTextPlaceholder);
    REQUIRE(pos != std::string::npos);
    std::string out = body;
    out.erase(pos, kTextPlaceholder.size());
    return out;
}

const Task kTasks[] = {Task::use_mention, Task::downstream};
const Subtask kSubtasks[] = {Subtask::hate, Subtask::misinformation};
const PromptMode kModes[] = {PromptMode::zero_shot, PromptMode::few_shot, PromptMode::mitigation,
                             PromptMode::cot_mitigation};

} // namespace

TEST_CASE("builtin templates match the appendix transcriptions")
{
    const auto& reg = TemplateRegistry::builtin();
    int checked = 0;
    for (const auto& entry : fs::directory_iterator(USEMENTION_GOLDEN_DIR)) {
        if (entry.path().extension() != ".txt")
            continue;
        const std::string id = entry.path().stem().string();
        CAPTURE(id);
        REQUIRE(reg.contains(id));
        CHECK(reg.at(id).provenance == Provenance::paper);
        CHECK(without_placeholder(reg.at(id).body) == slurp(entry.path()));
        ++checked;
    }
    CHECK(checked == 7);
}

TEST_CASE("key instruction strings are present")
{
    const auto& reg = TemplateRegistry::builtin();
    CHECK(reg.at("use_mention.hate.zero_shot").body.find("Output only A or B.") != std::string::npos);
    CHECK(reg.at("use_mention.misinformation.zero_shot").body.find("Output only A or B.") !=
          std::string::npos);
    const auto& cot = reg.at("downstream.hate.cot_mitigation").body;
    CHECK(cot.ends_with("Text: {{text}}\nAnswer: Let's think step by step."));
}

TEST_CASE("every valid combination has a template with one placeholder")
{
    const auto& reg = TemplateRegistry::builtin();
    CHECK(reg.ids().size() == 10);
    for (Subtask s : kSubtasks) {
        for (PromptMode m : kModes) {
            auto spec = make_spec(Task::downstream, s, m);
            REQUIRE(reg.contains(spec.template_id));
            const auto& body = reg.at(spec.template_id).body;
            auto first = body.find(kTextPlaceholder);
            REQUIRE(first != std::string::npos);
            CHECK(body.find(kTextPlaceholder, first + 1) == std::string::npos);
            CHECK_FALSE(body.ends_with("\n"));
        }
    }
    CHECK(reg.at("downstream.misinformation.few_shot").provenance == Provenance::constructed);
    CHECK(reg.at("downstream.misinformation.cot_mitigation").provenance == Provenance::constructed);
}

TEST_CASE("use-mention prompts exist only in zero-shot mode")
{
    CHECK_NOTHROW(make_spec(Task::use_mention, Subtask::hate, PromptMode::zero_shot));
    CHECK_THROWS_AS(make_spec(Task::use_mention, Subtask::hate, PromptMode::few_shot), ConfigError);
    CHECK_THROWS_AS(make_spec(Task::use_mention, Subtask::misinformation, PromptMode::cot_mitigation),
                    ConfigError);
}

TEST_CASE("rendering substitutes the text once and verbatim")
{
    auto spec = make_spec(Task::use_mention, Subtask::hate, PromptMode::zero_shot);
    auto out = render(spec, "Jews are greedy");
    CHECK(out.find("Text: Jews are greedy\nCategory:") != std::string::npos);

    // Placeholder-looking content in the text is not expanded again.
    auto tricky = render(spec, "say {{text}} twice");
    CHECK(tricky.find("Text: say {{text}} twice\n") != std::string::npos);

    CHECK_THROWS_AS(render(spec, ""), ConfigError);
    CHECK_THROWS_AS(render(spec, "  \n"), ConfigError);

    PromptSpec wrong = spec;
    wrong.template_id = "downstream.hate.zero_shot";
    CHECK_THROWS_AS(render(wrong, "x"), TemplateError);
}

TEST_CASE("output budgets")
{
    CHECK(output_budget(make_spec(Task::use_mention, Subtask::hate, PromptMode::zero_shot)) == 1);
    CHECK(output_budget(make_spec(Task::downstream, Subtask::hate, PromptMode::few_shot)) == 16);
    CHECK(output_budget(make_spec(Task::downstream, Subtask::hate, PromptMode::cot_mitigation)) == 512);
}

TEST_CASE("canonical outputs parse back to their label")
{
    for (Task t : kTasks) {
        for (Subtask s : kSubtasks) {
            for (PromptMode m : kModes) {
                if (t == Task::use_mention && m != PromptMode::zero_shot)
                    continue;
                auto spec = make_spec(t, s, m);
                for (Label l : {Label::positive, Label::negative}) {
                    CAPTURE(spec.template_id);
                    CHECK(parse_label(canonical_output(l, spec), spec).label == l);
                }
            }
        }
    }
}

TEST_CASE("negation is matched before the positive phrase")
{
    auto hate = make_spec(Task::downstream, Subtask::hate, PromptMode::zero_shot);
    auto mis = make_spec(Task::downstream, Subtask::misinformation, PromptMode::zero_shot);
    CHECK(parse_label("not hateful", hate).label == Label::negative);
    CHECK(parse_label("Not Hateful.", hate).label == Label::negative);
    CHECK(parse_label("hateful", hate).label == Label::positive);
    CHECK(parse_label(" Category: hateful", hate).label == Label::positive);
    CHECK(parse_label("not misinformation", mis).label == Label::negative);
    CHECK(parse_label("misinformation", mis).label == Label::positive);
    CHECK(parse_label("hatefulness", hate).label == Label::unparseable);
    CHECK(parse_label("I cannot answer", hate).label == Label::unparseable);
}

TEST_CASE("use-mention answers")
{
    auto spec = make_spec(Task::use_mention, Subtask::misinformation, PromptMode::zero_shot);
    CHECK(parse_label("A", spec).label == Label::positive);
    CHECK(parse_label(" b.\n", spec).label == Label::negative);
    CHECK(parse_label("C", spec).label == Label::unparseable);
    CHECK(parse_label("A or B", spec).label == Label::unparseable);
}

TEST_CASE("chain-of-thought answers from the exemplars")
{
    auto spec = make_spec(Task::downstream, Subtask::hate, PromptMode::cot_mitigation);
    auto used = parse_label(
        "Hateful language is actively used in order to express hate. So the answer is: hateful", spec);
    CHECK(used.label == Label::positive);
    REQUIRE(used.rationale_text);
    CHECK(*used.rationale_text == "Hateful language is actively used in order to express hate.");

    auto mentioned = parse_label("Hateful language is mentioned. Mentioning is to provide a "
                                 "counternarrative. So the answer is: not hateful",
                                 spec);
    CHECK(mentioned.label == Label::negative);
    CHECK(*mentioned.rationale_text ==
          "Hateful language is mentioned. Mentioning is to provide a counternarrative.");

    // The last marker wins.
    auto twice = parse_label("So the answer is: hateful? No. So the answer is: not hateful", spec);
    CHECK(twice.label == Label::negative);

    auto missing = parse_label("hateful", spec);
    CHECK(missing.label == Label::positive);
    CHECK_FALSE(missing.rationale_text);

    CHECK(parse_label("So the answer is: unclear", spec).label == Label::unparseable);
}

TEST_CASE("template directory round-trips and matches the shipped copy")
{
    const auto dir = fs::temp_directory_path() / "usemention_templates_test";
    fs::remove_all(dir);
    TemplateRegistry::builtin().write_dir(dir);
    auto loaded = TemplateRegistry::load_dir(dir);
    CHECK(loaded.ids() == TemplateRegistry::builtin().ids());
    for (const auto& id : loaded.ids())
        CHECK(loaded.digest(id) == TemplateRegistry::builtin().digest(id));

    auto shipped = TemplateRegistry::load_dir(USEMENTION_TEMPLATE_DIR);
    CHECK(shipped.ids() == TemplateRegistry::builtin().ids());
    for (const auto& id : shipped.ids()) {
        CAPTURE(id);
        CHECK(shipped.at(id).body == TemplateRegistry::builtin().at(id).body);
    }
    fs::remove_all(dir);
}

TEST_CASE("templates without exactly one placeholder are rejected")
{
    TemplateRegistry reg;
    PromptTemplate t{"x", Task::downstream, Subtask::hate, PromptMode::zero_shot, Provenance::constructed,
                     "no placeholder"};
    CHECK_THROWS_AS(reg.add(t), TemplateError);
    t.body = "{{text}} and {{text}}";
    CHECK_THROWS_AS(reg.add(t), TemplateError);
    t.body = "Text: {{text}}";
    CHECK_NOTHROW(reg.add(t));
}
