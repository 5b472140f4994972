#include "usemention/prompting.hpp"

#include "usemention/digest.hpp"
#include "usemention/errors.hpp"
#include "usemention/text.hpp"

#include <json.hpp>

#include <cctype>
#include <fstream>
#include <sstream>

namespace usemention {

std::string_view to_string(Task t)
{
    return t == Task::use_mention ? "use_mention" : "downstream";
}

std::string_view to_string(PromptMode m)
{
    switch (m) {
    case PromptMode::zero_shot: return "zero_shot";
    case PromptMode::few_shot: return "few_shot";
    case PromptMode::mitigation: return "mitigation";
    case PromptMode::cot_mitigation: return "cot_mitigation";
    }
    return "zero_shot";
}

std::string_view to_string(Provenance p)
{
    return p == Provenance::paper ? "paper" : "constructed";
}

namespace {

std::string canonical_token(std::string_view s)
{
    std::string out = to_lower_ascii(trim(s));
    for (auto& c : out)
        if (c == '-')
            c = '_';
    return out;
}

} // namespace

Task parse_task(std::string_view s)
{
    const auto v = canonical_token(s);
    if (v == "use_mention")
        return Task::use_mention;
    if (v == "downstream")
        return Task::downstream;
    throw ConfigError("unknown task '" + std::string(s) + "'");
}

PromptMode parse_mode(std::string_view s)
{
    const auto v = canonical_token(s);
    if (v == "zero_shot")
        return PromptMode::zero_shot;
    if (v == "few_shot")
        return PromptMode::few_shot;
    if (v == "mitigation")
        return PromptMode::mitigation;
    if (v == "cot_mitigation")
        return PromptMode::cot_mitigation;
    throw ConfigError("unknown prompt mode '" + std::string(s) + "'");
}

std::string template_id_for(Task task, Subtask subtask, PromptMode mode)
{
    return std::string(to_string(task)) + "." + std::string(to_string(subtask)) + "." +
           std::string(to_string(mode));
}

PromptSpec make_spec(Task task, Subtask subtask, PromptMode mode)
{
    if (task == Task::use_mention && mode != PromptMode::zero_shot)
        throw ConfigError("use-mention classification is zero-shot only");
    return {task, subtask, mode, template_id_for(task, subtask, mode)};
}

int output_budget(const PromptSpec& spec)
{
    if (spec.task == Task::use_mention)
        return 1;
    return spec.mode == PromptMode::cot_mitigation ? 512 : 16;
}

// ---------------------------------------------------------------------------
// Registry

void TemplateRegistry::add(PromptTemplate t)
{
    const auto first = t.body.find(kTextPlaceholder);
    if (first == std::string::npos ||
        t.body.find(kTextPlaceholder, first + kTextPlaceholder.size()) != std::string::npos)
        throw TemplateError("template '" + t.template_id + "' must contain {{text}} exactly once");
    if (t.task == Task::use_mention && t.mode != PromptMode::zero_shot)
        throw TemplateError("template '" + t.template_id + "': use-mention templates are zero-shot");
    auto id = t.template_id;
    templates_.insert_or_assign(std::move(id), std::move(t));
}

const PromptTemplate& TemplateRegistry::at(std::string_view template_id) const
{
    auto it = templates_.find(template_id);
    if (it == templates_.end())
        throw TemplateError("unknown template_id '" + std::string(template_id) + "'");
    return it->second;
}

bool TemplateRegistry::contains(std::string_view template_id) const
{
    return templates_.find(template_id) != templates_.end();
}

std::vector<std::string> TemplateRegistry::ids() const
{
    std::vector<std::string> out;
    for (const auto& [id, t] : templates_)
        out.push_back(id);
    return out;
}

std::string TemplateRegistry::digest(std::string_view template_id) const
{
    return sha256_hex(at(template_id).body);
}

TemplateRegistry TemplateRegistry::load_dir(const std::filesystem::path& dir)
{
    std::ifstream in(dir / "manifest.json");
    if (!in)
        throw TemplateError("no manifest.json in " + dir.string());
    auto manifest = nlohmann::json::parse(in, nullptr, false);
    if (manifest.is_discarded() || !manifest.is_array())
        throw TemplateError(dir.string() + "/manifest.json: expected a JSON array");

    TemplateRegistry reg;
    for (const auto& entry : manifest) {
        try {
            PromptTemplate t;
            t.template_id = entry.at("template_id").get<std::string>();
            t.task = parse_task(entry.at("task").get<std::string>());
            t.subtask = parse_subtask(entry.at("subtask").get<std::string>());
            t.mode = parse_mode(entry.at("mode").get<std::string>());
            const auto prov = entry.at("provenance").get<std::string>();
            if (prov != "paper" && prov != "constructed")
                throw TemplateError("bad provenance '" + prov + "'");
            t.provenance = prov == "paper" ? Provenance::paper : Provenance::constructed;
            std::ifstream body(dir / entry.at("file").get<std::string>(), std::ios::binary);
            if (!body)
                throw TemplateError("missing template file for " + t.template_id);
            std::stringstream ss;
            ss << body.rdbuf();
            t.body = ss.str();
            reg.add(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw TemplateError(dir.string() + "/manifest.json: " + e.what());
        } catch (const ConfigError& e) {
            throw TemplateError(dir.string() + "/manifest.json: " + e.what());
        }
    }
    return reg;
}

void TemplateRegistry::write_dir(const std::filesystem::path& dir) const
{
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
    for (const auto& [id, t] : templates_) {
        const std::string file = id + ".txt";
        std::ofstream(dir / file, std::ios::binary | std::ios::trunc) << t.body;
        manifest.push_back({{"template_id", id},
                            {"task", to_string(t.task)},
                            {"subtask", to_string(t.subtask)},
                            {"mode", to_string(t.mode)},
                            {"provenance", to_string(t.provenance)},
                            {"file", file}});
    }
    std::ofstream(dir / "manifest.json", std::ios::trunc) << manifest.dump(2) << '\n';
}

std::string render(const PromptSpec& spec, std::string_view text, const TemplateRegistry& registry)
{
    if (trim(text).empty())
        throw ConfigError("cannot render a prompt for empty text");
    const auto& t = registry.at(spec.template_id);
    if (t.task != spec.task || t.subtask != spec.subtask || t.mode != spec.mode)
        throw TemplateError("template '" + spec.template_id + "' does not match the prompt spec");
    const auto pos = t.body.find(kTextPlaceholder);
    std::string out;
    out.reserve(t.body.size() + text.size());
    out.append(t.body, 0, pos);
    out.append(text);
    out.append(t.body, pos + kTextPlaceholder.size());
    return out;
}

// ---------------------------------------------------------------------------
// Parsing

std::pair<std::string_view, std::string_view> class_phrases(Subtask subtask)
{
    if (subtask == Subtask::hate)
        return {"hateful", "not hateful"};
    return {"misinformation", "not misinformation"};
}

namespace {

bool starts_with_word(std::string_view s, std::string_view word)
{
    if (!s.starts_with(word))
        return false;
    return s.size() == word.size() || !std::isalnum(static_cast<unsigned char>(s[word.size()]));
}

std::optional<Label> match_class(std::string_view raw, Subtask subtask)
{
    std::string s = to_lower_ascii(trim(raw));
    std::string_view v = s;
    auto skip_noise = [&] {
        while (!v.empty() && !std::isalnum(static_cast<unsigned char>(v.front())))
            v.remove_prefix(1);
    };
    skip_noise();
    if (v.starts_with("category:")) {
        v.remove_prefix(9);
        skip_noise();
    }
    const auto [pos, neg] = class_phrases(subtask);
    // Negation first: "not hateful" must never match "hateful".
    if (starts_with_word(v, neg))
        return Label::negative;
    if (starts_with_word(v, pos))
        return Label::positive;
    return std::nullopt;
}

ParsedLabel parse_use_mention(std::string_view raw)
{
    ParsedLabel out;
    out.raw = std::string(raw);
    out.extraction_rule = "use_mention:A|B";
    std::string_view v = trim(raw);
    while (!v.empty() && std::ispunct(static_cast<unsigned char>(v.back())))
        v.remove_suffix(1);
    v = trim(v);
    if (v == "A" || v == "a")
        out.label = Label::positive;
    else if (v == "B" || v == "b")
        out.label = Label::negative;
    return out;
}

} // namespace

ParsedLabel parse_label(std::string_view raw, const PromptSpec& spec)
{
    if (spec.task == Task::use_mention)
        return parse_use_mention(raw);

    ParsedLabel out;
    out.raw = std::string(raw);
    if (spec.mode == PromptMode::cot_mitigation) {
        constexpr std::string_view marker = "so the answer is";
        const std::string lower = to_lower_ascii(raw);
        const auto pos = lower.rfind(marker);
        if (pos != std::string::npos) {
            out.extraction_rule = "cot:last 'so the answer is'";
            out.rationale_text = std::string(trim(raw.substr(0, pos)));
            std::string_view rest = raw.substr(pos + marker.size());
            rest = trim(rest);
            if (rest.starts_with(':'))
                rest.remove_prefix(1);
            if (auto l = match_class(rest, spec.subtask))
                out.label = *l;
            return out;
        }
        out.extraction_rule = "cot:fallback whole text";
    } else {
        out.extraction_rule = "downstream:leading class phrase";
    }
    if (auto l = match_class(raw, spec.subtask))
        out.label = *l;
    return out;
}

std::string canonical_output(Label label, const PromptSpec& spec)
{
    if (label == Label::unparseable)
        throw ConfigError("no canonical output for an unparseable label");
    if (spec.task == Task::use_mention)
        return label == Label::positive ? "A" : "B";
    const auto [pos, neg] = class_phrases(spec.subtask);
    std::string phrase(label == Label::positive ? pos : neg);
    if (spec.mode == PromptMode::cot_mitigation)
        return (label == Label::positive ? std::string("Language is actively used. So the answer is: ")
                                         : std::string("Language is mentioned. So the answer is: ")) +
               phrase;
    return phrase;
}

} // namespace usemention
