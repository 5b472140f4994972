#pragma once

#include "usemention/corpus.hpp"
#include "usemention/labels.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace usemention {

enum class Task { use_mention, downstream };
enum class PromptMode { zero_shot, few_shot, mitigation, cot_mitigation };
enum class Provenance { paper, constructed };

std::string_view to_string(Task t);
std::string_view to_string(PromptMode m);
std::string_view to_string(Provenance p);
Task parse_task(std::string_view s);
PromptMode parse_mode(std::string_view s);

inline constexpr std::string_view kTextPlaceholder = "{{text}}";

struct PromptSpec
{
    Task task = Task::use_mention;
    Subtask subtask = Subtask::hate;
    PromptMode mode = PromptMode::zero_shot;
    std::string template_id;

    bool operator==(const PromptSpec&) const = default;
};

/// Canonical spec for a combination; throws ConfigError for use-mention
/// prompts in any mode other than zero-shot.
PromptSpec make_spec(Task task, Subtask subtask, PromptMode mode);
std::string template_id_for(Task task, Subtask subtask, PromptMode mode);

/// Output-token budget: 1 for A/B answers, 16 for class phrases, 512 for CoT.
int output_budget(const PromptSpec& spec);

struct PromptTemplate
{
    std::string template_id;
    Task task;
    Subtask subtask;
    PromptMode mode;
    Provenance provenance;
    std::string body; ///< contains kTextPlaceholder exactly once
};

class TemplateRegistry
{
public:
    /// Templates compiled into the library.
    static const TemplateRegistry& builtin();

    /// Directory holding manifest.json plus one UTF-8 file per template.
    static TemplateRegistry load_dir(const std::filesystem::path& dir);
    void write_dir(const std::filesystem::path& dir) const;

    void add(PromptTemplate t);
    const PromptTemplate& at(std::string_view template_id) const;
    bool contains(std::string_view template_id) const;
    std::vector<std::string> ids() const;
    std::string digest(std::string_view template_id) const;

private:
    std::map<std::string, PromptTemplate, std::less<>> templates_;
};

/// Substitutes `text` for the placeholder in one pass; placeholder-like
/// sequences inside `text` are left verbatim.
std::string render(const PromptSpec& spec, std::string_view text,
                   const TemplateRegistry& registry = TemplateRegistry::builtin());

struct ParsedLabel
{
    Label label = Label::unparseable;
    std::optional<std::string> rationale_text;
    std::string extraction_rule;
    std::string raw;
};

ParsedLabel parse_label(std::string_view raw, const PromptSpec& spec);

/// Output a well-behaved model would give for `label` under `spec`.
std::string canonical_output(Label label, const PromptSpec& spec);

/// Positive / negative class phrases ("hateful" / "not hateful", ...).
std::pair<std::string_view, std::string_view> class_phrases(Subtask subtask);

} // namespace usemention
