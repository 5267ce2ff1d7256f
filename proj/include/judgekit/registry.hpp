#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "judgekit/dataset.hpp"
#include "judgekit/rubric.hpp"

namespace judgekit {

/// One worked evaluation shown in the prompt: labeled input fields, the
/// reasoning, and the score. Rendered with the reasoning and score in tag
/// format so the shipped templates parse under the same grammar as live
/// completions.
struct FewShotExample {
    std::vector<std::pair<std::string, std::string>> inputs;  // label -> text, in order
    std::string reasoning;
    double score = 0.0;
};

/// One evaluation aspect of a task: its rubric, the task query, the criteria
/// text, worked examples, and the ordered labels of the per-instance input
/// fields (the last of which is always ANSWER).
struct AspectSpec {
    std::string task_id;
    std::string aspect_id;
    ScoreRubric rubric;
    std::string query_text;
    std::string criteria_text;
    std::vector<FewShotExample> examples;
    std::vector<std::string> answer_slot_labels;

    std::string key() const { return task_id + "/" + aspect_id; }
    void validate() const;  // throws std::invalid_argument
};

struct PromptBundle {
    std::string id;
    std::string system_text;
    std::string user_text;
};

/// Immutable-after-load store of aspect definitions plus the shared system
/// prompt and reflection instruction. Registration happens single-threaded at
/// startup; afterwards concurrent readers need no synchronization.
class AspectRegistry {
  public:
    AspectRegistry();

    // The index holds pointers into the spec storage; moving keeps them valid
    // (deque storage is stable under move), copying would not.
    AspectRegistry(const AspectRegistry&) = delete;
    AspectRegistry& operator=(const AspectRegistry&) = delete;
    AspectRegistry(AspectRegistry&&) = default;
    AspectRegistry& operator=(AspectRegistry&&) = default;

    /// Validates and stores a spec. Throws std::invalid_argument on a
    /// duplicate (task, aspect) key or any type-invariant violation.
    const AspectSpec& register_aspect(AspectSpec spec);

    const AspectSpec* find(std::string_view task_id,
                           std::string_view aspect_id) const;
    /// Throws std::out_of_range for an unregistered aspect.
    const AspectSpec& at(std::string_view task_id,
                         std::string_view aspect_id) const;

    /// Registered aspects in registration order, optionally restricted to one
    /// task and minus the excluded aspect ids.
    std::vector<const AspectSpec*> list_aspects(
        std::optional<std::string> task_filter = std::nullopt,
        const std::set<std::string>& exclude = {}) const;

    std::size_t size() const { return specs_.size(); }

    const std::string& system_prompt() const { return system_prompt_; }
    void set_system_prompt(std::string text) { system_prompt_ = std::move(text); }

    const std::string& reflection_instruction() const {
        return reflection_instruction_;
    }
    void set_reflection_instruction(std::string text) {
        reflection_instruction_ = std::move(text);
    }

    /// Assembles the evaluation prompt: [QUERY], [CRITERIA] with the full
    /// rubric, [EXAMPLES] wrapped in START/END markers, then the instance's
    /// labeled slots ending with [ANSWER]. Byte-identical for identical
    /// (aspect, instance) pairs. Throws std::invalid_argument when a required
    /// slot is missing or empty.
    PromptBundle build_prompt(const AspectSpec& aspect,
                              const EvalInstance& instance) const;

    /// The evaluation prompt extended with the score-stripped initial
    /// reasoning and the reflection instruction, which always demands a fresh
    /// tagged score. Throws std::invalid_argument on empty reasoning.
    PromptBundle build_reflection_prompt(const AspectSpec& aspect,
                                         const EvalInstance& instance,
                                         std::string_view initial_reasoning) const;

  private:
    std::deque<AspectSpec> specs_;  // stable storage, registration order
    std::map<std::pair<std::string, std::string>, const AspectSpec*> index_;
    std::string system_prompt_;
    std::string reflection_instruction_;
};

/// Default reflection instruction, used when the manifest directory does not
/// override it.
extern const char* const kDefaultReflectionInstruction;

struct ManifestLoadResult {
    std::size_t aspects_loaded = 0;
    std::vector<std::string> warnings;  // e.g. rubrics of unusual shape
};

/// Loads a manifest directory: `system_prompt.txt`, an optional
/// `reflection_instruction.txt`, and one JSON file per aspect under one
/// subdirectory per task. Every aspect is validated on load, including a
/// render-then-parse check of each worked example. Throws
/// std::runtime_error/std::invalid_argument naming the offending file.
ManifestLoadResult load_manifest_dir(AspectRegistry& registry,
                                     const std::filesystem::path& dir);

}  // namespace judgekit
