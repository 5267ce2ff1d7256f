#include "judgekit/registry.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

#include "judgekit/parse.hpp"
#include "judgekit/util.hpp"

namespace judgekit {

using nlohmann::json;

const char* const kDefaultReflectionInstruction =
    "Revisit the query and the criteria above, then re-evaluate and output "
    "your final score.";

namespace {

// Appended to every reflection prompt regardless of the configured
// instruction, so the second pass always demands the tagged output format.
const char* const kReflectionFormatDemand =
    "First output your revised reasoning enclosed between <reasoning> and "
    "</reasoning>. Then output your final score enclosed between <score> and "
    "</score>. Inside <score> provide only the numeric score and nothing else.";

void append_block(std::string& out, std::string_view block) {
    if (!out.empty()) out.append("\n\n");
    out.append(block);
}

}  // namespace

void AspectSpec::validate() const {
    if (task_id.empty() || aspect_id.empty()) {
        throw std::invalid_argument("aspect spec: task and aspect ids must be non-empty");
    }
    rubric.validate();
    if (examples.empty()) {
        throw std::invalid_argument("aspect '" + key() + "': examples must be non-empty");
    }
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const FewShotExample& example = examples[i];
        const std::string where = "aspect '" + key() + "' example " + std::to_string(i + 1);
        if (example.reasoning.empty()) {
            throw std::invalid_argument(where + ": reasoning is empty");
        }
        if (!rubric.contains(example.score)) {
            throw std::invalid_argument(where + ": score " + format_score(example.score) +
                                        " is not in the rubric's score set");
        }
        // Template/parser self-consistency: the rendered EVALUATION block must
        // parse back to the stored score under the canonical tag grammar.
        const ParseOutcome parsed = parse(render_tagged(example.reasoning, example.score), rubric);
        if (parsed.kind != ParseKind::ValidScore || *parsed.value != example.score ||
            !parsed.reasoning || *parsed.reasoning != example.reasoning) {
            throw std::invalid_argument(where + ": rendered evaluation does not parse "
                                        "back to the stored reasoning and score");
        }
    }
    if (answer_slot_labels.empty()) {
        throw std::invalid_argument("aspect '" + key() + "': answer slot labels are empty");
    }
    if (answer_slot_labels.back() != "ANSWER") {
        throw std::invalid_argument("aspect '" + key() +
                                    "': the terminal slot label must be ANSWER");
    }
}

AspectRegistry::AspectRegistry()
    : reflection_instruction_(kDefaultReflectionInstruction) {}

const AspectSpec& AspectRegistry::register_aspect(AspectSpec spec) {
    spec.validate();
    const auto key = std::make_pair(spec.task_id, spec.aspect_id);
    if (index_.contains(key)) {
        throw std::invalid_argument("duplicate aspect registration: " + spec.key());
    }
    specs_.push_back(std::move(spec));
    const AspectSpec& stored = specs_.back();
    index_.emplace(key, &stored);
    return stored;
}

const AspectSpec* AspectRegistry::find(std::string_view task_id,
                                       std::string_view aspect_id) const {
    const auto it = index_.find(std::make_pair(std::string(task_id), std::string(aspect_id)));
    return it == index_.end() ? nullptr : it->second;
}

const AspectSpec& AspectRegistry::at(std::string_view task_id,
                                     std::string_view aspect_id) const {
    const AspectSpec* spec = find(task_id, aspect_id);
    if (!spec) {
        throw std::out_of_range("unregistered aspect: " + std::string(task_id) + "/" +
                                std::string(aspect_id));
    }
    return *spec;
}

std::vector<const AspectSpec*> AspectRegistry::list_aspects(
    std::optional<std::string> task_filter, const std::set<std::string>& exclude) const {
    std::vector<const AspectSpec*> out;
    for (const AspectSpec& spec : specs_) {
        if (task_filter && spec.task_id != *task_filter) continue;
        if (exclude.contains(spec.aspect_id)) continue;
        out.push_back(&spec);
    }
    return out;
}

PromptBundle AspectRegistry::build_prompt(const AspectSpec& aspect,
                                          const EvalInstance& instance) const {
    std::string user;
    user.reserve(4096);

    append_block(user, "[QUERY]: " + aspect.query_text);
    append_block(user, "[CRITERIA]: " + aspect.criteria_text +
                           " Scoring rubric is as follows:");
    for (const ScoreLevel& level : aspect.rubric.levels) {
        append_block(user, format_score(level.value) + ": " + level.description);
    }

    append_block(user, "[EXAMPLES]:");
    for (std::size_t i = 0; i < aspect.examples.size(); ++i) {
        const FewShotExample& example = aspect.examples[i];
        const std::string n = std::to_string(i + 1);
        append_block(user, "<START OF EXAMPLE " + n + ">");
        for (const auto& [label, text] : example.inputs) {
            append_block(user, label + ": " + text);
        }
        append_block(user, "EVALUATION: " + render_tagged(example.reasoning, example.score));
        append_block(user, "<END OF EXAMPLE " + n + ">");
    }

    for (const std::string& label : aspect.answer_slot_labels) {
        const auto it = instance.slots.find(label);
        if (it == instance.slots.end() || it->second.empty()) {
            throw std::invalid_argument("instance '" + instance.instance_id +
                                        "': missing slot '" + label +
                                        "' required by aspect " + aspect.key());
        }
        append_block(user, "[" + label + "]: " + it->second);
    }

    return PromptBundle{instance.instance_id, system_prompt_, std::move(user)};
}

PromptBundle AspectRegistry::build_reflection_prompt(
    const AspectSpec& aspect, const EvalInstance& instance,
    std::string_view initial_reasoning) const {
    if (initial_reasoning.empty()) {
        throw std::invalid_argument("reflection prompt: initial reasoning is empty");
    }
    PromptBundle bundle = build_prompt(aspect, instance);
    append_block(bundle.user_text,
                 "[INITIAL EVALUATION]: " + std::string(initial_reasoning));
    append_block(bundle.user_text, "[REFLECTION]: " + reflection_instruction_ + " " +
                                       kReflectionFormatDemand);
    return bundle;
}

namespace {

ScoreRubric rubric_from_json(const json& node, const std::string& aspect_id,
                             const std::string& where) {
    if (!node.is_array() || node.empty()) {
        throw std::runtime_error(where + ": 'rubric' must be a non-empty array");
    }
    ScoreRubric rubric;
    rubric.aspect_id = aspect_id;
    for (const json& level : node) {
        rubric.levels.push_back(ScoreLevel{level.at("score").get<double>(),
                                           level.at("description").get<std::string>()});
    }
    return rubric;
}

AspectSpec aspect_from_json(const json& doc, const std::string& where) {
    AspectSpec spec;
    spec.task_id = doc.at("task").get<std::string>();
    spec.aspect_id = doc.at("aspect").get<std::string>();
    spec.rubric = rubric_from_json(doc.at("rubric"), spec.aspect_id, where);
    spec.query_text = doc.at("query").get<std::string>();
    spec.criteria_text = doc.at("criteria").get<std::string>();
    spec.answer_slot_labels = doc.at("slots").get<std::vector<std::string>>();
    for (const json& example : doc.at("examples")) {
        FewShotExample few_shot;
        for (const json& input : example.at("inputs")) {
            few_shot.inputs.emplace_back(input.at("label").get<std::string>(),
                                         input.at("text").get<std::string>());
        }
        few_shot.reasoning = example.at("reasoning").get<std::string>();
        few_shot.score = example.at("score").get<double>();
        spec.examples.push_back(std::move(few_shot));
    }
    return spec;
}

}  // namespace

ManifestLoadResult load_manifest_dir(AspectRegistry& registry,
                                     const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw std::runtime_error("manifest directory not found: " + dir.string());
    }
    registry.set_system_prompt(
        strip_trailing_whitespace(read_text_file(dir / "system_prompt.txt")));
    const std::filesystem::path reflection_path = dir / "reflection_instruction.txt";
    if (std::filesystem::exists(reflection_path)) {
        registry.set_reflection_instruction(
            strip_trailing_whitespace(read_text_file(reflection_path)));
    }

    std::vector<std::filesystem::path> task_dirs;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_directory()) task_dirs.push_back(entry.path());
    }
    std::sort(task_dirs.begin(), task_dirs.end());

    ManifestLoadResult result;
    for (const auto& task_dir : task_dirs) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(task_dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            json doc;
            try {
                doc = json::parse(read_text_file(file));
            } catch (const json::exception& e) {
                throw std::runtime_error("manifest " + file.string() + ": " + e.what());
            }
            AspectSpec spec;
            try {
                spec = aspect_from_json(doc, file.string());
            } catch (const json::exception& e) {
                throw std::runtime_error("manifest " + file.string() + ": " + e.what());
            }
            if (spec.task_id != task_dir.filename().string()) {
                throw std::runtime_error("manifest " + file.string() + ": task '" +
                                         spec.task_id + "' does not match directory '" +
                                         task_dir.filename().string() + "'");
            }
            if (spec.rubric.shape() == RubricShape::Other) {
                result.warnings.push_back("aspect " + spec.key() +
                                          ": rubric is neither binary nor a 1-5 scale");
            }
            registry.register_aspect(std::move(spec));
            ++result.aspects_loaded;
        }
    }
    return result;
}

}  // namespace judgekit
