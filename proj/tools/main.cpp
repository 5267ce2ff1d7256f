// judgekit command-line interface: data validation, reward inspection,
// training simulation, evaluation runs, and report rendering.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "judgekit/backend.hpp"
#include "judgekit/dataset.hpp"
#include "judgekit/grpo.hpp"
#include "judgekit/harness.hpp"
#include "judgekit/registry.hpp"
#include "judgekit/report.hpp"
#include "judgekit/reward.hpp"
#include "judgekit/util.hpp"

namespace {

using judgekit::AspectRegistry;
using judgekit::AspectSpec;
using judgekit::BackendSpec;
using judgekit::DatasetManifest;
using judgekit::EvalInstance;
using judgekit::RewardConfig;
using judgekit::ScoreRubric;
using judgekit::SimPrompt;
using judgekit::Split;
using judgekit::ToyPolicy;
using judgekit::TrainConfig;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;   // failed check or operational failure
constexpr int kExitMalformed = 2; // malformed input, config, or usage

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

judgekit::DenominatorMode mode_from_string(const std::string& text) {
    if (text == "literal") return judgekit::DenominatorMode::Literal;
    if (text == "squared") return judgekit::DenominatorMode::Squared;
    throw std::invalid_argument("denominator mode must be 'literal' or 'squared'");
}

RewardConfig reward_from_json(const json& node) {
    RewardConfig config;
    config.k = node.value("k", config.k);
    config.max_tokens = node.value("max_tokens", config.max_tokens);
    if (node.contains("denominator_mode")) {
        config.denominator_mode = mode_from_string(node["denominator_mode"].get<std::string>());
    }
    config.validate();
    return config;
}

ToyPolicy policy_from_json(const json& node) {
    ToyPolicy policy;
    const auto probs = node.at("archetype_probs").get<std::vector<double>>();
    if (probs.size() != judgekit::kArchetypeCount) {
        throw std::invalid_argument("policy: archetype_probs must have 5 entries");
    }
    std::copy(probs.begin(), probs.end(), policy.archetype_probs.begin());
    policy.correction_prob = node.value("correction_prob", 0.0);
    policy.backslide_prob = node.value("backslide_prob", 0.0);
    policy.validate();
    return policy;
}

ScoreRubric sim_rubric(const std::string& prompt_id, const std::vector<double>& scores) {
    ScoreRubric rubric;
    rubric.aspect_id = prompt_id;
    for (const double score : scores) {
        rubric.levels.push_back({score, "simulated rubric level " + judgekit::format_score(score)});
    }
    rubric.validate();
    return rubric;
}

json policy_to_json(const ToyPolicy& policy) {
    json probs;
    for (std::size_t a = 0; a < judgekit::kArchetypeCount; ++a) {
        probs[judgekit::archetype_name(static_cast<judgekit::Archetype>(a))] =
            policy.archetype_probs[a];
    }
    return json{{"archetype_probs", probs},
                {"correction_prob", policy.correction_prob},
                {"backslide_prob", policy.backslide_prob}};
}

int cmd_validate_data(const std::string& manifests, const std::string& dataset,
                      const std::string& expected,
                      const std::set<std::string>& mask) {
    AspectRegistry registry;
    const auto load = judgekit::load_manifest_dir(registry, manifests);
    for (const std::string& warning : load.warnings) {
        std::cerr << "warning: " << warning << "\n";
    }

    const judgekit::LoadedDataset data = judgekit::load_dataset(dataset, registry);
    DatasetManifest actual = data.manifest;
    DatasetManifest want = judgekit::load_expected_manifest(expected);
    if (!mask.empty()) {
        const auto masked = judgekit::mask_aspects(data.instances, mask);
        actual = DatasetManifest::from_instances(masked);
        want = want.masked(mask);
    }

    const auto report = judgekit::validate_manifest(actual, want);
    std::cout << report.render();
    std::cout << "instances: " << data.instances.size() << " (train "
              << actual.train_total() << ", test " << actual.test_total() << ")\n";
    return report.pass ? kExitOk : kExitFailure;
}

int cmd_reward(const std::string& manifests, const std::string& task,
               const std::string& aspect_id, const std::string& text, double gold,
               long length, const RewardConfig& config) {
    AspectRegistry registry;
    judgekit::load_manifest_dir(registry, manifests);
    const AspectSpec& aspect = registry.at(task, aspect_id);

    const judgekit::ParseOutcome outcome = judgekit::parse(text, aspect.rubric);
    const double r = judgekit::stage1_reward(outcome, gold, aspect.rubric);
    const double f = judgekit::length_penalty(length, config);

    std::cout << "parse: " << judgekit::parse_kind_name(outcome.kind);
    if (outcome.value) std::cout << " (score " << judgekit::format_score(*outcome.value) << ")";
    std::cout << "\n";
    if (outcome.score_tag_pairs > 1) {
        std::cout << "note: " << outcome.score_tag_pairs
                  << " score tag pairs present, first one scored\n";
    }
    std::printf("r: %g\n", r);
    std::printf("f: %g\n", f);
    std::printf("R: %g\n", r - f);
    return kExitOk;
}

int cmd_train_sim(const std::string& config_path, const std::string& out_dir,
                  const std::string& stage, std::optional<std::uint64_t> seed_override) {
    const json doc = json::parse(judgekit::read_text_file(config_path));

    TrainConfig config;
    config.iterations = doc.value("iterations", config.iterations);
    config.learning_rate = doc.value("learning_rate", config.learning_rate);
    config.group_size = doc.value("group_size", config.group_size);
    config.epsilon = doc.value("epsilon", config.epsilon);
    config.seed = doc.value("seed", config.seed);
    if (seed_override) config.seed = *seed_override;
    if (doc.contains("reward")) config.reward = reward_from_json(doc["reward"]);
    config.validate();

    std::vector<SimPrompt> prompts;
    for (const json& node : doc.at("prompts")) {
        const std::string id = node.at("id").get<std::string>();
        prompts.push_back(SimPrompt{id, node.at("gold").get<double>(),
                                    sim_rubric(id, node.at("scores").get<std::vector<double>>())});
    }

    std::filesystem::create_directories(out_dir);
    json summary;
    summary["config"] = doc;
    summary["seed"] = config.seed;

    if (stage == "1" || stage == "both") {
        ToyPolicy policy = policy_from_json(doc.at("stage1_policy"));
        const auto trace = judgekit::train_stage1(policy, prompts, config);
        judgekit::write_trace(trace, config,
                              std::filesystem::path(out_dir) / "stage1_trace.jsonl");
        summary["stage1"] = {{"final_policy", policy_to_json(policy)},
                             {"final_mean_reward", trace.records.back().mean_reward}};
        std::printf("stage 1: final well-formed-correct probability %.4f, mean reward %.4f\n",
                    policy.archetype_probs[0], trace.records.back().mean_reward);
    }
    if (stage == "2" || stage == "both") {
        // Stage 2 needs both correct and wrong initial evaluations to learn
        // from, so it starts from the configured stage2_policy mixture.
        ToyPolicy policy = policy_from_json(doc.at("stage2_policy"));
        const auto trace = judgekit::train_stage2(policy, prompts, config);
        judgekit::write_trace(trace, config,
                              std::filesystem::path(out_dir) / "stage2_trace.jsonl");
        summary["stage2"] = {{"final_policy", policy_to_json(policy)},
                             {"final_mean_reward", trace.records.back().mean_reward}};
        std::printf("stage 2: final correction probability %.4f, backslide probability %.4f\n",
                    policy.correction_prob, policy.backslide_prob);
    }

    judgekit::write_text_file_atomic(std::filesystem::path(out_dir) / "summary.json",
                                     summary.dump(2) + "\n");
    std::cout << "traces written to " << out_dir << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& manifests, const std::string& dataset,
             const std::string& backend_path, const std::string& out_dir,
             std::optional<int> repeats_override, const std::set<std::string>& mask,
             bool reflection, const std::string& split_text,
             const std::string& task_filter, const std::set<std::string>& aspect_filter,
             std::uint64_t seed) {
    AspectRegistry registry;
    judgekit::load_manifest_dir(registry, manifests);

    BackendSpec spec = judgekit::backend_spec_from_file(backend_path);
    if (repeats_override) spec.repeats = *repeats_override;
    spec.validate();
    const auto backend = judgekit::make_backend(spec);

    judgekit::LoadedDataset data = judgekit::load_dataset(dataset, registry);
    const Split split = judgekit::split_from_string(split_text);
    if (split == Split::Train && !mask.empty()) {
        data.instances = judgekit::mask_aspects(std::move(data.instances), mask);
    }

    std::map<std::string, std::vector<EvalInstance>> by_aspect;
    for (const EvalInstance& instance : data.instances) {
        if (instance.split != split) continue;
        if (!task_filter.empty() && instance.task_id != task_filter) continue;
        if (!aspect_filter.empty() && !aspect_filter.contains(instance.aspect_id)) continue;
        by_aspect[instance.task_id + "/" + instance.aspect_id].push_back(instance);
    }
    if (by_aspect.empty()) {
        std::cerr << "error: no instances selected (split " << split_text << ")\n";
        return kExitMalformed;
    }

    judgekit::EvalReport report;
    report.backend_id = backend->id();
    report.repeats = spec.repeats;
    report.seed = seed;
    report.sampling = spec.sampling;
    report.timestamp = timestamp_utc();
    report.resolved_config = {
        {"manifests", manifests},          {"dataset", dataset},
        {"backend", backend_path},         {"split", split_text},
        {"mask", std::vector<std::string>(mask.begin(), mask.end())},
        {"repeats", spec.repeats},         {"reflection", reflection},
        {"task_filter", task_filter},      {"seed", seed},
        {"aspect_filter",
         std::vector<std::string>(aspect_filter.begin(), aspect_filter.end())},
    };

    std::vector<judgekit::AspectEval> evals;
    // Registration order keeps the report layout stable across runs.
    for (const AspectSpec* aspect : registry.list_aspects()) {
        const auto it = by_aspect.find(aspect->key());
        if (it == by_aspect.end()) continue;
        const auto& instances = it->second;

        const auto eval = judgekit::evaluate_aspect(*backend, registry, *aspect, instances,
                                                    spec.repeats, spec.max_concurrency);
        evals.push_back(eval);

        const bool masked = mask.contains(aspect->aspect_id);
        if (reflection) {
            const auto refl = judgekit::reflection_pass(*backend, registry, *aspect,
                                                        instances, spec.repeats,
                                                        spec.max_concurrency);
            report.aspects.push_back(judgekit::EvalReport::aspect_result(eval, masked, &refl));
        } else {
            report.aspects.push_back(judgekit::EvalReport::aspect_result(eval, masked));
        }
    }

    std::set<std::string> tasks;
    for (const auto& eval : evals) tasks.insert(eval.task_id);
    for (const std::string& task : tasks) {
        std::vector<judgekit::AspectEval> task_evals;
        for (const auto& eval : evals) {
            if (eval.task_id == task) task_evals.push_back(eval);
        }
        const auto task_overall = judgekit::overall_accuracy(task_evals, data.manifest);
        report.per_task_overall.push_back(judgekit::TaskOverall{
            task, task_overall.per_repeat, task_overall.mean, task_overall.stddev});
    }

    const auto overall = judgekit::overall_accuracy(evals, data.manifest);
    report.overall_per_repeat = overall.per_repeat;
    report.overall_mean = overall.mean;
    report.overall_stddev = overall.stddev;

    judgekit::write_report_files(report, out_dir);
    judgekit::write_text_file_atomic(std::filesystem::path(out_dir) / "report.csv",
                                     judgekit::render_csv(report));
    std::cout << judgekit::render_table(report);
    std::cout << "report written to " << out_dir << "\n";
    return kExitOk;
}

int cmd_report(const std::string& input, const std::string& csv_out,
               const std::string& table_out) {
    const auto report =
        judgekit::report_from_json(json::parse(judgekit::read_text_file(input)));
    if (!csv_out.empty()) {
        judgekit::write_text_file_atomic(csv_out, judgekit::render_csv(report));
        std::cout << "csv written to " << csv_out << "\n";
    }
    if (!table_out.empty()) {
        judgekit::write_text_file_atomic(table_out, judgekit::render_table(report));
        std::cout << "table written to " << table_out << "\n";
    }
    if (csv_out.empty() && table_out.empty()) {
        std::cout << judgekit::render_table(report);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"judgekit: reward computation, training simulation, and evaluation "
                 "for rubric-conditioned writing judges"};
    app.require_subcommand(1);

    // validate-data
    std::string manifests = "data/manifests";
    std::string dataset;
    std::string expected;
    std::vector<std::string> mask_list;
    auto* validate = app.add_subcommand("validate-data",
                                        "Check a dataset against an expected manifest");
    validate->add_option("--manifests", manifests, "Aspect manifest directory");
    validate->add_option("--dataset", dataset, "Line-delimited dataset file")->required();
    validate->add_option("--expected", expected, "Expected manifest file")->required();
    validate->add_option("--mask", mask_list, "Aspects excluded from training")
        ->delimiter(',');

    // reward
    std::string task;
    std::string aspect_id;
    std::string text;
    double gold = 0.0;
    long length = 0;
    std::string reward_config_path;
    double k = 0.25;
    long max_tokens = 1024;
    std::string mode = "literal";
    auto* reward = app.add_subcommand("reward", "Compute the reward breakdown for one output");
    reward->add_option("--manifests", manifests, "Aspect manifest directory");
    reward->add_option("--task", task)->required();
    reward->add_option("--aspect", aspect_id)->required();
    reward->add_option("--text", text, "Raw model output")->required();
    reward->add_option("--gold", gold, "Gold score")->required();
    reward->add_option("--length", length, "Generated token count L")->required();
    reward->add_option("--reward-config", reward_config_path, "Reward config JSON");
    reward->add_option("-k,--strictness", k, "Penalty strictness");
    reward->add_option("--max-tokens", max_tokens, "Maximum token length T");
    reward->add_option("--denominator-mode", mode, "literal or squared");

    // train-sim
    std::string train_config = "data/configs/train_sim.json";
    std::string out_dir = "out";
    std::string stage = "both";
    std::uint64_t seed = 0;
    bool seed_given = false;
    auto* train = app.add_subcommand("train-sim", "Run the two-stage training simulation");
    train->add_option("--config", train_config, "Training config JSON");
    train->add_option("--out", out_dir, "Output directory");
    train->add_option("--stage", stage, "1, 2, or both")
        ->check(CLI::IsMember({"1", "2", "both"}));
    train->add_option("--seed", seed, "Override the config seed")
        ->each([&seed_given](const std::string&) { seed_given = true; });

    // eval
    std::string backend_path;
    std::string split_text = "test";
    std::string task_filter;
    std::vector<std::string> aspect_list;
    int repeats = 0;
    bool reflection = false;
    std::uint64_t eval_seed = 0;
    auto* eval = app.add_subcommand("eval", "Evaluate a backend over the prompt set");
    eval->add_option("--manifests", manifests, "Aspect manifest directory");
    eval->add_option("--dataset", dataset, "Line-delimited dataset file")->required();
    eval->add_option("--backend", backend_path, "Backend config JSON")->required();
    eval->add_option("--out", out_dir, "Output directory")->required();
    eval->add_option("--repeats", repeats, "Override backend repeats");
    eval->add_option("--mask", mask_list, "Aspects masked during training")->delimiter(',');
    eval->add_flag("--reflection", reflection, "Also run the reflection pass");
    eval->add_option("--split", split_text, "train or test")
        ->check(CLI::IsMember({"train", "test"}));
    eval->add_option("--task", task_filter, "Restrict to one task");
    eval->add_option("--aspect", aspect_list, "Restrict to these aspects")->delimiter(',');
    eval->add_option("--seed", eval_seed, "Seed recorded in the report");

    // report
    std::string report_input;
    std::string csv_out;
    std::string table_out;
    auto* report_cmd = app.add_subcommand("report", "Render a machine report as CSV/table");
    report_cmd->add_option("--input", report_input, "report.json path")->required();
    report_cmd->add_option("--csv", csv_out, "CSV output path");
    report_cmd->add_option("--table", table_out, "Table output path");

    CLI11_PARSE(app, argc, argv);

    const std::set<std::string> mask(mask_list.begin(), mask_list.end());
    try {
        if (validate->parsed()) {
            return cmd_validate_data(manifests, dataset, expected, mask);
        }
        if (reward->parsed()) {
            RewardConfig config;
            if (!reward_config_path.empty()) {
                config = reward_from_json(json::parse(judgekit::read_text_file(reward_config_path)));
            } else {
                config.k = k;
                config.max_tokens = max_tokens;
                config.denominator_mode = mode_from_string(mode);
                config.validate();
            }
            return cmd_reward(manifests, task, aspect_id, text, gold, length, config);
        }
        if (train->parsed()) {
            return cmd_train_sim(train_config, out_dir, stage,
                                 seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt);
        }
        if (eval->parsed()) {
            return cmd_eval(manifests, dataset, backend_path, out_dir,
                            repeats > 0 ? std::optional<int>(repeats) : std::nullopt, mask,
                            reflection, split_text, task_filter,
                            std::set<std::string>(aspect_list.begin(), aspect_list.end()),
                            eval_seed);
        }
        if (report_cmd->parsed()) {
            return cmd_report(report_input, csv_out, table_out);
        }
    } catch (const judgekit::DatasetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMalformed;
    } catch (const json::exception& e) {
        std::cerr << "error: malformed JSON input: " << e.what() << "\n";
        return kExitMalformed;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMalformed;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMalformed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}
