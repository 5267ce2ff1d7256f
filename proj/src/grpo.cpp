#include "judgekit/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "judgekit/stats.hpp"
#include "judgekit/util.hpp"

namespace judgekit {

using nlohmann::json;

namespace {

constexpr std::uint64_t kStage2SeedTag = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Portable uniform in [0, 1): 53 random mantissa bits, no distribution
/// object, so traces do not depend on the standard library implementation.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t draw_categorical(std::span<const double> probs, std::mt19937_64& rng) {
    const double u = uniform01(rng);
    double cumulative = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cumulative += probs[i];
        if (u < cumulative) return i;
    }
    return probs.size() - 1;  // guard against rounding at the top end
}

const char* const kFillerWords[] = {
    "the",    "answer",    "follows", "the",     "stated",  "criteria",
    "and",    "the",       "rubric",  "supports", "this",   "assessment",
    "given",  "the",       "evidence", "presented", "in",   "the",
    "context", "therefore",
};

std::string filler_text(long words) {
    constexpr std::size_t kLexicon = std::size(kFillerWords);
    std::string text;
    text.reserve(static_cast<std::size_t>(words) * 8);
    for (long i = 0; i < words; ++i) {
        if (i > 0) text.push_back(' ');
        text.append(kFillerWords[static_cast<std::size_t>(i) % kLexicon]);
    }
    return text;
}

double draw_wrong_score(const ScoreRubric& rubric, double gold,
                        std::mt19937_64& rng) {
    std::vector<double> wrong;
    for (const ScoreLevel& level : rubric.levels) {
        if (level.value != gold) wrong.push_back(level.value);
    }
    if (wrong.empty()) {
        throw std::invalid_argument("rubric '" + rubric.aspect_id +
                                    "' has no wrong score to draw");
    }
    const auto index = static_cast<std::size_t>(uniform01(rng) *
                                                static_cast<double>(wrong.size()));
    return wrong[std::min(index, wrong.size() - 1)];
}

double clamped_exp(double x) { return std::exp(std::clamp(x, -60.0, 60.0)); }

/// Multiplicative two-outcome update: returns the renormalized probability of
/// the first outcome after weighting both sides by exp(lr * advantage sum).
/// A zero probability never moves (its outcome is never sampled).
double bernoulli_update(double p, double weight_p, double weight_q, double lr) {
    const double up = p * clamped_exp(lr * weight_p);
    const double uq = (1.0 - p) * clamped_exp(lr * weight_q);
    const double total = up + uq;
    return total > 0.0 ? up / total : p;
}

}  // namespace

const char* archetype_name(Archetype archetype) {
    switch (archetype) {
        case Archetype::WellFormedCorrect: return "well_formed_correct";
        case Archetype::WellFormedWrong: return "well_formed_wrong";
        case Archetype::OutOfRubric: return "out_of_rubric";
        case Archetype::Malformed: return "malformed";
        case Archetype::Overlong: return "overlong";
    }
    return "unknown";
}

void ToyPolicy::validate() const {
    double sum = 0.0;
    for (const double p : archetype_probs) {
        if (p < 0.0 || p > 1.0) {
            throw std::invalid_argument("toy policy: archetype probability outside [0,1]");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("toy policy: archetype probabilities must sum to 1");
    }
    if (correction_prob < 0.0 || correction_prob > 1.0 || backslide_prob < 0.0 ||
        backslide_prob > 1.0) {
        throw std::invalid_argument("toy policy: reflection probabilities outside [0,1]");
    }
}

ToyPolicy ToyPolicy::uniform(double correction_prob, double backslide_prob) {
    ToyPolicy policy;
    policy.archetype_probs.fill(1.0 / static_cast<double>(kArchetypeCount));
    policy.correction_prob = correction_prob;
    policy.backslide_prob = backslide_prob;
    return policy;
}

void TrainConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("train config: iterations must be >= 1");
    if (learning_rate < 0.0) {
        throw std::invalid_argument("train config: learning rate must be >= 0");
    }
    if (group_size < 2) throw std::invalid_argument("train config: group size must be >= 2");
    if (epsilon < 0.0) throw std::invalid_argument("train config: epsilon must be >= 0");
    reward.validate();
}

ModelOutput render_archetype(Archetype archetype, const SimPrompt& prompt,
                             const RewardConfig& reward, std::mt19937_64& rng) {
    const long interior = std::max<long>(1, std::llround(0.5 * static_cast<double>(reward.max_tokens)));

    switch (archetype) {
        case Archetype::WellFormedCorrect:
            return make_output(render_tagged(filler_text(interior), prompt.gold));
        case Archetype::WellFormedWrong:
            return make_output(render_tagged(filler_text(interior),
                                             draw_wrong_score(prompt.rubric, prompt.gold, rng)));
        case Archetype::OutOfRubric: {
            const double outside = prompt.rubric.levels.back().value + 1.0;
            return make_output(render_tagged(filler_text(interior), outside));
        }
        case Archetype::Malformed:
            return make_output("<reasoning>" + filler_text(interior) + "</reasoning>");
        case Archetype::Overlong:
            return make_output(render_tagged(filler_text(reward.max_tokens), prompt.gold));
    }
    throw std::logic_error("unreachable archetype");
}

RolloutGroup sample_group(const ToyPolicy& policy, const SimPrompt& prompt,
                          int group_size, const RewardConfig& reward,
                          std::mt19937_64& rng) {
    if (group_size < 2) {
        throw std::invalid_argument("group size must be >= 2 (group std is undefined)");
    }
    policy.validate();
    RolloutGroup group;
    group.prompt_id = prompt.prompt_id;
    group.outputs.reserve(static_cast<std::size_t>(group_size));
    group.archetypes.reserve(static_cast<std::size_t>(group_size));
    for (int i = 0; i < group_size; ++i) {
        const auto archetype =
            static_cast<Archetype>(draw_categorical(policy.archetype_probs, rng));
        group.archetypes.push_back(archetype);
        group.outputs.push_back(render_archetype(archetype, prompt, reward, rng));
    }
    return group;
}

std::vector<double> compute_advantages(std::span<const double> rewards,
                                       double epsilon) {
    if (rewards.size() < 2) {
        throw std::invalid_argument("advantage normalization needs at least two rewards");
    }
    const double mu = mean(rewards);
    const double sigma = population_stddev(rewards);
    std::vector<double> advantages(rewards.size(), 0.0);
    if (sigma > epsilon) {
        for (std::size_t i = 0; i < rewards.size(); ++i) {
            advantages[i] = (rewards[i] - mu) / sigma;
        }
    }
    return advantages;
}

std::mt19937_64 derive_stream(std::uint64_t seed, std::uint64_t iteration,
                              std::uint64_t prompt_index) {
    std::uint64_t state = seed;
    splitmix64(state);
    state ^= iteration * 0xd1342543de82ef95ULL;
    splitmix64(state);
    state ^= prompt_index * 0xaf251af3b0f025b5ULL;
    return std::mt19937_64(splitmix64(state));
}

namespace {

/// Per-archetype stage-1 reward for one prompt. Deterministic: rendered
/// lengths are fixed by the config and every wrong or out-of-rubric score
/// earns the same reward regardless of its value.
std::array<double, kArchetypeCount> archetype_rewards(const SimPrompt& prompt,
                                                      const RewardConfig& reward) {
    std::array<double, kArchetypeCount> rewards{};
    std::mt19937_64 rng(0);
    for (std::size_t a = 0; a < kArchetypeCount; ++a) {
        const ModelOutput output =
            render_archetype(static_cast<Archetype>(a), prompt, reward, rng);
        rewards[a] = total_reward(output.raw_text, output.token_count, prompt.gold,
                                  prompt.rubric, reward);
    }
    return rewards;
}

/// Whether an archetype's rendering parses to the gold score (drives the
/// initial-correctness split in stage 2).
std::array<bool, kArchetypeCount> archetype_correct_flags(const SimPrompt& prompt,
                                                          const RewardConfig& reward) {
    std::array<bool, kArchetypeCount> flags{};
    std::mt19937_64 rng(0);
    for (std::size_t a = 0; a < kArchetypeCount; ++a) {
        const ModelOutput output =
            render_archetype(static_cast<Archetype>(a), prompt, reward, rng);
        const ParseOutcome outcome = parse(output.raw_text, prompt.rubric);
        flags[a] = outcome.valid() && *outcome.value == prompt.gold;
    }
    return flags;
}

}  // namespace

TrainTrace train_stage1(ToyPolicy& policy, std::span<const SimPrompt> prompts,
                        const TrainConfig& config) {
    config.validate();
    policy.validate();
    if (prompts.empty()) {
        throw std::invalid_argument("stage-1 training needs at least one prompt");
    }

    std::vector<std::array<double, kArchetypeCount>> reward_table;
    reward_table.reserve(prompts.size());
    for (const SimPrompt& prompt : prompts) {
        reward_table.push_back(archetype_rewards(prompt, config.reward));
    }

    TrainTrace trace;
    trace.stage = 1;
    trace.seed = config.seed;
    trace.records.reserve(static_cast<std::size_t>(config.iterations));

    for (int iteration = 0; iteration < config.iterations; ++iteration) {
        std::array<double, kArchetypeCount> weight_sums{};
        double reward_sum = 0.0;
        long reward_count = 0;

        for (std::size_t prompt_index = 0; prompt_index < prompts.size(); ++prompt_index) {
            auto rng = derive_stream(config.seed, static_cast<std::uint64_t>(iteration),
                                     prompt_index);
            RolloutGroup group = sample_group(policy, prompts[prompt_index],
                                              config.group_size, config.reward, rng);
            group.rewards.reserve(group.outputs.size());
            for (const ModelOutput& output : group.outputs) {
                group.rewards.push_back(total_reward(output.raw_text, output.token_count,
                                                     prompts[prompt_index].gold,
                                                     prompts[prompt_index].rubric,
                                                     config.reward));
            }
            group.advantages = compute_advantages(group.rewards, config.epsilon);
            for (std::size_t i = 0; i < group.advantages.size(); ++i) {
                weight_sums[static_cast<std::size_t>(group.archetypes[i])] +=
                    group.advantages[i];
                reward_sum += group.rewards[i];
                ++reward_count;
            }
        }

        double total = 0.0;
        for (std::size_t a = 0; a < kArchetypeCount; ++a) {
            policy.archetype_probs[a] *= clamped_exp(config.learning_rate * weight_sums[a]);
            total += policy.archetype_probs[a];
        }
        for (double& p : policy.archetype_probs) p /= total;

        double expected = 0.0;
        for (const auto& rewards : reward_table) {
            for (std::size_t a = 0; a < kArchetypeCount; ++a) {
                expected += policy.archetype_probs[a] * rewards[a];
            }
        }
        expected /= static_cast<double>(reward_table.size());

        trace.records.push_back(TraceRecord{iteration,
                                            reward_sum / static_cast<double>(reward_count),
                                            expected, policy.archetype_probs,
                                            policy.correction_prob, policy.backslide_prob});
    }
    return trace;
}

TrainTrace train_stage2(ToyPolicy& policy, std::span<const SimPrompt> prompts,
                        const TrainConfig& config) {
    config.validate();
    policy.validate();
    if (prompts.empty()) {
        throw std::invalid_argument("stage-2 training needs at least one prompt");
    }

    std::vector<double> correct_init_prob;  // per prompt, under the archetype mix
    correct_init_prob.reserve(prompts.size());
    for (const SimPrompt& prompt : prompts) {
        const auto flags = archetype_correct_flags(prompt, config.reward);
        double p = 0.0;
        for (std::size_t a = 0; a < kArchetypeCount; ++a) {
            if (flags[a]) p += policy.archetype_probs[a];
        }
        correct_init_prob.push_back(p);
    }

    TrainTrace trace;
    trace.stage = 2;
    trace.seed = config.seed;
    trace.records.reserve(static_cast<std::size_t>(config.iterations));

    for (int iteration = 0; iteration < config.iterations; ++iteration) {
        double weight_correct = 0.0;   // corrected a wrong initial
        double weight_stay = 0.0;      // stayed wrong
        double weight_backslide = 0.0; // abandoned a correct initial
        double weight_keep = 0.0;      // kept a correct initial
        double reward_sum = 0.0;
        long reward_count = 0;

        for (std::size_t prompt_index = 0; prompt_index < prompts.size(); ++prompt_index) {
            const SimPrompt& prompt = prompts[prompt_index];
            auto rng = derive_stream(config.seed ^ kStage2SeedTag,
                                     static_cast<std::uint64_t>(iteration), prompt_index);

            std::vector<double> rewards;
            std::vector<bool> initial_correct_flags;
            std::vector<bool> switched_flags;  // corrected or backslid
            rewards.reserve(static_cast<std::size_t>(config.group_size));

            for (int episode = 0; episode < config.group_size; ++episode) {
                const auto archetype =
                    static_cast<Archetype>(draw_categorical(policy.archetype_probs, rng));
                const ModelOutput initial =
                    render_archetype(archetype, prompt, config.reward, rng);
                const ParseOutcome initial_outcome = parse(initial.raw_text, prompt.rubric);
                const std::optional<double> initial_score =
                    initial_outcome.valid() ? initial_outcome.value : std::nullopt;
                const bool initial_correct =
                    initial_score.has_value() && *initial_score == prompt.gold;

                bool switched = false;
                Archetype final_archetype;
                if (initial_correct) {
                    switched = uniform01(rng) < policy.backslide_prob;
                    final_archetype = switched ? Archetype::WellFormedWrong
                                               : Archetype::WellFormedCorrect;
                } else {
                    switched = uniform01(rng) < policy.correction_prob;
                    final_archetype = switched ? Archetype::WellFormedCorrect
                                               : Archetype::WellFormedWrong;
                }
                const ModelOutput final_output =
                    render_archetype(final_archetype, prompt, config.reward, rng);
                const ParseOutcome final_outcome = parse(final_output.raw_text, prompt.rubric);
                const std::optional<double> final_score =
                    final_outcome.valid() ? final_outcome.value : std::nullopt;

                rewards.push_back(stage2_reward(
                    StageTwoPair{initial_score, final_score, prompt.gold}, prompt.rubric));
                initial_correct_flags.push_back(initial_correct);
                switched_flags.push_back(switched);
            }

            // Advantages are normalized within episodes sharing the same
            // decision state (same prompt, same initial correctness), so the
            // keep/backslide baseline is never polluted by correction
            // episodes from the other branch.
            std::vector<double> advantages(rewards.size(), 0.0);
            for (const bool branch : {true, false}) {
                std::vector<std::size_t> members;
                std::vector<double> branch_rewards;
                for (std::size_t i = 0; i < rewards.size(); ++i) {
                    if (initial_correct_flags[i] == branch) {
                        members.push_back(i);
                        branch_rewards.push_back(rewards[i]);
                    }
                }
                if (members.size() < 2) continue;  // no baseline to compare against
                const auto branch_advantages =
                    compute_advantages(branch_rewards, config.epsilon);
                for (std::size_t j = 0; j < members.size(); ++j) {
                    advantages[members[j]] = branch_advantages[j];
                }
            }
            for (std::size_t i = 0; i < advantages.size(); ++i) {
                if (initial_correct_flags[i]) {
                    (switched_flags[i] ? weight_backslide : weight_keep) += advantages[i];
                } else {
                    (switched_flags[i] ? weight_correct : weight_stay) += advantages[i];
                }
                reward_sum += rewards[i];
                ++reward_count;
            }
        }

        policy.correction_prob = bernoulli_update(policy.correction_prob, weight_correct,
                                                  weight_stay, config.learning_rate);
        policy.backslide_prob = bernoulli_update(policy.backslide_prob, weight_backslide,
                                                 weight_keep, config.learning_rate);

        double expected = 0.0;
        for (const double p_correct : correct_init_prob) {
            expected += p_correct * ((1.0 - policy.backslide_prob) * 0.5 +
                                     policy.backslide_prob * -1.0) +
                        (1.0 - p_correct) * (policy.correction_prob * 1.0 +
                                             (1.0 - policy.correction_prob) * -0.5);
        }
        expected /= static_cast<double>(correct_init_prob.size());

        trace.records.push_back(TraceRecord{iteration,
                                            reward_sum / static_cast<double>(reward_count),
                                            expected, policy.archetype_probs,
                                            policy.correction_prob, policy.backslide_prob});
    }
    return trace;
}

std::string trace_to_jsonl(const TrainTrace& trace, const TrainConfig& config) {
    json header;
    header["record"] = "header";
    header["stage"] = trace.stage;
    header["seed"] = trace.seed;
    header["config"] = {
        {"iterations", config.iterations},
        {"learning_rate", config.learning_rate},
        {"group_size", config.group_size},
        {"epsilon", config.epsilon},
        {"reward",
         {{"k", config.reward.k},
          {"max_tokens", config.reward.max_tokens},
          {"denominator_mode",
           config.reward.denominator_mode == DenominatorMode::Literal ? "literal"
                                                                      : "squared"}}},
    };

    std::string out = header.dump();
    out.push_back('\n');
    for (const TraceRecord& record : trace.records) {
        json line;
        line["iteration"] = record.iteration;
        line["mean_reward"] = record.mean_reward;
        line["expected_reward"] = record.expected_reward;
        json probs;
        for (std::size_t a = 0; a < kArchetypeCount; ++a) {
            probs[archetype_name(static_cast<Archetype>(a))] = record.archetype_probs[a];
        }
        line["archetype_probs"] = probs;
        line["correction_prob"] = record.correction_prob;
        line["backslide_prob"] = record.backslide_prob;
        out += line.dump();
        out.push_back('\n');
    }
    return out;
}

void write_trace(const TrainTrace& trace, const TrainConfig& config,
                 const std::filesystem::path& path) {
    write_text_file_atomic(path, trace_to_jsonl(trace, config));
}

}  // namespace judgekit
