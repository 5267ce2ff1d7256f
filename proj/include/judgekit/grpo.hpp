#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "judgekit/parse.hpp"
#include "judgekit/reward.hpp"
#include "judgekit/rubric.hpp"

namespace judgekit {

/// Response archetypes the toy policy mixes over. Each renders to concrete
/// tagged (or deliberately malformed) text, so rewards flow through the real
/// parse -> reward path rather than being assigned symbolically.
enum class Archetype {
    WellFormedCorrect,  // tagged, score equals gold, length inside the free band
    WellFormedWrong,    // tagged, valid score != gold
    OutOfRubric,        // tagged, numeric score outside the rubric
    Malformed,          // reasoning only, no score tag
    Overlong,           // tagged and correct, but runs to the maximum length
};

inline constexpr std::size_t kArchetypeCount = 5;

const char* archetype_name(Archetype archetype);

/// Desk-scale stand-in for the LLM policy: a categorical over response
/// archetypes plus the two reflection parameters.
struct ToyPolicy {
    std::array<double, kArchetypeCount> archetype_probs{};
    double correction_prob = 0.0;  // P(switch to gold | initial wrong)
    double backslide_prob = 0.0;   // P(abandon gold | initial correct)

    void validate() const;  // throws std::invalid_argument

    static ToyPolicy uniform(double correction_prob = 0.0,
                             double backslide_prob = 0.0);
};

/// One prompt the simulator rolls out against: its id, the gold score, and
/// the rubric the rendered outputs are parsed under.
struct SimPrompt {
    std::string prompt_id;
    double gold = 0.0;
    ScoreRubric rubric;
};

/// G rollouts for one prompt with their rewards and group-normalized
/// advantages.
struct RolloutGroup {
    std::string prompt_id;
    std::vector<ModelOutput> outputs;
    std::vector<Archetype> archetypes;
    std::vector<double> rewards;
    std::vector<double> advantages;
};

/// Renders one archetype as concrete output text for a prompt. Lengths are
/// driven by the reward config: interior archetypes land mid-band, Overlong
/// runs to the maximum token length.
ModelOutput render_archetype(Archetype archetype, const SimPrompt& prompt,
                             const RewardConfig& reward, std::mt19937_64& rng);

/// Draws G independent outputs from the policy's archetype distribution.
/// Rewards and advantages are left unfilled. Throws std::invalid_argument
/// when group_size < 2 (the group std would be undefined).
RolloutGroup sample_group(const ToyPolicy& policy, const SimPrompt& prompt,
                          int group_size, const RewardConfig& reward,
                          std::mt19937_64& rng);

/// Group-relative advantages: (r - mean) / population std when the std
/// exceeds epsilon, all zeros otherwise. Throws std::invalid_argument when
/// fewer than two rewards are given.
std::vector<double> compute_advantages(std::span<const double> rewards,
                                       double epsilon);

struct TrainConfig {
    int iterations = 500;
    double learning_rate = 0.1;
    int group_size = 4;       // rollouts per prompt
    double epsilon = 1e-8;    // zero-variance guard in the advantage std
    std::uint64_t seed = 7;
    RewardConfig reward;

    void validate() const;  // throws std::invalid_argument
};

struct TraceRecord {
    int iteration = 0;
    double mean_reward = 0.0;      // sampled mean over the iteration's episodes
    double expected_reward = 0.0;  // exact expectation under the updated policy
    std::array<double, kArchetypeCount> archetype_probs{};
    double correction_prob = 0.0;
    double backslide_prob = 0.0;
};

struct TrainTrace {
    int stage = 1;
    std::uint64_t seed = 0;
    std::vector<TraceRecord> records;
};

/// Stage 1: per iteration, sample a group per prompt, score with the
/// composite reward, normalize advantages within each group, and apply an
/// advantage-weighted multiplicative update to the archetype probabilities.
/// Fully deterministic given (seed, config).
TrainTrace train_stage1(ToyPolicy& policy, std::span<const SimPrompt> prompts,
                        const TrainConfig& config);

/// Stage 2: per iteration, draw an initial output per episode, build the
/// reflection episode (strip the score, re-draw via the correction/backslide
/// parameters), reward with the stage-2 matrix, and update those two
/// parameters by the same multiplicative rule.
TrainTrace train_stage2(ToyPolicy& policy, std::span<const SimPrompt> prompts,
                        const TrainConfig& config);

/// One JSON record per line: a header carrying seed/stage/config echo, then
/// one record per iteration. Identical (seed, config) runs produce
/// byte-identical files.
std::string trace_to_jsonl(const TrainTrace& trace, const TrainConfig& config);

void write_trace(const TrainTrace& trace, const TrainConfig& config,
                 const std::filesystem::path& path);

/// Deterministic per-(iteration, prompt) random stream derived from the
/// master seed, so prompt groups could be sampled concurrently without
/// changing the trace.
std::mt19937_64 derive_stream(std::uint64_t seed, std::uint64_t iteration,
                              std::uint64_t prompt_index);

}  // namespace judgekit
