#pragma once

#include <optional>
#include <string_view>

#include "judgekit/parse.hpp"
#include "judgekit/rubric.hpp"

namespace judgekit {

/// Denominator used in the short-output penalty branch. Literal divides by
/// k*T^2 (so the penalty at L=0 equals k); Squared divides by (k*T)^2,
/// mirroring the long-output branch (penalty at L=0 equals 1).
enum class DenominatorMode { Literal, Squared };

struct RewardConfig {
    double k = 0.25;          // penalty strictness, in (0, 0.5]
    long max_tokens = 1024;   // maximum generation length T, >= 1
    DenominatorMode denominator_mode = DenominatorMode::Literal;

    void validate() const;  // throws std::invalid_argument
    double lower_bound() const { return k * static_cast<double>(max_tokens); }
    double upper_bound() const {
        return (1.0 - k) * static_cast<double>(max_tokens);
    }
};

/// Stage-1 format/correctness reward. Returns exactly one of
/// -0.5 (missing tag), 0 (non-numeric), 0.25 (out of rubric),
/// 0.5 (valid but wrong), 1.5 (valid and equal to the gold score).
/// Throws std::invalid_argument when gold is not in the rubric's score set.
double stage1_reward(const ParseOutcome& outcome, double gold,
                     const ScoreRubric& rubric);

/// Quadratic length penalty: zero on [kT, (1-k)T], growing quadratically with
/// the distance from that band on either side; equals 1 at L = T in both
/// denominator modes.
double length_penalty(long generated_tokens, const RewardConfig& config);

/// Composite stage-1 reward R = r - f. No clamping.
double total_reward(std::string_view raw, long generated_tokens, double gold,
                    const ScoreRubric& rubric, const RewardConfig& config);

/// Initial and final score outcomes of a reflection episode. An empty
/// optional is the sentinel for an unparseable/invalid score, which counts
/// as "not the gold score" in the stage-2 reward.
struct StageTwoPair {
    std::optional<double> initial_score;
    std::optional<double> final_score;
    double gold = 0.0;
};

/// Stage-2 reflection reward over (initial, final) correctness:
/// 0.5 stays correct, 1.0 corrects itself, -0.5 stays wrong, -1.0 backslides.
/// Throws std::invalid_argument when gold is not in the rubric's score set.
double stage2_reward(const StageTwoPair& pair, const ScoreRubric& rubric);

}  // namespace judgekit
