#include "judgekit/reward.hpp"

#include <stdexcept>
#include <string>

namespace judgekit {

namespace {

void require_gold_in_rubric(double gold, const ScoreRubric& rubric) {
    if (!rubric.contains(gold)) {
        throw std::invalid_argument("gold score " + format_score(gold) +
                                    " is not in the rubric's score set");
    }
}

}  // namespace

void RewardConfig::validate() const {
    if (!(k > 0.0 && k <= 0.5)) {
        throw std::invalid_argument("reward config: k must be in (0, 0.5]");
    }
    if (max_tokens < 1) {
        throw std::invalid_argument("reward config: max_tokens must be >= 1");
    }
}

double stage1_reward(const ParseOutcome& outcome, double gold,
                     const ScoreRubric& rubric) {
    require_gold_in_rubric(gold, rubric);
    switch (outcome.kind) {
        case ParseKind::MissingScoreTag: return -0.5;
        case ParseKind::NonNumeric: return 0.0;
        case ParseKind::OutOfRubric: return 0.25;
        case ParseKind::ValidScore: return (*outcome.value == gold) ? 1.5 : 0.5;
    }
    throw std::logic_error("unreachable parse kind");
}

double length_penalty(long generated_tokens, const RewardConfig& config) {
    config.validate();
    if (generated_tokens < 0) {
        throw std::invalid_argument("generated token count must be >= 0");
    }
    const double length = static_cast<double>(generated_tokens);
    const double max_len = static_cast<double>(config.max_tokens);
    const double lower = config.lower_bound();

    const double deficit = lower - length;  // positive below kT
    if (deficit > 0.0) {
        const double denominator = config.denominator_mode == DenominatorMode::Literal
                                       ? config.k * max_len * max_len
                                       : lower * lower;
        return deficit * deficit / denominator;
    }
    // L - (1-k)T written as (L - T) + kT so the excess at L = T is exactly kT
    // and the penalty there is exactly 1.
    const double excess = (length - max_len) + lower;
    if (excess > 0.0) {
        return excess * excess / (lower * lower);
    }
    return 0.0;
}

double total_reward(std::string_view raw, long generated_tokens, double gold,
                    const ScoreRubric& rubric, const RewardConfig& config) {
    const ParseOutcome outcome = parse(raw, rubric);
    return stage1_reward(outcome, gold, rubric) -
           length_penalty(generated_tokens, config);
}

double stage2_reward(const StageTwoPair& pair, const ScoreRubric& rubric) {
    require_gold_in_rubric(pair.gold, rubric);
    const bool initial_correct =
        pair.initial_score.has_value() && *pair.initial_score == pair.gold;
    const bool final_correct =
        pair.final_score.has_value() && *pair.final_score == pair.gold;

    if (initial_correct && final_correct) return 0.5;
    if (!initial_correct && final_correct) return 1.0;
    if (!initial_correct && !final_correct) return -0.5;
    return -1.0;  // backsliding: correct initial, wrong final
}

}  // namespace judgekit
