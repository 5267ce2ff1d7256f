#pragma once

#include <string>
#include <vector>

namespace judgekit {

/// Shape of the admissible score set. Binary {0,1} and the 1-5 scale are the
/// two shapes that occur in the shipped task data; anything else is accepted
/// but reported as Other so loaders can flag it.
enum class RubricShape { Binary, Scaled, Other };

struct ScoreLevel {
    double value = 0.0;
    std::string description;
};

/// The admissible score set S for one evaluation aspect, ordered ascending,
/// with one rubric description per score.
struct ScoreRubric {
    std::string aspect_id;
    std::vector<ScoreLevel> levels;

    /// Exact numeric membership in S (4.0 is a member of {1..5}, 4.5 is not).
    bool contains(double score) const;

    RubricShape shape() const;
    std::vector<double> scores() const;
    std::size_t size() const { return levels.size(); }

    /// Throws std::invalid_argument unless levels are non-empty, strictly
    /// increasing, and every level carries a description.
    void validate() const;

    static ScoreRubric binary(std::string aspect_id);
    static ScoreRubric one_to_five(std::string aspect_id);
};

/// Canonical rendering of a score for prompts and tagged outputs: integral
/// values print without a decimal point ("1", not "1.000000").
std::string format_score(double value);

}  // namespace judgekit
