#include "judgekit/rubric.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace judgekit {

bool ScoreRubric::contains(double score) const {
    for (const auto& level : levels) {
        if (level.value == score) return true;
    }
    return false;
}

RubricShape ScoreRubric::shape() const {
    if (levels.size() == 2 && levels[0].value == 0.0 && levels[1].value == 1.0) {
        return RubricShape::Binary;
    }
    if (levels.size() == 5) {
        bool scaled = true;
        for (std::size_t i = 0; i < 5; ++i) {
            if (levels[i].value != static_cast<double>(i + 1)) scaled = false;
        }
        if (scaled) return RubricShape::Scaled;
    }
    return RubricShape::Other;
}

std::vector<double> ScoreRubric::scores() const {
    std::vector<double> out;
    out.reserve(levels.size());
    for (const auto& level : levels) out.push_back(level.value);
    return out;
}

void ScoreRubric::validate() const {
    if (levels.empty()) {
        throw std::invalid_argument("rubric '" + aspect_id + "': score set is empty");
    }
    for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
        if (!(levels[i].value < levels[i + 1].value)) {
            throw std::invalid_argument("rubric '" + aspect_id +
                                        "': scores must be strictly increasing");
        }
    }
    for (const auto& level : levels) {
        if (level.description.empty()) {
            throw std::invalid_argument("rubric '" + aspect_id + "': score " +
                                        format_score(level.value) +
                                        " has no description");
        }
    }
}

ScoreRubric ScoreRubric::binary(std::string aspect_id) {
    return ScoreRubric{std::move(aspect_id),
                       {{0.0, "does not satisfy the criteria"},
                        {1.0, "satisfies the criteria"}}};
}

ScoreRubric ScoreRubric::one_to_five(std::string aspect_id) {
    ScoreRubric rubric{std::move(aspect_id), {}};
    static const char* kDescriptions[5] = {"very poor", "poor", "fair", "good",
                                           "excellent"};
    for (int i = 0; i < 5; ++i) {
        rubric.levels.push_back({static_cast<double>(i + 1), kDescriptions[i]});
    }
    return rubric;
}

std::string format_score(double value) {
    if (std::floor(value) == value && std::abs(value) < 1e15) {
        return std::to_string(static_cast<long long>(value));
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", value);
    return buf;
}

}  // namespace judgekit
