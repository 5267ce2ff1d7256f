#include <doctest.h>

#include <stdexcept>

#include <random>
#include <regex>
#include <string>

#include "judgekit/parse.hpp"
#include "judgekit/rubric.hpp"

using namespace judgekit;

namespace {

const ScoreRubric kBinary = ScoreRubric::binary("binary");
const ScoreRubric kScale = ScoreRubric::one_to_five("scale");

// Independent removal oracle: non-greedy regex over well-formed pairs.
std::string strip_score_oracle(const std::string& text) {
    static const std::regex pair("<score>[\\s\\S]*?</score>");
    return std::regex_replace(text, pair, "");
}

std::string random_reasoning(std::mt19937_64& rng) {
    static const char* words[] = {"the", "claim", "lacks", "evidence", "criteria",
                                  "entails", "aligned", "vague", "specific", "table"};
    std::uniform_int_distribution<int> len(1, 12);
    std::uniform_int_distribution<std::size_t> pick(0, std::size(words) - 1);
    std::string out;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
        if (i > 0) out.push_back(' ');
        out += words[pick(rng)];
    }
    return out;
}

}  // namespace

TEST_CASE("parse classifies the canonical well-formed case") {
    const auto outcome = parse("<reasoning>ok</reasoning><score>1</score>", kBinary);
    CHECK(outcome.kind == ParseKind::ValidScore);
    CHECK(*outcome.value == 1.0);
    CHECK(*outcome.reasoning == "ok");
}

TEST_CASE("parse maps missing, non-numeric, and out-of-rubric cases") {
    CHECK(parse("<reasoning>ok</reasoning>", kBinary).kind == ParseKind::MissingScoreTag);
    CHECK(parse("<score>maybe five</score>", kBinary).kind == ParseKind::NonNumeric);

    const auto out_of_rubric = parse("<score>7</score>", kScale);
    CHECK(out_of_rubric.kind == ParseKind::OutOfRubric);
    CHECK(*out_of_rubric.value == 7.0);

    // Decimal parsing precedes membership: 4.0 is exactly 4, 4.5 is not in S.
    const auto decimal = parse("<score> 4.0 </score>", kScale);
    CHECK(decimal.kind == ParseKind::ValidScore);
    CHECK(*decimal.value == 4.0);
    CHECK(parse("<score>4.5</score>", kScale).kind == ParseKind::OutOfRubric);
}

TEST_CASE("parse edge cases around the tag grammar") {
    // Unclosed tag is not a well-formed pair.
    CHECK(parse("<score>1", kBinary).kind == ParseKind::MissingScoreTag);
    // Tag names are case-sensitive and attribute-free.
    CHECK(parse("<SCORE>1</SCORE>", kBinary).kind == ParseKind::MissingScoreTag);
    CHECK(parse("<score x=1>1</score>", kBinary).kind == ParseKind::MissingScoreTag);
    // Empty contents are not a number.
    CHECK(parse("<score></score>", kBinary).kind == ParseKind::NonNumeric);
    CHECK(parse("<score>   </score>", kBinary).kind == ParseKind::NonNumeric);
    // Trailing junk after the number is not a number.
    CHECK(parse("<score>1 out of 5</score>", kScale).kind == ParseKind::NonNumeric);
    // No reasoning tag: reasoning absent but score still parses.
    const auto no_reasoning = parse("<score>0</score>", kBinary);
    CHECK(no_reasoning.kind == ParseKind::ValidScore);
    CHECK_FALSE(no_reasoning.reasoning.has_value());
}

TEST_CASE("first well-formed score pair wins and extras are counted") {
    const auto outcome =
        parse("<score>1</score> text <score>0</score>", kBinary);
    CHECK(outcome.kind == ParseKind::ValidScore);
    CHECK(*outcome.value == 1.0);
    CHECK(outcome.score_tag_pairs == 2);
}

TEST_CASE("appending text after a well-formed pair never changes the score") {
    std::mt19937_64 rng(11);
    const std::string base = "<reasoning>r</reasoning><score>3</score>";
    const auto base_outcome = parse(base, kScale);
    for (int i = 0; i < 200; ++i) {
        std::string suffix = random_reasoning(rng);
        if (i % 3 == 0) suffix += "<score>5</score>";
        if (i % 5 == 0) suffix += "</score>";
        const auto outcome = parse(base + suffix, kScale);
        CHECK(outcome.kind == base_outcome.kind);
        CHECK(*outcome.value == *base_outcome.value);
    }
}

TEST_CASE("round trip: canonical form parses back to the stored pair") {
    std::mt19937_64 rng(17);
    const ScoreRubric* rubrics[] = {&kBinary, &kScale};
    for (int i = 0; i < 500; ++i) {
        const ScoreRubric& rubric = *rubrics[i % 2];
        const double score =
            rubric.levels[static_cast<std::size_t>(rng() % rubric.levels.size())].value;
        const std::string reasoning = random_reasoning(rng);
        const auto outcome = parse(render_tagged(reasoning, score), rubric);
        REQUIRE(outcome.kind == ParseKind::ValidScore);
        CHECK(*outcome.value == score);
        CHECK(*outcome.reasoning == reasoning);
    }
}

TEST_CASE("every input classifies to exactly one outcome") {
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<int> len(0, 40);
    std::uniform_int_distribution<int> chr(32, 126);
    for (int i = 0; i < 500; ++i) {
        std::string text;
        const int n = len(rng);
        for (int j = 0; j < n; ++j) text.push_back(static_cast<char>(chr(rng)));
        if (i % 4 == 0) text += "<score>" + std::to_string(i % 9) + "</score>";
        const auto outcome = parse(text, kScale);
        const bool has_value = outcome.value.has_value();
        if (outcome.kind == ParseKind::ValidScore || outcome.kind == ParseKind::OutOfRubric) {
            CHECK(has_value);
        } else {
            CHECK_FALSE(has_value);
        }
        if (outcome.kind == ParseKind::ValidScore) CHECK(kScale.contains(*outcome.value));
        if (outcome.kind == ParseKind::OutOfRubric) CHECK_FALSE(kScale.contains(*outcome.value));
    }
}

TEST_CASE("strip_score removes every pair and preserves reasoning") {
    CHECK(strip_score("<reasoning>r</reasoning><score>3</score>") ==
          "<reasoning>r</reasoning>");
    CHECK(strip_score("no tags here") == "no tags here");

    const std::string two_pairs =
        "<reasoning>r</reasoning><score>3</score> and <score>4</score>";
    CHECK(strip_score(two_pairs) == strip_score_oracle(two_pairs));
    CHECK(strip_score(two_pairs) == "<reasoning>r</reasoning> and ");

    // Unclosed trailing tag is preserved (not a pair).
    CHECK(strip_score("<score>3</score><score>4") == "<score>4");

    std::mt19937_64 rng(29);
    for (int i = 0; i < 200; ++i) {
        std::string text = random_reasoning(rng);
        if (i % 2 == 0) text += "<score>" + std::to_string(i % 6) + "</score>";
        if (i % 3 == 0) text += " tail <score>9</score>";
        CHECK(strip_score(text) == strip_score_oracle(text));
    }
}

TEST_CASE("count_tokens falls back to whitespace tokens") {
    CHECK(count_tokens("a b c").value == 3);
    CHECK(count_tokens("a b c").source == TokenCountSource::WhitespaceFallback);
    CHECK(count_tokens("").value == 0);
    CHECK(count_tokens("  leading and\ttabs\nnewlines  ").value == 4);
}

TEST_CASE("count_tokens prefers the backend-reported count") {
    const auto counted = count_tokens("anything", 128);
    CHECK(counted.value == 128);
    CHECK(counted.source == TokenCountSource::BackendReported);
    CHECK_THROWS_AS(count_tokens("x", -1), std::invalid_argument);
}
