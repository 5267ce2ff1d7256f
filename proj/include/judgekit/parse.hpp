#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "judgekit/rubric.hpp"

namespace judgekit {

/// Classification of a model completion, mirroring the reward function's case
/// analysis. Exactly one kind applies to any input.
enum class ParseKind {
    MissingScoreTag,  ///< no well-formed <score>...</score> pair
    NonNumeric,       ///< tag present, contents not a decimal number
    OutOfRubric,      ///< numeric but not a member of the rubric's score set
    ValidScore,       ///< numeric and a member of the score set
};

const char* parse_kind_name(ParseKind kind);

struct ParseOutcome {
    ParseKind kind = ParseKind::MissingScoreTag;
    /// Present iff kind is OutOfRubric or ValidScore.
    std::optional<double> value;
    /// Contents of the first well-formed <reasoning> pair, verbatim.
    std::optional<std::string> reasoning;
    /// Number of well-formed score tag pairs seen. Only the first one scores;
    /// extras are surfaced here so callers can log them.
    int score_tag_pairs = 0;

    bool valid() const { return kind == ParseKind::ValidScore; }
};

enum class TokenCountSource { BackendReported, WhitespaceFallback };

struct TokenCount {
    long value = 0;
    TokenCountSource source = TokenCountSource::WhitespaceFallback;
};

/// One raw completion plus its generated-token count L.
struct ModelOutput {
    std::string raw_text;
    long token_count = 0;
    TokenCountSource token_source = TokenCountSource::WhitespaceFallback;
};

/// Classifies a raw completion against a rubric. Total: every input maps to
/// exactly one outcome, no exceptions. Tag matching is case-sensitive, exact
/// tag names, no attributes; the first well-formed pair wins; an unclosed tag
/// counts as missing. Score contents are parsed as a decimal number after
/// trimming whitespace, then checked for exact membership in the score set.
ParseOutcome parse(std::string_view raw, const ScoreRubric& rubric);

/// Removes every well-formed score tag pair (tags and contents); everything
/// else, including reasoning tags, is preserved verbatim.
std::string strip_score(std::string_view raw);

/// Supplies L for the length penalty: the backend-reported count when one is
/// available, otherwise a whitespace-delimited token count of the raw text.
TokenCount count_tokens(std::string_view raw,
                        std::optional<long> backend_count = std::nullopt);

/// Canonical tagged form: "<reasoning>R</reasoning><score>S</score>".
std::string render_tagged(std::string_view reasoning, double score);

ModelOutput make_output(std::string raw_text,
                        std::optional<long> backend_count = std::nullopt);

}  // namespace judgekit
