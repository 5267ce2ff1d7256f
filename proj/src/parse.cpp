#include "judgekit/parse.hpp"

#include <cctype>
#include <charconv>
#include <stdexcept>

namespace judgekit {

namespace {

constexpr std::string_view kScoreOpen = "<score>";
constexpr std::string_view kScoreClose = "</score>";
constexpr std::string_view kReasoningOpen = "<reasoning>";
constexpr std::string_view kReasoningClose = "</reasoning>";

struct TagSpan {
    std::size_t begin = 0;    // position of the opening tag
    std::size_t end = 0;      // one past the closing tag
    std::string_view inner;   // contents between the tags
};

std::optional<TagSpan> find_pair(std::string_view text, std::string_view open,
                                 std::string_view close, std::size_t from = 0) {
    const std::size_t open_pos = text.find(open, from);
    if (open_pos == std::string_view::npos) return std::nullopt;
    const std::size_t inner_pos = open_pos + open.size();
    const std::size_t close_pos = text.find(close, inner_pos);
    // No closing tag after the first opener means no later opener can close
    // either; the tag is unclosed and the pair does not exist.
    if (close_pos == std::string_view::npos) return std::nullopt;
    return TagSpan{open_pos, close_pos + close.size(),
                   text.substr(inner_pos, close_pos - inner_pos)};
}

std::string_view trim(std::string_view text) {
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return text.substr(begin, end - begin);
}

/// Strict decimal parse: optional sign, digits, optional fractional part; the
/// whole trimmed string must be consumed. "4.0" parses, "maybe five" and
/// "" do not.
std::optional<double> parse_decimal(std::string_view text) {
    const std::string_view trimmed = trim(text);
    if (trimmed.empty()) return std::nullopt;
    double value = 0.0;
    const char* first = trimmed.data();
    const char* last = trimmed.data() + trimmed.size();
    auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::fixed);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    return value;
}

int count_pairs(std::string_view text, std::string_view open, std::string_view close) {
    int n = 0;
    std::size_t from = 0;
    while (auto span = find_pair(text, open, close, from)) {
        ++n;
        from = span->end;
    }
    return n;
}

}  // namespace

const char* parse_kind_name(ParseKind kind) {
    switch (kind) {
        case ParseKind::MissingScoreTag: return "missing-score-tag";
        case ParseKind::NonNumeric: return "non-numeric";
        case ParseKind::OutOfRubric: return "out-of-rubric";
        case ParseKind::ValidScore: return "valid-score";
    }
    return "unknown";
}

ParseOutcome parse(std::string_view raw, const ScoreRubric& rubric) {
    ParseOutcome outcome;

    if (auto reasoning = find_pair(raw, kReasoningOpen, kReasoningClose)) {
        outcome.reasoning = std::string(reasoning->inner);
    }

    const auto score_span = find_pair(raw, kScoreOpen, kScoreClose);
    outcome.score_tag_pairs = count_pairs(raw, kScoreOpen, kScoreClose);
    if (!score_span) {
        outcome.kind = ParseKind::MissingScoreTag;
        return outcome;
    }

    const auto number = parse_decimal(score_span->inner);
    if (!number) {
        outcome.kind = ParseKind::NonNumeric;
        return outcome;
    }

    outcome.value = *number;
    outcome.kind = rubric.contains(*number) ? ParseKind::ValidScore
                                            : ParseKind::OutOfRubric;
    return outcome;
}

std::string strip_score(std::string_view raw) {
    std::string text(raw);
    while (auto span = find_pair(text, kScoreOpen, kScoreClose)) {
        text.erase(span->begin, span->end - span->begin);
    }
    return text;
}

TokenCount count_tokens(std::string_view raw, std::optional<long> backend_count) {
    if (backend_count) {
        if (*backend_count < 0) {
            throw std::invalid_argument("backend token count must be >= 0");
        }
        return TokenCount{*backend_count, TokenCountSource::BackendReported};
    }
    long tokens = 0;
    bool in_token = false;
    for (const char c : raw) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++tokens;
        }
    }
    return TokenCount{tokens, TokenCountSource::WhitespaceFallback};
}

std::string render_tagged(std::string_view reasoning, double score) {
    std::string out;
    out.reserve(reasoning.size() + 64);
    out.append(kReasoningOpen);
    out.append(reasoning);
    out.append(kReasoningClose);
    out.append(kScoreOpen);
    out.append(format_score(score));
    out.append(kScoreClose);
    return out;
}

ModelOutput make_output(std::string raw_text, std::optional<long> backend_count) {
    const TokenCount count = count_tokens(raw_text, backend_count);
    return ModelOutput{std::move(raw_text), count.value, count.source};
}

}  // namespace judgekit
