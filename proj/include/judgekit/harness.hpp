#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "judgekit/backend.hpp"
#include "judgekit/dataset.hpp"
#include "judgekit/registry.hpp"

namespace judgekit {

/// Per-aspect evaluation outcome over R repeats. Accuracy counts a completion
/// as correct only when it parses to a valid score equal to the gold score;
/// unparseable and out-of-rubric outputs are incorrect, never excluded.
struct AspectEval {
    std::string task_id;
    std::string aspect_id;
    long instance_count = 0;
    std::vector<long> per_repeat_correct;

    std::vector<double> per_repeat_accuracy() const;
    double mean_accuracy() const;
    double stddev_accuracy() const;
};

/// (initial, final) score outcomes of one reflection episode. An empty
/// optional is the invalid-score sentinel used by the stage-2 reward.
struct ReflectionOutcome {
    std::optional<double> initial_score;
    std::optional<double> final_score;
};

struct ReflectionEval {
    std::string task_id;
    std::string aspect_id;
    long instance_count = 0;
    /// pairs[repeat][instance]
    std::vector<std::vector<ReflectionOutcome>> pairs;
    std::vector<long> per_repeat_initial_correct;
    std::vector<long> per_repeat_final_correct;

    std::vector<double> per_repeat_initial_accuracy() const;
    std::vector<double> per_repeat_final_accuracy() const;
};

/// Prompts every instance once per repeat, parses the completions, and counts
/// exact gold matches. Requests run on up to `max_concurrency` threads keyed
/// by (instance, repeat), so completion order never affects the result; an
/// audit guarantees every instance is answered exactly once per repeat.
/// Throws std::invalid_argument on an empty instance list or repeats < 1.
AspectEval evaluate_aspect(const CompletionBackend& backend,
                           const AspectRegistry& registry, const AspectSpec& aspect,
                           std::span<const EvalInstance> instances, int repeats,
                           int max_concurrency = 1);

/// Two-pass reflection protocol per instance: evaluate, strip the score from
/// the completion, re-prompt with the reflection instruction, and parse the
/// final score. Returns the (initial, final) outcome pairs feeding the
/// stage-2 reward and the after-reflection accuracy.
ReflectionEval reflection_pass(const CompletionBackend& backend,
                               const AspectRegistry& registry,
                               const AspectSpec& aspect,
                               std::span<const EvalInstance> instances, int repeats,
                               int max_concurrency = 1);

struct OverallAccuracy {
    std::vector<double> per_repeat;
    double mean = 0.0;
    double stddev = 0.0;
};

/// Instance-weighted (micro-average) accuracy across aspects, per repeat:
/// pooled correct counts over pooled totals. Every aspect must have a row in
/// the manifest; a missing row throws std::invalid_argument.
OverallAccuracy overall_accuracy(std::span<const AspectEval> results,
                                 const DatasetManifest& manifest);

}  // namespace judgekit
