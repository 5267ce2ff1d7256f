#include "judgekit/harness.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "judgekit/parse.hpp"
#include "judgekit/stats.hpp"

namespace judgekit {

namespace {

std::vector<double> accuracies(const std::vector<long>& correct, long total) {
    std::vector<double> out;
    out.reserve(correct.size());
    for (const long c : correct) {
        out.push_back(static_cast<double>(c) / static_cast<double>(total));
    }
    return out;
}

/// Runs `job_count` independent jobs on up to `max_concurrency` threads. The
/// first exception wins; remaining jobs are drained. Each job writes only its
/// own slot, so no result locking is needed.
template <typename Job>
void run_jobs(long job_count, int max_concurrency, Job&& job) {
    if (max_concurrency <= 1 || job_count <= 1) {
        for (long i = 0; i < job_count; ++i) job(i);
        return;
    }

    std::atomic<long> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const int workers = static_cast<int>(
        std::min<long>(max_concurrency, job_count));

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const long i = next.fetch_add(1);
                if (i >= job_count) return;
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& thread : pool) thread.join();
    if (first_error) std::rethrow_exception(first_error);
}

void check_preconditions(std::span<const EvalInstance> instances, int repeats) {
    if (instances.empty()) {
        throw std::invalid_argument("evaluation needs at least one instance");
    }
    if (repeats < 1) {
        throw std::invalid_argument("repeats must be >= 1");
    }
}

void audit_coverage(const std::vector<char>& filled, const char* what) {
    for (const char f : filled) {
        if (f != 1) {
            throw std::logic_error(std::string(what) +
                                   ": audit failed, an instance was not answered "
                                   "exactly once per repeat");
        }
    }
}

}  // namespace

std::vector<double> AspectEval::per_repeat_accuracy() const {
    return accuracies(per_repeat_correct, instance_count);
}

double AspectEval::mean_accuracy() const {
    const auto acc = per_repeat_accuracy();
    return mean(acc);
}

double AspectEval::stddev_accuracy() const {
    const auto acc = per_repeat_accuracy();
    return population_stddev(acc);
}

std::vector<double> ReflectionEval::per_repeat_initial_accuracy() const {
    return accuracies(per_repeat_initial_correct, instance_count);
}

std::vector<double> ReflectionEval::per_repeat_final_accuracy() const {
    return accuracies(per_repeat_final_correct, instance_count);
}

AspectEval evaluate_aspect(const CompletionBackend& backend,
                           const AspectRegistry& registry, const AspectSpec& aspect,
                           std::span<const EvalInstance> instances, int repeats,
                           int max_concurrency) {
    check_preconditions(instances, repeats);

    std::vector<PromptBundle> prompts;
    prompts.reserve(instances.size());
    for (const EvalInstance& instance : instances) {
        if (instance.task_id != aspect.task_id || instance.aspect_id != aspect.aspect_id) {
            throw std::invalid_argument("instance '" + instance.instance_id +
                                        "' does not belong to aspect " + aspect.key());
        }
        prompts.push_back(registry.build_prompt(aspect, instance));
    }

    const long total = static_cast<long>(instances.size());
    const long jobs = total * repeats;
    std::vector<char> correct(static_cast<std::size_t>(jobs), 0);
    std::vector<char> filled(static_cast<std::size_t>(jobs), 0);

    run_jobs(jobs, max_concurrency, [&](long j) {
        const long repeat = j / total;
        const long index = j % total;
        const ModelOutput output =
            backend.complete(prompts[static_cast<std::size_t>(index)], 0);
        const ParseOutcome outcome = parse(output.raw_text, aspect.rubric);
        const bool hit = outcome.valid() &&
                         *outcome.value == instances[static_cast<std::size_t>(index)].gold;
        correct[static_cast<std::size_t>(j)] = hit ? 1 : 0;
        filled[static_cast<std::size_t>(j)] += 1;
        (void)repeat;
    });
    audit_coverage(filled, "evaluate_aspect");

    AspectEval eval;
    eval.task_id = aspect.task_id;
    eval.aspect_id = aspect.aspect_id;
    eval.instance_count = total;
    eval.per_repeat_correct.assign(static_cast<std::size_t>(repeats), 0);
    for (long j = 0; j < jobs; ++j) {
        eval.per_repeat_correct[static_cast<std::size_t>(j / total)] +=
            correct[static_cast<std::size_t>(j)];
    }
    return eval;
}

ReflectionEval reflection_pass(const CompletionBackend& backend,
                               const AspectRegistry& registry,
                               const AspectSpec& aspect,
                               std::span<const EvalInstance> instances, int repeats,
                               int max_concurrency) {
    check_preconditions(instances, repeats);

    std::vector<PromptBundle> prompts;
    prompts.reserve(instances.size());
    for (const EvalInstance& instance : instances) {
        if (instance.task_id != aspect.task_id || instance.aspect_id != aspect.aspect_id) {
            throw std::invalid_argument("instance '" + instance.instance_id +
                                        "' does not belong to aspect " + aspect.key());
        }
        prompts.push_back(registry.build_prompt(aspect, instance));
    }

    const long total = static_cast<long>(instances.size());
    const long jobs = total * repeats;
    std::vector<ReflectionOutcome> outcomes(static_cast<std::size_t>(jobs));
    std::vector<char> filled(static_cast<std::size_t>(jobs), 0);

    run_jobs(jobs, max_concurrency, [&](long j) {
        const long index = j % total;
        const EvalInstance& instance = instances[static_cast<std::size_t>(index)];

        const ModelOutput initial =
            backend.complete(prompts[static_cast<std::size_t>(index)], 0);
        const ParseOutcome initial_outcome = parse(initial.raw_text, aspect.rubric);

        std::string reasoning = strip_score(initial.raw_text);
        if (reasoning.empty()) {
            // The completion carried nothing but score tags; carry an empty
            // reasoning block so the reflection prompt stays well-formed.
            reasoning = "<reasoning></reasoning>";
        }
        const PromptBundle reflection =
            registry.build_reflection_prompt(aspect, instance, reasoning);
        const ModelOutput final_output = backend.complete(reflection, 1);
        const ParseOutcome final_outcome = parse(final_output.raw_text, aspect.rubric);

        ReflectionOutcome& slot = outcomes[static_cast<std::size_t>(j)];
        slot.initial_score =
            initial_outcome.valid() ? initial_outcome.value : std::nullopt;
        slot.final_score = final_outcome.valid() ? final_outcome.value : std::nullopt;
        filled[static_cast<std::size_t>(j)] += 1;
    });
    audit_coverage(filled, "reflection_pass");

    ReflectionEval eval;
    eval.task_id = aspect.task_id;
    eval.aspect_id = aspect.aspect_id;
    eval.instance_count = total;
    eval.pairs.assign(static_cast<std::size_t>(repeats), {});
    eval.per_repeat_initial_correct.assign(static_cast<std::size_t>(repeats), 0);
    eval.per_repeat_final_correct.assign(static_cast<std::size_t>(repeats), 0);
    for (long j = 0; j < jobs; ++j) {
        const auto repeat = static_cast<std::size_t>(j / total);
        const auto index = static_cast<std::size_t>(j % total);
        const ReflectionOutcome& outcome = outcomes[static_cast<std::size_t>(j)];
        eval.pairs[repeat].push_back(outcome);
        const double gold = instances[index].gold;
        if (outcome.initial_score && *outcome.initial_score == gold) {
            ++eval.per_repeat_initial_correct[repeat];
        }
        if (outcome.final_score && *outcome.final_score == gold) {
            ++eval.per_repeat_final_correct[repeat];
        }
    }
    return eval;
}

OverallAccuracy overall_accuracy(std::span<const AspectEval> results,
                                 const DatasetManifest& manifest) {
    if (results.empty()) {
        throw std::invalid_argument("overall accuracy needs at least one aspect result");
    }
    std::size_t repeats = results.front().per_repeat_correct.size();
    for (const AspectEval& result : results) {
        if (!manifest.find(result.task_id, result.aspect_id)) {
            throw std::invalid_argument("manifest has no row for " + result.task_id + "/" +
                                        result.aspect_id);
        }
        if (result.per_repeat_correct.size() != repeats) {
            throw std::invalid_argument("aspect results disagree on repeat count");
        }
    }

    OverallAccuracy overall;
    overall.per_repeat.reserve(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
        long correct = 0;
        long total = 0;
        for (const AspectEval& result : results) {
            correct += result.per_repeat_correct[r];
            total += result.instance_count;
        }
        overall.per_repeat.push_back(static_cast<double>(correct) /
                                     static_cast<double>(total));
    }
    overall.mean = mean(overall.per_repeat);
    overall.stddev = population_stddev(overall.per_repeat);
    return overall;
}

}  // namespace judgekit
