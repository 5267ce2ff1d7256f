#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "judgekit/backend.hpp"
#include "judgekit/harness.hpp"

namespace judgekit {

struct AspectResult {
    std::string task_id;
    std::string aspect_id;
    long instances = 0;
    std::vector<double> per_repeat;
    double mean = 0.0;
    double stddev = 0.0;
    bool masked_during_training = false;
    std::optional<std::vector<double>> reflection_per_repeat;
    std::optional<double> reflection_mean;
    std::optional<double> reflection_stddev;
};

struct TaskOverall {
    std::string task_id;
    std::vector<double> per_repeat;
    double mean = 0.0;
    double stddev = 0.0;
};

/// Full evaluation run result: per-aspect repeat accuracies with mean and
/// population std, instance-weighted overalls (per task and pooled), and
/// enough metadata (seed, sampling, resolved config) to rerun the evaluation.
struct EvalReport {
    std::string backend_id;
    int repeats = 0;
    std::uint64_t seed = 0;
    SamplingParams sampling;
    std::string timestamp;
    nlohmann::json resolved_config;

    std::vector<AspectResult> aspects;
    std::vector<TaskOverall> per_task_overall;
    std::vector<double> overall_per_repeat;
    double overall_mean = 0.0;
    double overall_stddev = 0.0;

    static AspectResult aspect_result(const AspectEval& eval, bool masked,
                                      const ReflectionEval* reflection = nullptr);
};

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& doc);

/// Aspects as columns plus an Overall Task column, one accuracy row (and an
/// after-reflection row when reflection results are present). Masked aspects
/// are marked.
std::string render_table(const EvalReport& report);

/// Long-form CSV: one row per (aspect, repeat) plus summary rows, for
/// external plotting.
std::string render_csv(const EvalReport& report);

/// Writes report.json and report.txt into the directory (created if needed),
/// each via an atomic temp-file rename.
void write_report_files(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace judgekit
