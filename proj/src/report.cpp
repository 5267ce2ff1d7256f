#include "judgekit/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "judgekit/stats.hpp"
#include "judgekit/util.hpp"

namespace judgekit {

using nlohmann::json;

namespace {

std::string format_accuracy(double mean_value, double stddev_value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f ± %.3f", mean_value, stddev_value);
    return buf;
}

std::string pad(std::string text, std::size_t width) {
    if (text.size() < width) text.append(width - text.size(), ' ');
    return text;
}

}  // namespace

AspectResult EvalReport::aspect_result(const AspectEval& eval, bool masked,
                                       const ReflectionEval* reflection) {
    AspectResult result;
    result.task_id = eval.task_id;
    result.aspect_id = eval.aspect_id;
    result.instances = eval.instance_count;
    result.per_repeat = eval.per_repeat_accuracy();
    result.mean = mean(result.per_repeat);
    result.stddev = population_stddev(result.per_repeat);
    result.masked_during_training = masked;
    if (reflection) {
        result.reflection_per_repeat = reflection->per_repeat_final_accuracy();
        result.reflection_mean = mean(*result.reflection_per_repeat);
        result.reflection_stddev = population_stddev(*result.reflection_per_repeat);
    }
    return result;
}

json report_to_json(const EvalReport& report) {
    json doc;
    doc["metadata"] = {
        {"backend", report.backend_id},
        {"repeats", report.repeats},
        {"seed", report.seed},
        {"sampling",
         {{"temperature", report.sampling.temperature},
          {"top_p", report.sampling.top_p},
          {"max_tokens", report.sampling.max_tokens}}},
        {"timestamp", report.timestamp},
        {"config", report.resolved_config},
    };
    doc["aspects"] = json::array();
    for (const AspectResult& aspect : report.aspects) {
        json node = {
            {"task", aspect.task_id},
            {"aspect", aspect.aspect_id},
            {"instances", aspect.instances},
            {"per_repeat", aspect.per_repeat},
            {"mean", aspect.mean},
            {"std", aspect.stddev},
            {"masked_during_training", aspect.masked_during_training},
        };
        if (aspect.reflection_per_repeat) {
            node["reflection"] = {
                {"per_repeat", *aspect.reflection_per_repeat},
                {"mean", *aspect.reflection_mean},
                {"std", *aspect.reflection_stddev},
            };
        }
        doc["aspects"].push_back(std::move(node));
    }
    doc["per_task_overall"] = json::array();
    for (const TaskOverall& task : report.per_task_overall) {
        doc["per_task_overall"].push_back({{"task", task.task_id},
                                           {"per_repeat", task.per_repeat},
                                           {"mean", task.mean},
                                           {"std", task.stddev}});
    }
    doc["overall"] = {
        {"per_repeat", report.overall_per_repeat},
        {"mean", report.overall_mean},
        {"std", report.overall_stddev},
    };
    return doc;
}

EvalReport report_from_json(const json& doc) {
    EvalReport report;
    const json& meta = doc.at("metadata");
    report.backend_id = meta.at("backend").get<std::string>();
    report.repeats = meta.at("repeats").get<int>();
    report.seed = meta.at("seed").get<std::uint64_t>();
    report.sampling.temperature = meta.at("sampling").at("temperature").get<double>();
    report.sampling.top_p = meta.at("sampling").at("top_p").get<double>();
    report.sampling.max_tokens = meta.at("sampling").at("max_tokens").get<int>();
    report.timestamp = meta.value("timestamp", "");
    report.resolved_config = meta.value("config", json::object());

    for (const json& node : doc.at("aspects")) {
        AspectResult aspect;
        aspect.task_id = node.at("task").get<std::string>();
        aspect.aspect_id = node.at("aspect").get<std::string>();
        aspect.instances = node.at("instances").get<long>();
        aspect.per_repeat = node.at("per_repeat").get<std::vector<double>>();
        aspect.mean = node.at("mean").get<double>();
        aspect.stddev = node.at("std").get<double>();
        aspect.masked_during_training = node.value("masked_during_training", false);
        if (node.contains("reflection")) {
            aspect.reflection_per_repeat =
                node["reflection"].at("per_repeat").get<std::vector<double>>();
            aspect.reflection_mean = node["reflection"].at("mean").get<double>();
            aspect.reflection_stddev = node["reflection"].at("std").get<double>();
        }
        report.aspects.push_back(std::move(aspect));
    }
    if (doc.contains("per_task_overall")) {
        for (const json& node : doc["per_task_overall"]) {
            report.per_task_overall.push_back(
                TaskOverall{node.at("task").get<std::string>(),
                            node.at("per_repeat").get<std::vector<double>>(),
                            node.at("mean").get<double>(), node.at("std").get<double>()});
        }
    }
    report.overall_per_repeat = doc.at("overall").at("per_repeat").get<std::vector<double>>();
    report.overall_mean = doc.at("overall").at("mean").get<double>();
    report.overall_stddev = doc.at("overall").at("std").get<double>();
    return report;
}

std::string render_table(const EvalReport& report) {
    const bool has_reflection =
        std::any_of(report.aspects.begin(), report.aspects.end(),
                    [](const AspectResult& a) { return a.reflection_per_repeat.has_value(); });

    std::vector<std::string> headers{"Backend"};
    bool any_masked = false;
    for (const AspectResult& aspect : report.aspects) {
        std::string title = aspect.task_id + "/" + aspect.aspect_id;
        if (aspect.masked_during_training) {
            title += " *";
            any_masked = true;
        }
        headers.push_back(std::move(title));
    }
    headers.emplace_back("Overall Task");

    std::vector<std::string> row{report.backend_id};
    for (const AspectResult& aspect : report.aspects) {
        row.push_back(format_accuracy(aspect.mean, aspect.stddev));
    }
    row.push_back(format_accuracy(report.overall_mean, report.overall_stddev));

    std::vector<std::string> reflection_row;
    if (has_reflection) {
        reflection_row.push_back(report.backend_id + " (after reflection)");
        for (const AspectResult& aspect : report.aspects) {
            if (aspect.reflection_per_repeat) {
                reflection_row.push_back(
                    format_accuracy(*aspect.reflection_mean, *aspect.reflection_stddev));
            } else {
                reflection_row.emplace_back("-");
            }
        }
        reflection_row.emplace_back("-");
    }

    std::vector<std::size_t> widths(headers.size(), 0);
    for (std::size_t c = 0; c < headers.size(); ++c) {
        widths[c] = headers[c].size();
        widths[c] = std::max(widths[c], row[c].size());
        if (has_reflection) widths[c] = std::max(widths[c], reflection_row[c].size());
    }

    std::ostringstream out;
    auto emit_row = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c > 0) out << "  ";
            out << pad(cells[c], widths[c]);
        }
        out << "\n";
    };
    emit_row(headers);
    std::size_t rule = 0;
    for (std::size_t c = 0; c < widths.size(); ++c) rule += widths[c] + (c > 0 ? 2 : 0);
    out << std::string(rule, '-') << "\n";
    emit_row(row);
    if (has_reflection) emit_row(reflection_row);
    out << "\nValues are mean ± population std over " << report.repeats << " repeats.\n";
    if (any_masked) out << "* aspect was excluded from training (evaluated as unseen).\n";
    out << "backend: " << report.backend_id << ", seed: " << report.seed
        << ", timestamp: " << report.timestamp << "\n";
    return out.str();
}

std::string render_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "# backend=" << report.backend_id << " repeats=" << report.repeats
        << " seed=" << report.seed << " timestamp=" << report.timestamp << "\n";
    out << "task,aspect,instances,masked,repeat,accuracy,accuracy_after_reflection\n";
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        return std::string(buf);
    };
    for (const AspectResult& aspect : report.aspects) {
        for (std::size_t r = 0; r < aspect.per_repeat.size(); ++r) {
            out << aspect.task_id << ',' << aspect.aspect_id << ',' << aspect.instances
                << ',' << (aspect.masked_during_training ? 1 : 0) << ',' << r << ','
                << fmt(aspect.per_repeat[r]) << ',';
            if (aspect.reflection_per_repeat && r < aspect.reflection_per_repeat->size()) {
                out << fmt((*aspect.reflection_per_repeat)[r]);
            }
            out << "\n";
        }
        out << aspect.task_id << ',' << aspect.aspect_id << ',' << aspect.instances << ','
            << (aspect.masked_during_training ? 1 : 0) << ",mean," << fmt(aspect.mean)
            << ',';
        if (aspect.reflection_mean) out << fmt(*aspect.reflection_mean);
        out << "\n";
        out << aspect.task_id << ',' << aspect.aspect_id << ',' << aspect.instances << ','
            << (aspect.masked_during_training ? 1 : 0) << ",std," << fmt(aspect.stddev)
            << ',';
        if (aspect.reflection_stddev) out << fmt(*aspect.reflection_stddev);
        out << "\n";
    }
    for (const TaskOverall& task : report.per_task_overall) {
        for (std::size_t r = 0; r < task.per_repeat.size(); ++r) {
            out << "overall," << task.task_id << ",,," << r << ','
                << fmt(task.per_repeat[r]) << ",\n";
        }
        out << "overall," << task.task_id << ",,,mean," << fmt(task.mean) << ",\n";
        out << "overall," << task.task_id << ",,,std," << fmt(task.stddev) << ",\n";
    }
    for (std::size_t r = 0; r < report.overall_per_repeat.size(); ++r) {
        out << "overall,all,,," << r << ',' << fmt(report.overall_per_repeat[r]) << ",\n";
    }
    out << "overall,all,,,mean," << fmt(report.overall_mean) << ",\n";
    out << "overall,all,,,std," << fmt(report.overall_stddev) << ",\n";
    return out.str();
}

void write_report_files(const EvalReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text_file_atomic(dir / "report.json", report_to_json(report).dump(2) + "\n");
    write_text_file_atomic(dir / "report.txt", render_table(report));
}

}  // namespace judgekit
