#include <doctest.h>

#include "judgekit/report.hpp"
#include "judgekit/stats.hpp"

using namespace judgekit;

namespace {

EvalReport sample_report() {
    EvalReport report;
    report.backend_id = "scripted";
    report.repeats = 5;
    report.seed = 7;
    report.sampling = SamplingParams{1.0, 0.95, 512};
    report.timestamp = "2026-01-01T00:00:00Z";
    report.resolved_config = {{"dataset", "smoke.jsonl"}};

    AspectEval eval;
    eval.task_id = "rev_util";
    eval.aspect_id = "actionability";
    eval.instance_count = 100;
    eval.per_repeat_correct = {70, 72, 71, 69, 73};
    report.aspects.push_back(EvalReport::aspect_result(eval, true));

    AspectEval other;
    other.task_id = "rev_util";
    other.aspect_id = "helpfulness";
    other.instance_count = 100;
    other.per_repeat_correct = {80, 80, 80, 80, 80};
    ReflectionEval reflection;
    reflection.task_id = other.task_id;
    reflection.aspect_id = other.aspect_id;
    reflection.instance_count = 100;
    reflection.per_repeat_final_correct = {90, 90, 90, 90, 90};
    reflection.per_repeat_initial_correct = {80, 80, 80, 80, 80};
    report.aspects.push_back(EvalReport::aspect_result(other, false, &reflection));

    report.per_task_overall.push_back(
        TaskOverall{"rev_util", {0.75, 0.76, 0.755, 0.745, 0.765}, 0.755, 0.0074});
    report.overall_per_repeat = {0.75, 0.76, 0.755, 0.745, 0.765};
    report.overall_mean = mean(report.overall_per_repeat);
    report.overall_stddev = population_stddev(report.overall_per_repeat);
    return report;
}

}  // namespace

TEST_CASE("aspect_result computes the mean and population std it reports") {
    const auto report = sample_report();
    const auto& aspect = report.aspects.front();
    CHECK(aspect.mean == doctest::Approx(0.71).epsilon(1e-12));
    CHECK(aspect.stddev == doctest::Approx(0.0141421356).epsilon(1e-6));
    CHECK(std::abs(aspect.mean - mean(aspect.per_repeat)) <= 1e-12);
    for (const double accuracy : aspect.per_repeat) {
        CHECK(accuracy >= 0.0);
        CHECK(accuracy <= 1.0);
    }
}

TEST_CASE("report json round-trips") {
    const auto report = sample_report();
    const auto doc = report_to_json(report);
    const auto back = report_from_json(doc);

    CHECK(back.backend_id == report.backend_id);
    CHECK(back.repeats == report.repeats);
    CHECK(back.seed == report.seed);
    REQUIRE(back.aspects.size() == 2);
    CHECK(back.aspects[0].per_repeat == report.aspects[0].per_repeat);
    CHECK(back.aspects[0].masked_during_training);
    REQUIRE(back.aspects[1].reflection_per_repeat.has_value());
    CHECK(*back.aspects[1].reflection_mean == doctest::Approx(0.9).epsilon(1e-12));
    REQUIRE(back.per_task_overall.size() == 1);
    CHECK(back.per_task_overall[0].task_id == "rev_util");
    CHECK(back.overall_per_repeat == report.overall_per_repeat);
    CHECK(report_to_json(back) == doc);
}

TEST_CASE("table layout: aspect columns, overall column, masked marker, reflection row") {
    const auto table = render_table(sample_report());
    CHECK(table.find("rev_util/actionability *") != std::string::npos);
    CHECK(table.find("rev_util/helpfulness") != std::string::npos);
    CHECK(table.find("Overall Task") != std::string::npos);
    CHECK(table.find("(after reflection)") != std::string::npos);
    CHECK(table.find("0.710 ± 0.014") != std::string::npos);
    CHECK(table.find("0.900 ± 0.000") != std::string::npos);
    CHECK(table.find("excluded from training") != std::string::npos);
}

TEST_CASE("csv has one row per aspect repeat plus summary rows") {
    const auto csv = render_csv(sample_report());
    CHECK(csv.rfind("# backend=scripted repeats=5 seed=7", 0) == 0);
    CHECK(csv.find("task,aspect,instances,masked,repeat,accuracy,accuracy_after_reflection") !=
          std::string::npos);
    CHECK(csv.find("rev_util,actionability,100,1,0,0.700000,") != std::string::npos);
    CHECK(csv.find("rev_util,helpfulness,100,0,2,0.800000,0.900000") != std::string::npos);
    CHECK(csv.find("rev_util,actionability,100,1,mean,0.710000,") != std::string::npos);
    CHECK(csv.find("overall,rev_util,,,mean,0.755000,") != std::string::npos);
    CHECK(csv.find("overall,all,,,mean,") != std::string::npos);
}
