#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <atomic>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "judgekit/backend.hpp"
#include "judgekit/harness.hpp"
#include "judgekit/registry.hpp"
#include "judgekit/reward.hpp"

using namespace judgekit;
using nlohmann::json;

namespace {

AspectRegistry demo_registry() {
    AspectRegistry registry;
    registry.set_system_prompt("You are an evaluator.");
    AspectSpec spec;
    spec.task_id = "demo";
    spec.aspect_id = "quality";
    spec.rubric = ScoreRubric::binary("quality");
    spec.query_text = "Judge the text.";
    spec.criteria_text = "The text should be good.";
    spec.examples.push_back(FewShotExample{
        {{"ANSWER", "A fine text."}},
        "The text satisfies the criteria, so the evaluation score should be 1.",
        1.0});
    spec.answer_slot_labels = {"ANSWER"};
    registry.register_aspect(std::move(spec));
    return registry;
}

std::vector<EvalInstance> demo_instances(int count, double gold = 1.0) {
    std::vector<EvalInstance> instances;
    for (int i = 0; i < count; ++i) {
        EvalInstance instance;
        instance.instance_id = "demo-" + std::to_string(i);
        instance.task_id = "demo";
        instance.aspect_id = "quality";
        instance.slots = {{"ANSWER", "Candidate text " + std::to_string(i)}};
        instance.gold = gold;
        instance.split = Split::Test;
        instances.push_back(std::move(instance));
    }
    return instances;
}

ScriptedBackend fraction_correct_backend(const std::vector<EvalInstance>& instances,
                                         int correct_count) {
    std::map<std::string, std::vector<ScriptedBackend::Entry>> responses;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const bool correct = static_cast<int>(i) < correct_count;
        const double score = correct ? instances[i].gold : 1.0 - instances[i].gold;
        responses[instances[i].instance_id] = {
            {render_tagged("scripted reasoning", score), std::nullopt}};
    }
    return ScriptedBackend(std::move(responses), std::nullopt, SamplingParams{1.0, 0.95, 256});
}

AspectEval eval_with_counts(std::string aspect_id, long instances,
                            std::vector<long> correct) {
    AspectEval eval;
    eval.task_id = "demo";
    eval.aspect_id = std::move(aspect_id);
    eval.instance_count = instances;
    eval.per_repeat_correct = std::move(correct);
    return eval;
}

}  // namespace

TEST_CASE("a deterministic scripted backend gives identical repeats and zero std") {
    const auto registry = demo_registry();
    const auto& aspect = registry.at("demo", "quality");
    const auto instances = demo_instances(10);
    const auto backend = fraction_correct_backend(instances, 7);

    const auto eval = evaluate_aspect(backend, registry, aspect, instances, 5);
    const auto accuracies = eval.per_repeat_accuracy();
    REQUIRE(accuracies.size() == 5);
    for (const double accuracy : accuracies) CHECK(accuracy == 0.7);
    CHECK(eval.mean_accuracy() == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(eval.stddev_accuracy() == 0.0);
}

TEST_CASE("unparseable outputs count as incorrect") {
    const auto registry = demo_registry();
    const auto& aspect = registry.at("demo", "quality");
    const auto instances = demo_instances(4);

    ScriptedBackend backend({}, ScriptedBackend::Entry{"<reasoning>no score</reasoning>",
                                                       std::nullopt},
                            SamplingParams{1.0, 0.95, 256});
    const auto eval = evaluate_aspect(backend, registry, aspect, instances, 3);
    for (const double accuracy : eval.per_repeat_accuracy()) CHECK(accuracy == 0.0);
}

TEST_CASE("accuracy is invariant to instance order and concurrency") {
    const auto registry = demo_registry();
    const auto& aspect = registry.at("demo", "quality");
    auto instances = demo_instances(20);
    const auto backend = fraction_correct_backend(instances, 13);

    const auto serial = evaluate_aspect(backend, registry, aspect, instances, 3, 1);

    std::mt19937_64 rng(41);
    std::shuffle(instances.begin(), instances.end(), rng);
    const auto shuffled = evaluate_aspect(backend, registry, aspect, instances, 3, 1);
    const auto concurrent = evaluate_aspect(backend, registry, aspect, instances, 3, 8);

    CHECK(serial.per_repeat_accuracy() == shuffled.per_repeat_accuracy());
    CHECK(serial.per_repeat_accuracy() == concurrent.per_repeat_accuracy());
}

TEST_CASE("evaluate_aspect validates inputs") {
    const auto registry = demo_registry();
    const auto& aspect = registry.at("demo", "quality");
    const auto backend = fraction_correct_backend({}, 0);
    CHECK_THROWS_AS(evaluate_aspect(backend, registry, aspect, {}, 5),
                    std::invalid_argument);
    const auto instances = demo_instances(2);
    CHECK_THROWS_AS(
        evaluate_aspect(fraction_correct_backend(instances, 2), registry, aspect,
                        instances, 0),
        std::invalid_argument);
}

TEST_CASE("a scripted backend without a response for a prompt fails loudly") {
    const auto registry = demo_registry();
    const auto& aspect = registry.at("demo", "quality");
    const auto instances = demo_instances(2);
    ScriptedBackend backend({}, std::nullopt, SamplingParams{1.0, 0.95, 256});
    CHECK_THROWS_AS(evaluate_aspect(backend, registry, aspect, instances, 1),
                    std::out_of_range);
}

TEST_CASE("reflection pass pairs initial and final outcomes") {
    const auto registry = demo_registry();
    const auto& aspect = registry.at("demo", "quality");
    const auto instances = demo_instances(3);
    const ScoreRubric& rubric = aspect.rubric;

    SUBCASE("wrong then correct maps to the correction reward") {
        std::map<std::string, std::vector<ScriptedBackend::Entry>> responses;
        for (const auto& instance : instances) {
            responses[instance.instance_id] = {
                {render_tagged("initial take", 0.0), std::nullopt},
                {render_tagged("revised take", 1.0), std::nullopt}};
        }
        ScriptedBackend backend(std::move(responses), std::nullopt,
                                SamplingParams{1.0, 0.95, 256});
        const auto result = reflection_pass(backend, registry, aspect, instances, 2);
        REQUIRE(result.pairs.size() == 2);
        for (const auto& repeat : result.pairs) {
            for (std::size_t i = 0; i < repeat.size(); ++i) {
                const StageTwoPair pair{repeat[i].initial_score, repeat[i].final_score,
                                        instances[i].gold};
                CHECK(stage2_reward(pair, rubric) == 1.0);
            }
        }
        for (const long final_correct : result.per_repeat_final_correct) {
            CHECK(final_correct == 3);
        }
        for (const long initial_correct : result.per_repeat_initial_correct) {
            CHECK(initial_correct == 0);
        }
    }

    SUBCASE("correct then correct maps to the keep reward") {
        std::map<std::string, std::vector<ScriptedBackend::Entry>> responses;
        for (const auto& instance : instances) {
            responses[instance.instance_id] = {
                {render_tagged("initial take", 1.0), std::nullopt},
                {render_tagged("still confident", 1.0), std::nullopt}};
        }
        ScriptedBackend backend(std::move(responses), std::nullopt,
                                SamplingParams{1.0, 0.95, 256});
        const auto result = reflection_pass(backend, registry, aspect, instances, 1);
        for (const auto& outcome : result.pairs[0]) {
            CHECK(stage2_reward({outcome.initial_score, outcome.final_score, 1.0}, rubric) ==
                  0.5);
        }
    }

    SUBCASE("an unparseable initial counts as not-gold") {
        std::map<std::string, std::vector<ScriptedBackend::Entry>> responses;
        for (const auto& instance : instances) {
            responses[instance.instance_id] = {
                {"<reasoning>no score emitted</reasoning>", std::nullopt},
                {render_tagged("fixed", 1.0), std::nullopt}};
        }
        ScriptedBackend backend(std::move(responses), std::nullopt,
                                SamplingParams{1.0, 0.95, 256});
        const auto result = reflection_pass(backend, registry, aspect, instances, 1);
        for (const auto& outcome : result.pairs[0]) {
            CHECK_FALSE(outcome.initial_score.has_value());
            CHECK(stage2_reward({outcome.initial_score, outcome.final_score, 1.0}, rubric) ==
                  1.0);
        }
    }
}

TEST_CASE("overall accuracy is the instance-weighted micro-average") {
    DatasetManifest manifest;
    manifest.rows = {{"demo", "a", 0, 100}, {"demo", "b", 0, 100}, {"demo", "c", 0, 300}};

    SUBCASE("equal weights") {
        const std::vector<AspectEval> results{eval_with_counts("a", 100, {60}),
                                              eval_with_counts("b", 100, {80})};
        const auto overall = overall_accuracy(results, manifest);
        CHECK(overall.per_repeat[0] == doctest::Approx(0.7).epsilon(1e-12));
    }
    SUBCASE("size-weighted") {
        const std::vector<AspectEval> results{eval_with_counts("c", 300, {270}),
                                              eval_with_counts("b", 100, {50})};
        const auto overall = overall_accuracy(results, manifest);
        CHECK(overall.per_repeat[0] == doctest::Approx(0.8).epsilon(1e-12));
    }
    SUBCASE("single aspect is the identity") {
        const std::vector<AspectEval> results{eval_with_counts("a", 100, {71, 71})};
        const auto overall = overall_accuracy(results, manifest);
        CHECK(overall.mean == doctest::Approx(0.71).epsilon(1e-12));
        CHECK(overall.stddev == 0.0);
    }
    SUBCASE("micro-average lies between the per-aspect extremes") {
        const std::vector<AspectEval> results{eval_with_counts("a", 100, {60}),
                                              eval_with_counts("c", 300, {240})};
        const auto overall = overall_accuracy(results, manifest);
        CHECK(overall.per_repeat[0] >= 0.6);
        CHECK(overall.per_repeat[0] <= 0.8);
    }
    SUBCASE("missing manifest row is an error") {
        const std::vector<AspectEval> results{eval_with_counts("unknown", 10, {5})};
        CHECK_THROWS_AS(overall_accuracy(results, manifest), std::invalid_argument);
    }
}

TEST_CASE("http backend speaks the chat-completions wire format and retries") {
    httplib::Server server;
    std::atomic<int> calls{0};
    json seen_body;
    std::string seen_auth;

    server.Post("/v1/chat/completions",
                [&](const httplib::Request& request, httplib::Response& response) {
                    const int call = ++calls;
                    if (call == 1) {
                        response.status = 503;  // transient, must be retried
                        return;
                    }
                    seen_body = json::parse(request.body);
                    seen_auth = request.get_header_value("Authorization");
                    const json reply = {
                        {"choices",
                         json::array({{{"message",
                                        {{"role", "assistant"},
                                         {"content",
                                          "<reasoning>served</reasoning><score>1</score>"}}}}})},
                        {"usage", {{"prompt_tokens", 50}, {"completion_tokens", 42}}},
                    };
                    response.set_content(reply.dump(), "application/json");
                });

    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&server] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("JUDGEKIT_TEST_KEY", "secret-token", 1);
    BackendSpec spec;
    spec.kind = BackendSpec::Kind::HttpChat;
    spec.endpoint = "http://127.0.0.1:" + std::to_string(port);
    spec.model = "demo-model";
    spec.api_key_env = "JUDGEKIT_TEST_KEY";
    spec.sampling = SamplingParams{1.0, 0.95, 512};
    spec.max_retries = 2;
    spec.timeout_seconds = 5.0;
    spec.backoff_cap_seconds = 0.5;

    const HttpChatBackend backend(spec);
    const PromptBundle bundle{"p-1", "system text", "user text"};
    const ModelOutput output = backend.complete(bundle, 0);

    CHECK(output.raw_text == "<reasoning>served</reasoning><score>1</score>");
    CHECK(output.token_count == 42);  // usage takes precedence over whitespace
    CHECK(output.token_source == TokenCountSource::BackendReported);
    CHECK(calls.load() == 2);

    CHECK(seen_body.at("model") == "demo-model");
    CHECK(seen_body.at("temperature") == doctest::Approx(1.0));
    CHECK(seen_body.at("top_p") == doctest::Approx(0.95));
    CHECK(seen_body.at("max_tokens") == 512);
    REQUIRE(seen_body.at("messages").size() == 2);
    CHECK(seen_body["messages"][0]["role"] == "system");
    CHECK(seen_body["messages"][0]["content"] == "system text");
    CHECK(seen_body["messages"][1]["role"] == "user");
    CHECK(seen_body["messages"][1]["content"] == "user text");
    CHECK(seen_auth == "Bearer secret-token");

    server.stop();
    server_thread.join();
}

TEST_CASE("http backend surfaces non-transient failures without retrying") {
    httplib::Server server;
    std::atomic<int> calls{0};
    server.Post("/v1/chat/completions",
                [&](const httplib::Request&, httplib::Response& response) {
                    ++calls;
                    response.status = 401;
                });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&server] { server.listen_after_bind(); });
    server.wait_until_ready();

    BackendSpec spec;
    spec.kind = BackendSpec::Kind::HttpChat;
    spec.endpoint = "http://127.0.0.1:" + std::to_string(port);
    spec.model = "demo-model";
    spec.max_retries = 3;
    spec.timeout_seconds = 5.0;
    spec.backoff_cap_seconds = 0.1;
    spec.sampling = SamplingParams{1.0, 0.95, 64};

    const HttpChatBackend backend(spec);
    CHECK_THROWS_AS(backend.complete({"p", "s", "u"}, 0), std::runtime_error);
    CHECK(calls.load() == 1);

    server.stop();
    server_thread.join();
}

TEST_CASE("transport failure to an unreachable endpoint errors after retries") {
    BackendSpec spec;
    spec.kind = BackendSpec::Kind::HttpChat;
    spec.endpoint = "http://127.0.0.1:1";  // nothing listens here
    spec.model = "demo-model";
    spec.max_retries = 1;
    spec.timeout_seconds = 0.2;
    spec.backoff_cap_seconds = 0.05;
    spec.sampling = SamplingParams{1.0, 0.95, 64};

    const HttpChatBackend backend(spec);
    CHECK_THROWS_WITH_AS(backend.complete({"p", "s", "u"}, 0),
                         doctest::Contains("after 2 attempts"), std::runtime_error);
}
