#include "judgekit/backend.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "judgekit/util.hpp"

namespace judgekit {

using nlohmann::json;

void SamplingParams::validate() const {
    if (temperature < 0.0) {
        throw std::invalid_argument("sampling: temperature must be >= 0");
    }
    if (!(top_p > 0.0 && top_p <= 1.0)) {
        throw std::invalid_argument("sampling: top_p must be in (0, 1]");
    }
    if (max_tokens < 1) {
        throw std::invalid_argument("sampling: max_tokens must be >= 1");
    }
}

void BackendSpec::validate() const {
    sampling.validate();
    if (repeats < 1) throw std::invalid_argument("backend: repeats must be >= 1");
    if (max_retries < 0) throw std::invalid_argument("backend: max_retries must be >= 0");
    if (timeout_seconds <= 0.0 || backoff_cap_seconds <= 0.0) {
        throw std::invalid_argument("backend: timeouts must be positive");
    }
    if (max_concurrency < 1) {
        throw std::invalid_argument("backend: max_concurrency must be >= 1");
    }
    if (kind == Kind::HttpChat && endpoint.empty()) {
        throw std::invalid_argument("backend: http-chat requires an endpoint");
    }
    if (kind == Kind::Scripted && script_path.empty()) {
        throw std::invalid_argument("backend: scripted requires a script_path");
    }
}

BackendSpec backend_spec_from_file(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw std::runtime_error("backend config " + path.string() + ": " + e.what());
    }

    BackendSpec spec;
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "http-chat") {
        spec.kind = BackendSpec::Kind::HttpChat;
    } else if (kind == "scripted") {
        spec.kind = BackendSpec::Kind::Scripted;
    } else {
        throw std::runtime_error("backend config: unknown kind '" + kind + "'");
    }
    spec.endpoint = doc.value("endpoint", "");
    spec.model = doc.value("model", "");
    spec.api_key_env = doc.value("api_key_env", spec.api_key_env);
    if (doc.contains("sampling")) {
        const json& sampling = doc["sampling"];
        spec.sampling.temperature = sampling.value("temperature", spec.sampling.temperature);
        spec.sampling.top_p = sampling.value("top_p", spec.sampling.top_p);
        spec.sampling.max_tokens = sampling.value("max_tokens", spec.sampling.max_tokens);
    }
    spec.repeats = doc.value("repeats", spec.repeats);
    spec.timeout_seconds = doc.value("timeout_seconds", spec.timeout_seconds);
    spec.max_retries = doc.value("max_retries", spec.max_retries);
    spec.backoff_cap_seconds = doc.value("backoff_cap_seconds", spec.backoff_cap_seconds);
    spec.max_concurrency = doc.value("max_concurrency", spec.max_concurrency);
    if (doc.contains("script_path")) {
        std::filesystem::path script = doc["script_path"].get<std::string>();
        if (script.is_relative()) script = path.parent_path() / script;
        spec.script_path = script;
    }
    spec.validate();
    return spec;
}

ScriptedBackend::ScriptedBackend(std::map<std::string, std::vector<Entry>> responses,
                                 std::optional<Entry> fallback, SamplingParams sampling)
    : responses_(std::move(responses)),
      fallback_(std::move(fallback)),
      sampling_(sampling) {}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path,
                                           SamplingParams sampling) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw std::runtime_error("backend script " + path.string() + ": " + e.what());
    }

    std::map<std::string, std::vector<Entry>> responses;
    for (const auto& [prompt_id, node] : doc.at("responses").items()) {
        std::vector<Entry> entries;
        if (node.is_string()) {
            entries.push_back(Entry{node.get<std::string>(), std::nullopt});
        } else {
            for (const json& item : node) {
                Entry entry;
                if (item.is_string()) {
                    entry.text = item.get<std::string>();
                } else {
                    entry.text = item.at("text").get<std::string>();
                    if (item.contains("token_count")) {
                        entry.token_count = item["token_count"].get<long>();
                    }
                }
                entries.push_back(std::move(entry));
            }
        }
        responses.emplace(prompt_id, std::move(entries));
    }
    std::optional<Entry> fallback;
    if (doc.contains("default_response")) {
        fallback = Entry{doc["default_response"].get<std::string>(), std::nullopt};
    }
    return ScriptedBackend(std::move(responses), std::move(fallback), sampling);
}

ModelOutput ScriptedBackend::complete(const PromptBundle& prompt, int pass_index) const {
    const auto it = responses_.find(prompt.id);
    if (it != responses_.end()) {
        const std::vector<Entry>& entries = it->second;
        if (pass_index >= 0 && static_cast<std::size_t>(pass_index) < entries.size()) {
            const Entry& entry = entries[static_cast<std::size_t>(pass_index)];
            return make_output(entry.text, entry.token_count);
        }
    }
    if (fallback_) {
        return make_output(fallback_->text, fallback_->token_count);
    }
    throw std::out_of_range("scripted backend has no response for prompt '" + prompt.id +
                            "' pass " + std::to_string(pass_index));
}

namespace {

/// Splits "http://host:port/base" into client root and path prefix.
void split_endpoint(const std::string& endpoint, std::string& host, std::string& path) {
    const std::size_t scheme = endpoint.find("://");
    const std::size_t host_begin = scheme == std::string::npos ? 0 : scheme + 3;
    const std::size_t slash = endpoint.find('/', host_begin);
    if (slash == std::string::npos) {
        host = endpoint;
        path.clear();
    } else {
        host = endpoint.substr(0, slash);
        path = endpoint.substr(slash);
        while (!path.empty() && path.back() == '/') path.pop_back();
    }
}

bool transient_status(int status) {
    return status == 408 || status == 429 || status >= 500;
}

}  // namespace

HttpChatBackend::HttpChatBackend(BackendSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    split_endpoint(spec_.endpoint, host_, base_path_);
    if (const char* key = std::getenv(spec_.api_key_env.c_str())) {
        api_key_ = key;
    }
}

ModelOutput HttpChatBackend::complete(const PromptBundle& prompt, int /*pass_index*/) const {
    json body;
    body["model"] = spec_.model;
    body["messages"] = json::array({{{"role", "system"}, {"content", prompt.system_text}},
                                    {{"role", "user"}, {"content", prompt.user_text}}});
    body["temperature"] = spec_.sampling.temperature;
    body["top_p"] = spec_.sampling.top_p;
    body["max_tokens"] = spec_.sampling.max_tokens;
    const std::string payload = body.dump();

    httplib::Headers headers = {{"Content-Type", "application/json"}};
    if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }

    std::string last_error;
    for (int attempt = 0; attempt <= spec_.max_retries; ++attempt) {
        if (attempt > 0) {
            const double backoff = std::min(spec_.backoff_cap_seconds,
                                            0.5 * std::pow(2.0, attempt - 1));
            std::this_thread::sleep_for(std::chrono::milliseconds(
                static_cast<long>(backoff * 1000.0)));
        }

        httplib::Client client(host_);
        client.set_connection_timeout(std::chrono::milliseconds(
            static_cast<long>(spec_.timeout_seconds * 1000.0)));
        client.set_read_timeout(std::chrono::milliseconds(
            static_cast<long>(spec_.timeout_seconds * 1000.0)));

        auto result = client.Post(base_path_ + "/v1/chat/completions", headers, payload,
                                  "application/json");
        if (!result) {
            last_error = "transport error: " + httplib::to_string(result.error());
            continue;
        }
        if (result->status != 200) {
            last_error = "http status " + std::to_string(result->status);
            if (transient_status(result->status)) continue;
            throw std::runtime_error("chat completion failed (" + last_error + ")");
        }

        try {
            const json response = json::parse(result->body);
            const std::string content =
                response.at("choices").at(0).at("message").at("content").get<std::string>();
            std::optional<long> completion_tokens;
            if (response.contains("usage") &&
                response["usage"].contains("completion_tokens")) {
                completion_tokens = response["usage"]["completion_tokens"].get<long>();
            }
            return make_output(content, completion_tokens);
        } catch (const json::exception& e) {
            throw std::runtime_error(std::string("malformed chat completion response: ") +
                                     e.what());
        }
    }
    throw std::runtime_error("chat completion failed after " +
                             std::to_string(spec_.max_retries + 1) + " attempts (" +
                             last_error + ")");
}

std::unique_ptr<CompletionBackend> make_backend(const BackendSpec& spec) {
    spec.validate();
    if (spec.kind == BackendSpec::Kind::Scripted) {
        return std::make_unique<ScriptedBackend>(
            ScriptedBackend::from_file(spec.script_path, spec.sampling));
    }
    return std::make_unique<HttpChatBackend>(spec);
}

}  // namespace judgekit
