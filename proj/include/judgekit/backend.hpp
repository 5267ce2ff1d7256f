#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "judgekit/parse.hpp"
#include "judgekit/registry.hpp"

namespace judgekit {

struct SamplingParams {
    double temperature = 1.0;
    double top_p = 0.95;
    int max_tokens = 1024;

    void validate() const;  // throws std::invalid_argument
};

/// Configuration of a completion backend. `kind` selects the implementation;
/// the scripted backend replays canned responses keyed by prompt id and pass
/// index, the http backend speaks the OpenAI-compatible chat-completions wire
/// format.
struct BackendSpec {
    enum class Kind { HttpChat, Scripted };

    Kind kind = Kind::Scripted;
    std::string endpoint;                        // http-chat only
    std::string model;                           // http-chat only
    std::string api_key_env = "JUDGEKIT_API_KEY";  // credential env var name
    SamplingParams sampling;
    int repeats = 5;
    double timeout_seconds = 30.0;
    int max_retries = 3;
    double backoff_cap_seconds = 8.0;
    int max_concurrency = 4;
    std::filesystem::path script_path;           // scripted only

    void validate() const;
};

BackendSpec backend_spec_from_file(const std::filesystem::path& path);

/// A completion source. `pass_index` distinguishes the calls made for one
/// instance within a repeat: 0 for the evaluation prompt, 1 for the
/// reflection prompt. Implementations must be safe for concurrent calls.
class CompletionBackend {
  public:
    virtual ~CompletionBackend() = default;
    virtual ModelOutput complete(const PromptBundle& prompt, int pass_index) const = 0;
    virtual std::string id() const = 0;
    virtual const SamplingParams& sampling() const = 0;
};

/// Replays canned responses: per prompt id, one response per pass index, with
/// an optional fallback used for any prompt the script does not name.
/// Throws std::out_of_range when no response is defined for a prompt.
class ScriptedBackend final : public CompletionBackend {
  public:
    struct Entry {
        std::string text;
        std::optional<long> token_count;  // backend-reported count when set
    };

    ScriptedBackend(std::map<std::string, std::vector<Entry>> responses,
                    std::optional<Entry> fallback, SamplingParams sampling);

    static ScriptedBackend from_file(const std::filesystem::path& path,
                                     SamplingParams sampling);

    ModelOutput complete(const PromptBundle& prompt, int pass_index) const override;
    std::string id() const override { return "scripted"; }
    const SamplingParams& sampling() const override { return sampling_; }

  private:
    std::map<std::string, std::vector<Entry>> responses_;
    std::optional<Entry> fallback_;
    SamplingParams sampling_;
};

/// OpenAI-compatible chat-completions client. Sends the bundle's system and
/// user texts as messages with the configured sampling parameters, reads the
/// first choice's content and the reported completion-token usage, and
/// retries transient transport failures with capped exponential backoff.
class HttpChatBackend final : public CompletionBackend {
  public:
    explicit HttpChatBackend(BackendSpec spec);

    ModelOutput complete(const PromptBundle& prompt, int pass_index) const override;
    std::string id() const override { return "http-chat:" + spec_.model; }
    const SamplingParams& sampling() const override { return spec_.sampling; }

  private:
    BackendSpec spec_;
    std::string host_;
    std::string base_path_;
    std::string api_key_;
};

std::unique_ptr<CompletionBackend> make_backend(const BackendSpec& spec);

}  // namespace judgekit
