#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace ambivis {

struct chat_message {
    std::string role;
    std::string content;
};

// Minimal chat interface every backend implements. Implementations must be
// safe to call from multiple worker threads.
class llm_client {
  public:
    virtual ~llm_client() = default;
    virtual std::string chat(const std::vector<chat_message>& messages) = 0;
    virtual std::string name() const = 0;
};

struct llm_options {
    std::string base_url = "http://127.0.0.1:8080/v1";
    std::string model = "default";
    std::string api_key_env = "AMBIVIS_API_KEY";  // secrets only through the environment
    double temperature = 0.0;
    int timeout_ms = 30000;
    int max_retries = 3;
    int retry_backoff_ms = 250;
    int max_concurrency = 4;
};

// OpenAI-style chat-completions client. Retries connection failures, 429 and
// 5xx responses with exponential backoff, honoring Retry-After when present.
class http_llm_client : public llm_client {
  public:
    explicit http_llm_client(llm_options opts,
                             std::function<void(int)> sleeper = {});
    ~http_llm_client() override;
    std::string chat(const std::vector<chat_message>& messages) override;
    std::string name() const override { return "http"; }

  private:
    struct impl;
    std::unique_ptr<impl> impl_;
};

// Deterministic offline backend. Recognizes the pipeline's prompt shapes and
// fabricates well-formed responses: a style-templated query with a reference
// tree for generator prompts, a full-coverage accept for verifier prompts.
class null_llm_client : public llm_client {
  public:
    std::string chat(const std::vector<chat_message>& messages) override;
    std::string name() const override { return "null"; }
};

// Serves recorded responses keyed by a digest of the request messages;
// raises backend_error on a miss.
class replay_llm_client : public llm_client {
  public:
    explicit replay_llm_client(const std::string& fixture_path);
    std::string chat(const std::vector<chat_message>& messages) override;
    std::string name() const override { return "replay"; }

  private:
    std::map<std::string, std::string> responses_;
};

// Passes through to an inner backend and appends every exchange to a replay
// fixture (first response per digest wins).
class recording_llm_client : public llm_client {
  public:
    recording_llm_client(std::shared_ptr<llm_client> inner, std::string fixture_path);
    std::string chat(const std::vector<chat_message>& messages) override;
    std::string name() const override { return "record(" + inner_->name() + ")"; }

  private:
    std::shared_ptr<llm_client> inner_;
    std::string path_;
    std::mutex mu_;
    std::map<std::string, std::string> seen_;
};

// Stable digest of a message list (FNV-1a 64, hex).
std::string message_digest(const std::vector<chat_message>& messages);

}  // namespace ambivis
