#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tbg/store.hpp"

namespace tbg {

// OpenAI-style chat-completions backend. One request per run; the `n`
// parameter is never used, so each run samples the provider's environment
// independently.
struct BackendConfig {
    std::string backend_id;
    std::string base_url;  // e.g. http://host:port/v1
    std::string model_name;
    std::string api_key_env;  // environment variable holding the key; "" = no auth
    int max_tokens = 32;
    double temperature = 0.0;
    double request_timeout_s = 60.0;
    int max_retries = 3;
    int max_concurrency = 4;
    bool logprobs_requested = false;
    int top_logprobs = 5;
    double backoff_base_s = 1.0;  // exponential, with jitter
    double backoff_cap_s = 60.0;
    std::string environment_id;  // defaults to backend_id when empty

    void validate() const;
};

class BackendError : public std::runtime_error {
  public:
    BackendError(const std::string& msg, int http_status) : std::runtime_error(msg), http_status_(http_status) {}
    int http_status() const { return http_status_; }

  private:
    int http_status_ = 0;
};

// Single completion with retries. Authentication failures (401/403) fail
// fast; 429 and 5xx retry with exponential backoff up to max_retries.
GenerationRecord complete(const BackendConfig& cfg, const Prompt& prompt, int run_index);

struct SliceSummary {
    size_t new_records = 0;
    size_t skipped_existing = 0;
    std::vector<std::string> failures;  // "prompt_id/run_index: reason"
};

// Issues every (prompt, run_index) completion not already in the store, at
// most max_concurrency in flight. Partial failures are collected, not fatal.
SliceSummary run_campaign_slice(const BackendConfig& cfg, const PromptSet& prompts, int runs_per_prompt,
                                RunStore& store);

std::string utc_timestamp_now();

}  // namespace tbg
