#include "tbg/backend.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <mutex>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

using nlohmann::json;

namespace tbg {

void BackendConfig::validate() const {
    if (backend_id.empty()) throw std::invalid_argument("BackendConfig: backend_id required");
    if (base_url.empty()) throw std::invalid_argument("BackendConfig: base_url required");
    if (max_tokens < 1) throw std::invalid_argument("BackendConfig: max_tokens must be >= 1");
    if (max_concurrency < 1) throw std::invalid_argument("BackendConfig: max_concurrency must be >= 1");
    if (temperature < 0.0) throw std::invalid_argument("BackendConfig: negative temperature");
    if (max_retries < 0) throw std::invalid_argument("BackendConfig: negative max_retries");
}

std::string utc_timestamp_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// "http://host:port/v1" -> ("http://host:port", "/v1")
static std::pair<std::string, std::string> split_base_url(const std::string& url) {
    auto scheme_end = url.find("://");
    size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_start), prefix};
}

static double backoff_delay_s(const BackendConfig& cfg, int attempt, std::mt19937_64& jitter_rng) {
    double base = cfg.backoff_base_s * std::pow(2.0, attempt);
    double jitter = (jitter_rng() >> 11) * 0x1.0p-53;  // [0,1)
    return std::min(base * (0.5 + 0.5 * jitter), cfg.backoff_cap_s);
}

GenerationRecord complete(const BackendConfig& cfg, const Prompt& prompt, int run_index) {
    cfg.validate();
    std::string api_key;
    if (!cfg.api_key_env.empty()) {
        const char* key = std::getenv(cfg.api_key_env.c_str());
        if (!key || !*key)
            throw std::runtime_error("complete: API key environment variable '" + cfg.api_key_env + "' not set");
        api_key = key;
    }

    auto [host, prefix] = split_base_url(cfg.base_url);
    httplib::Client client(host);
    client.set_connection_timeout(std::chrono::milliseconds(static_cast<int>(cfg.request_timeout_s * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(static_cast<int>(cfg.request_timeout_s * 1000)));

    json body;
    body["model"] = cfg.model_name;
    body["messages"] = json::array({{{"role", "user"}, {"content", prompt.text}}});
    body["temperature"] = cfg.temperature;
    body["max_tokens"] = cfg.max_tokens;
    if (cfg.logprobs_requested) {
        body["logprobs"] = true;
        body["top_logprobs"] = cfg.top_logprobs;
    }
    std::string payload = body.dump();

    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

    std::mt19937_64 jitter_rng(std::random_device{}());
    int last_status = 0;
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0) {
            auto delay = backoff_delay_s(cfg, attempt - 1, jitter_rng);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        auto res = client.Post(prefix + "/chat/completions", headers, payload, "application/json");
        if (!res) {
            last_status = 0;
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        last_status = res->status;
        if (res->status == 401 || res->status == 403)
            throw BackendError("complete: authentication failed (" + std::to_string(res->status) + ")", res->status);
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw BackendError("complete: unexpected HTTP " + std::to_string(res->status), res->status);

        json reply = json::parse(res->body);
        const auto& choice = reply.at("choices").at(0);
        GenerationRecord rec;
        rec.prompt_id = prompt.id;
        rec.run_index = run_index;
        rec.backend_id = cfg.backend_id;
        rec.temperature = cfg.temperature;
        rec.text = choice.at("message").at("content").get<std::string>();
        if (cfg.logprobs_requested && choice.contains("logprobs") && !choice.at("logprobs").is_null()) {
            std::vector<std::vector<std::pair<std::string, double>>> tops;
            for (const auto& pos : choice.at("logprobs").at("content")) {
                std::vector<std::pair<std::string, double>> pv;
                if (pos.contains("top_logprobs")) {
                    for (const auto& tl : pos.at("top_logprobs"))
                        pv.emplace_back(tl.at("token").get<std::string>(), tl.at("logprob").get<double>());
                }
                tops.push_back(std::move(pv));
            }
            rec.token_logprob_tops = std::move(tops);
        }
        rec.timestamp = utc_timestamp_now();
        rec.environment_id = cfg.environment_id.empty() ? cfg.backend_id : cfg.environment_id;
        return rec;
    }
    throw BackendError("complete: retries exhausted for prompt '" + prompt.id + "' (" + last_error + ")", last_status);
}

SliceSummary run_campaign_slice(const BackendConfig& cfg, const PromptSet& prompts, int runs_per_prompt,
                                RunStore& store) {
    cfg.validate();
    if (runs_per_prompt < 1) throw std::invalid_argument("run_campaign_slice: runs_per_prompt must be >= 1");

    struct WorkItem {
        const Prompt* prompt;
        int run_index;
    };
    SliceSummary summary;
    std::vector<WorkItem> work;
    for (const auto& prompt : prompts.prompts) {
        for (int run = 0; run < runs_per_prompt; ++run) {
            if (store.contains(cfg.backend_id, cfg.temperature, prompt.id, run))
                ++summary.skipped_existing;
            else
                work.push_back({&prompt, run});
        }
    }

    std::atomic<size_t> next{0};
    std::mutex result_mutex;
    auto worker = [&] {
        for (;;) {
            size_t idx = next.fetch_add(1);
            if (idx >= work.size()) break;
            const WorkItem& item = work[idx];
            try {
                GenerationRecord rec = complete(cfg, *item.prompt, item.run_index);
                std::lock_guard<std::mutex> lock(result_mutex);
                store.append(rec);
                ++summary.new_records;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(result_mutex);
                summary.failures.push_back(item.prompt->id + "/" + std::to_string(item.run_index) + ": " + e.what());
            }
        }
    };

    size_t threads = std::min<size_t>(static_cast<size_t>(cfg.max_concurrency), work.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return summary;
}

}  // namespace tbg
