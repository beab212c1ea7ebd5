#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace tbg {

struct Prompt {
    std::string id;
    std::string text;
    std::string category = "general";  // general | task | edge_adversarial | synthetic
};

struct PromptSet {
    std::string id;
    std::vector<Prompt> prompts;

    size_t size() const { return prompts.size(); }
};

enum class PromptFormat { jsonl, csv };

// Throws on parse errors (naming the offending line) and on duplicate ids.
PromptSet load_prompts(const std::filesystem::path& path, PromptFormat format);

// First n prompts in stored order (n larger than the set is the whole set).
PromptSet truncate_prompts(const PromptSet& set, size_t n);

struct TemperatureGrid {
    std::vector<double> temperatures;

    void validate() const;  // nonempty, strictly increasing, nonnegative

    // 0.01 steps on [0, 0.2], 0.05 on (0.2, 0.5], 0.1 on (0.5, 1.0]
    static TemperatureGrid standard();
    // standard() extended by 1.05 .. 1.5 in 0.05 steps
    static TemperatureGrid extended();
};

// Canonical key used for store filenames and slice lookup, e.g. "0.0500".
std::string temperature_key(double t);

struct GenerationRecord {
    std::string prompt_id;
    int run_index = 0;
    std::string backend_id;
    double temperature = 0.0;
    std::string text;
    std::optional<std::vector<int>> token_ids;
    // per position, (token, ln p) pairs; token is a vocab string
    std::optional<std::vector<std::vector<std::pair<std::string, double>>>> token_logprob_tops;
    std::string timestamp;  // ISO-8601 UTC
    std::string environment_id;
};

std::string record_to_json_line(const GenerationRecord& rec);
GenerationRecord record_from_json_line(const std::string& line);

// Append-only store: one JSONL log per (backend_id, temperature), index
// rebuilt from the logs on open. Records are immutable; duplicate keys are
// rejected. Single writer, many readers.
class RunStore {
  public:
    explicit RunStore(std::filesystem::path root);

    // Durable (flushed) before return. Throws on key collision.
    void append(const GenerationRecord& rec);

    bool contains(const std::string& backend_id, double temperature, const std::string& prompt_id,
                  int run_index) const;

    // Sorted by (prompt_id, run_index).
    std::vector<GenerationRecord> query(const std::string& backend_id, double temperature,
                                        const std::optional<std::string>& prompt_id = std::nullopt) const;

    size_t size() const { return records_.size(); }
    const std::filesystem::path& root() const { return root_; }

  private:
    std::filesystem::path slice_path(const std::string& backend_id, double temperature) const;

    std::filesystem::path root_;
    std::vector<GenerationRecord> records_;
    std::map<std::tuple<std::string, std::string, std::string, int>, size_t> index_;
    mutable std::mutex write_mutex_;
};

}  // namespace tbg
