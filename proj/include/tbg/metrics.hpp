#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tbg/store.hpp"

namespace tbg {

enum class MetricKind {
    exact_match_fraction,
    first_divergence_index,
    edit_distance_mean,
    edit_distance_std,
    js_divergence_next_token,
    mean_entropy,
};

std::string metric_name(MetricKind kind);
MetricKind metric_from_name(const std::string& name);

// Repeated generations for one prompt.
struct ResponseBundle {
    std::string prompt_id;
    std::vector<std::string> responses;
    // parallel to responses when token ids are known; empty otherwise
    std::vector<std::vector<int>> token_ids;
    // parallel to responses when log-probabilities are known; empty otherwise
    std::vector<std::vector<std::vector<std::pair<std::string, double>>>> logprob_tops;

    static ResponseBundle from_records(const std::vector<GenerationRecord>& records);
};

// Largest fraction of byte-identical responses; in [1/n, 1].
double exact_match_fraction(const ResponseBundle& b);

// Mean over unordered pairs of the 0-based first-mismatch index. Uses token
// ids when available, whitespace-split words otherwise. An identical pair
// contributes its (common) length.
double first_divergence_index(const ResponseBundle& b);

// Character-level Levenshtein over unordered pairs: (mean, population std).
std::pair<double, double> edit_distance_stats(const ResponseBundle& b);

// Position-averaged, pair-averaged Jensen-Shannon divergence (nats) between
// per-run top-k next-token distributions renormalized over the union support.
// nullopt when no log-probability data is available.
std::optional<double> js_divergence_next_token(const ResponseBundle& b, int top_k = 5);

// Mean per-position entropy (nats) of the renormalized top-k distributions,
// averaged over runs. nullopt without log-probability data.
std::optional<double> mean_entropy(const ResponseBundle& b, int top_k = 5);

// JS divergence between two explicit distributions over a shared support.
double js_divergence(const std::vector<double>& p, const std::vector<double>& q);

struct VariabilityDistribution {
    MetricKind metric = MetricKind::exact_match_fraction;
    std::vector<std::string> prompt_ids;  // parallel to values
    std::vector<double> values;
    std::string backend_id;
    double temperature = 0.0;
    std::string environment_id;
    std::vector<std::string> omitted_prompts;  // insufficient runs or missing data
};

struct DistributionOptions {
    bool normalize_trailing_whitespace = false;  // off by default: raw bytes compared
    int top_k = 5;
};

// One value per prompt with enough runs; prompts lacking runs (or logprob
// data, for the distributional metrics) are reported in omitted_prompts.
// Throws when the slice is empty or no prompt yields a value.
VariabilityDistribution build_distribution(MetricKind metric, const PromptSet& prompts, const RunStore& store,
                                           const std::string& backend_id, double temperature,
                                           const DistributionOptions& opts = {});

void write_distribution_csv(const VariabilityDistribution& dist, const std::filesystem::path& path);
std::string distribution_to_json(const VariabilityDistribution& dist);

// Natural range of a metric's values, when fixed: exact-match in [0,1],
// JS in [0, ln 2]; unbounded metrics return nullopt.
std::optional<std::pair<double, double>> metric_range(MetricKind kind);

}  // namespace tbg
