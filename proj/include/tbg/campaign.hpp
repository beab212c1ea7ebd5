#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tbg/backend.hpp"
#include "tbg/estimation.hpp"
#include "tbg/metrics.hpp"
#include "tbg/store.hpp"
#include "tbg/synthetic.hpp"

namespace tbg {

struct SyntheticBackendSpec {
    std::string id;
    int vocab_size = 32;
    uint64_t model_seed = 1;
    GapProfile gap_profile;
    int context_window = 64;
    PerturbationModel perturbation;
    // Hidden ground-truth sampling temperature used when this backend plays
    // the system under test; records still carry the nominal temperature.
    double true_temperature = 0.0;
    int top_k_logprobs = 0;

    SyntheticLM model() const;
};

struct BackendSpec {
    enum class Kind { synthetic, remote };
    Kind kind = Kind::synthetic;
    SyntheticBackendSpec synthetic;
    BackendConfig remote;

    const std::string& id() const { return kind == Kind::synthetic ? synthetic.id : remote.backend_id; }
};

struct CampaignConfig {
    std::string prompt_path;
    PromptFormat prompt_format = PromptFormat::jsonl;
    std::optional<size_t> only_prompts;  // prefix truncation
    TemperatureGrid grid = TemperatureGrid::standard();
    int runs_reference = 32;  // K
    int runs_sut = 100;       // M
    int max_tokens = 32;
    std::vector<BackendSpec> references;
    BackendSpec sut;
    std::vector<std::pair<MetricKind, double>> metrics = {{MetricKind::exact_match_fraction, 1.0}};
    DistanceSpec distance;
    std::string store_root = "store";
    uint64_t seed = 0;
    bool normalize_trailing_whitespace = false;

    void validate() const;
};

CampaignConfig config_from_json(const nlohmann::json& j);
CampaignConfig load_config(const std::filesystem::path& path);
// Effective config with all defaults resolved; embedded in every report.
nlohmann::json config_to_json(const CampaignConfig& cfg);

PromptSet campaign_prompts(const CampaignConfig& cfg);
// In-memory prompt set for offline validation (ids p000, p001, ...).
PromptSet synthetic_prompt_set(size_t n);

struct RunSummary {
    size_t new_records = 0;
    size_t skipped_existing = 0;
    std::vector<std::string> failures;
};

// K completions per (prompt, T in grid) for every reference backend.
RunSummary run_reference(const CampaignConfig& cfg, RunStore& store);
// M completions per prompt for the SUT at nominal T = 0.
RunSummary run_sut(const CampaignConfig& cfg, RunStore& store);

// Deterministic per-run seed stream; shared by the store-backed and
// in-memory paths so both produce identical generations.
uint64_t run_stream_seed(uint64_t campaign_seed, const std::string& backend_id, double nominal_temperature,
                         const std::string& prompt_id, int run_index);

// Reference variability curves for one backend, one metric, from the store.
std::map<double, VariabilityDistribution> reference_curves(const CampaignConfig& cfg, const RunStore& store,
                                                           const BackendSpec& ref, MetricKind metric,
                                                           const PromptSet& prompts);

// One variability distribution computed directly from seeded generations
// (no store); used by the selftest trials.
VariabilityDistribution synth_distribution(const SyntheticLM& model, const PromptSet& prompts, Temperature actual,
                                           const PerturbationModel& eps, int runs, int max_tokens, MetricKind metric,
                                           uint64_t campaign_seed, const std::string& backend_id,
                                           double nominal_temperature);

struct ReportBundle {
    BackgroundTemperatureReport report;
    std::vector<std::string> notes;
    std::filesystem::path out_dir;
};

// Fits per-reference estimates from the store, writes all report and
// plot-data files under out_dir, and prints a summary table.
ReportBundle estimate_campaign(const CampaignConfig& cfg, const RunStore& store, const std::filesystem::path& out_dir,
                               bool quiet = false);

// Distance matrix between two reference backends' curve families.
DistanceMatrix heatmap_campaign(const CampaignConfig& cfg, const RunStore& store, size_t ref_a, size_t ref_b);
void write_heatmap_csv(const DistanceMatrix& m, const std::filesystem::path& path);

// Exports per-slice distribution CSV/JSON files for all configured metrics.
void export_metrics(const CampaignConfig& cfg, const RunStore& store, const std::filesystem::path& out_dir);

struct SelftestResult {
    bool passed = false;
    std::vector<std::string> lines;
};

// Offline end-to-end validation with known ground truth: zero-noise
// identity, estimator self-consistency at several true temperatures, and
// noise monotonicity. Fully deterministic for a fixed seed.
SelftestResult run_selftest(uint64_t seed, const std::filesystem::path& out_dir, bool quiet = false);

}  // namespace tbg
