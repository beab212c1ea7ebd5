#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tbg/campaign.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string store_dir;
    std::optional<uint64_t> seed;
    std::optional<size_t> only_prompts;
    std::string metric;
    std::string distance;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool require_config = true) {
    auto* c = cmd->add_option("--config", opts.config_path, "Campaign config JSON");
    if (require_config) c->required();
    cmd->add_option("--store", opts.store_dir, "Run store directory (overrides config)");
    cmd->add_option("--seed", opts.seed, "Campaign seed (overrides config)");
    cmd->add_option("--only-prompts", opts.only_prompts, "Use only the first N prompts");
    cmd->add_option("--metric", opts.metric, "Lead metric kind (overrides config)");
    cmd->add_option("--distance", opts.distance, "Distance kind: ks | js | kl (overrides config)");
}

tbg::CampaignConfig resolve_config(const CommonOpts& opts) {
    tbg::CampaignConfig cfg = tbg::load_config(opts.config_path);
    if (!opts.store_dir.empty()) cfg.store_root = opts.store_dir;
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.only_prompts) cfg.only_prompts = *opts.only_prompts;
    if (!opts.metric.empty()) cfg.metrics = {{tbg::metric_from_name(opts.metric), 1.0}};
    if (!opts.distance.empty()) cfg.distance.kind = tbg::distance_from_name(opts.distance);
    return cfg;
}

void print_summary(const char* what, const tbg::RunSummary& s) {
    std::printf("%s: %zu new records, %zu already present, %zu failures\n", what, s.new_records, s.skipped_existing,
                s.failures.size());
    for (const auto& f : s.failures) std::fprintf(stderr, "  failure: %s\n", f.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Background-temperature measurement harness"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string out_dir = "out";
    uint64_t selftest_seed = 42;
    size_t heatmap_a = 0, heatmap_b = 1;

    auto* run_ref = app.add_subcommand("run-reference", "Run K reference completions per (prompt, T) into the store");
    add_common(run_ref, opts);

    auto* run_sut_cmd = app.add_subcommand("run-sut", "Run M SUT completions per prompt at nominal T=0");
    add_common(run_sut_cmd, opts);

    auto* metrics_cmd = app.add_subcommand("metrics", "Export per-slice variability distributions as CSV");
    add_common(metrics_cmd, opts);
    metrics_cmd->add_option("--out", out_dir, "Output directory");

    auto* estimate_cmd = app.add_subcommand("estimate", "Fit equivalent temperatures and emit the report bundle");
    add_common(estimate_cmd, opts);
    estimate_cmd->add_option("--out", out_dir, "Output directory");

    auto* heatmap_cmd = app.add_subcommand("heatmap", "Cross-reference distance matrix between two references");
    add_common(heatmap_cmd, opts);
    heatmap_cmd->add_option("--out", out_dir, "Output directory");
    heatmap_cmd->add_option("--ref-a", heatmap_a, "First reference index");
    heatmap_cmd->add_option("--ref-b", heatmap_b, "Second reference index");

    auto* selftest_cmd = app.add_subcommand("selftest", "Offline end-to-end validation with known ground truth");
    selftest_cmd->add_option("--seed", selftest_seed, "Selftest seed");
    selftest_cmd->add_option("--out", out_dir, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (selftest_cmd->parsed()) {
            auto result = tbg::run_selftest(selftest_seed, out_dir);
            return result.passed ? 0 : 1;
        }
        tbg::CampaignConfig cfg = resolve_config(opts);
        tbg::RunStore store(cfg.store_root);
        if (run_ref->parsed()) {
            print_summary("run-reference", tbg::run_reference(cfg, store));
        } else if (run_sut_cmd->parsed()) {
            print_summary("run-sut", tbg::run_sut(cfg, store));
        } else if (metrics_cmd->parsed()) {
            tbg::export_metrics(cfg, store, out_dir);
            std::printf("metrics written to %s\n", out_dir.c_str());
        } else if (estimate_cmd->parsed()) {
            tbg::estimate_campaign(cfg, store, out_dir);
        } else if (heatmap_cmd->parsed()) {
            auto m = tbg::heatmap_campaign(cfg, store, heatmap_a, heatmap_b);
            std::filesystem::create_directories(out_dir);
            tbg::write_heatmap_csv(m, std::filesystem::path(out_dir) / "heatmap.csv");
            std::printf("heatmap written to %s/heatmap.csv\n", out_dir.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
