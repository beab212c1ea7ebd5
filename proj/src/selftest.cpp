#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "tbg/campaign.hpp"

using nlohmann::json;

namespace tbg {

namespace {

constexpr int kSelftestPrompts = 100;
constexpr int kSelftestRuns = 32;
constexpr int kSelftestMaxTokens = 10;
constexpr int kTrials = 20;

CampaignConfig selftest_config(uint64_t seed, const std::filesystem::path& out_dir) {
    CampaignConfig cfg;
    cfg.only_prompts = kSelftestPrompts;
    cfg.runs_reference = kSelftestRuns;
    cfg.runs_sut = kSelftestRuns;
    cfg.max_tokens = kSelftestMaxTokens;
    cfg.seed = seed;
    cfg.store_root = (out_dir / "store").string();

    BackendSpec ref;
    ref.kind = BackendSpec::Kind::synthetic;
    ref.synthetic.id = "ref-a";
    ref.synthetic.model_seed = splitmix64(seed ^ 0x452821e638d01377ULL);
    cfg.references.push_back(ref);

    // zero-noise SUT: the same model, greedy, unperturbed
    cfg.sut = ref;
    cfg.sut.synthetic.id = "sut-zero";
    return cfg;
}

// one grid step at t, taken as the larger gap to a neighbor
double grid_step_at(const TemperatureGrid& grid, double t) {
    double step = 0.0;
    for (size_t i = 0; i < grid.temperatures.size(); ++i) {
        if (std::abs(grid.temperatures[i] - t) < 1e-12) {
            if (i > 0) step = std::max(step, grid.temperatures[i] - grid.temperatures[i - 1]);
            if (i + 1 < grid.temperatures.size()) step = std::max(step, grid.temperatures[i + 1] - grid.temperatures[i]);
            return step;
        }
    }
    throw std::invalid_argument("grid_step_at: temperature not on grid");
}

}  // namespace

SelftestResult run_selftest(uint64_t seed, const std::filesystem::path& out_dir, bool quiet) {
    SelftestResult result;
    result.passed = true;
    auto record = [&](bool ok, const std::string& text) {
        result.passed = result.passed && ok;
        std::string line = std::string(ok ? "[PASS] " : "[FAIL] ") + text;
        if (!quiet) std::printf("%s\n", line.c_str());
        result.lines.push_back(std::move(line));
    };

    std::filesystem::create_directories(out_dir);
    CampaignConfig cfg = selftest_config(seed, out_dir);
    RunStore store(cfg.store_root);
    run_reference(cfg, store);
    run_sut(cfg, store);

    json report;
    report["seed"] = seed;

    // (a) zero-noise identity: Dirac-at-1 exact-match and T_bg exactly 0
    ReportBundle est = estimate_campaign(cfg, store, out_dir / "estimate", /*quiet=*/true);
    bool dirac_note = false;
    for (const auto& note : est.notes) dirac_note = dirac_note || note.find("Dirac at 1") != std::string::npos;
    record(est.report.overall == 0.0 && dirac_note,
           "zero-noise identity: T_bg = " + std::to_string(est.report.overall) + (dirac_note ? " (Dirac at 1)" : ""));
    report["zero_noise_t_bg"] = est.report.overall;

    PromptSet prompts = campaign_prompts(cfg);
    SyntheticLM model = cfg.references.front().synthetic.model();
    const MetricKind metric = MetricKind::exact_match_fraction;
    auto curves = reference_curves(cfg, store, cfg.references.front(), metric, prompts);
    PerturbationModel none;

    // (b) estimator self-consistency at known true temperatures
    report["self_consistency"] = json::array();
    for (double t_star : {0.05, 0.1, 0.3}) {
        double step = grid_step_at(cfg.grid, t_star);
        int hits = 0;
        json trials = json::array();
        for (int trial = 0; trial < kTrials; ++trial) {
            uint64_t trial_seed = splitmix64(seed ^ 0x9216d5d98979fb1bULL ^
                                            (static_cast<uint64_t>(trial) * 1000 + static_cast<uint64_t>(t_star * 100)));
            VariabilityDistribution g = synth_distribution(model, prompts, Temperature{t_star}, none, kSelftestRuns,
                                                           kSelftestMaxTokens, metric, trial_seed, "sut-trial", 0.0);
            auto fit = fit_equivalent_temperature(curves, g, cfg.distance, "ref-a");
            bool hit = std::abs(fit.t_hat - t_star) <= step + 1e-9;
            hits += hit ? 1 : 0;
            trials.push_back(fit.t_hat);
        }
        bool ok = hits >= static_cast<int>(0.9 * kTrials);
        char buf[128];
        std::snprintf(buf, sizeof(buf), "self-consistency T*=%.2f: %d/%d within one grid step", t_star, hits, kTrials);
        record(ok, buf);
        report["self_consistency"].push_back({{"t_star", t_star}, {"hits", hits}, {"t_hats", trials}});
    }

    // (c) noise monotonicity: gaussian sigma 0 < 0.5 < 2.0 at nominal T=0
    {
        const double sigmas[] = {0.0, 0.5, 2.0};
        int mono = 0;
        json trials = json::array();
        for (int trial = 0; trial < kTrials; ++trial) {
            std::vector<double> t_hats;
            for (double sigma : sigmas) {
                PerturbationModel eps;
                if (sigma > 0.0) {
                    eps.kind = PerturbationKind::gaussian_logit_noise;
                    eps.sigma = sigma;
                }
                uint64_t trial_seed = splitmix64(seed ^ 0xb8e1afed6a267e96ULL ^
                                                 (static_cast<uint64_t>(trial) * 131 +
                                                  static_cast<uint64_t>(sigma * 10)));
                VariabilityDistribution g = synth_distribution(model, prompts, Temperature{0.0}, eps, kSelftestRuns,
                                                               kSelftestMaxTokens, metric, trial_seed, "sut-noise", 0.0);
                auto fit = fit_equivalent_temperature(curves, g, cfg.distance, "ref-a");
                t_hats.push_back(fit.t_hat);
            }
            bool ok = t_hats[0] == 0.0 && t_hats[0] <= t_hats[1] + 1e-12 && t_hats[1] <= t_hats[2] + 1e-12;
            mono += ok ? 1 : 0;
            trials.push_back(t_hats);
        }
        bool ok = mono >= static_cast<int>(0.9 * kTrials);
        char buf[128];
        std::snprintf(buf, sizeof(buf), "noise monotonicity: %d/%d trials non-decreasing with t_hat(0)=0", mono,
                      kTrials);
        record(ok, buf);
        report["noise_monotonicity"] = trials;
    }

    report["lines"] = result.lines;
    report["passed"] = result.passed;
    std::ofstream out(out_dir / "selftest_report.json");
    out << report.dump(2) << '\n';
    return result;
}

}  // namespace tbg
