#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "tbg/campaign.hpp"

using nlohmann::json;

namespace tbg {

static std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

static std::string sanitize_name(const std::string& s) {
    std::string out;
    for (char c : s) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '.' ||
                  c == '_';
        out += ok ? c : '_';
    }
    return out;
}

static std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    return out;
}

struct Histogram {
    double lo = 0.0, hi = 1.0;
    std::vector<size_t> counts;
};

static Histogram make_histogram(const std::vector<double>& values, double lo, double hi, int bins) {
    Histogram h;
    h.lo = lo;
    h.hi = hi;
    h.counts.assign(static_cast<size_t>(bins), 0);
    double width = (hi - lo) / bins;
    for (double v : values) {
        int idx = width > 0.0 ? static_cast<int>((v - lo) / width) : 0;
        idx = std::clamp(idx, 0, bins - 1);
        h.counts[static_cast<size_t>(idx)]++;
    }
    return h;
}

static std::pair<double, double> value_range(MetricKind metric, const std::vector<double>& values) {
    if (auto range = metric_range(metric)) return *range;
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    if (hi <= lo) hi = lo + 1.0;
    return {lo, hi};
}

// Gaussian KDE with Silverman bandwidth. A degenerate sample (all values
// equal) is emitted as a single point-mass row instead of a curve.
static void write_kde_rows(std::ofstream& out, const std::string& label, MetricKind metric,
                           const std::vector<double>& values) {
    const size_t n = values.size();
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    double sd = std::sqrt(var / static_cast<double>(n));

    if (sd == 0.0) {
        out << label << ',' << fmt(values.front()) << ",1,1\n";
        return;
    }
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    double q1 = sorted[static_cast<size_t>(0.25 * (n - 1))];
    double q3 = sorted[static_cast<size_t>(0.75 * (n - 1))];
    double iqr = q3 - q1;
    double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    double bw = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);

    auto [lo, hi] = value_range(metric, values);
    const int points = 101;
    for (int i = 0; i < points; ++i) {
        double x = lo + (hi - lo) * i / (points - 1);
        double density = 0.0;
        for (double v : values) {
            double u = (x - v) / bw;
            density += std::exp(-0.5 * u * u);
        }
        density /= static_cast<double>(n) * bw * std::sqrt(2.0 * 3.141592653589793);
        out << label << ',' << fmt(x) << ',' << fmt(density) << ",0\n";
    }
}

static void write_histogram_csv(const std::filesystem::path& path, MetricKind metric,
                                const std::vector<std::pair<std::string, std::vector<double>>>& series) {
    auto out = open_out(path);
    out << "series,bin_lo,bin_hi,count\n";
    for (const auto& [label, values] : series) {
        auto [lo, hi] = value_range(metric, values);
        Histogram h = make_histogram(values, lo, hi, 20);
        double width = (hi - lo) / 20.0;
        for (size_t i = 0; i < h.counts.size(); ++i)
            out << label << ',' << fmt(lo + width * static_cast<double>(i)) << ','
                << fmt(lo + width * static_cast<double>(i + 1)) << ',' << h.counts[i] << '\n';
    }
}

void write_heatmap_csv(const DistanceMatrix& m, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "T";
    for (double t : m.col_temperatures) out << ',' << fmt(t);
    out << '\n';
    for (size_t i = 0; i < m.values.size(); ++i) {
        out << fmt(m.row_temperatures[i]);
        for (double v : m.values[i]) out << ',' << fmt(v);
        out << '\n';
    }
}

static json estimate_to_json(const EquivalentTemperatureEstimate& est) {
    json j;
    j["reference_id"] = est.reference_id;
    j["metric"] = metric_name(est.metric);
    j["t_hat"] = est.t_hat;
    j["minimizing_set"] = est.minimizing_set;
    if (est.t_hat_interpolated) j["t_hat_interpolated"] = *est.t_hat_interpolated;
    json curve = json::array();
    for (size_t i = 0; i < est.grid.size(); ++i)
        curve.push_back({{"temperature", est.grid[i]}, {"distance", est.distances[i]}});
    j["curve"] = std::move(curve);
    return j;
}

ReportBundle estimate_campaign(const CampaignConfig& cfg, const RunStore& store, const std::filesystem::path& out_dir,
                               bool quiet) {
    cfg.validate();
    PromptSet prompts = campaign_prompts(cfg);
    const std::string sut_id = cfg.sut.id();

    // verify every required slice is populated before computing anything
    std::vector<std::string> missing;
    if (store.query(sut_id, 0.0).empty()) missing.push_back("run-sut: " + sut_id + " @ T=0.0000");
    for (const auto& ref : cfg.references)
        for (double t : cfg.grid.temperatures)
            if (store.query(ref.id(), t).empty())
                missing.push_back("run-reference: " + ref.id() + " @ T=" + temperature_key(t));
    if (!missing.empty()) {
        std::string msg = "estimate: store is missing required slices; run these first:";
        for (const auto& m : missing) msg += "\n  " + m;
        throw std::runtime_error(msg);
    }

    DistributionOptions opts;
    opts.normalize_trailing_whitespace = cfg.normalize_trailing_whitespace;

    std::vector<std::pair<MetricKind, VariabilityDistribution>> observed;
    for (const auto& [kind, weight] : cfg.metrics)
        observed.emplace_back(kind, build_distribution(kind, prompts, store, sut_id, 0.0, opts));

    std::filesystem::create_directories(out_dir);
    ReportBundle bundle;
    bundle.out_dir = out_dir;

    const MetricKind lead_metric = cfg.metrics.front().first;
    const VariabilityDistribution& g_lead = observed.front().second;

    bool degenerate = lead_metric == MetricKind::exact_match_fraction &&
                      std::all_of(g_lead.values.begin(), g_lead.values.end(), [](double v) { return v == 1.0; });
    if (degenerate)
        bundle.notes.push_back("degenerate: Dirac at 1 (every repeated SUT response identical); T_bg trivially 0");

    std::vector<EquivalentTemperatureEstimate> cells;
    std::map<std::string, std::map<double, VariabilityDistribution>> lead_curves_by_ref;
    for (const auto& ref : cfg.references) {
        std::vector<MetricChannel> channels;
        for (const auto& [kind, weight] : cfg.metrics) {
            MetricChannel ch;
            ch.reference_curves = reference_curves(cfg, store, ref, kind, prompts);
            for (const auto& [mk, g] : observed)
                if (mk == kind) ch.observed = g;
            ch.weight = weight;
            if (kind == lead_metric) lead_curves_by_ref[ref.id()] = ch.reference_curves;
            channels.push_back(std::move(ch));
        }
        cells.push_back(fit_equivalent_temperature_multi(channels, cfg.distance, ref.id()));
    }
    bundle.report = aggregate_background(cells);

    // ---- plot-data files ----
    write_distribution_csv(g_lead, out_dir / "sut_distribution.csv");
    write_histogram_csv(out_dir / "sut_histogram.csv", lead_metric, {{sut_id, g_lead.values}});
    {
        auto out = open_out(out_dir / "sut_kde.csv");
        out << "series,x,density,point_mass\n";
        write_kde_rows(out, sut_id, lead_metric, g_lead.values);
    }
    for (const auto& ref : cfg.references) {
        const auto& curves = lead_curves_by_ref.at(ref.id());
        std::string stem = sanitize_name(ref.id());
        {
            auto out = open_out(out_dir / ("reference_distributions_" + stem + ".csv"));
            out << "temperature,prompt_id,value\n";
            for (const auto& [t, dist] : curves)
                for (size_t i = 0; i < dist.values.size(); ++i)
                    out << fmt(t) << ',' << dist.prompt_ids[i] << ',' << fmt(dist.values[i]) << '\n';
        }
        {
            auto out = open_out(out_dir / ("reference_kde_" + stem + ".csv"));
            out << "temperature,x,density,point_mass\n";
            for (const auto& [t, dist] : curves) write_kde_rows(out, fmt(t), lead_metric, dist.values);
        }
    }
    for (const auto& est : cells) {
        std::string stem = sanitize_name(est.reference_id);
        {
            auto out = open_out(out_dir / ("distance_curve_" + stem + ".csv"));
            out << "temperature,distance\n";
            for (size_t i = 0; i < est.grid.size(); ++i) out << fmt(est.grid[i]) << ',' << fmt(est.distances[i]) << '\n';
        }
        // side-by-side histogram of g against the best-matching reference curve
        double best_t = est.grid.front();
        for (size_t i = 0; i < est.grid.size(); ++i)
            if (std::abs(est.grid[i] - est.t_hat) < std::abs(best_t - est.t_hat)) best_t = est.grid[i];
        const auto& f_best = lead_curves_by_ref.at(est.reference_id).at(best_t);
        write_histogram_csv(out_dir / ("matched_histogram_" + stem + ".csv"), lead_metric,
                            {{sut_id, g_lead.values}, {est.reference_id + "@T=" + temperature_key(best_t), f_best.values}});
    }
    if (cfg.references.size() >= 2) {
        for (size_t a = 0; a + 1 < cfg.references.size(); ++a) {
            size_t b = a + 1;
            DistanceMatrix m = cross_reference_heatmap(lead_curves_by_ref.at(cfg.references[a].id()),
                                                       lead_curves_by_ref.at(cfg.references[b].id()), cfg.distance);
            write_heatmap_csv(m, out_dir / ("heatmap_" + sanitize_name(cfg.references[a].id()) + "_vs_" +
                                            sanitize_name(cfg.references[b].id()) + ".csv"));
        }
    }

    // ---- report.json ----
    json rj;
    rj["sut"] = sut_id;
    rj["per_reference"] = bundle.report.per_reference;
    rj["overall_t_bg"] = bundle.report.overall;
    rj["uncertainty"] = {{"min", bundle.report.t_hat_min},
                         {"max", bundle.report.t_hat_max},
                         {"stddev", bundle.report.t_hat_stddev}};
    json breakdown = json::array();
    for (const auto& est : bundle.report.breakdown) breakdown.push_back(estimate_to_json(est));
    rj["breakdown"] = std::move(breakdown);
    rj["notes"] = bundle.notes;
    rj["config"] = config_to_json(cfg);
    {
        auto out = open_out(out_dir / "report.json");
        out << rj.dump(2) << '\n';
    }

    if (!quiet) {
        std::printf("model");
        for (const auto& [ref, t] : bundle.report.per_reference) std::printf(" | T_bg(%s)", ref.c_str());
        std::printf(" | mean T_bg\n%s", sut_id.c_str());
        for (const auto& [ref, t] : bundle.report.per_reference) std::printf(" | %.4f", t);
        std::printf(" | %.4f\n", bundle.report.overall);
        for (const auto& note : bundle.notes) std::printf("note: %s\n", note.c_str());
    }
    return bundle;
}

DistanceMatrix heatmap_campaign(const CampaignConfig& cfg, const RunStore& store, size_t ref_a, size_t ref_b) {
    if (ref_a >= cfg.references.size() || ref_b >= cfg.references.size())
        throw std::invalid_argument("heatmap_campaign: reference index out of range");
    PromptSet prompts = campaign_prompts(cfg);
    MetricKind metric = cfg.metrics.front().first;
    auto curves_a = reference_curves(cfg, store, cfg.references[ref_a], metric, prompts);
    auto curves_b = reference_curves(cfg, store, cfg.references[ref_b], metric, prompts);
    return cross_reference_heatmap(curves_a, curves_b, cfg.distance);
}

void export_metrics(const CampaignConfig& cfg, const RunStore& store, const std::filesystem::path& out_dir) {
    cfg.validate();
    PromptSet prompts = campaign_prompts(cfg);
    std::filesystem::create_directories(out_dir);
    DistributionOptions opts;
    opts.normalize_trailing_whitespace = cfg.normalize_trailing_whitespace;

    json summary;
    summary["written"] = json::array();
    summary["skipped"] = json::array();
    auto emit = [&](const std::string& backend_id, double t) {
        for (const auto& [kind, weight] : cfg.metrics) {
            std::string name = "dist_" + sanitize_name(backend_id) + "_T" + temperature_key(t) + "_" +
                               metric_name(kind) + ".csv";
            try {
                VariabilityDistribution dist = build_distribution(kind, prompts, store, backend_id, t, opts);
                write_distribution_csv(dist, out_dir / name);
                summary["written"].push_back(name);
            } catch (const std::exception& e) {
                summary["skipped"].push_back({{"file", name}, {"reason", e.what()}});
            }
        }
    };
    for (const auto& ref : cfg.references)
        for (double t : cfg.grid.temperatures) emit(ref.id(), t);
    emit(cfg.sut.id(), 0.0);
    auto out = open_out(out_dir / "metrics_summary.json");
    out << summary.dump(2) << '\n';
}

}  // namespace tbg
