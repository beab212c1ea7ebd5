#include "tbg/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tbg {

std::string distance_name(DistanceKind kind) {
    switch (kind) {
        case DistanceKind::kolmogorov_smirnov: return "kolmogorov_smirnov";
        case DistanceKind::jensen_shannon_binned: return "jensen_shannon_binned";
        case DistanceKind::symmetrized_kl_binned: return "symmetrized_kl_binned";
    }
    throw std::logic_error("distance_name: unknown kind");
}

DistanceKind distance_from_name(const std::string& name) {
    if (name == "kolmogorov_smirnov" || name == "ks") return DistanceKind::kolmogorov_smirnov;
    if (name == "jensen_shannon_binned" || name == "js") return DistanceKind::jensen_shannon_binned;
    if (name == "symmetrized_kl_binned" || name == "kl") return DistanceKind::symmetrized_kl_binned;
    throw std::invalid_argument("unknown distance kind: " + name);
}

void DistanceSpec::validate() const {
    if (kind != DistanceKind::kolmogorov_smirnov && bins < 2)
        throw std::invalid_argument("DistanceSpec: binned distances require bins >= 2");
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double ks_distance(const VariabilityDistribution& f, const VariabilityDistribution& g) {
    if (f.metric != g.metric)
        throw std::invalid_argument("ks_distance: metric kind mismatch (" + metric_name(f.metric) + " vs " +
                                    metric_name(g.metric) + ")");
    return ks_statistic(f.values, g.values);
}

static std::vector<double> histogram(const std::vector<double>& values, double lo, double hi, int bins) {
    std::vector<double> h(static_cast<size_t>(bins), 0.0);
    double width = (hi - lo) / bins;
    for (double v : values) {
        int idx = width > 0.0 ? static_cast<int>((v - lo) / width) : 0;
        idx = std::clamp(idx, 0, bins - 1);
        h[static_cast<size_t>(idx)] += 1.0;
    }
    for (double& x : h) x /= static_cast<double>(values.size());
    return h;
}

double sample_distance(const VariabilityDistribution& f, const VariabilityDistribution& g, const DistanceSpec& d) {
    d.validate();
    if (f.metric != g.metric) throw std::invalid_argument("sample_distance: metric kind mismatch");
    if (d.kind == DistanceKind::kolmogorov_smirnov) return ks_statistic(f.values, g.values);

    double lo, hi;
    if (auto range = metric_range(f.metric)) {
        lo = range->first;
        hi = range->second;
    } else {
        lo = std::min(*std::min_element(f.values.begin(), f.values.end()),
                      *std::min_element(g.values.begin(), g.values.end()));
        hi = std::max(*std::max_element(f.values.begin(), f.values.end()),
                      *std::max_element(g.values.begin(), g.values.end()));
        if (hi <= lo) hi = lo + 1.0;
    }
    auto hf = histogram(f.values, lo, hi, d.bins);
    auto hg = histogram(g.values, lo, hi, d.bins);
    if (d.kind == DistanceKind::jensen_shannon_binned) return js_divergence(hf, hg);

    // symmetrized KL with epsilon smoothing so empty bins stay finite
    const double eps = 1e-9;
    double zf = 0.0, zg = 0.0;
    for (int i = 0; i < d.bins; ++i) {
        hf[static_cast<size_t>(i)] += eps;
        hg[static_cast<size_t>(i)] += eps;
        zf += hf[static_cast<size_t>(i)];
        zg += hg[static_cast<size_t>(i)];
    }
    double kl = 0.0;
    for (int i = 0; i < d.bins; ++i) {
        double p = hf[static_cast<size_t>(i)] / zf;
        double q = hg[static_cast<size_t>(i)] / zg;
        kl += 0.5 * p * std::log(p / q) + 0.5 * q * std::log(q / p);
    }
    return kl;
}

void select_t_hat(EquivalentTemperatureEstimate& est) {
    if (est.grid.empty() || est.grid.size() != est.distances.size())
        throw std::invalid_argument("select_t_hat: grid/distances mismatch");
    double dmin = *std::min_element(est.distances.begin(), est.distances.end());
    est.minimizing_set.clear();
    for (size_t i = 0; i < est.grid.size(); ++i) {
        if (est.distances[i] == dmin) est.minimizing_set.push_back(est.grid[i]);
    }
    double sum = 0.0;
    for (double t : est.minimizing_set) sum += t;
    est.t_hat = sum / static_cast<double>(est.minimizing_set.size());

    // quadratic refinement around a unique interior minimum
    est.t_hat_interpolated.reset();
    if (est.minimizing_set.size() == 1) {
        auto it = std::find(est.distances.begin(), est.distances.end(), dmin);
        size_t k = static_cast<size_t>(it - est.distances.begin());
        if (k > 0 && k + 1 < est.grid.size()) {
            double x0 = est.grid[k - 1], x1 = est.grid[k], x2 = est.grid[k + 1];
            double y0 = est.distances[k - 1], y1 = est.distances[k], y2 = est.distances[k + 1];
            double denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
            if (denom != 0.0) {
                double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
                double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
                if (a > 0.0) {
                    double tx = -b / (2.0 * a);
                    if (tx >= x0 && tx <= x2) est.t_hat_interpolated = tx;
                }
            }
        }
    }
}

EquivalentTemperatureEstimate fit_equivalent_temperature(
    const std::map<double, VariabilityDistribution>& reference_curves, const VariabilityDistribution& g,
    const DistanceSpec& d, const std::string& reference_id) {
    MetricChannel channel;
    channel.reference_curves = reference_curves;
    channel.observed = g;
    channel.weight = 1.0;
    return fit_equivalent_temperature_multi({channel}, d, reference_id);
}

EquivalentTemperatureEstimate fit_equivalent_temperature_multi(const std::vector<MetricChannel>& channels,
                                                               const DistanceSpec& d,
                                                               const std::string& reference_id) {
    if (channels.empty()) throw std::invalid_argument("fit: no metric channels");
    double weight_total = 0.0;
    for (const auto& ch : channels) {
        if (ch.reference_curves.empty()) throw std::invalid_argument("fit: empty reference curves");
        if (ch.weight < 0.0) throw std::invalid_argument("fit: negative weight");
        for (const auto& [t, f] : ch.reference_curves)
            if (f.metric != ch.observed.metric) throw std::invalid_argument("fit: metric kind mismatch");
        weight_total += ch.weight;
    }
    if (weight_total <= 0.0) throw std::invalid_argument("fit: all weights zero");

    // all channels must share the same temperature grid
    EquivalentTemperatureEstimate est;
    est.reference_id = reference_id;
    est.metric = channels.front().observed.metric;
    for (const auto& [t, f] : channels.front().reference_curves) est.grid.push_back(t);
    for (const auto& ch : channels) {
        if (ch.reference_curves.size() != est.grid.size())
            throw std::invalid_argument("fit: channels disagree on temperature grid");
    }

    for (double t : est.grid) {
        double dist = 0.0;
        for (const auto& ch : channels) dist += ch.weight * sample_distance(ch.reference_curves.at(t), ch.observed, d);
        est.distances.push_back(dist / weight_total);
    }
    select_t_hat(est);
    return est;
}

BackgroundTemperatureReport aggregate_background(const std::vector<EquivalentTemperatureEstimate>& per_cell) {
    if (per_cell.empty()) throw std::invalid_argument("aggregate_background: empty breakdown");
    BackgroundTemperatureReport report;
    report.breakdown = per_cell;

    std::map<std::string, std::pair<double, size_t>> sums;
    for (const auto& est : per_cell) {
        auto& [sum, count] = sums[est.reference_id];
        sum += est.t_hat;
        ++count;
    }
    double overall = 0.0;
    for (const auto& [ref, sc] : sums) {
        double mean = sc.first / static_cast<double>(sc.second);
        report.per_reference[ref] = mean;
        overall += mean;
    }
    report.overall = overall / static_cast<double>(report.per_reference.size());

    report.t_hat_min = per_cell.front().t_hat;
    report.t_hat_max = per_cell.front().t_hat;
    double mean_all = 0.0;
    for (const auto& est : per_cell) {
        report.t_hat_min = std::min(report.t_hat_min, est.t_hat);
        report.t_hat_max = std::max(report.t_hat_max, est.t_hat);
        mean_all += est.t_hat;
    }
    mean_all /= static_cast<double>(per_cell.size());
    double var = 0.0;
    for (const auto& est : per_cell) var += (est.t_hat - mean_all) * (est.t_hat - mean_all);
    report.t_hat_stddev = std::sqrt(var / static_cast<double>(per_cell.size()));
    return report;
}

DistanceMatrix cross_reference_heatmap(const std::map<double, VariabilityDistribution>& curves_a,
                                       const std::map<double, VariabilityDistribution>& curves_b,
                                       const DistanceSpec& d) {
    if (curves_a.empty() || curves_b.empty()) throw std::invalid_argument("cross_reference_heatmap: empty curves");
    DistanceMatrix m;
    for (const auto& [t, f] : curves_a) m.row_temperatures.push_back(t);
    for (const auto& [t, f] : curves_b) m.col_temperatures.push_back(t);
    for (const auto& [ta, fa] : curves_a) {
        std::vector<double> row;
        for (const auto& [tb, fb] : curves_b) row.push_back(sample_distance(fa, fb, d));
        m.values.push_back(std::move(row));
    }
    return m;
}

}  // namespace tbg
