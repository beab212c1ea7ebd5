#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tbg/metrics.hpp"

namespace tbg {

enum class DistanceKind { kolmogorov_smirnov, jensen_shannon_binned, symmetrized_kl_binned };

std::string distance_name(DistanceKind kind);
DistanceKind distance_from_name(const std::string& name);

struct DistanceSpec {
    DistanceKind kind = DistanceKind::kolmogorov_smirnov;
    int bins = 20;  // binned kinds only

    void validate() const;
};

// Two-sample Kolmogorov-Smirnov statistic, computed exactly by merging the
// sorted samples. In [0, 1].
double ks_statistic(std::vector<double> a, std::vector<double> b);

// Metric-kind checked variant.
double ks_distance(const VariabilityDistribution& f, const VariabilityDistribution& g);

// Distance between two samples per the spec: KS exactly, or JS/symmetrized
// KL over histograms (bins uniform over the metric range, falling back to
// the joint sample range for unbounded metrics).
double sample_distance(const VariabilityDistribution& f, const VariabilityDistribution& g, const DistanceSpec& d);

struct EquivalentTemperatureEstimate {
    std::string reference_id;
    MetricKind metric = MetricKind::exact_match_fraction;
    std::vector<double> grid;       // temperatures, ascending
    std::vector<double> distances;  // parallel to grid
    double t_hat = 0.0;             // mean of minimizing_set
    std::vector<double> minimizing_set;
    // off-grid refinement via a parabola through the minimum and its
    // neighbors; reported separately, never used for t_hat
    std::optional<double> t_hat_interpolated;
};

// Argmin over the discrete grid with minimum ties averaged.
void select_t_hat(EquivalentTemperatureEstimate& est);

EquivalentTemperatureEstimate fit_equivalent_temperature(
    const std::map<double, VariabilityDistribution>& reference_curves, const VariabilityDistribution& g,
    const DistanceSpec& d, const std::string& reference_id);

// Weighted multi-metric fit: distance at each T is the weight-normalized sum
// of per-channel distances.
struct MetricChannel {
    std::map<double, VariabilityDistribution> reference_curves;
    VariabilityDistribution observed;
    double weight = 1.0;
};

EquivalentTemperatureEstimate fit_equivalent_temperature_multi(const std::vector<MetricChannel>& channels,
                                                               const DistanceSpec& d,
                                                               const std::string& reference_id);

struct BackgroundTemperatureReport {
    std::map<std::string, double> per_reference;  // reference id -> mean t_hat
    double overall = 0.0;                         // mean over references
    std::vector<EquivalentTemperatureEstimate> breakdown;
    double t_hat_min = 0.0;
    double t_hat_max = 0.0;
    double t_hat_stddev = 0.0;  // population std over all breakdown cells
};

BackgroundTemperatureReport aggregate_background(const std::vector<EquivalentTemperatureEstimate>& per_cell);

// |A| x |B| distance matrix between two reference curve families.
struct DistanceMatrix {
    std::vector<double> row_temperatures;
    std::vector<double> col_temperatures;
    std::vector<std::vector<double>> values;
};

DistanceMatrix cross_reference_heatmap(const std::map<double, VariabilityDistribution>& curves_a,
                                       const std::map<double, VariabilityDistribution>& curves_b,
                                       const DistanceSpec& d);

}  // namespace tbg
